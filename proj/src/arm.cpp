#include "lfd/arm.hpp"

#include <cmath>

#include "lfd/util.hpp"

namespace lfd {

ArmModel::ArmModel(Config cfg) : cfg_(std::move(cfg)) {
  if (cfg_.link_lengths.size() != 2 && cfg_.link_lengths.size() != 3)
    throw Error("arm model supports 2 or 3 links");
  for (double l : cfg_.link_lengths)
    if (l <= 0.0) throw Error("arm link lengths must be positive");
}

Vec2 ArmModel::fk_plane(const JointVector& q) const {
  Vec2 p = cfg_.base;
  double angle = 0.0;
  for (int i = 0; i < dof(); ++i) {
    angle += q[i];
    p += cfg_.link_lengths[i] * Vec2(std::cos(angle), std::sin(angle));
  }
  return p;
}

Vec3 ArmModel::fk(const JointVector& q) const { return to_world(fk_plane(q)); }

Eigen::MatrixXd ArmModel::jacobian_plane(const JointVector& q) const {
  const int n = dof();
  Eigen::MatrixXd j(2, n);
  std::vector<double> cum(n);
  double angle = 0.0;
  for (int i = 0; i < n; ++i) {
    angle += q[i];
    cum[i] = angle;
  }
  for (int i = 0; i < n; ++i) {
    double dx = 0.0, dz = 0.0;
    for (int k = i; k < n; ++k) {
      dx -= cfg_.link_lengths[k] * std::sin(cum[k]);
      dz += cfg_.link_lengths[k] * std::cos(cum[k]);
    }
    j(0, i) = dx;
    j(1, i) = dz;
  }
  return j;
}

Eigen::MatrixXd ArmModel::jacobian_world(const JointVector& q) const {
  const Eigen::MatrixXd jp = jacobian_plane(q);
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(3, dof());
  j.row(0) = jp.row(0);
  j.row(2) = jp.row(1);
  return j;
}

std::optional<Eigen::Vector2d> ArmModel::ik_two_link(const Vec2& rel, double l1, double l2) const {
  const double r2 = rel.squaredNorm();
  const double r = std::sqrt(r2);
  if (r > l1 + l2 || r < std::abs(l1 - l2)) return std::nullopt;
  double c2 = (r2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
  c2 = std::clamp(c2, -1.0, 1.0);
  // Elbow-up branch: the elbow joint sits on the +rotation side of the
  // base-to-target chord, fixed for determinism.
  const double q2 = -std::acos(c2);
  const double q1 = std::atan2(rel.y(), rel.x()) - std::atan2(l2 * std::sin(q2), l1 + l2 * std::cos(q2));
  return Eigen::Vector2d(q1, q2);
}

std::optional<JointVector> ArmModel::ik(const Vec3& world_target) const {
  const Vec2 target = to_plane(world_target) - cfg_.base;
  if (dof() == 2) {
    auto sol = ik_two_link(target, cfg_.link_lengths[0], cfg_.link_lengths[1]);
    if (!sol) return std::nullopt;
    JointVector q(2);
    q << (*sol)(0), (*sol)(1);
    return q;
  }
  const double phi = cfg_.tool_orientation;
  const Vec2 wrist = target - cfg_.link_lengths[2] * Vec2(std::cos(phi), std::sin(phi));
  auto sol = ik_two_link(wrist, cfg_.link_lengths[0], cfg_.link_lengths[1]);
  if (!sol) return std::nullopt;
  JointVector q(3);
  q << (*sol)(0), (*sol)(1), phi - (*sol)(0) - (*sol)(1);
  return q;
}

double ArmModel::jacobian_condition(const JointVector& q) const {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(jacobian_plane(q));
  const auto& sv = svd.singularValues();
  const double smin = sv(sv.size() - 1);
  if (smin <= 0.0) return std::numeric_limits<double>::infinity();
  return sv(0) / smin;
}

}  // namespace lfd
