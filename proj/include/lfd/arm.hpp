#pragma once

#include <optional>
#include <vector>

#include "lfd/geometry.hpp"

namespace lfd {

using JointVector = Eigen::VectorXd;

/// Planar revolute arm (2 or 3 links) embedded in the x-z plane at a fixed
/// y. With 3 links the inverse kinematics fixes the tool orientation, so
/// the closed-form 2-link solution applies to the wrist point.
class ArmModel {
 public:
  struct Config {
    std::vector<double> link_lengths{0.30, 0.30, 0.12};
    Vec2 base{0.0, 0.40};               // (x, z) of the shoulder in the plane
    double plane_y = 0.0;
    double tool_orientation = -M_PI / 2.0;  // tool points down by default
  };

  explicit ArmModel(Config cfg);

  int dof() const { return static_cast<int>(cfg_.link_lengths.size()); }
  const Config& config() const { return cfg_; }

  Vec2 fk_plane(const JointVector& q) const;
  Vec3 fk(const JointVector& q) const;

  /// Planar Jacobian, 2 x dof: rows are d(x,z)/dq.
  Eigen::MatrixXd jacobian_plane(const JointVector& q) const;

  /// World Jacobian, 3 x dof (the out-of-plane row is zero).
  Eigen::MatrixXd jacobian_world(const JointVector& q) const;

  /// Closed-form inverse kinematics, elbow-up branch. Empty when the target
  /// is out of reach.
  std::optional<JointVector> ik(const Vec3& world_target) const;

  Vec3 to_world(const Vec2& plane) const { return Vec3(plane.x(), cfg_.plane_y, plane.y()); }
  Vec2 to_plane(const Vec3& world) const { return Vec2(world.x(), world.z()); }

  /// 2-norm condition number of the planar Jacobian.
  double jacobian_condition(const JointVector& q) const;

 private:
  Config cfg_;
  std::optional<Eigen::Vector2d> ik_two_link(const Vec2& rel, double l1, double l2) const;
};

}  // namespace lfd
