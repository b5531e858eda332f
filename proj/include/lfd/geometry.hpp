#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace lfd {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;

/// Axis-aligned box. Objects are modelled as boxes from centroid + extent;
/// the workspace is a box as well.
struct Box {
  Vec3 lo{Vec3::Zero()};
  Vec3 hi{Vec3::Zero()};

  static Box from_center_extent(const Vec3& center, const Vec3& extent) {
    return Box{center - extent / 2.0, center + extent / 2.0};
  }

  Vec3 center() const { return (lo + hi) / 2.0; }
  Vec3 extent() const { return hi - lo; }

  bool contains(const Vec3& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }

  bool overlaps(const Box& o) const {
    return (lo.array() <= o.hi.array()).all() && (hi.array() >= o.lo.array()).all();
  }

  Box padded(double margin) const {
    return Box{lo - Vec3::Constant(margin), hi + Vec3::Constant(margin)};
  }
};

/// Euclidean distance from a point to a solid box (0 inside).
inline double point_box_distance(const Vec3& p, const Box& b) {
  Vec3 d = (b.lo - p).cwiseMax(p - b.hi).cwiseMax(0.0);
  return d.norm();
}

/// Depth of a point below the nearest face of a box; 0 when outside.
inline double point_box_penetration(const Vec3& p, const Box& b) {
  if (!b.contains(p)) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (int ax = 0; ax < 3; ++ax) {
    best = std::min({best, b.hi[ax] - p[ax], p[ax] - b.lo[ax]});
  }
  return best;
}

/// Minimum distance from segment [a,b] to a solid box. The distance along
/// the segment is convex in the parameter, so a golden-section reduction
/// brackets the minimum to well below any contact threshold in use.
inline double segment_box_distance(const Vec3& a, const Vec3& b, const Box& box) {
  double t0 = 0.0, t1 = 1.0;
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  auto f = [&](double t) { return point_box_distance(a + t * (b - a), box); };
  double x0 = t1 - gr * (t1 - t0), x1 = t0 + gr * (t1 - t0);
  double f0 = f(x0), f1 = f(x1);
  for (int i = 0; i < 120; ++i) {
    if (f0 < f1) {
      t1 = x1;
      x1 = x0;
      f1 = f0;
      x0 = t1 - gr * (t1 - t0);
      f0 = f(x0);
    } else {
      t0 = x0;
      x0 = x1;
      f0 = f1;
      x1 = t0 + gr * (t1 - t0);
      f1 = f(x1);
    }
  }
  return std::min({f(t0), f(t1), f((t0 + t1) / 2.0)});
}

/// Surface-to-surface gap between two axis-aligned boxes (0 when touching
/// or overlapping).
inline double box_box_gap(const Box& a, const Box& b) {
  Vec3 d;
  for (int ax = 0; ax < 3; ++ax) {
    d[ax] = std::max({0.0, b.lo[ax] - a.hi[ax], a.lo[ax] - b.hi[ax]});
  }
  return d.norm();
}

}  // namespace lfd
