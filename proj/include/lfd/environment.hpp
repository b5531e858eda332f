#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include "lfd/scenario.hpp"
#include "lfd/trace.hpp"

namespace lfd {

/// Rectangle in top-face coordinates (origin at the face center).
struct FaceRect {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

struct SimObject {
  int object_id = -1;
  std::string cls;
  Vec3 centroid{Vec3::Zero()};
  Vec3 extent{Vec3::Zero()};
  double stiffness = 0.0;       // N/m
  double peel_threshold = 0.0;  // N; ground truth hidden from the learner
  std::vector<std::string> state_labels;
  std::vector<FaceRect> peeled;

  Box box() const { return Box::from_center_extent(centroid, extent); }
  double top_z() const { return centroid.z() + extent.z() / 2.0; }

  /// Fraction of the top face covered by the peeled-rectangle union.
  /// Monotone within an episode: re-evaluating a grown union never reports
  /// less than before.
  double peel_fraction() const;

 private:
  mutable double peak_area_ = 0.0;
};

struct ContactRecord {
  int object_id = -1;  // -1: free space
  double penetration = 0.0;
  double normal_force = 0.0;
};

/// Linear-spring contact world: normal force is stiffness times penetration
/// depth, with optional bounded sensor noise. Single-owner mutable; copy an
/// instance per episode for parallel evaluation.
class Environment {
 public:
  Environment() = default;
  static Environment from_scenario(const ScenarioSpec& scenario, const ObjectDatabase& db);

  /// Normal reaction force at the end-effector point. Uniform zero-mean
  /// noise of amplitude `noise_amplitude` applies only while in contact.
  double contact_force(const Vec3& ee_pose);

  const ContactRecord& last_contact() const { return last_contact_; }

  /// Sweeps a blade strip along `path` (points on the object's top face).
  /// The strip peels only if every force sample meets the object's peel
  /// threshold; below-threshold passes add nothing. Repeated passes over
  /// the same area do not double-count.
  void apply_peel(int object_id, std::span<const Vec3> path, std::span<const double> forces,
                  double blade_width = 0.02);

  /// Vision-equivalent state readout: "peeled" once at least the detection
  /// fraction of the surface is peeled.
  ObjectState detect_state(int object_id) const;

  const SimObject& object(int object_id) const;
  SimObject& object(int object_id);
  const std::vector<SimObject>& objects() const { return objects_; }

  bool noise_enabled() const { return noise_enabled_; }
  void set_noise(bool enabled) { noise_enabled_ = enabled; }
  void set_peel_state_fraction(double f) { peel_state_fraction_ = f; }

  static constexpr double kNoiseAmplitude = 0.2;  // N

 private:
  std::vector<SimObject> objects_;
  bool noise_enabled_ = false;
  double peel_state_fraction_ = kPeelStateFraction;
  std::mt19937_64 rng_{0};
  ContactRecord last_contact_;
};

/// Area of the union of a set of axis-aligned rectangles.
double rect_union_area(const std::vector<FaceRect>& rects);

}  // namespace lfd
