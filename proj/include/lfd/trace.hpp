#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lfd/geometry.hpp"
#include "lfd/util.hpp"

namespace lfd {

/// Peeled-state detection threshold: the "peeled" label applies once this
/// fraction of the surface is peeled.
inline constexpr double kPeelStateFraction = 0.10;

/// Symbolic object state as recorded by the (abstracted) vision stack:
/// a label from the object database plus optional scalar attributes.
struct ObjectState {
  std::string label;
  std::map<std::string, double> attrs;

  bool operator==(const ObjectState& o) const { return label == o.label; }
  bool operator!=(const ObjectState& o) const { return label != o.label; }
};

struct ObjectRecord {
  int object_id = -1;
  Vec3 centroid{Vec3::Zero()};
  ObjectState state;
};

struct Frame {
  int index = 0;
  double time = 0.0;
  Vec3 hand{Vec3::Zero()};
  Vec3 wrist{Vec3::Zero()};
  Vec3 hand_tip{Vec3::Zero()};
  std::vector<ObjectRecord> objects;  // sorted by object_id

  const ObjectRecord* find_object(int id) const {
    for (const auto& o : objects)
      if (o.object_id == id) return &o;
    return nullptr;
  }
};

/// Per-class entry of the pre-learnt object database. `peel_force_threshold`
/// is simulation ground truth: the environment and test oracles read it, the
/// learner never does. `mass` is carried but not consumed downstream.
struct ObjectClassInfo {
  std::string name;
  double stiffness = 0.0;  // N/m
  double mass = 0.0;       // kg
  Vec3 extent{Vec3::Zero()};
  std::vector<std::string> state_labels;
  double peel_force_threshold = 0.0;  // N
};

class ObjectDatabase {
 public:
  static ObjectDatabase builtin();

  void add(ObjectClassInfo info);
  bool has(const std::string& cls) const { return entries_.count(cls) > 0; }
  const ObjectClassInfo& at(const std::string& cls) const;
  const std::map<std::string, ObjectClassInfo>& entries() const { return entries_; }

  /// Classes with both "unpeeled" and "peeled" states; the stiffness
  /// clustering in the learner runs over these.
  std::vector<std::string> peelable_classes() const;

 private:
  std::map<std::string, ObjectClassInfo> entries_;
};

/// A full demonstration: time-series of hand/wrist/tip positions and object
/// records. Immutable after construction; validated on load.
struct DemonstrationTrace {
  std::vector<Frame> frames;
  Box workspace;
  std::map<int, std::string> object_classes;  // id -> db class name

  const std::string& class_of(int object_id) const;
  std::vector<int> object_ids() const;
};

/// Ground-truth sidecar written by the trace generator: declared keypoints
/// and per-segment skill labels, for segmentation tests only.
struct TruthKeypoint {
  int frame = 0;
  std::string feature;  // "psi" or "phi:<object_id>"
  bool make = true;     // true: 0->1, false: 1->0
};

struct TruthSegment {
  int start = 0;
  int end = 0;  // inclusive
  std::string skill;
};

struct GroundTruth {
  std::vector<TruthKeypoint> keypoints;
  std::vector<TruthSegment> segments;
};

/// Loads a trace file, enforcing all trace invariants. Parse failures carry
/// the 1-based line number; invariant violations name the failed invariant.
/// When `db` is given, state labels are checked against the class entries.
DemonstrationTrace load_trace(const std::string& path, const ObjectDatabase* db = nullptr);

/// Writes a trace in the line-delimited text format (17 significant digits,
/// so a load/save cycle is numerically exact).
void save_trace(const DemonstrationTrace& trace, const std::string& path);

void validate_trace(const DemonstrationTrace& trace, const ObjectDatabase* db = nullptr);

GroundTruth load_truth(const std::string& path);
void save_truth(const GroundTruth& truth, const std::string& path);

/// Conventional sidecar path for a trace file.
inline std::string truth_path_for(const std::string& trace_path) { return trace_path + ".truth"; }

}  // namespace lfd
