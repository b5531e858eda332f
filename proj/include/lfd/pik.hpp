#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "lfd/trace.hpp"

namespace lfd {

/// Thresholds for the contact-feature extraction.
struct ContactParams {
  double contact_distance = 0.01;  // d_c, m
  double roi_radius = 0.25;        // ROI sphere about the hand, m
  int debounce_window = 3;         // a flip must persist this many frames
  int min_segment_frames = 5;      // shorter segments merge into a neighbor
  double min_hand_speed = 0.02;    // m/s, "hand is moving" threshold for uY
};

/// Nearest-centroid partition of the workspace, seeded at object centroids.
/// Equidistant queries resolve to the lower object id.
class VoronoiPartition {
 public:
  VoronoiPartition(std::vector<std::pair<int, Vec3>> seeds, Box workspace);

  /// Object id owning the cell that contains `p`.
  int owner(const Vec3& p) const;

  const std::vector<std::pair<int, Vec3>>& seeds() const { return seeds_; }
  const Box& workspace() const { return workspace_; }

 private:
  std::vector<std::pair<int, Vec3>> seeds_;  // sorted by id
  Box workspace_;
};

/// Per-frame binary contact features.
struct ContactFeatureFrame {
  int frame_index = 0;
  int psi = 0;                // hand-object contact with the hand's cell owner
  int owner_id = -1;
  std::set<int> roi_ids;      // objects inside the hand ROI sphere
  std::map<int, int> phi;     // ROI object -> contact with its nearest non-hand object
};

enum class FlipDirection { Make, Break };

struct Keypoint {
  int frame = 0;
  std::string feature;  // "psi" or "phi:<object_id>"
  FlipDirection direction = FlipDirection::Make;
};

/// A demonstration slice between physical-interaction keypoints.
struct Segment {
  int start_frame = 0;
  int end_frame = 0;  // inclusive
  int psi = 0;
  int phi = 0;
  int uX = 0;  // step of mean d(|X|)/dt
  int uY = 0;  // mean hand speed above min_hand_speed
  int interacting_object_id = -1;
  std::vector<Vec3> relative_positions;  // X: hand minus interacting object
  std::vector<Vec3> hand_velocities;     // Y

  int frame_count() const { return end_frame - start_frame + 1; }
};

/// Unit-step of the feature sign rule: 1 iff v >= 0 (including v == 0).
inline int u_step(double v) { return v >= 0.0 ? 1 : 0; }

VoronoiPartition partition_workspace(const Frame& frame, const Box& workspace);

/// Hand-object contact: 1 iff the wrist-to-hand-tip segment comes within
/// `contact_distance` of the cell owner's box (centroid + class extent).
int contact_psi(const Frame& frame, const VoronoiPartition& partition, const DemonstrationTrace& trace,
                const ObjectDatabase& db, const ContactParams& params);

/// Object-object contact for each ROI object: 1 iff surface-to-surface
/// distance to its nearest other object is within `contact_distance`.
/// Empty when the scene has a single object (no partner exists).
std::map<int, int> contact_phi(const Frame& frame, const std::set<int>& roi_ids,
                               const DemonstrationTrace& trace, const ObjectDatabase& db,
                               const ContactParams& params);

/// Raw per-frame features for the whole trace.
std::vector<ContactFeatureFrame> compute_contact_features(const DemonstrationTrace& trace,
                                                          const ObjectDatabase& db,
                                                          const ContactParams& params);

/// Applies the persistence debounce to a raw binary sequence: the value at
/// frame 0 establishes the initial state; a change is accepted at frame t
/// only if it holds for `window` consecutive frames.
std::vector<int> debounce(const std::vector<int>& raw, int window);

/// Keypoints of the debounced feature sequences, ordered by frame (feature
/// name breaks ties). Objects outside the ROI contribute phi = 0.
std::vector<Keypoint> detect_keypoints(const DemonstrationTrace& trace, const ObjectDatabase& db,
                                       const ContactParams& params);

/// Slices the trace at the keypoint frames and computes per-segment
/// features. Segments shorter than `min_segment_frames` merge into the
/// preceding segment (the first into the following one). For no-contact
/// segments X is computed against the object interacted with in the next
/// segment; the final no-contact segment uses the last contacted object,
/// and a trace with no contact at all falls back to the hand's cell owner
/// at the segment's last frame.
std::vector<Segment> segment_trace(const DemonstrationTrace& trace, const ObjectDatabase& db,
                                   const std::vector<Keypoint>& keypoints, const ContactParams& params);

}  // namespace lfd
