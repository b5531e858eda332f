#include "lfd/pik.hpp"

#include <algorithm>
#include <cmath>

namespace lfd {

namespace {

Box frame_object_box(const Frame& frame, int object_id, const DemonstrationTrace& trace,
                     const ObjectDatabase& db) {
  const ObjectRecord* rec = frame.find_object(object_id);
  if (!rec) throw Error("object " + std::to_string(object_id) + " missing from frame");
  return Box::from_center_extent(rec->centroid, db.at(trace.class_of(object_id)).extent);
}

}  // namespace

VoronoiPartition::VoronoiPartition(std::vector<std::pair<int, Vec3>> seeds, Box workspace)
    : seeds_(std::move(seeds)), workspace_(workspace) {
  if (seeds_.empty()) throw Error("voronoi partition needs at least one seed");
  std::sort(seeds_.begin(), seeds_.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
}

int VoronoiPartition::owner(const Vec3& p) const {
  int best_id = seeds_.front().first;
  double best_d2 = (p - seeds_.front().second).squaredNorm();
  for (size_t i = 1; i < seeds_.size(); ++i) {
    const double d2 = (p - seeds_[i].second).squaredNorm();
    if (d2 < best_d2) {  // ties keep the lower id
      best_d2 = d2;
      best_id = seeds_[i].first;
    }
  }
  return best_id;
}

VoronoiPartition partition_workspace(const Frame& frame, const Box& workspace) {
  std::vector<std::pair<int, Vec3>> seeds;
  for (const auto& o : frame.objects) seeds.emplace_back(o.object_id, o.centroid);
  return VoronoiPartition(std::move(seeds), workspace);
}

int contact_psi(const Frame& frame, const VoronoiPartition& partition, const DemonstrationTrace& trace,
                const ObjectDatabase& db, const ContactParams& params) {
  const int owner = partition.owner(frame.hand);
  const Box box = frame_object_box(frame, owner, trace, db);
  return segment_box_distance(frame.wrist, frame.hand_tip, box) <= params.contact_distance ? 1 : 0;
}

std::map<int, int> contact_phi(const Frame& frame, const std::set<int>& roi_ids,
                               const DemonstrationTrace& trace, const ObjectDatabase& db,
                               const ContactParams& params) {
  std::map<int, int> phi;
  if (frame.objects.size() < 2) return phi;  // no partner exists
  for (int id : roi_ids) {
    const Box box = frame_object_box(frame, id, trace, db);
    double nearest = std::numeric_limits<double>::infinity();
    for (const auto& other : frame.objects) {
      if (other.object_id == id) continue;
      nearest = std::min(nearest, box_box_gap(box, frame_object_box(frame, other.object_id, trace, db)));
    }
    phi[id] = nearest <= params.contact_distance ? 1 : 0;
  }
  return phi;
}

std::vector<ContactFeatureFrame> compute_contact_features(const DemonstrationTrace& trace,
                                                          const ObjectDatabase& db,
                                                          const ContactParams& params) {
  std::vector<ContactFeatureFrame> out;
  out.reserve(trace.frames.size());
  for (size_t fi = 0; fi < trace.frames.size(); ++fi) {
    const Frame& frame = trace.frames[fi];
    ContactFeatureFrame cf;
    cf.frame_index = static_cast<int>(fi);
    const VoronoiPartition partition = partition_workspace(frame, trace.workspace);
    cf.owner_id = partition.owner(frame.hand);
    cf.psi = contact_psi(frame, partition, trace, db, params);
    for (const auto& o : frame.objects)
      if ((o.centroid - frame.hand).norm() <= params.roi_radius) cf.roi_ids.insert(o.object_id);
    cf.phi = contact_phi(frame, cf.roi_ids, trace, db, params);
    out.push_back(std::move(cf));
  }
  return out;
}

std::vector<int> debounce(const std::vector<int>& raw, int window) {
  std::vector<int> out(raw.size());
  if (raw.empty()) return out;
  out[0] = raw[0];
  for (size_t t = 1; t < raw.size(); ++t) {
    out[t] = out[t - 1];
    if (raw[t] != out[t - 1] && t + window <= raw.size()) {
      bool persists = true;
      for (int k = 0; k < window; ++k) persists &= raw[t + k] == raw[t];
      if (persists) out[t] = raw[t];
    }
  }
  return out;
}

std::vector<Keypoint> detect_keypoints(const DemonstrationTrace& trace, const ObjectDatabase& db,
                                       const ContactParams& params) {
  const auto features = compute_contact_features(trace, db, params);
  const size_t n = features.size();

  std::map<std::string, std::vector<int>> sequences;
  std::vector<int> psi_seq(n);
  for (size_t t = 0; t < n; ++t) psi_seq[t] = features[t].psi;
  sequences["psi"] = std::move(psi_seq);
  for (int id : trace.object_ids()) {
    std::vector<int> seq(n, 0);  // objects outside the ROI read as no contact
    for (size_t t = 0; t < n; ++t) {
      auto it = features[t].phi.find(id);
      if (it != features[t].phi.end()) seq[t] = it->second;
    }
    sequences["phi:" + std::to_string(id)] = std::move(seq);
  }

  std::vector<Keypoint> keypoints;
  for (const auto& [name, raw] : sequences) {
    const auto clean = debounce(raw, params.debounce_window);
    for (size_t t = 1; t < clean.size(); ++t) {
      if (clean[t] != clean[t - 1]) {
        keypoints.push_back({static_cast<int>(t), name,
                             clean[t] == 1 ? FlipDirection::Make : FlipDirection::Break});
      }
    }
  }
  std::sort(keypoints.begin(), keypoints.end(), [](const Keypoint& a, const Keypoint& b) {
    return a.frame != b.frame ? a.frame < b.frame : a.feature < b.feature;
  });
  return keypoints;
}

std::vector<Segment> segment_trace(const DemonstrationTrace& trace, const ObjectDatabase& db,
                                   const std::vector<Keypoint>& keypoints, const ContactParams& params) {
  const int n = static_cast<int>(trace.frames.size());
  std::vector<int> boundaries;
  for (const auto& k : keypoints)
    if (k.frame > 0 && k.frame < n && (boundaries.empty() || boundaries.back() != k.frame))
      boundaries.push_back(k.frame);

  // Merge degenerate slices: the first into its successor, any other into
  // its predecessor.
  auto seg_len = [&](size_t i) {
    const int start = i == 0 ? 0 : boundaries[i - 1];
    const int end = i < boundaries.size() ? boundaries[i] : n;
    return end - start;
  };
  bool merged = true;
  while (merged && !boundaries.empty()) {
    merged = false;
    for (size_t i = 0; i <= boundaries.size(); ++i) {
      if (seg_len(i) < params.min_segment_frames) {
        boundaries.erase(boundaries.begin() + (i == 0 ? 0 : i - 1));
        merged = true;
        break;
      }
    }
  }

  const auto features = compute_contact_features(trace, db, params);
  std::vector<int> psi_raw(n), owner(n);
  for (int t = 0; t < n; ++t) {
    psi_raw[t] = features[t].psi;
    owner[t] = features[t].owner_id;
  }
  const auto psi_clean = debounce(psi_raw, params.debounce_window);
  std::vector<int> any_phi_raw(n, 0);
  for (int id : trace.object_ids()) {
    std::vector<int> seq(n, 0);
    for (int t = 0; t < n; ++t) {
      auto it = features[t].phi.find(id);
      if (it != features[t].phi.end()) seq[t] = it->second;
    }
    const auto clean = debounce(seq, params.debounce_window);
    for (int t = 0; t < n; ++t) any_phi_raw[t] |= clean[t];
  }

  struct Span {
    int start, end;
  };
  std::vector<Span> spans;
  int start = 0;
  for (int b : boundaries) {
    spans.push_back({start, b - 1});
    start = b;
  }
  spans.push_back({start, n - 1});

  auto majority = [&](const std::vector<int>& seq, const Span& s) {
    int ones = 0;
    for (int t = s.start; t <= s.end; ++t) ones += seq[t];
    return 2 * ones >= s.end - s.start + 1 ? 1 : 0;
  };

  std::vector<Segment> segments(spans.size());
  for (size_t i = 0; i < spans.size(); ++i) {
    Segment& seg = segments[i];
    seg.start_frame = spans[i].start;
    seg.end_frame = spans[i].end;
    seg.psi = majority(psi_clean, spans[i]);
    seg.phi = majority(any_phi_raw, spans[i]);
  }

  // Interacting object: contact segments take the (majority) cell owner;
  // no-contact segments take the next segment's object, the final one the
  // last contacted object, and a contact-free trace falls back to the cell
  // owner at the segment's last frame.
  for (size_t i = 0; i < spans.size(); ++i) {
    if (segments[i].psi == 1) {
      std::map<int, int> counts;
      for (int t = spans[i].start; t <= spans[i].end; ++t)
        if (psi_clean[t] == 1) counts[owner[t]]++;
      int best = -1, best_count = -1;
      for (const auto& [id, c] : counts) {
        if (c > best_count) {
          best = id;
          best_count = c;
        }
      }
      segments[i].interacting_object_id = best;
    }
  }
  int last_contacted = -1;
  for (size_t i = spans.size(); i-- > 0;) {
    if (segments[i].psi == 0) {
      segments[i].interacting_object_id =
          i + 1 < spans.size() ? segments[i + 1].interacting_object_id : -1;
    }
  }
  for (size_t i = 0; i < spans.size(); ++i) {
    if (segments[i].interacting_object_id >= 0) {
      last_contacted = segments[i].interacting_object_id;
    } else {
      segments[i].interacting_object_id =
          last_contacted >= 0 ? last_contacted : owner[spans[i].end];
    }
  }

  for (size_t i = 0; i < spans.size(); ++i) {
    Segment& seg = segments[i];
    const int id = seg.interacting_object_id;
    for (int t = seg.start_frame; t <= seg.end_frame; ++t) {
      const Frame& f = trace.frames[t];
      seg.relative_positions.push_back(f.hand - f.find_object(id)->centroid);
      const int prev = t > 0 ? t - 1 : 0;
      const int next = t > 0 ? t : 1;
      const double dt = trace.frames[next].time - trace.frames[prev].time;
      seg.hand_velocities.push_back((trace.frames[next].hand - trace.frames[prev].hand) / dt);
    }

    double drift_sum = 0.0;
    int drift_terms = 0;
    for (int t = seg.start_frame; t < seg.end_frame; ++t) {
      const double dt = trace.frames[t + 1].time - trace.frames[t].time;
      const size_t k = t - seg.start_frame;
      drift_sum += (seg.relative_positions[k + 1].norm() - seg.relative_positions[k].norm()) / dt;
      ++drift_terms;
    }
    seg.uX = u_step(drift_terms > 0 ? drift_sum / drift_terms : 0.0);

    double speed_sum = 0.0;
    for (const auto& v : seg.hand_velocities) speed_sum += v.norm();
    const double mean_speed = speed_sum / seg.hand_velocities.size();
    seg.uY = mean_speed >= params.min_hand_speed ? 1 : 0;
  }
  return segments;
}

}  // namespace lfd
