#include "lfd/scenario.hpp"

#include <algorithm>
#include <cmath>

#include "lfd/pik.hpp"

namespace lfd {

namespace {

using demo_geom::kFps;
using demo_geom::kHandOffset;
using demo_geom::kWristOffset;

constexpr double kMaxNoise = 0.002;
constexpr double kBladeWidth = 0.02;
constexpr double kDescendGap = 0.03;   // free phases end this far above the surface
constexpr int kMinPhaseFrames = 12;

Box object_box(const ScenarioObject& obj, const ObjectDatabase& db) {
  return Box::from_center_extent(obj.centroid, db.at(obj.cls).extent);
}

struct ScriptPoint {
  Vec3 tip;
  int phase = 0;
};

std::vector<ScriptPoint> script_tip_path(const ScenarioSpec& spec) {
  std::vector<ScriptPoint> pts;
  for (size_t pi = 0; pi < spec.phases.size(); ++pi) {
    const HandPhase& ph = spec.phases[pi];
    for (int f = 0; f < ph.frames; ++f) {
      double u = ph.frames > 1 ? static_cast<double>(f) / (ph.frames - 1) : 0.0;
      pts.push_back({ph.tip_from + u * (ph.tip_to - ph.tip_from), static_cast<int>(pi)});
    }
  }
  return pts;
}

// Margin checks guaranteeing the declared contact intervals survive the
// recording noise: declared contacts sit exactly on the surface, everything
// else keeps a clearance of d_c plus the worst-case relative noise.
void validate_margins(const ScenarioSpec& spec, const std::vector<ScriptPoint>& path,
                      const ObjectDatabase& db) {
  const ContactParams params;
  const double rel_noise = 2.0 * std::sqrt(3.0) * spec.noise_amplitude;
  const double need_free = params.contact_distance + rel_noise + 0.003;

  for (size_t f = 0; f < path.size(); ++f) {
    const HandPhase& ph = spec.phases[path[f].phase];
    const Vec3& tip = path[f].tip;
    const Vec3 hand = tip + kHandOffset;
    const Vec3 wrist = tip + kWristOffset;
    const bool in_contact = ph.kind == PhaseKind::Contact;

    Box tool_box;
    if (spec.attached_object >= 0) {
      const Vec3 ext = db.at(spec.objects[spec.attached_object].cls).extent;
      tool_box = Box::from_center_extent(tip + Vec3(0, 0, ext.z() / 2.0), ext);
    }

    for (const auto& obj : spec.objects) {
      if (obj.id == spec.attached_object) continue;
      const Box box = object_box(obj, db);
      const bool is_target = in_contact && obj.id == ph.contact_object;
      if (is_target) {
        if (point_box_distance(tip, box) > 1e-9)
          throw Error("scenario '" + spec.name + "': contact phase tip leaves the surface of object " +
                      std::to_string(obj.id) + " at frame " + std::to_string(f));
        continue;
      }
      const double hand_clear = segment_box_distance(wrist, tip, box);
      const double tool_clear =
          spec.attached_object >= 0 ? box_box_gap(tool_box, box) : hand_clear;
      if (std::min(hand_clear, tool_clear) < need_free)
        throw Error("scenario '" + spec.name + "': clearance to object " + std::to_string(obj.id) +
                    " too small at frame " + std::to_string(f));
    }

    // Bare-hand contacts additionally require the touched object to own the
    // hand's cell with a noise-proof margin.
    if (in_contact && spec.attached_object < 0) {
      const ScenarioObject* target = nullptr;
      for (const auto& o : spec.objects)
        if (o.id == ph.contact_object) target = &o;
      const double d_target = (hand - target->centroid).norm();
      for (const auto& obj : spec.objects) {
        if (obj.id == target->id) continue;
        if ((hand - obj.centroid).norm() - d_target < 2.0 * rel_noise + 0.005)
          throw Error("scenario '" + spec.name + "': cell ownership ambiguous during contact at frame " +
                      std::to_string(f));
      }
    }
  }
}

}  // namespace

double strip_fraction(const ObjectClassInfo& cls, double x0, double x1, double blade_width) {
  const double ex = cls.extent.x(), ey = cls.extent.y();
  const double lo = std::max(-ex / 2.0, std::min(x0, x1) - blade_width / 2.0);
  const double hi = std::min(ex / 2.0, std::max(x0, x1) + blade_width / 2.0);
  const double len = std::max(0.0, hi - lo);
  const double wid = std::min(blade_width, ey);
  return len * wid / (ex * ey);
}

SynthesizedDemo synthesize_trace(const ScenarioSpec& scenario, uint64_t seed, const ObjectDatabase* db) {
  const ObjectDatabase builtin_db = ObjectDatabase::builtin();
  const ObjectDatabase& odb = db ? *db : builtin_db;

  if (scenario.objects.empty()) throw Error("scenario '" + scenario.name + "' has no objects");
  if (scenario.phases.empty()) throw Error("scenario '" + scenario.name + "' has no phases");
  if (scenario.noise_amplitude < 0.0 || scenario.noise_amplitude > kMaxNoise)
    throw Error("scenario '" + scenario.name + "': noise amplitude must be in [0, " +
                fmt_g17(kMaxNoise) + "]");
  for (const auto& ph : scenario.phases) {
    if (ph.frames < 2) throw Error("scenario '" + scenario.name + "': phase too short");
    if (ph.kind == PhaseKind::Contact) {
      bool found = false;
      for (const auto& o : scenario.objects) found |= o.id == ph.contact_object;
      if (!found || ph.contact_object == scenario.attached_object)
        throw Error("scenario '" + scenario.name + "': bad contact target");
    }
  }
  for (size_t i = 0; i < scenario.objects.size(); ++i) {
    for (size_t j = i + 1; j < scenario.objects.size(); ++j) {
      if (static_cast<int>(i) == scenario.attached_object || static_cast<int>(j) == scenario.attached_object)
        continue;
      if (object_box(scenario.objects[i], odb).overlaps(object_box(scenario.objects[j], odb)))
        throw Error("scenario '" + scenario.name + "': objects " + std::to_string(scenario.objects[i].id) +
                    " and " + std::to_string(scenario.objects[j].id) + " overlap");
    }
  }

  const auto path = script_tip_path(scenario);
  validate_margins(scenario, path, odb);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> noise(-scenario.noise_amplitude, scenario.noise_amplitude);
  auto jitter = [&](const Vec3& p) {
    Vec3 n(noise(rng), noise(rng), noise(rng));
    return Vec3(p + n);
  };

  DemonstrationTrace trace;
  for (const auto& obj : scenario.objects) trace.object_classes[obj.id] = obj.cls;

  std::map<int, double> peel_state;  // object id -> fraction at current phase start
  for (const auto& obj : scenario.objects) peel_state[obj.id] = 0.0;

  Vec3 bounds_lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 bounds_hi = -bounds_lo;
  auto grow_bounds = [&](const Vec3& p) {
    bounds_lo = bounds_lo.cwiseMin(p);
    bounds_hi = bounds_hi.cwiseMax(p);
  };

  int phase_of_prev = -1;
  double phase_start_fraction = 0.0;
  int phase_start_frame = 0;
  for (size_t f = 0; f < path.size(); ++f) {
    const int pi = path[f].phase;
    const HandPhase& ph = scenario.phases[pi];
    if (pi != phase_of_prev) {
      phase_of_prev = pi;
      phase_start_frame = static_cast<int>(f);
      if (ph.peel_ramp) {
        phase_start_fraction = peel_state[ph.contact_object];
        if (ph.peel_to < phase_start_fraction)
          throw Error("scenario '" + scenario.name + "': peel fraction must be non-decreasing");
      }
    }

    Frame frame;
    frame.index = static_cast<int>(f);
    frame.time = static_cast<double>(f) / kFps;
    frame.hand = jitter(path[f].tip + kHandOffset);
    frame.wrist = jitter(path[f].tip + kWristOffset);
    frame.hand_tip = jitter(path[f].tip);
    grow_bounds(path[f].tip + kHandOffset);
    grow_bounds(path[f].tip + kWristOffset);
    grow_bounds(path[f].tip);

    if (ph.peel_ramp) {
      double u = ph.frames > 1 ? static_cast<double>(f - phase_start_frame) / (ph.frames - 1) : 1.0;
      peel_state[ph.contact_object] = phase_start_fraction + u * (ph.peel_to - phase_start_fraction);
    }

    for (const auto& obj : scenario.objects) {
      ObjectRecord rec;
      rec.object_id = obj.id;
      const auto& info = odb.at(obj.cls);
      Vec3 center = obj.centroid;
      if (obj.id == scenario.attached_object) center = path[f].tip + Vec3(0, 0, info.extent.z() / 2.0);
      rec.centroid = jitter(center);
      grow_bounds(center - info.extent / 2.0);
      grow_bounds(center + info.extent / 2.0);

      bool peelable = false;
      for (const auto& s : info.state_labels) peelable |= s == "peeled";
      if (peelable) {
        const double frac = peel_state[obj.id];
        rec.state.label = frac >= kPeelStateFraction ? "peeled" : "unpeeled";
        rec.state.attrs["peel_fraction"] = frac;
      } else {
        rec.state.label = info.state_labels.front();
      }
      frame.objects.push_back(std::move(rec));
    }
    trace.frames.push_back(std::move(frame));
  }

  const double pad = 0.3 + 2.0 * scenario.noise_amplitude;
  trace.workspace = Box{bounds_lo, bounds_hi}.padded(pad);

  GroundTruth truth;
  int frame_cursor = 0;
  std::vector<std::pair<int, int>> contact_spans;  // [start, end) in frames
  std::vector<int> contact_targets;
  for (const auto& ph : scenario.phases) {
    if (ph.kind == PhaseKind::Contact) {
      contact_spans.emplace_back(frame_cursor, frame_cursor + ph.frames);
      contact_targets.push_back(ph.contact_object);
    }
    frame_cursor += ph.frames;
  }
  const int total = frame_cursor;
  for (size_t ci = 0; ci < contact_spans.size(); ++ci) {
    auto [s, e] = contact_spans[ci];
    std::vector<std::string> feats;
    if (scenario.attached_object >= 0) {
      feats.push_back("phi:" + std::to_string(scenario.attached_object));
      feats.push_back("phi:" + std::to_string(contact_targets[ci]));
    } else {
      feats.push_back("psi");
    }
    std::sort(feats.begin(), feats.end());
    for (const auto& feat : feats) truth.keypoints.push_back({s, feat, true});
    if (e < total)
      for (const auto& feat : feats) truth.keypoints.push_back({e, feat, false});
  }
  std::stable_sort(truth.keypoints.begin(), truth.keypoints.end(),
                   [](const TruthKeypoint& a, const TruthKeypoint& b) { return a.frame < b.frame; });

  std::vector<int> boundaries;
  for (const auto& k : truth.keypoints)
    if (boundaries.empty() || boundaries.back() != k.frame) boundaries.push_back(k.frame);
  int seg_start = 0;
  size_t next_contact = 0;
  for (size_t bi = 0; bi <= boundaries.size(); ++bi) {
    const int seg_end = bi < boundaries.size() ? boundaries[bi] - 1 : total - 1;
    if (seg_end < seg_start) continue;
    bool in_contact = next_contact < contact_spans.size() && seg_start >= contact_spans[next_contact].first &&
                      seg_start < contact_spans[next_contact].second;
    std::string skill;
    if (in_contact) {
      skill = "MoveWithContact";
      ++next_contact;
    } else {
      skill = next_contact < contact_spans.size() ? "Approach" : (contact_spans.empty() ? "Approach" : "Retract");
    }
    truth.segments.push_back({seg_start, seg_end, skill});
    seg_start = seg_end + 1;
  }

  validate_trace(trace, &odb);
  return {std::move(trace), std::move(truth)};
}

ScenarioSpec peel_scenario(const std::string& cls) {
  const ObjectDatabase db = ObjectDatabase::builtin();
  const auto& info = db.at(cls);
  const double hx = info.extent.x() / 2.0;
  const double top = info.extent.z();
  const Vec3 center(0.35, 0.0, info.extent.z() / 2.0);
  const double x0 = center.x() + 0.1 * hx;
  const double x1 = center.x() + 0.9 * hx;

  ScenarioSpec spec;
  spec.name = "peel_" + cls;
  spec.objects.push_back({0, cls, center});
  spec.noise_amplitude = 0.001;

  HandPhase approach;
  approach.kind = PhaseKind::Free;
  approach.frames = 120;
  approach.tip_from = Vec3(0.10, 0.0, 0.30);
  approach.tip_to = Vec3(x0, 0.0, top + kDescendGap);
  spec.phases.push_back(approach);

  HandPhase drag;
  drag.kind = PhaseKind::Contact;
  drag.frames = 180;
  drag.tip_from = Vec3(x0, 0.0, top);
  drag.tip_to = Vec3(x1, 0.0, top);
  drag.contact_object = 0;
  drag.peel_ramp = true;
  drag.peel_to = strip_fraction(info, x0 - center.x(), x1 - center.x(), kBladeWidth);
  spec.phases.push_back(drag);
  return spec;
}

ScenarioSpec tool_contact_scenario() {
  const ObjectDatabase db = ObjectDatabase::builtin();
  const auto& cuke = db.at("cucumber");
  const double top = cuke.extent.z();

  ScenarioSpec spec;
  spec.name = "tool_contact";
  spec.objects.push_back({0, "cucumber", Vec3(0.35, 0.0, cuke.extent.z() / 2.0)});
  spec.objects.push_back({1, "peeler", Vec3::Zero()});
  spec.attached_object = 1;
  spec.noise_amplitude = 0.001;

  HandPhase in{PhaseKind::Free, 40, Vec3(0.10, 0.10, 0.30), Vec3(0.33, 0.0, top + kDescendGap), -1};
  HandPhase drag{PhaseKind::Contact, 50, Vec3(0.33, 0.0, top), Vec3(0.45, 0.0, top), 0};
  HandPhase out{PhaseKind::Free, 40, Vec3(0.45, 0.0, top + kDescendGap), Vec3(0.15, 0.10, 0.30), -1};
  spec.phases = {in, drag, out};
  return spec;
}

ScenarioSpec no_contact_scenario() {
  ScenarioSpec spec;
  spec.name = "no_contact";
  spec.objects.push_back({0, "cucumber", Vec3(0.35, 0.0, 0.02)});
  spec.noise_amplitude = 0.001;
  HandPhase a{PhaseKind::Free, 40, Vec3(0.05, 0.15, 0.30), Vec3(0.55, -0.10, 0.25), -1};
  HandPhase b{PhaseKind::Free, 50, Vec3(0.55, -0.10, 0.25), Vec3(0.20, 0.10, 0.35), -1};
  spec.phases = {a, b};
  return spec;
}

ScenarioSpec random_scenario(uint64_t seed) {
  std::mt19937_64 rng(seed);
  const ObjectDatabase db = ObjectDatabase::builtin();
  const std::vector<std::string> veg{"cucumber", "potato", "carrot"};
  auto uniform = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
  auto uniform_int = [&](int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng); };

  for (int attempt = 0; attempt < 64; ++attempt) {
    ScenarioSpec spec;
    spec.name = "fuzz_" + std::to_string(seed);

    const bool tool = uniform(0.0, 1.0) < 0.35;
    const int n_static = uniform_int(1, tool ? 4 : 5);
    bool placed_ok = true;
    for (int i = 0; i < n_static && placed_ok; ++i) {
      ScenarioObject obj;
      obj.id = i;
      obj.cls = veg[uniform_int(0, static_cast<int>(veg.size()) - 1)];
      const Vec3 ext = db.at(obj.cls).extent;
      bool found = false;
      for (int tries = 0; tries < 120 && !found; ++tries) {
        obj.centroid = Vec3(uniform(0.05, 0.65), uniform(-0.22, 0.22), ext.z() / 2.0);
        found = true;
        for (const auto& other : spec.objects)
          if (box_box_gap(object_box(obj, db), object_box(other, db)) < 0.08) found = false;
      }
      if (!found) placed_ok = false;
      spec.objects.push_back(obj);
    }
    if (!placed_ok) continue;
    if (tool) {
      spec.attached_object = static_cast<int>(spec.objects.size());
      spec.objects.push_back({spec.attached_object, "peeler", Vec3::Zero()});
    }

    double z_safe = 0.0;
    for (const auto& obj : spec.objects)
      if (obj.id != spec.attached_object) z_safe = std::max(z_safe, db.at(obj.cls).extent.z());
    z_safe += 0.12;

    const int n_contacts = uniform_int(0, 3) == 0 ? 0 : uniform_int(1, 3);
    Vec3 cur(uniform(0.05, 0.6), uniform(-0.2, 0.2), z_safe + uniform(0.0, 0.1));
    int frames_left = 500;
    auto take_frames = [&](int lo, int hi) {
      int f = std::min(uniform_int(lo, hi), frames_left);
      frames_left -= f;
      return f;
    };

    bool script_ok = true;
    for (int c = 0; c < n_contacts && script_ok; ++c) {
      const int target = uniform_int(0, n_static - 1);
      const auto& tinfo = db.at(spec.objects[target].cls);
      const Vec3 tc = spec.objects[target].centroid;
      const double top = tc.z() + tinfo.extent.z() / 2.0;
      const int axis = tinfo.extent.x() >= tinfo.extent.y() ? 0 : 1;
      const double half_span = tinfo.extent[axis] / 2.0 - kBladeWidth / 2.0 - 0.005;
      if (half_span < 0.012) {
        script_ok = false;
        break;
      }
      double a = uniform(-half_span, half_span), b = uniform(-half_span, half_span);
      if (std::abs(b - a) < 0.6 * half_span) b = a < 0 ? a + 0.8 * half_span : a - 0.8 * half_span;
      Vec3 p0 = tc, p1 = tc;
      p0[axis] += a;
      p1[axis] += b;
      p0.z() = p1.z() = top;

      const int free_frames = take_frames(kMinPhaseFrames, 40);
      const int drag_frames = take_frames(kMinPhaseFrames, 60);
      if (free_frames < kMinPhaseFrames || drag_frames < kMinPhaseFrames) {
        script_ok = false;
        break;
      }
      spec.phases.push_back({PhaseKind::Free, free_frames, cur, p0 + Vec3(0, 0, kDescendGap), -1});
      HandPhase drag{PhaseKind::Contact, drag_frames, p0, p1, target};
      bool peelable = false;
      for (const auto& s : tinfo.state_labels) peelable |= s == "peeled";
      if (peelable && uniform(0.0, 1.0) < 0.5) {
        drag.peel_ramp = true;
        drag.peel_to = uniform(0.02, 0.25);
      }
      spec.phases.push_back(drag);

      const bool end_in_contact = c + 1 == n_contacts && uniform(0.0, 1.0) < 0.25;
      if (!end_in_contact) {
        const int out_frames = take_frames(kMinPhaseFrames, 40);
        if (out_frames < kMinPhaseFrames) {
          script_ok = false;
          break;
        }
        cur = Vec3(uniform(0.05, 0.6), uniform(-0.2, 0.2), z_safe + uniform(0.0, 0.1));
        spec.phases.push_back({PhaseKind::Free, out_frames, p1 + Vec3(0, 0, kDescendGap), cur, -1});
      }
    }
    if (!script_ok) continue;
    if (spec.phases.empty()) {
      Vec3 mid(uniform(0.05, 0.6), uniform(-0.2, 0.2), z_safe + uniform(0.0, 0.1));
      spec.phases.push_back({PhaseKind::Free, uniform_int(30, 120), cur, mid, -1});
      spec.phases.push_back(
          {PhaseKind::Free, uniform_int(30, 120), mid,
           Vec3(uniform(0.05, 0.6), uniform(-0.2, 0.2), z_safe + uniform(0.0, 0.1)), -1});
    }
    spec.noise_amplitude = uniform(0.0, 1.0) < 0.3 ? 0.0 : uniform(0.0005, 0.002);

    try {
      synthesize_trace(spec, seed);
      return spec;
    } catch (const Error&) {
      continue;
    }
  }
  throw Error("random_scenario: no valid scenario found for seed " + std::to_string(seed));
}

}  // namespace lfd
