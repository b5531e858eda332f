#include "lfd/environment.hpp"

#include <algorithm>
#include <cmath>

namespace lfd {

double rect_union_area(const std::vector<FaceRect>& rects) {
  if (rects.empty()) return 0.0;
  std::vector<double> xs;
  for (const auto& r : rects) {
    xs.push_back(r.x0);
    xs.push_back(r.x1);
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

  double area = 0.0;
  for (size_t i = 0; i + 1 < xs.size(); ++i) {
    const double w = xs[i + 1] - xs[i];
    if (w <= 0.0) continue;
    const double mid = (xs[i] + xs[i + 1]) / 2.0;
    std::vector<std::pair<double, double>> spans;
    for (const auto& r : rects)
      if (r.x0 <= mid && mid <= r.x1) spans.emplace_back(r.y0, r.y1);
    std::sort(spans.begin(), spans.end());
    double covered = 0.0, cursor = -std::numeric_limits<double>::infinity();
    for (const auto& [y0, y1] : spans) {
      const double lo = std::max(y0, cursor);
      if (y1 > lo) {
        covered += y1 - lo;
        cursor = y1;
      }
    }
    area += w * covered;
  }
  return area;
}

double SimObject::peel_fraction() const {
  const double face = extent.x() * extent.y();
  if (face <= 0.0) return 0.0;
  peak_area_ = std::max(peak_area_, rect_union_area(peeled));
  return std::min(1.0, peak_area_ / face);
}

Environment Environment::from_scenario(const ScenarioSpec& scenario, const ObjectDatabase& db) {
  Environment env;
  for (const auto& obj : scenario.objects) {
    if (obj.id == scenario.attached_object) continue;  // the tool is the robot's end-effector
    const auto& info = db.at(obj.cls);
    SimObject sim;
    sim.object_id = obj.id;
    sim.cls = obj.cls;
    sim.centroid = obj.centroid;
    sim.extent = info.extent;
    sim.stiffness = info.stiffness;
    sim.peel_threshold = info.peel_force_threshold;
    sim.state_labels = info.state_labels;
    env.objects_.push_back(std::move(sim));
  }
  if (env.objects_.empty()) throw Error("scenario '" + scenario.name + "' has no environment objects");
  std::sort(env.objects_.begin(), env.objects_.end(),
            [](const SimObject& a, const SimObject& b) { return a.object_id < b.object_id; });
  env.noise_enabled_ = scenario.force_noise;
  env.rng_.seed(scenario.env_seed);
  return env;
}

double Environment::contact_force(const Vec3& ee_pose) {
  const SimObject* deepest = nullptr;
  double max_pen = 0.0;
  for (const auto& obj : objects_) {
    const double pen = point_box_penetration(ee_pose, obj.box());
    if (pen > max_pen) {
      max_pen = pen;
      deepest = &obj;
    }
  }
  if (!deepest) {
    last_contact_ = {};
    return 0.0;
  }
  double force = deepest->stiffness * max_pen;
  if (noise_enabled_) {
    std::uniform_real_distribution<double> noise(-kNoiseAmplitude, kNoiseAmplitude);
    force = std::max(0.0, force + noise(rng_));
  }
  last_contact_ = {deepest->object_id, max_pen, force};
  return force;
}

void Environment::apply_peel(int object_id, std::span<const Vec3> path, std::span<const double> forces,
                             double blade_width) {
  SimObject& obj = object(object_id);
  if (path.empty() || forces.size() != path.size()) return;
  for (double f : forces)
    if (f < obj.peel_threshold) return;  // the whole pass fails below threshold

  const double half = blade_width / 2.0;
  const double fx = obj.extent.x() / 2.0, fy = obj.extent.y() / 2.0;
  auto face_clip = [&](FaceRect r) {
    r.x0 = std::max(r.x0, -fx);
    r.y0 = std::max(r.y0, -fy);
    r.x1 = std::min(r.x1, fx);
    r.y1 = std::min(r.y1, fy);
    return r;
  };
  auto add_rect = [&](const Vec3& a, const Vec3& b) {
    FaceRect r;
    r.x0 = std::min(a.x(), b.x()) - obj.centroid.x() - half;
    r.x1 = std::max(a.x(), b.x()) - obj.centroid.x() + half;
    r.y0 = std::min(a.y(), b.y()) - obj.centroid.y() - half;
    r.y1 = std::max(a.y(), b.y()) - obj.centroid.y() + half;
    r = face_clip(r);
    if (r.x1 > r.x0 && r.y1 > r.y0) obj.peeled.push_back(r);
  };
  if (path.size() == 1) {
    add_rect(path[0], path[0]);
  } else {
    for (size_t i = 0; i + 1 < path.size(); ++i) add_rect(path[i], path[i + 1]);
  }
}

ObjectState Environment::detect_state(int object_id) const {
  const SimObject& obj = object(object_id);
  ObjectState st;
  bool peelable = false;
  for (const auto& s : obj.state_labels) peelable |= s == "peeled";
  if (!peelable) {
    st.label = obj.state_labels.empty() ? "unknown" : obj.state_labels.front();
    return st;
  }
  const double frac = obj.peel_fraction();
  st.label = frac >= peel_state_fraction_ ? "peeled" : "unpeeled";
  st.attrs["peel_fraction"] = frac;
  return st;
}

const SimObject& Environment::object(int object_id) const {
  for (const auto& o : objects_)
    if (o.object_id == object_id) return o;
  throw Error("environment has no object " + std::to_string(object_id));
}

SimObject& Environment::object(int object_id) {
  for (auto& o : objects_)
    if (o.object_id == object_id) return o;
  throw Error("environment has no object " + std::to_string(object_id));
}

}  // namespace lfd
