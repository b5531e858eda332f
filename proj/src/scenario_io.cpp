#include <fstream>

#include <nlohmann/json.hpp>

#include "lfd/scenario.hpp"

namespace lfd {

namespace {

using nlohmann::json;

json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
Vec3 vec3_of(const json& arr) { return Vec3(arr.at(0), arr.at(1), arr.at(2)); }

}  // namespace

ScenarioSpec load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open scenario file '" + path + "'");
  json doc;
  try {
    doc = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const std::exception& e) {
    throw Error("scenario '" + path + "': " + e.what());
  }

  ScenarioSpec spec;
  spec.name = doc.value("name", std::string("scenario"));
  spec.attached_object = doc.value("attached_object", -1);
  spec.noise_amplitude = doc.value("noise_amplitude", 0.0);
  spec.force_noise = doc.value("force_noise", false);
  spec.env_seed = doc.value("env_seed", uint64_t{0});
  for (const auto& o : doc.value("objects", json::array())) {
    ScenarioObject obj;
    obj.id = o.at("id").get<int>();
    obj.cls = o.at("class").get<std::string>();
    if (o.contains("centroid")) obj.centroid = vec3_of(o.at("centroid"));
    spec.objects.push_back(obj);
  }
  for (const auto& p : doc.value("phases", json::array())) {
    HandPhase ph;
    const std::string kind = p.value("kind", std::string("free"));
    ph.kind = kind == "contact" ? PhaseKind::Contact : PhaseKind::Free;
    ph.frames = p.at("frames").get<int>();
    ph.tip_from = vec3_of(p.at("tip_from"));
    ph.tip_to = vec3_of(p.at("tip_to"));
    ph.contact_object = p.value("contact_object", -1);
    ph.peel_ramp = p.value("peel_ramp", false);
    ph.peel_to = p.value("peel_to", 0.0);
    spec.phases.push_back(ph);
  }
  return spec;
}

void save_scenario(const ScenarioSpec& spec, const std::string& path) {
  json doc;
  doc["name"] = spec.name;
  doc["attached_object"] = spec.attached_object;
  doc["noise_amplitude"] = spec.noise_amplitude;
  doc["force_noise"] = spec.force_noise;
  doc["env_seed"] = spec.env_seed;
  doc["objects"] = json::array();
  for (const auto& o : spec.objects) {
    doc["objects"].push_back(
        {{"id", o.id}, {"class", o.cls}, {"centroid", vec3_json(o.centroid)}});
  }
  doc["phases"] = json::array();
  for (const auto& p : spec.phases) {
    json ph;
    ph["kind"] = p.kind == PhaseKind::Contact ? "contact" : "free";
    ph["frames"] = p.frames;
    ph["tip_from"] = vec3_json(p.tip_from);
    ph["tip_to"] = vec3_json(p.tip_to);
    if (p.contact_object >= 0) ph["contact_object"] = p.contact_object;
    if (p.peel_ramp) {
      ph["peel_ramp"] = true;
      ph["peel_to"] = p.peel_to;
    }
    doc["phases"].push_back(ph);
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write scenario file '" + path + "'");
  out << doc.dump(2) << "\n";
}

ScenarioSpec resolve_scenario(const std::string& name) {
  if (name == "peel_cucumber") return peel_scenario("cucumber");
  if (name == "peel_potato") return peel_scenario("potato");
  if (name == "peel_carrot") return peel_scenario("carrot");
  if (name == "tool_contact") return tool_contact_scenario();
  if (name == "no_contact") return no_contact_scenario();
  if (name.rfind("fuzz:", 0) == 0) return random_scenario(std::stoull(name.substr(5)));
  return load_scenario(name);
}

}  // namespace lfd
