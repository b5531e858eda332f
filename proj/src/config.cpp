#include "lfd/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace lfd {

const std::string& canonical_config_text() {
  static const std::string text = R"CFG({
  // Contact-feature extraction.
  "contact": {
    "contact_distance": 0.01,     // m, surface gap that counts as touching
    "roi_radius": 0.25,           // m, region-of-interest sphere around the hand
    "debounce_window": 3,         // frames a contact flip must persist
    "min_segment_frames": 5,      // shorter slices merge into a neighbor
    "min_hand_speed": 0.02        // m/s, "hand is moving" threshold
  },

  // Controller gains: k1/k2 drive the positional update, K1/K2 the
  // impedance law (see docs/controller_gains.md for the stability ranges).
  "gains": { "k1": 0.2, "k2": 0.1, "K1": 5.0, "K2": 0.1 },

  // Simulated planar arm, mounted in the x-z plane.
  "arm": {
    "link_lengths": [0.30, 0.30, 0.12],
    "base": [0.0, 0.40],          // shoulder (x, z)
    "plane_y": 0.0,
    "tool_orientation_deg": -90.0 // tool points down
  },

  "execution": {
    "budget_steps": 2000,         // control steps per skill
    "control_dt": 0.01,           // s, 100 control steps per simulated second
    "desired_contact_force": 0.5, // N, minimum contact force for move-to-contact
    "press_margin": 0.1,          // N held above the minimum while settling
    "settle_band": 0.05,          // N
    "settle_steps": 30,
    "position_tolerance": 0.001,  // m
    "approach_speed": 0.05,       // m/s guarded descent
    "sweep_speed": 0.05,          // m/s along the contact trajectory
    "blade_width": 0.02,          // m, peeler footprint
    "mobility_gain": 0.7,         // admittance contraction per step
    "jacobian_condition_cap": 1e6,
    "home_pose": [0.10, 0.0, 0.30]
  },

  "learning": {
    "goal_reward": 2.0,           // reward on reaching the goal state
    "penalty": 5.0,               // magnitude charged on any other outcome
    "alpha": 0.5,                 // learning rate
    "gamma": 0.3,                 // discount: near-term completion dominates
    "eps_grow": 0.8,              // exploration bias toward adding an action
    "base_force": 0.5,            // N, first contact-trajectory action
    "force_increment": 0.3,       // N added per new action (above sensor noise)
    "force_ceiling": 10.0,        // N, learning halts beyond this
    "max_episodes": 50,
    "seed": 12345
  },

  // Peeled-state detection threshold: fraction of the surface peeled.
  "peel_state_fraction": 0.10
}
)CFG";
  return text;
}

namespace {

using nlohmann::json;

template <typename T>
T get_or(const json& doc, const std::string& key, T fallback) {
  if (doc.contains(key)) return doc.at(key).get<T>();
  return fallback;
}

Vec3 vec3_of(const json& arr) { return Vec3(arr.at(0), arr.at(1), arr.at(2)); }

PipelineConfig from_json(const json& doc) {
  PipelineConfig cfg;
  if (doc.contains("contact")) {
    const auto& c = doc.at("contact");
    cfg.contact.contact_distance = get_or(c, "contact_distance", cfg.contact.contact_distance);
    cfg.contact.roi_radius = get_or(c, "roi_radius", cfg.contact.roi_radius);
    cfg.contact.debounce_window = get_or(c, "debounce_window", cfg.contact.debounce_window);
    cfg.contact.min_segment_frames = get_or(c, "min_segment_frames", cfg.contact.min_segment_frames);
    cfg.contact.min_hand_speed = get_or(c, "min_hand_speed", cfg.contact.min_hand_speed);
  }
  if (doc.contains("gains")) {
    const auto& g = doc.at("gains");
    cfg.gains.k1 = get_or(g, "k1", cfg.gains.k1);
    cfg.gains.k2 = get_or(g, "k2", cfg.gains.k2);
    cfg.gains.K1 = get_or(g, "K1", cfg.gains.K1);
    cfg.gains.K2 = get_or(g, "K2", cfg.gains.K2);
  }
  if (doc.contains("arm")) {
    const auto& a = doc.at("arm");
    if (a.contains("link_lengths")) cfg.arm.link_lengths = a.at("link_lengths").get<std::vector<double>>();
    if (a.contains("base")) cfg.arm.base = Vec2(a.at("base").at(0), a.at("base").at(1));
    cfg.arm.plane_y = get_or(a, "plane_y", cfg.arm.plane_y);
    if (a.contains("tool_orientation_deg"))
      cfg.arm.tool_orientation = a.at("tool_orientation_deg").get<double>() * M_PI / 180.0;
  }
  if (doc.contains("execution")) {
    const auto& e = doc.at("execution");
    cfg.execution.budget_steps = get_or(e, "budget_steps", cfg.execution.budget_steps);
    cfg.execution.control_dt = get_or(e, "control_dt", cfg.execution.control_dt);
    cfg.execution.desired_contact_force =
        get_or(e, "desired_contact_force", cfg.execution.desired_contact_force);
    cfg.execution.press_margin = get_or(e, "press_margin", cfg.execution.press_margin);
    cfg.execution.settle_band = get_or(e, "settle_band", cfg.execution.settle_band);
    cfg.execution.settle_steps = get_or(e, "settle_steps", cfg.execution.settle_steps);
    cfg.execution.position_tolerance = get_or(e, "position_tolerance", cfg.execution.position_tolerance);
    cfg.execution.approach_speed = get_or(e, "approach_speed", cfg.execution.approach_speed);
    cfg.execution.sweep_speed = get_or(e, "sweep_speed", cfg.execution.sweep_speed);
    cfg.execution.blade_width = get_or(e, "blade_width", cfg.execution.blade_width);
    cfg.execution.mobility_gain = get_or(e, "mobility_gain", cfg.execution.mobility_gain);
    cfg.execution.jacobian_condition_cap =
        get_or(e, "jacobian_condition_cap", cfg.execution.jacobian_condition_cap);
    if (e.contains("home_pose")) cfg.execution.home_pose = vec3_of(e.at("home_pose"));
  }
  if (doc.contains("learning")) {
    const auto& l = doc.at("learning");
    cfg.goal_reward = get_or(l, "goal_reward", cfg.goal_reward);
    cfg.penalty = get_or(l, "penalty", cfg.penalty);
    cfg.hp.alpha = get_or(l, "alpha", cfg.hp.alpha);
    cfg.hp.gamma = get_or(l, "gamma", cfg.hp.gamma);
    cfg.hp.eps_grow = get_or(l, "eps_grow", cfg.hp.eps_grow);
    cfg.actions.base_force = get_or(l, "base_force", cfg.actions.base_force);
    cfg.actions.increment = get_or(l, "force_increment", cfg.actions.increment);
    cfg.actions.ceiling = get_or(l, "force_ceiling", cfg.actions.ceiling);
    cfg.max_episodes = get_or(l, "max_episodes", cfg.max_episodes);
    cfg.learn_seed = get_or(l, "seed", cfg.learn_seed);
  }
  cfg.peel_state_fraction = get_or(doc, "peel_state_fraction", cfg.peel_state_fraction);
  cfg.validate();
  return cfg;
}

}  // namespace

PipelineConfig PipelineConfig::defaults() {
  const json doc = json::parse(canonical_config_text(), nullptr, true, /*ignore_comments=*/true);
  return from_json(doc);
}

PipelineConfig PipelineConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file '" + path + "'");
  json doc;
  try {
    doc = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const std::exception& e) {
    throw Error("config '" + path + "': " + e.what());
  }
  return from_json(doc);
}

void PipelineConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write config file '" + path + "'");
  out << canonical_config_text();
}

void PipelineConfig::validate() const {
  gains.validate();
  if (contact.contact_distance <= 0) throw Error("contact_distance must be positive");
  if (contact.roi_radius <= 0) throw Error("roi_radius must be positive");
  if (contact.debounce_window < 1) throw Error("debounce_window must be at least 1");
  if (contact.min_segment_frames < 1) throw Error("min_segment_frames must be at least 1");
  if (!(penalty > goal_reward && goal_reward > 0)) throw Error("rewards require c2 > c1 > 0");
  if (hp.alpha <= 0 || hp.alpha > 1) throw Error("alpha must be in (0, 1]");
  if (hp.gamma < 0 || hp.gamma >= 1) throw Error("gamma must be in [0, 1)");
  if (hp.eps_grow < 0 || hp.eps_grow > 1) throw Error("eps_grow must be in [0, 1]");
  if (actions.base_force <= 0 || actions.increment <= 0) throw Error("force ladder must be positive");
  if (execution.budget_steps < 1) throw Error("budget_steps must be positive");
  if (peel_state_fraction <= 0 || peel_state_fraction > 1)
    throw Error("peel_state_fraction must be in (0, 1]");
}

LearnerConfig PipelineConfig::learner() const {
  LearnerConfig lc;
  lc.rewards = RewardConfig(goal_reward, penalty);
  lc.hp = hp;
  lc.actions = actions;
  lc.max_episodes = max_episodes;
  lc.rng_seed = learn_seed;
  return lc;
}

}  // namespace lfd
