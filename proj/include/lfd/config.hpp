#pragma once

#include <cstdint>
#include <string>

#include "lfd/arm.hpp"
#include "lfd/control.hpp"
#include "lfd/pik.hpp"
#include "lfd/qlearning.hpp"

namespace lfd {

/// All tunables of the pipeline in one human-editable JSON document.
/// `canonical_config_text()` is the single authoritative copy of the
/// defaults; `defaults()` parses it and loaders fall back to it for any
/// key a user file omits.
struct PipelineConfig {
  ContactParams contact;
  ControllerGains gains;
  ArmModel::Config arm;
  ExecutionConfig execution;

  double goal_reward = 2.0;
  double penalty = 5.0;
  QHyperparams hp;
  ActionSetConfig actions;
  int max_episodes = 50;
  uint64_t learn_seed = 12345;
  double peel_state_fraction = kPeelStateFraction;

  static PipelineConfig defaults();
  static PipelineConfig load(const std::string& path);
  void save(const std::string& path) const;
  void validate() const;

  LearnerConfig learner() const;
};

/// The shipped commented defaults document (config/defaults.json carries
/// this exact text).
const std::string& canonical_config_text();

}  // namespace lfd
