#include "lfd/control.hpp"

#include <algorithm>
#include <cmath>

namespace lfd {

Vec3 positional_step(const Vec3& x_t, const Vec3& f, const Vec3& f_prev, const ControllerGains& gains) {
  if (!f.allFinite() || !f_prev.allFinite()) throw Error("positional feedback is not finite");
  return x_t + gains.k1 * (f + gains.k2 * (f - f_prev));
}

JointVector impedance_step(const ArmModel& arm, const JointVector& q, const Vec3& desired_force_world,
                           const JointVector& f, const JointVector& f_prev, const ControllerGains& gains,
                           double condition_cap, bool* clamped) {
  if (!f.allFinite() || !f_prev.allFinite()) throw Error("impedance feedback is not finite");
  JointVector tau = arm.jacobian_world(q).transpose() * desired_force_world +
                    gains.K1 * (f + gains.K2 * (f - f_prev));
  bool clip = false;
  if (arm.jacobian_condition(q) > condition_cap) {
    const double cap = 1.0;  // N*m, conservative near-singular cap
    if (tau.norm() > cap) tau *= cap / tau.norm();
    clip = true;
  }
  if (clamped) *clamped = clip;
  return tau;
}

double feedback_move_to_contact(double normal_force, double desired_force) {
  return normal_force - desired_force;
}

SkillExecutor::SkillExecutor(ArmModel arm, ControllerGains gains, ExecutionConfig cfg)
    : arm_(std::move(arm)), gains_(gains), cfg_(cfg) {
  gains_.validate();
  reset_home();
}

void SkillExecutor::reset_home() {
  auto q = arm_.ik(cfg_.home_pose);
  if (!q) throw Error("home pose is out of reach for the configured arm");
  q_ = *q;
}

bool SkillExecutor::goal_reached(const PolicyStep& step, Environment& env) const {
  return env.detect_state(step.object_id) == step.goal_state;
}

// Motion integration is kinematic: the controller output advances the
// commanded pose, inverse kinematics keeps the joint state consistent, and
// contact follows the quasi-static spring law. Impedance torques are
// evaluated and logged each step.
SkillOutcome SkillExecutor::run_positional(const PolicyStep& step, Environment& env) {
  SkillOutcome outcome;
  Vec3 x = arm_.fk(q_);
  const Vec3 x_d = step.exec_target;
  Vec3 f_prev = Vec3::Zero();
  bool first = true;
  bool converged = false;
  for (int t = 0; t < cfg_.budget_steps; ++t) {
    const Vec3 f = x_d - x;
    if (first) {
      f_prev = f;
      first = false;
    }
    x = positional_step(x, f, f_prev, gains_);
    f_prev = f;
    auto q = arm_.ik(x);
    if (!q) {
      outcome.note = "ik failure during positional skill";
      outcome.steps_used = t + 1;
      outcome.final_state = env.detect_state(step.object_id);
      return outcome;
    }
    q_ = *q;
    outcome.pose_log.push_back(x);
    outcome.force_log.push_back(env.contact_force(x));
    outcome.steps_used = t + 1;
    if ((x - x_d).norm() < cfg_.position_tolerance) {
      converged = true;
      break;
    }
  }
  if (!converged) outcome.note = "budget exhausted before reaching the target pose";
  outcome.final_state = env.detect_state(step.object_id);
  outcome.success = converged && goal_reached(step, env);
  return outcome;
}

SkillOutcome SkillExecutor::run_move_to_contact(const PolicyStep& step, Environment& env, double setpoint,
                                                bool sweep_after, const ContactTrajectoryAction* action) {
  SkillOutcome outcome;
  const SimObject& target = env.object(step.object_id);
  const double stiffness = target.stiffness;
  const double top = target.top_z();
  const double band = cfg_.settle_band + (env.noise_enabled() ? Environment::kNoiseAmplitude : 0.0);
  const Vec3 press_point = sweep_after && !step.exec_path.empty() ? step.exec_path.front() : step.exec_target;

  Vec3 x = arm_.fk(q_);
  JointVector f_prev = JointVector::Zero(arm_.dof());
  auto log_step = [&](double force) {
    // Impedance law bookkeeping: force error embedded along the press axis.
    const double err = feedback_move_to_contact(force, setpoint);
    const JointVector f = err * (arm_.jacobian_world(q_).transpose() * Vec3(0, 0, 1));
    bool clamped = false;
    outcome.torque_log.push_back(impedance_step(arm_, q_, Vec3(0, 0, -setpoint), f, f_prev, gains_,
                                                cfg_.jacobian_condition_cap, &clamped));
    if (clamped && outcome.note.empty()) outcome.note = "torque clamped near singular configuration";
    f_prev = f;
    outcome.pose_log.push_back(x);
    outcome.force_log.push_back(force);
  };
  auto command = [&](const Vec3& target_pose) -> bool {
    auto q = arm_.ik(target_pose);
    if (!q) return false;
    q_ = *q;
    x = target_pose;
    return true;
  };

  // Move above the press point, then guarded descent until contact.
  int t = 0;
  const double step_len = cfg_.approach_speed * cfg_.control_dt;
  const Vec3 hover(press_point.x(), press_point.y(), std::max(press_point.z(), x.z()));
  while (t < cfg_.budget_steps && (Vec2(x.x(), x.y()) - Vec2(hover.x(), hover.y())).norm() > 1e-9) {
    Vec3 to = hover - x;
    Vec3 next = to.norm() <= step_len ? hover : Vec3(x + step_len * to.normalized());
    if (!command(next)) {
      outcome.note = "ik failure while positioning for contact";
      outcome.final_state = env.detect_state(step.object_id);
      outcome.steps_used = t;
      return outcome;
    }
    log_step(env.contact_force(x));
    ++t;
  }
  double force = 0.0;
  while (t < cfg_.budget_steps) {
    force = env.contact_force(x);
    log_step(force);
    ++t;
    if (force > 0.0) break;
    if (x.z() < top - 0.02) {
      outcome.note = "no contact found on descent";
      outcome.final_state = env.detect_state(step.object_id);
      outcome.steps_used = t;
      return outcome;
    }
    if (!command(x - Vec3(0, 0, step_len))) {
      outcome.note = "ik failure during descent";
      outcome.final_state = env.detect_state(step.object_id);
      outcome.steps_used = t;
      return outcome;
    }
  }

  // Normalized admittance servo on the normal force.
  int settled = 0;
  bool force_ok = false;
  while (t < cfg_.budget_steps) {
    force = env.contact_force(x);
    log_step(force);
    ++t;
    if (std::abs(force - setpoint) <= band) {
      if (++settled >= cfg_.settle_steps) {
        force_ok = true;
        break;
      }
    } else {
      settled = 0;
    }
    const double dz = cfg_.mobility_gain * (setpoint - force) / stiffness;
    if (!command(x - Vec3(0, 0, dz))) {
      outcome.note = "ik failure during force servo";
      break;
    }
  }
  outcome.steps_used = t;
  if (!force_ok) {
    if (outcome.note.empty()) outcome.note = "budget exhausted before force settled";
    outcome.final_state = env.detect_state(step.object_id);
    return outcome;
  }

  if (sweep_after) {
    // Walk the contact trajectory at the action's penetration depth,
    // collecting the force samples the peel rule evaluates.
    const double penetration = action->target_force / stiffness;
    std::vector<Vec3> surface_samples;
    std::vector<double> forces;
    const double sweep_step = cfg_.sweep_speed * cfg_.control_dt;
    size_t waypoint = 0;
    Vec3 cursor(press_point.x(), press_point.y(), top - penetration);
    if (!command(cursor)) {
      outcome.note = "ik failure entering the contact trajectory";
      outcome.final_state = env.detect_state(step.object_id);
      return outcome;
    }
    while (t < cfg_.budget_steps && waypoint < step.exec_path.size()) {
      const Vec3 wp(step.exec_path[waypoint].x(), step.exec_path[waypoint].y(), top - penetration);
      const Vec3 to = wp - x;
      if (to.norm() <= sweep_step) {
        ++waypoint;
      } else if (!command(x + sweep_step * to.normalized())) {
        outcome.note = "ik failure during the contact trajectory";
        break;
      }
      force = env.contact_force(x);
      log_step(force);
      ++t;
      surface_samples.emplace_back(x.x(), x.y(), top);
      forces.push_back(force);
    }
    outcome.steps_used = t;
    if (waypoint < step.exec_path.size()) {
      if (outcome.note.empty()) outcome.note = "budget exhausted mid-trajectory";
      outcome.final_state = env.detect_state(step.object_id);
      return outcome;
    }
    env.apply_peel(step.object_id, surface_samples, forces, cfg_.blade_width);
    outcome.final_state = env.detect_state(step.object_id);
    outcome.success = goal_reached(step, env);
    if (!outcome.success && outcome.note.empty()) outcome.note = "goal state not reached";
    return outcome;
  }

  outcome.final_state = env.detect_state(step.object_id);
  outcome.success = goal_reached(step, env);
  return outcome;
}

SkillOutcome SkillExecutor::execute_skill(const PolicyStep& raw_step,
                                          const ContactTrajectoryAction* action, Environment& env) {
  // The planar arm executes the in-plane projection of the demonstrated
  // references.
  PolicyStep step = raw_step;
  step.exec_target.y() = arm_.config().plane_y;
  for (auto& p : step.exec_path) p.y() = arm_.config().plane_y;
  switch (step.skill) {
    case SkillClass::MoveWithContact: {
      if (!action) throw Error("MoveWithContact requires a contact-trajectory action");
      if (step.exec_path.empty()) throw Error("MoveWithContact step has no trajectory");
      return run_move_to_contact(step, env, action->target_force, true, action);
    }
    case SkillClass::MoveToContact:
    case SkillClass::GuardedMove:
    case SkillClass::Grasp:
      return run_move_to_contact(step, env, cfg_.desired_contact_force + cfg_.press_margin, false,
                                 nullptr);
    default:
      return run_positional(step, env);
  }
}

std::vector<SkillOutcome> SkillExecutor::execute_policy(
    const Policy& policy, Environment& env, const std::map<size_t, ContactTrajectoryAction>& bindings) {
  std::vector<SkillOutcome> outcomes;
  reset_home();
  for (size_t i = 0; i < policy.steps.size(); ++i) {
    const ContactTrajectoryAction* action = nullptr;
    auto it = bindings.find(i);
    if (it != bindings.end()) action = &it->second;
    outcomes.push_back(execute_skill(policy.steps[i], action, env));
    if (!outcomes.back().success) break;
  }
  return outcomes;
}

}  // namespace lfd
