#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lfd/arm.hpp"
#include "lfd/environment.hpp"
#include "lfd/skills.hpp"

namespace lfd {

struct ControllerGains {
  double k1 = 0.2;  // positional proportional gain
  double k2 = 0.1;  // positional derivative weight
  double K1 = 5.0;  // impedance feedback gain
  double K2 = 0.1;  // impedance derivative weight

  void validate() const {
    if (k1 <= 0 || k2 <= 0 || K1 <= 0 || K2 <= 0) throw Error("controller gains must be positive");
  }
};

/// Positional control update: x_{t+1} = x_t + k1 (f + k2 (f - f_prev)),
/// with the feedback derivative taken as a backward difference over one
/// control step. Non-finite feedback raises.
Vec3 positional_step(const Vec3& x_t, const Vec3& f, const Vec3& f_prev, const ControllerGains& gains);

/// Impedance control torque: tau = J(q)^T F_d + K1 (f + K2 (f - f_prev)),
/// with f expressed in joint space. A Jacobian condition number beyond
/// `condition_cap` clamps the torque norm and sets `clamped`.
JointVector impedance_step(const ArmModel& arm, const JointVector& q, const Vec3& desired_force_world,
                           const JointVector& f, const JointVector& f_prev, const ControllerGains& gains,
                           double condition_cap = 1e6, bool* clamped = nullptr);

/// Force-feedback error for move-to-contact: F_n - F_d.
double feedback_move_to_contact(double normal_force, double desired_force = 0.5);

/// The contact-trajectory RL action: the demonstrated baseline path
/// re-parameterized to hold a target normal force.
struct ContactTrajectoryAction {
  int action_id = 0;
  double target_force = 0.0;  // N
};

struct SkillOutcome {
  bool success = false;
  ObjectState final_state;
  std::vector<double> force_log;
  std::vector<Vec3> pose_log;
  std::vector<JointVector> torque_log;
  int steps_used = 0;
  std::string note;
};

struct ExecutionConfig {
  int budget_steps = 2000;             // per skill
  double control_dt = 0.01;            // 100 control steps per simulated second
  double desired_contact_force = 0.5;  // F_d for move-to-contact, N
  double press_margin = 0.1;           // settle above the minimum force, N
  double settle_band = 0.05;           // N
  int settle_steps = 30;
  double position_tolerance = 1e-3;  // m
  double approach_speed = 0.05;      // m/s guarded descent
  double sweep_speed = 0.05;         // m/s along the contact path
  double blade_width = 0.02;         // m
  double mobility_gain = 0.7;        // admittance contraction per step
  double jacobian_condition_cap = 1e6;
  Vec3 home_pose{0.10, 0.0, 0.30};
};

/// Runs policy steps against the simulated arm and environment. Owns the
/// arm state for the duration of a skill (single writer).
class SkillExecutor {
 public:
  SkillExecutor(ArmModel arm, ControllerGains gains, ExecutionConfig cfg);

  /// Executes one policy step until its goal condition or the step budget.
  /// MoveWithContact requires an action binding.
  SkillOutcome execute_skill(const PolicyStep& step, const ContactTrajectoryAction* action,
                             Environment& env);

  /// Executes steps in order, halting at the first failure. `bindings` maps
  /// policy step index to the action for that force-trajectory step.
  std::vector<SkillOutcome> execute_policy(const Policy& policy, Environment& env,
                                           const std::map<size_t, ContactTrajectoryAction>& bindings = {});

  const ArmModel& arm() const { return arm_; }
  const JointVector& joints() const { return q_; }
  void reset_home();

 private:
  ArmModel arm_;
  ControllerGains gains_;
  ExecutionConfig cfg_;
  JointVector q_;

  bool goal_reached(const PolicyStep& step, Environment& env) const;
  SkillOutcome run_positional(const PolicyStep& step, Environment& env);
  SkillOutcome run_move_to_contact(const PolicyStep& step, Environment& env, double setpoint,
                                   bool sweep_after, const ContactTrajectoryAction* action);
};

}  // namespace lfd
