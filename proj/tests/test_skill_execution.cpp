#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "lfd/control.hpp"
#include "lfd/qlearning.hpp"
#include "lfd/scenario.hpp"
#include "test_util.hpp"

using namespace lfd;

namespace {

const ObjectDatabase kDb = ObjectDatabase::builtin();
const ContactParams kParams;

Policy peel_policy(const DemonstrationTrace& trace) {
  const auto kps = detect_keypoints(trace, kDb, kParams);
  const auto segs = segment_trace(trace, kDb, kps, kParams);
  const DecisionTree tree = DecisionTree::train(builtin_training_set());
  Policy policy = build_policy(trace, segs, tree, kDb);
  attach_execution_refs(policy, trace, kParams);
  return policy;
}

struct PeelFixture {
  SynthesizedDemo demo;
  Policy policy;
  ScenarioSpec scenario;

  explicit PeelFixture(const std::string& cls = "cucumber")
      : demo(synthesize_trace(peel_scenario(cls), 7)),
        policy(peel_policy(demo.trace)),
        scenario(peel_scenario(cls)) {}

  Environment env() const { return Environment::from_scenario(scenario, kDb); }
};

SkillExecutor make_executor() {
  return SkillExecutor(ArmModel(ArmModel::Config{}), ControllerGains{}, ExecutionConfig{});
}

}  // namespace

TEST_CASE("positional_step: zero feedback is a fixed point") {
  const Vec3 x(0.2, 0.0, 0.3);
  const ControllerGains g;
  CHECK((positional_step(x, Vec3::Zero(), Vec3::Zero(), g) - x).norm() == 0.0);
}

TEST_CASE("positional_step: unit gain with no derivative reaches the target in one step") {
  ControllerGains g;
  g.k1 = 1.0;
  g.k2 = 0.0;
  const Vec3 x(0.1, 0.2, 0.3), x_d(0.4, -0.1, 0.2);
  const Vec3 f = x_d - x;
  CHECK((positional_step(x, f, f, g) - x_d).norm() < 1e-15);
}

TEST_CASE("positional_step matches a hand-rolled scalar recursion over 20 steps") {
  ControllerGains g;
  g.k1 = 0.2;
  g.k2 = 0.1;
  const double xd = 0.75;
  double x_ref = -0.3, f_prev_ref = xd - x_ref;
  Vec3 x(-0.3, 0, 0), f_prev(xd - x.x(), 0, 0);
  for (int i = 0; i < 20; ++i) {
    // Independent scalar recursion.
    const double f_ref = xd - x_ref;
    x_ref = x_ref + 0.2 * (f_ref + 0.1 * (f_ref - f_prev_ref));
    f_prev_ref = f_ref;

    const Vec3 f(xd - x.x(), 0, 0);
    x = positional_step(x, f, f_prev, g);
    f_prev = f;
    CHECK(x.x() == doctest::Approx(x_ref).epsilon(1e-12));
  }
}

TEST_CASE("zero proportional gain freezes the pose") {
  ControllerGains g;
  g.k1 = 0.0;  // deliberately outside the validated range: pure arithmetic check
  g.k2 = 0.1;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Vec3 x(0.1, 0.2, 0.3);
  for (int i = 0; i < 50; ++i) {
    const Vec3 f(d(rng), d(rng), d(rng));
    CHECK((positional_step(x, f, Vec3::Zero(), g) - x).norm() == 0.0);
  }
}

TEST_CASE("non-finite feedback aborts the skill update") {
  const ControllerGains g;
  CHECK_THROWS_AS(
      positional_step(Vec3::Zero(), Vec3(std::nan(""), 0, 0), Vec3::Zero(), g), Error);
}

TEST_CASE("positional controller converges from random in-workspace starts") {
  const ArmModel arm{ArmModel::Config{}};
  const ControllerGains g;
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> dx(0.05, 0.5), dz(0.02, 0.34);
  int tested = 0;
  while (tested < 40) {
    const Vec3 start(dx(rng), 0.0, dz(rng));
    const Vec3 target(dx(rng), 0.0, dz(rng));
    if (!arm.ik(start) || !arm.ik(target)) continue;
    ++tested;
    Vec3 x = start;
    Vec3 f_prev = target - x;
    int steps = 0;
    while ((x - target).norm() >= 1e-3 && steps < 500) {
      const Vec3 f = target - x;
      x = positional_step(x, f, f_prev, g);
      f_prev = f;
      ++steps;
    }
    CHECK((x - target).norm() < 1e-3);
    CHECK(steps < 500);
  }
}

TEST_CASE("impedance_step: zero force and zero feedback give zero torque") {
  const ArmModel arm{ArmModel::Config{}};
  const ControllerGains g;
  const JointVector q = JointVector::Zero(arm.dof());
  const JointVector f = JointVector::Zero(arm.dof());
  CHECK(impedance_step(arm, q, Vec3::Zero(), f, f, g).norm() == 0.0);
}

TEST_CASE("impedance_step reproduces the hand-computed straight-out J^T F") {
  // 2-link arm, both joints at zero: the chain lies along +x.
  ArmModel::Config cfg;
  cfg.link_lengths = {0.3, 0.2};
  cfg.base = Vec2(0.0, 0.0);
  const ArmModel arm{cfg};
  const ControllerGains g;
  const JointVector q = JointVector::Zero(2);
  const JointVector f = JointVector::Zero(2);

  // The straight-out pose is singular, so lift the condition cap: this
  // case checks the torque formula, the clamp has its own test.
  const double no_cap = std::numeric_limits<double>::infinity();

  // A pure vertical force F = (0, 0, fz): tau_i = fz * sum of link arms.
  const double fz = 2.5;
  const JointVector tau = impedance_step(arm, q, Vec3(0, 0, fz), f, f, g, no_cap);
  CHECK(tau[0] == doctest::Approx((0.3 + 0.2) * fz).epsilon(1e-12));
  CHECK(tau[1] == doctest::Approx(0.2 * fz).epsilon(1e-12));

  // A pure x force at the straight-out pose has no moment arm.
  const JointVector tau_x = impedance_step(arm, q, Vec3(1.0, 0, 0), f, f, g, no_cap);
  CHECK(std::abs(tau_x[0]) < 1e-12);
  CHECK(std::abs(tau_x[1]) < 1e-12);

  // The feedback term adds K1 (f + K2 (f - f_prev)).
  JointVector fb(2);
  fb << 0.1, -0.2;
  const JointVector tau_fb = impedance_step(arm, q, Vec3::Zero(), fb, fb, g, no_cap);
  CHECK(tau_fb[0] == doctest::Approx(g.K1 * 0.1).epsilon(1e-12));
  CHECK(tau_fb[1] == doctest::Approx(g.K1 * -0.2).epsilon(1e-12));
}

TEST_CASE("analytic Jacobian matches finite differences of forward kinematics") {
  for (int links : {2, 3}) {
    ArmModel::Config cfg;
    cfg.link_lengths = links == 2 ? std::vector<double>{0.3, 0.25} : std::vector<double>{0.3, 0.3, 0.12};
    const ArmModel arm{cfg};
    std::mt19937_64 rng(47);
    std::uniform_real_distribution<double> d(-M_PI, M_PI);
    for (int rep = 0; rep < 100; ++rep) {
      JointVector q(arm.dof());
      for (int i = 0; i < arm.dof(); ++i) q[i] = d(rng);
      const Eigen::MatrixXd j = arm.jacobian_plane(q);
      const double h = 1e-7;
      for (int i = 0; i < arm.dof(); ++i) {
        JointVector qp = q, qm = q;
        qp[i] += h;
        qm[i] -= h;
        const Vec2 fd = (arm.fk_plane(qp) - arm.fk_plane(qm)) / (2 * h);
        CHECK(std::abs(j(0, i) - fd.x()) < 1e-6);
        CHECK(std::abs(j(1, i) - fd.y()) < 1e-6);
      }
    }
  }
}

TEST_CASE("inverse kinematics round-trips through forward kinematics") {
  const ArmModel arm{ArmModel::Config{}};
  std::mt19937_64 rng(53);
  std::uniform_real_distribution<double> dx(0.05, 0.5), dz(0.0, 0.35);
  int tested = 0;
  while (tested < 100) {
    const Vec3 target(dx(rng), 0.0, dz(rng));
    const auto q = arm.ik(target);
    if (!q) continue;
    ++tested;
    CHECK((arm.fk(*q) - target).norm() < 1e-9);
  }
  CHECK_FALSE(arm.ik(Vec3(5.0, 0.0, 5.0)).has_value());
}

TEST_CASE("near-singular configurations clamp the torque and warn") {
  ArmModel::Config cfg;
  cfg.link_lengths = {0.3, 0.2};
  cfg.base = Vec2(0.0, 0.0);
  const ArmModel arm{cfg};
  const ControllerGains g;
  JointVector q(2);
  q << 0.3, 0.0;  // fully stretched: singular
  JointVector f = JointVector::Zero(2);
  bool clamped = false;
  const JointVector tau = impedance_step(arm, q, Vec3(0, 0, 100.0), f, f, g, 1e6, &clamped);
  CHECK(clamped);
  CHECK(tau.norm() <= 1.0 + 1e-12);
}

TEST_CASE("feedback_move_to_contact is the force error") {
  CHECK(feedback_move_to_contact(0.5, 0.5) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(feedback_move_to_contact(0.0, 0.5) == doctest::Approx(-0.5).epsilon(1e-15));
  CHECK(feedback_move_to_contact(0.8, 0.5) == doctest::Approx(0.3).epsilon(1e-15));
}

TEST_CASE("approach skill ends within contact distance of the object") {
  PeelFixture fix;
  Environment env = fix.env();
  SkillExecutor exec = make_executor();
  const SkillOutcome out = exec.execute_skill(fix.policy.steps[0], nullptr, env);
  CHECK(out.success);
  CHECK(out.final_state.label == "unpeeled");
  const double dist = point_box_distance(out.pose_log.back(), env.object(0).box());
  CHECK(dist <= kParams.contact_distance);
}

TEST_CASE("move-to-contact settles inside the contact-force band") {
  PeelFixture fix;
  Environment env = fix.env();
  SkillExecutor exec = make_executor();
  exec.execute_skill(fix.policy.steps[0], nullptr, env);
  const SkillOutcome out = exec.execute_skill(fix.policy.steps[1], nullptr, env);
  CHECK(out.success);
  REQUIRE(!out.force_log.empty());
  const double steady = out.force_log.back();
  CHECK(steady >= 0.5);
  CHECK(steady <= 0.7);
  CHECK(!out.torque_log.empty());
}

TEST_CASE("move-to-contact regulates within the noise band on every database stiffness") {
  for (const auto& [cls, info] : kDb.entries()) {
    ScenarioSpec scenario;
    scenario.name = "press_" + cls;
    scenario.objects.push_back({0, cls, Vec3(0.35, 0.0, info.extent.z() / 2.0)});
    HandPhase hold{PhaseKind::Free, 12, Vec3(0.1, 0, 0.3), Vec3(0.1, 0, 0.3), -1};
    scenario.phases = {hold};
    Environment env = Environment::from_scenario(scenario, kDb);

    PolicyStep step;
    step.skill = SkillClass::MoveToContact;
    step.object_id = 0;
    step.goal_state = env.detect_state(0);
    step.exec_target = Vec3(0.35, 0.0, info.extent.z());

    SkillExecutor exec = make_executor();
    const SkillOutcome out = exec.execute_skill(step, nullptr, env);
    INFO("class ", cls);
    CHECK(out.success);
    CHECK(std::abs(out.force_log.back() - 0.5) <= 0.2);
  }
}

TEST_CASE("move-with-contact below the peel threshold fails and leaves the state unchanged") {
  PeelFixture fix;
  Environment env = fix.env();
  SkillExecutor exec = make_executor();
  const ContactTrajectoryAction weak{0, 0.5};
  std::map<size_t, ContactTrajectoryAction> bindings{{2, weak}};
  const auto outcomes = exec.execute_policy(fix.policy, env, bindings);
  REQUIRE(outcomes.size() == 3);
  CHECK(outcomes[0].success);
  CHECK(outcomes[1].success);
  CHECK_FALSE(outcomes[2].success);
  CHECK(env.detect_state(0).label == "unpeeled");
}

TEST_CASE("the full peel policy succeeds with a sufficient force action") {
  PeelFixture fix;
  Environment env = fix.env();
  SkillExecutor exec = make_executor();
  const ContactTrajectoryAction strong{4, 1.7};
  std::map<size_t, ContactTrajectoryAction> bindings{{2, strong}};
  const auto outcomes = exec.execute_policy(fix.policy, env, bindings);
  REQUIRE(outcomes.size() == 3);
  for (const auto& o : outcomes) CHECK(o.success);
  CHECK(env.detect_state(0).label == "peeled");
  // The sweep holds the commanded force along the whole strip.
  const auto& forces = outcomes[2].force_log;
  int at_target = 0;
  for (double f : forces) at_target += std::abs(f - 1.7) < 0.05;
  CHECK(at_target > static_cast<int>(forces.size()) / 2);
}

TEST_CASE("execute_policy halts at the first failure") {
  PeelFixture fix;
  Environment env = fix.env();
  SkillExecutor exec = make_executor();
  Policy broken = fix.policy;
  broken.steps[0].exec_target = Vec3(0.62, 0.0, 0.02);  // wrong corner of the workspace
  broken.steps[0].goal_state.label = "peeled";          // unreachable goal for an approach
  const auto outcomes = exec.execute_policy(broken, env, {{2, ContactTrajectoryAction{0, 1.7}}});
  CHECK(outcomes.size() == 1);
  CHECK_FALSE(outcomes[0].success);
}

TEST_CASE("an empty policy yields an empty outcome list") {
  PeelFixture fix;
  Environment env = fix.env();
  SkillExecutor exec = make_executor();
  const auto outcomes = exec.execute_policy(Policy{}, env);
  CHECK(outcomes.empty());
}

TEST_CASE("move-with-contact without an action binding is a usage error") {
  PeelFixture fix;
  Environment env = fix.env();
  SkillExecutor exec = make_executor();
  CHECK_THROWS_AS(exec.execute_skill(fix.policy.steps[2], nullptr, env), Error);
}

TEST_CASE("potato and carrot peel policies execute end to end") {
  for (const std::string cls : {"potato", "carrot"}) {
    PeelFixture fix(cls);
    Environment env = fix.env();
    SkillExecutor exec = make_executor();
    const double strong = kDb.at(cls).peel_force_threshold + 0.4;
    std::map<size_t, ContactTrajectoryAction> bindings{{2, ContactTrajectoryAction{0, strong}}};
    const auto outcomes = exec.execute_policy(fix.policy, env, bindings);
    REQUIRE(outcomes.size() == 3);
    INFO("class ", cls);
    for (const auto& o : outcomes) CHECK(o.success);
    CHECK(env.detect_state(0).label == "peeled");
  }
}
