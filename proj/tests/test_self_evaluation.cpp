#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "lfd/qlearning.hpp"
#include "lfd/scenario.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace lfd;

namespace {

const ObjectDatabase kDb = ObjectDatabase::builtin();
const ContactParams kParams;

struct LearnFixture {
  SynthesizedDemo demo;
  Policy policy;
  ScenarioSpec scenario;
  StiffnessClusterer clusterer;

  explicit LearnFixture(const std::string& cls = "cucumber")
      : demo(synthesize_trace(peel_scenario(cls), 7)), scenario(peel_scenario(cls)) {
    const auto kps = detect_keypoints(demo.trace, kDb, kParams);
    const auto segs = segment_trace(demo.trace, kDb, kps, kParams);
    policy = build_policy(demo.trace, segs, DecisionTree::train(builtin_training_set()), kDb);
    attach_execution_refs(policy, demo.trace, kParams);
    std::vector<double> stiff;
    for (const auto& cls_name : kDb.peelable_classes()) stiff.push_back(kDb.at(cls_name).stiffness);
    clusterer.fit(stiff, 2);
  }

  EnvFactory factory() const {
    return [this]() { return Environment::from_scenario(scenario, kDb); };
  }
};

SkillExecutor make_executor() {
  return SkillExecutor(ArmModel(ArmModel::Config{}), ControllerGains{}, ExecutionConfig{});
}

}  // namespace

TEST_CASE("reward is the Kronecker-delta shape") {
  const RewardConfig cfg;
  CHECK(reward("unpeeled", "peeled", "peeled", cfg) == doctest::Approx(2.0));
  CHECK(reward("unpeeled", "unpeeled", "peeled", cfg) == doctest::Approx(-5.0));
  CHECK(reward("peeled", "peeled", "peeled", cfg) == doctest::Approx(2.0));
}

TEST_CASE("reward config enforces c2 > c1 > 0") {
  CHECK_THROWS_AS(RewardConfig(1.0, 1.0), Error);
  CHECK_THROWS_AS(RewardConfig(-1.0, 5.0), Error);
  CHECK_THROWS_AS(RewardConfig(5.0, 2.0), Error);
  CHECK_NOTHROW(RewardConfig(2.0, 5.0));
}

TEST_CASE("q update collapses to the reward when alpha=1, gamma=0") {
  QTable t(0, SkillClass::MoveWithContact, QHyperparams{1.0, 0.0, 0.8});
  t.set_action_count(1);
  t.update("s", 0, 2.0, "s2");
  CHECK(t.value("s", 0) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("q update with alpha=0 leaves the table unchanged") {
  QTable t(0, SkillClass::MoveWithContact, QHyperparams{0.5, 0.3, 0.8});
  t.set_action_count(2);
  t.set_value("s", 0, 1.25);
  t.update_with_alpha("s", 0, -5.0, "s2", 0.0);
  CHECK(t.value("s", 0) == doctest::Approx(1.25).epsilon(1e-15));
}

TEST_CASE("q update reproduces the hand-computed example") {
  // alpha=0.5, gamma=0.3, Q(s,a)=1, max_next=4, r=-5:
  // Q <- 1 + 0.5*(-5 + 1.2 - 1) = -1.4.
  QTable t(0, SkillClass::MoveWithContact, QHyperparams{0.5, 0.3, 0.8});
  t.set_action_count(2);
  t.set_value("s", 0, 1.0);
  t.set_value("next", 1, 4.0);
  t.update("s", 0, -5.0, "next");
  CHECK(t.value("s", 0) == doctest::Approx(-1.4).epsilon(1e-12));
}

TEST_CASE("non-finite rewards are rejected") {
  QTable t;
  t.set_action_count(1);
  CHECK_THROWS_AS(t.update("s", 0, std::numeric_limits<double>::quiet_NaN(), "s"), Error);
  CHECK_THROWS_AS(t.update("s", 0, std::numeric_limits<double>::infinity(), "s"), Error);
}

TEST_CASE("select_action: argmax with ties to the lowest id") {
  QTable t(0, SkillClass::MoveWithContact, QHyperparams{});
  ActionSet actions;
  actions.grow();
  actions.grow();
  actions.grow();
  t.set_action_count(3);
  std::mt19937_64 rng(1);

  t.set_value("s", 0, 0.0);
  t.set_value("s", 1, 3.0);
  t.set_value("s", 2, 1.0);
  auto pick = select_action(t, "s", actions, SelectMode::Exploit, rng);
  CHECK(std::get<int>(pick) == 1);

  t.set_value("s", 0, 2.0);
  t.set_value("s", 1, 2.0);
  t.set_value("s", 2, 0.0);
  pick = select_action(t, "s", actions, SelectMode::Exploit, rng);
  CHECK(std::get<int>(pick) == 0);
}

TEST_CASE("select_action: exploit on an empty set bootstraps a grow request") {
  QTable t;
  ActionSet actions;
  std::mt19937_64 rng(1);
  CHECK(std::holds_alternative<GrowRequest>(select_action(t, "s", actions, SelectMode::Exploit, rng)));
}

TEST_CASE("select_action: eps_grow = 1 always grows; eps_grow = 0 always replays") {
  ActionSet actions;
  actions.grow();
  actions.grow();
  std::mt19937_64 rng(5);
  QTable grow_table(0, SkillClass::MoveWithContact, QHyperparams{0.5, 0.3, 1.0});
  grow_table.set_action_count(2);
  for (int i = 0; i < 50; ++i)
    CHECK(std::holds_alternative<GrowRequest>(
        select_action(grow_table, "s", actions, SelectMode::Explore, rng)));
  QTable replay_table(0, SkillClass::MoveWithContact, QHyperparams{0.5, 0.3, 0.0});
  replay_table.set_action_count(2);
  for (int i = 0; i < 50; ++i) {
    const auto pick = select_action(replay_table, "s", actions, SelectMode::Explore, rng);
    REQUIRE(std::holds_alternative<int>(pick));
    CHECK(std::get<int>(pick) < 2);
  }
}

TEST_CASE("grow_action builds the exact force ladder") {
  ActionSet actions;
  CHECK(actions.grow().target_force == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(actions.grow().target_force == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(actions.grow().target_force == doctest::Approx(1.1).epsilon(1e-12));
  // Ladder law: action k holds base + k*increment exactly.
  for (int k = 0; k < actions.size(); ++k) {
    CHECK(actions.at(k).action_id == k);
    CHECK(actions.at(k).target_force == 0.5 + k * 0.3);
  }
  for (int k = 1; k < actions.size(); ++k)
    CHECK(actions.at(k).target_force > actions.at(k - 1).target_force);
}

TEST_CASE("grow_action halts at the force ceiling") {
  ActionSetConfig cfg;
  cfg.ceiling = 1.0;
  ActionSet actions(cfg);
  actions.grow();  // 0.5
  actions.grow();  // 0.8
  CHECK_THROWS_WITH_AS(actions.grow(), doctest::Contains("action space exhausted"), Error);
}

TEST_CASE("q table grows with the action set and never shrinks") {
  QTable t;
  t.set_action_count(2);
  t.set_value("s", 1, -2.0);
  t.set_action_count(4);
  CHECK(t.value("s", 2) == 0.0);
  CHECK(t.value("s", 3) == 0.0);
  CHECK(t.value("s", 1) == doctest::Approx(-2.0));
  CHECK_THROWS_AS(t.set_action_count(3), Error);
}

TEST_CASE("learn_until_success climbs the force ladder and stops at the first success") {
  LearnFixture fix;
  SkillExecutor exec = make_executor();
  QStore store;
  LearnerConfig cfg;
  const LearningReport report = learn_until_success(fix.policy, fix.factory(), exec, store,
                                                    fix.clusterer, cfg);
  CHECK(report.success);
  REQUIRE(report.episodes.size() == 5);
  const std::vector<double> want{0.5, 0.8, 1.1, 1.4, 1.7};
  for (size_t i = 0; i < 5; ++i) {
    CHECK(report.episodes[i].episode == static_cast<int>(i) + 1);
    CHECK(report.episodes[i].action_id == static_cast<int>(i));
    CHECK(report.episodes[i].force == doctest::Approx(want[i]).epsilon(1e-12));
    CHECK(report.episodes[i].reward == doctest::Approx(i + 1 < 5 ? -5.0 : 2.0));
    CHECK(report.episodes[i].success == (i + 1 == 5));
  }
  CHECK(report.action_set_size == 5);
  CHECK(report.cluster_id == fix.clusterer.cluster_for(500.0));

  // Rerunning the same learner exploits the positively valued action.
  const LearningReport rerun = learn_until_success(fix.policy, fix.factory(), exec, store,
                                                   fix.clusterer, cfg);
  CHECK(rerun.success);
  REQUIRE(rerun.episodes.size() == 1);
  CHECK(rerun.episodes[0].action_id == 4);
  CHECK(rerun.episodes[0].force == doctest::Approx(1.7).epsilon(1e-12));
  CHECK(rerun.action_set_size == 5);
}

TEST_CASE("episodes on one cluster never touch the other cluster's table") {
  LearnFixture cuke("cucumber");
  LearnFixture carrot("carrot");
  SkillExecutor exec = make_executor();
  QStore store;
  LearnerConfig cfg;

  learn_until_success(cuke.policy, cuke.factory(), exec, store, cuke.clusterer, cfg);
  const int c_cuke = cuke.clusterer.cluster_for(kDb.at("cucumber").stiffness);
  const int c_carrot = cuke.clusterer.cluster_for(kDb.at("carrot").stiffness);
  REQUIRE(c_cuke != c_carrot);

  auto& cuke_entry = store.entry(c_cuke, SkillClass::MoveWithContact, cfg.hp, cfg.actions);
  const uint64_t hash_before = cuke_entry.table.content_hash(cuke_entry.actions);

  learn_until_success(carrot.policy, carrot.factory(), exec, store, carrot.clusterer, cfg);
  const uint64_t hash_after = cuke_entry.table.content_hash(cuke_entry.actions);
  CHECK(hash_before == hash_after);

  // The carrot cluster learned its own ladder: threshold 2.2 N needs 2.3 N.
  const auto* carrot_entry = store.find(c_carrot, SkillClass::MoveWithContact);
  REQUIRE(carrot_entry != nullptr);
  CHECK(carrot_entry->actions.size() == 7);
  CHECK(carrot_entry->actions.actions().back().target_force == doctest::Approx(2.3).epsilon(1e-12));
}

TEST_CASE("max_episodes exhaustion reports failure honestly") {
  LearnFixture fix;
  SkillExecutor exec = make_executor();
  QStore store;
  LearnerConfig cfg;
  cfg.max_episodes = 3;
  const LearningReport report = learn_until_success(fix.policy, fix.factory(), exec, store,
                                                    fix.clusterer, cfg);
  CHECK_FALSE(report.success);
  CHECK(report.episodes.size() == 3);
}

TEST_CASE("force ceiling exhaustion halts learning with a note") {
  LearnFixture fix;
  SkillExecutor exec = make_executor();
  QStore store;
  LearnerConfig cfg;
  cfg.actions.ceiling = 1.0;  // only 0.5 and 0.8 fit; the cucumber needs 1.7
  const LearningReport report = learn_until_success(fix.policy, fix.factory(), exec, store,
                                                    fix.clusterer, cfg);
  CHECK_FALSE(report.success);
  CHECK(report.episodes.size() == 2);
  CHECK(report.note.find("action space exhausted") != std::string::npos);
}

TEST_CASE("q learning with decaying alpha reaches the value-iteration fixed point") {
  oracle::Mdp mdp;
  mdp.n_states = 3;
  mdp.n_actions = 3;
  mdp.gamma = 0.3;
  mdp.next = {{1, 2, 0}, {2, 0, 1}, {0, 1, 2}};
  mdp.reward = {{1.0, -1.0, 0.5}, {2.0, 0.0, -0.5}, {-1.0, 1.5, 0.3}};
  const auto q_star = oracle::value_iteration(mdp);

  QTable table(0, SkillClass::MoveWithContact, QHyperparams{1.0, mdp.gamma, 0.8});
  table.set_action_count(3);
  const std::vector<std::string> names{"s0", "s1", "s2"};
  std::vector<std::vector<int>> visits(3, std::vector<int>(3, 0));
  int updates = 0;
  while (updates < 100000) {
    for (int s = 0; s < 3; ++s) {
      for (int a = 0; a < 3; ++a) {
        const double alpha = 1.0 / std::sqrt(static_cast<double>(++visits[s][a]));
        table.update_with_alpha(names[s], a, mdp.reward[s][a], names[mdp.next[s][a]], alpha);
        ++updates;
      }
    }
  }
  double max_err = 0.0;
  for (int s = 0; s < 3; ++s)
    for (int a = 0; a < 3; ++a) max_err = std::max(max_err, std::abs(table.value(names[s], a) - q_star[s][a]));
  CHECK(max_err < 1e-6);
}

TEST_CASE("cluster_for picks the nearest center, lower center on ties") {
  StiffnessClusterer c;
  c.fit({500.0, 2000.0}, 2);
  CHECK(c.cluster_for(400.0) == 0);
  CHECK(c.cluster_for(2100.0) == 1);
  CHECK(c.cluster_for(1250.0) == 0);  // exactly midway
  StiffnessClusterer unfitted;
  CHECK_THROWS_AS(unfitted.cluster_for(500.0), Error);
}

TEST_CASE("1-D 2-means matches the exhaustive split oracle") {
  const std::vector<std::vector<double>> datasets{
      {450, 500, 1900, 2100},
      {450, 500, 550, 1900, 2000, 2100},
      {100, 120, 130, 5000},
      {500, 2000, 2200},
  };
  for (const auto& values : datasets) {
    StiffnessClusterer c;
    c.fit(values, 2);
    const auto want = oracle::two_means_exhaustive(values);
    REQUIRE(c.centers().size() == 2);
    CHECK(c.centers()[0] == doctest::Approx(want[0]).epsilon(1e-9));
    CHECK(c.centers()[1] == doctest::Approx(want[1]).epsilon(1e-9));
  }
  StiffnessClusterer c;
  c.fit({450, 500, 1900, 2100}, 2);
  CHECK(c.centers()[0] == doctest::Approx(475.0));
  CHECK(c.centers()[1] == doctest::Approx(2000.0));
}

TEST_CASE("q stores persist and reload byte-identically") {
  LearnFixture fix;
  SkillExecutor exec = make_executor();
  QStore store;
  LearnerConfig cfg;
  learn_until_success(fix.policy, fix.factory(), exec, store, fix.clusterer, cfg);

  testutil::TempDir tmp("qstore");
  store.save(tmp.path.string());
  QStore back = QStore::load(tmp.path.string(), cfg.hp, cfg.actions);
  const int cluster = fix.clusterer.cluster_for(500.0);
  auto& a = store.entry(cluster, SkillClass::MoveWithContact, cfg.hp, cfg.actions);
  auto& b = back.entry(cluster, SkillClass::MoveWithContact, cfg.hp, cfg.actions);
  CHECK(a.table.serialize(a.actions) == b.table.serialize(b.actions));

  // And the reloaded learner exploits immediately.
  const LearningReport rerun = learn_until_success(fix.policy, fix.factory(), exec, back,
                                                   fix.clusterer, cfg);
  CHECK(rerun.success);
  CHECK(rerun.episodes.size() == 1);
}

TEST_CASE("malformed q-table files are rejected") {
  testutil::TempDir tmp("badqs");
  testutil::write_file(tmp.file("q_c0_MoveWithContact.qt"),
                       "# lfd-qtable v1\ncluster 0\nskill MoveWithContact\nactions 3\naction 0 0.5\n");
  CHECK_THROWS_WITH_AS(QStore::load(tmp.path.string(), QHyperparams{}, ActionSetConfig{}),
                       doctest::Contains("action count mismatch"), Error);
}

TEST_CASE("learning reports round-trip and render as CSV") {
  LearningReport report;
  report.success = true;
  report.cluster_id = 0;
  report.seed = 42;
  report.action_set_size = 2;
  report.episodes.push_back({1, 0, 0.5, -5.0, false, "unpeeled"});
  report.episodes.push_back({2, 1, 0.8, 2.0, true, "peeled"});

  testutil::TempDir tmp("report");
  save_report(report, tmp.file("r.txt"));
  const LearningReport back = load_report(tmp.file("r.txt"));
  CHECK(back.success == report.success);
  REQUIRE(back.episodes.size() == 2);
  CHECK(back.episodes[1].force == doctest::Approx(0.8));
  CHECK(back.episodes[1].success);

  const std::string csv = report_csv(back);
  CHECK(csv.find("episode,action_id,force,reward,outcome") == 0);
  CHECK(csv.find("2,1,0.8") != std::string::npos);
  CHECK(csv.find("success") != std::string::npos);
}
