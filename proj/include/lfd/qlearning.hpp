#pragma once

#include <functional>
#include <map>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "lfd/control.hpp"
#include "lfd/environment.hpp"
#include "lfd/skills.hpp"

namespace lfd {

/// Kronecker-delta reward shape: +c1 on reaching the goal state, -c2
/// otherwise, with c2 > c1 > 0.
struct RewardConfig {
  double goal_reward;     // c1
  double penalty;         // c2
  RewardConfig(double c1 = 2.0, double c2 = 5.0) : goal_reward(c1), penalty(c2) {
    if (!(c2 > c1 && c1 > 0.0)) throw Error("reward config requires c2 > c1 > 0");
  }
};

double reward(const std::string& state, const std::string& next_state, const std::string& goal_state,
              const RewardConfig& cfg);

struct ActionSetConfig {
  double base_force = 0.5;  // N, first contact-trajectory action
  double increment = 0.3;   // N per added action
  double ceiling = 10.0;    // N, learning halts beyond this
};

/// Append-only action collection with strictly increasing target forces;
/// action k holds exactly base_force + k * increment.
class ActionSet {
 public:
  explicit ActionSet(ActionSetConfig cfg = {}) : cfg_(cfg) {}

  const std::vector<ContactTrajectoryAction>& actions() const { return actions_; }
  int size() const { return static_cast<int>(actions_.size()); }
  bool empty() const { return actions_.empty(); }
  const ContactTrajectoryAction& at(int id) const { return actions_.at(id); }
  const ActionSetConfig& config() const { return cfg_; }

  /// Appends the next action of the force ladder; throws "action space
  /// exhausted" past the force ceiling.
  const ContactTrajectoryAction& grow();

 private:
  ActionSetConfig cfg_;
  std::vector<ContactTrajectoryAction> actions_;
};

struct QHyperparams {
  double alpha = 0.5;     // learning rate
  double gamma = 0.3;     // discount
  double eps_grow = 0.8;  // exploration bias toward growing the action set
};

/// State-action value table for one (stiffness cluster, skill) pair. Rows
/// are object-state labels; columns follow the action set and grow with it.
class QTable {
 public:
  QTable(int cluster_id = 0, SkillClass skill = SkillClass::MoveWithContact, QHyperparams hp = {});

  int cluster_id() const { return cluster_id_; }
  SkillClass skill() const { return skill_; }
  const QHyperparams& hyperparams() const { return hp_; }

  int action_count() const { return action_count_; }
  void set_action_count(int n);  // new columns initialize to 0

  double value(const std::string& state, int action) const;
  double max_value(const std::string& state) const;           // over existing actions, 0 when none
  int argmax(const std::string& state) const;                 // ties resolve to the lowest action id

  /// The Bellman update, exactly:
  /// Q(s,a) += alpha * (r + gamma * max_a' Q(s',a') - Q(s,a)).
  void update(const std::string& state, int action, double r, const std::string& next_state);

  /// Update with an explicit learning rate (decaying-alpha schedules).
  void update_with_alpha(const std::string& state, int action, double r, const std::string& next_state,
                         double alpha);

  /// Direct assignment, used when restoring a persisted table.
  void set_value(const std::string& state, int action, double v);

  std::string serialize(const ActionSet& actions) const;
  uint64_t content_hash(const ActionSet& actions) const { return fnv1a64(serialize(actions)); }

  const std::map<std::string, std::vector<double>>& rows() const { return rows_; }

 private:
  int cluster_id_ = 0;
  SkillClass skill_ = SkillClass::MoveWithContact;
  QHyperparams hp_;
  int action_count_ = 0;
  std::map<std::string, std::vector<double>> rows_;

  std::vector<double>& row(const std::string& state);
};

struct GrowRequest {};
using ActionChoice = std::variant<int, GrowRequest>;

enum class SelectMode { Exploit, Explore };

/// Exploit: argmax over existing actions (GrowRequest when none exist yet).
/// Explore: GrowRequest with probability eps_grow, otherwise a uniformly
/// random existing action.
ActionChoice select_action(const QTable& table, const std::string& state, const ActionSet& actions,
                           SelectMode mode, std::mt19937_64& rng);

/// 1-D k-means over class stiffness values (Lloyd iterations seeded at the
/// extremes). Equidistant assignments take the lower center.
class StiffnessClusterer {
 public:
  void fit(std::vector<double> values, int k = 2);
  bool fitted() const { return fitted_; }
  int cluster_for(double stiffness) const;  // throws when unfitted
  const std::vector<double>& centers() const { return centers_; }

 private:
  std::vector<double> centers_;
  bool fitted_ = false;
};

struct EpisodeRecord {
  int episode = 0;
  int action_id = -1;
  double force = 0.0;
  double reward = 0.0;
  bool success = false;
  std::string state_after;
};

struct LearningReport {
  bool success = false;
  int cluster_id = -1;
  uint64_t seed = 0;
  int action_set_size = 0;
  std::vector<EpisodeRecord> episodes;
  std::string note;
};

/// Persisted Q tables and action sets, one entry per (cluster, skill).
class QStore {
 public:
  struct Entry {
    QTable table;
    ActionSet actions;
  };

  Entry& entry(int cluster_id, SkillClass skill, const QHyperparams& hp, const ActionSetConfig& acfg);
  const Entry* find(int cluster_id, SkillClass skill) const;
  std::map<std::pair<int, SkillClass>, Entry>& entries() { return entries_; }

  void save(const std::string& dir) const;
  static QStore load(const std::string& dir, const QHyperparams& hp, const ActionSetConfig& acfg);

 private:
  std::map<std::pair<int, SkillClass>, Entry> entries_;
};

struct LearnerConfig {
  RewardConfig rewards{};
  QHyperparams hp{};
  ActionSetConfig actions{};
  int max_episodes = 50;
  uint64_t rng_seed = 0;
};

using EnvFactory = std::function<Environment()>;

/// Greedy-towards-skill-goal self-evaluation loop: each episode exploits a
/// positively valued action when one exists; when every known action has
/// been penalized the action set grows by the force increment (new actions
/// run immediately); otherwise the eps-biased exploration applies. The
/// table updates after every attempt and the loop stops at the first
/// episode that reaches the goal state.
LearningReport learn_until_success(const Policy& policy, const EnvFactory& env_factory,
                                   SkillExecutor& executor, QStore& store,
                                   const StiffnessClusterer& clusterer, const LearnerConfig& cfg);

void save_report(const LearningReport& report, const std::string& path);
LearningReport load_report(const std::string& path);
std::string report_csv(const LearningReport& report);

}  // namespace lfd
