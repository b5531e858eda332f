#include "lfd/qlearning.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace lfd {

double reward(const std::string& state, const std::string& next_state, const std::string& goal_state,
              const RewardConfig& cfg) {
  (void)state;
  return next_state == goal_state ? cfg.goal_reward : -cfg.penalty;
}

const ContactTrajectoryAction& ActionSet::grow() {
  const int k = static_cast<int>(actions_.size());
  const double force = cfg_.base_force + k * cfg_.increment;
  if (force > cfg_.ceiling) throw Error("action space exhausted: next force " + fmt_g17(force) +
                                        " N exceeds the ceiling " + fmt_g17(cfg_.ceiling) + " N");
  actions_.push_back({k, force});
  return actions_.back();
}

QTable::QTable(int cluster_id, SkillClass skill, QHyperparams hp)
    : cluster_id_(cluster_id), skill_(skill), hp_(hp) {}

std::vector<double>& QTable::row(const std::string& state) {
  auto& r = rows_[state];
  if (static_cast<int>(r.size()) < action_count_) r.resize(action_count_, 0.0);
  return r;
}

void QTable::set_action_count(int n) {
  if (n < action_count_) throw Error("q table cannot shrink its action axis");
  action_count_ = n;
  for (auto& [state, r] : rows_) r.resize(action_count_, 0.0);
}

double QTable::value(const std::string& state, int action) const {
  auto it = rows_.find(state);
  if (it == rows_.end() || action >= static_cast<int>(it->second.size())) return 0.0;
  return it->second[action];
}

double QTable::max_value(const std::string& state) const {
  double best = 0.0;
  bool first = true;
  for (int a = 0; a < action_count_; ++a) {
    const double v = value(state, a);
    if (first || v > best) best = v;
    first = false;
  }
  return first ? 0.0 : best;
}

int QTable::argmax(const std::string& state) const {
  if (action_count_ == 0) throw Error("argmax over an empty action axis");
  int best = 0;
  double best_v = value(state, 0);
  for (int a = 1; a < action_count_; ++a) {
    const double v = value(state, a);
    if (v > best_v) {  // strict: ties keep the lowest action id
      best_v = v;
      best = a;
    }
  }
  return best;
}

void QTable::update(const std::string& state, int action, double r, const std::string& next_state) {
  update_with_alpha(state, action, r, next_state, hp_.alpha);
}

void QTable::update_with_alpha(const std::string& state, int action, double r,
                               const std::string& next_state, double alpha) {
  if (!std::isfinite(r)) throw Error("q update rejected: non-finite reward");
  if (action < 0 || action >= action_count_) throw Error("q update rejected: unknown action id");
  const double max_next = max_value(next_state);
  auto& q = row(state);
  q[action] += alpha * (r + hp_.gamma * max_next - q[action]);
}

void QTable::set_value(const std::string& state, int action, double v) {
  if (action < 0 || action >= action_count_) throw Error("q table has no action " + std::to_string(action));
  row(state)[action] = v;
}

std::string QTable::serialize(const ActionSet& actions) const {
  std::ostringstream out;
  out << "# lfd-qtable v1\n";
  out << "cluster " << cluster_id_ << "\n";
  out << "skill " << to_string(skill_) << "\n";
  out << "alpha " << fmt_g17(hp_.alpha) << "\n";
  out << "gamma " << fmt_g17(hp_.gamma) << "\n";
  out << "eps_grow " << fmt_g17(hp_.eps_grow) << "\n";
  out << "base_force " << fmt_g17(actions.config().base_force) << "\n";
  out << "increment " << fmt_g17(actions.config().increment) << "\n";
  out << "ceiling " << fmt_g17(actions.config().ceiling) << "\n";
  out << "actions " << actions.size() << "\n";
  for (const auto& a : actions.actions())
    out << "action " << a.action_id << " " << fmt_g17(a.target_force) << "\n";
  for (const auto& [state, r] : rows_) {
    out << "state " << state;
    for (int a = 0; a < action_count_; ++a) out << " " << fmt_g17(a < static_cast<int>(r.size()) ? r[a] : 0.0);
    out << "\n";
  }
  return out.str();
}

ActionChoice select_action(const QTable& table, const std::string& state, const ActionSet& actions,
                           SelectMode mode, std::mt19937_64& rng) {
  if (mode == SelectMode::Exploit) {
    if (actions.empty()) return GrowRequest{};  // bootstrap from the baseline trajectory
    return table.argmax(state);
  }
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (actions.empty() || coin(rng) < table.hyperparams().eps_grow) return GrowRequest{};
  std::uniform_int_distribution<int> pick(0, actions.size() - 1);
  return pick(rng);
}

void StiffnessClusterer::fit(std::vector<double> values, int k) {
  if (values.empty() || k < 1) throw Error("stiffness clusterer needs data and k >= 1");
  std::sort(values.begin(), values.end());
  centers_.assign(k, values.front());
  for (int i = 0; i < k; ++i)
    centers_[i] = values[static_cast<size_t>(std::round(static_cast<double>(i) * (values.size() - 1) /
                                                        std::max(1, k - 1)))];
  for (int iter = 0; iter < 100; ++iter) {
    std::vector<double> sums(k, 0.0);
    std::vector<int> counts(k, 0);
    for (double v : values) {
      int best = 0;
      for (int c = 1; c < k; ++c)
        if (std::abs(v - centers_[c]) < std::abs(v - centers_[best])) best = c;
      sums[best] += v;
      counts[best]++;
    }
    std::vector<double> next = centers_;
    for (int c = 0; c < k; ++c)
      if (counts[c] > 0) next[c] = sums[c] / counts[c];
    std::sort(next.begin(), next.end());
    if (next == centers_) break;
    centers_ = next;
  }
  fitted_ = true;
}

int StiffnessClusterer::cluster_for(double stiffness) const {
  if (!fitted_) throw Error("stiffness clusterer not fitted");
  int best = 0;
  for (size_t c = 1; c < centers_.size(); ++c)
    if (std::abs(stiffness - centers_[c]) < std::abs(stiffness - centers_[best]))
      best = static_cast<int>(c);
  return best;  // ties keep the lower center
}

QStore::Entry& QStore::entry(int cluster_id, SkillClass skill, const QHyperparams& hp,
                             const ActionSetConfig& acfg) {
  auto key = std::make_pair(cluster_id, skill);
  auto it = entries_.find(key);
  if (it == entries_.end()) {
    Entry e{QTable(cluster_id, skill, hp), ActionSet(acfg)};
    it = entries_.emplace(key, std::move(e)).first;
  }
  return it->second;
}

const QStore::Entry* QStore::find(int cluster_id, SkillClass skill) const {
  auto it = entries_.find({cluster_id, skill});
  return it == entries_.end() ? nullptr : &it->second;
}

void QStore::save(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  for (const auto& [key, entry] : entries_) {
    const std::string path =
        dir + "/q_c" + std::to_string(key.first) + "_" + to_string(key.second) + ".qt";
    std::ofstream out(path);
    if (!out) throw Error("cannot write q table '" + path + "'");
    out << entry.table.serialize(entry.actions);
  }
}

QStore QStore::load(const std::string& dir, const QHyperparams& hp, const ActionSetConfig& acfg) {
  QStore store;
  if (!std::filesystem::is_directory(dir)) return store;
  std::vector<std::string> paths;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.path().extension() == ".qt") paths.push_back(e.path().string());
  std::sort(paths.begin(), paths.end());
  for (const auto& path : paths) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open q table '" + path + "'");
    int cluster = 0, action_count = 0;
    SkillClass skill = SkillClass::MoveWithContact;
    QHyperparams file_hp = hp;
    ActionSetConfig file_acfg = acfg;
    std::vector<std::pair<std::string, std::vector<double>>> states;
    std::vector<double> forces;
    std::string line;
    while (std::getline(in, line)) {
      const std::string body = trim(line);
      if (body.empty() || body[0] == '#') continue;
      const auto toks = split_ws(body);
      if (toks[0] == "cluster") cluster = std::stoi(toks[1]);
      else if (toks[0] == "skill") {
        auto s = skill_from_string(toks[1]);
        if (!s) throw Error(path + ": unknown skill '" + toks[1] + "'");
        skill = *s;
      } else if (toks[0] == "alpha") file_hp.alpha = std::stod(toks[1]);
      else if (toks[0] == "gamma") file_hp.gamma = std::stod(toks[1]);
      else if (toks[0] == "eps_grow") file_hp.eps_grow = std::stod(toks[1]);
      else if (toks[0] == "base_force") file_acfg.base_force = std::stod(toks[1]);
      else if (toks[0] == "increment") file_acfg.increment = std::stod(toks[1]);
      else if (toks[0] == "ceiling") file_acfg.ceiling = std::stod(toks[1]);
      else if (toks[0] == "actions") action_count = std::stoi(toks[1]);
      else if (toks[0] == "action") forces.push_back(std::stod(toks[2]));
      else if (toks[0] == "state") {
        std::vector<double> vals;
        for (size_t i = 2; i < toks.size(); ++i) vals.push_back(std::stod(toks[i]));
        states.emplace_back(toks[1], std::move(vals));
      }
    }
    if (static_cast<int>(forces.size()) != action_count)
      throw Error(path + ": action count mismatch");
    Entry entry{QTable(cluster, skill, file_hp), ActionSet(file_acfg)};
    for (int i = 0; i < action_count; ++i) entry.actions.grow();
    entry.table.set_action_count(action_count);
    for (auto& [state, vals] : states)
      for (int a = 0; a < static_cast<int>(vals.size()); ++a) entry.table.set_value(state, a, vals[a]);
    store.entries_.emplace(std::make_pair(cluster, skill), std::move(entry));
  }
  return store;
}

LearningReport learn_until_success(const Policy& policy, const EnvFactory& env_factory,
                                   SkillExecutor& executor, QStore& store,
                                   const StiffnessClusterer& clusterer, const LearnerConfig& cfg) {
  LearningReport report;
  report.seed = cfg.rng_seed;

  std::vector<size_t> force_steps;
  for (size_t i = 0; i < policy.steps.size(); ++i)
    if (policy.steps[i].skill == SkillClass::MoveWithContact) force_steps.push_back(i);

  if (force_steps.empty()) {
    Environment env = env_factory();
    const auto outcomes = executor.execute_policy(policy, env);
    report.success = outcomes.size() == policy.steps.size() &&
                     std::all_of(outcomes.begin(), outcomes.end(),
                                 [](const SkillOutcome& o) { return o.success; });
    return report;
  }

  const PolicyStep& tuned = policy.steps[force_steps.front()];
  const std::string goal = tuned.goal_state.label;

  Environment probe = env_factory();
  const int cluster = clusterer.cluster_for(probe.object(tuned.object_id).stiffness);
  report.cluster_id = cluster;
  auto& entry = store.entry(cluster, SkillClass::MoveWithContact, cfg.hp, cfg.actions);

  std::mt19937_64 rng(cfg.rng_seed);
  for (int ep = 1; ep <= cfg.max_episodes; ++ep) {
    Environment env = env_factory();
    const std::string s0 = env.detect_state(tuned.object_id).label;

    ActionChoice choice;
    if (entry.actions.empty()) {
      choice = GrowRequest{};  // bootstrap the first action from the baseline trajectory
    } else {
      const double best = entry.table.max_value(s0);
      if (best > 0.0) {
        choice = select_action(entry.table, s0, entry.actions, SelectMode::Exploit, rng);
      } else if (best < 0.0) {
        // Every known action has been penalized: grow the ladder.
        choice = GrowRequest{};
      } else {
        choice = select_action(entry.table, s0, entry.actions, SelectMode::Explore, rng);
      }
    }

    int action_id;
    if (std::holds_alternative<GrowRequest>(choice)) {
      try {
        action_id = entry.actions.grow().action_id;
      } catch (const Error& e) {
        report.note = e.what();
        break;
      }
      entry.table.set_action_count(entry.actions.size());
    } else {
      action_id = std::get<int>(choice);
    }
    const ContactTrajectoryAction action = entry.actions.at(action_id);

    std::map<size_t, ContactTrajectoryAction> bindings;
    for (size_t idx : force_steps) bindings[idx] = action;
    executor.execute_policy(policy, env, bindings);

    const std::string s1 = env.detect_state(tuned.object_id).label;
    const double r = reward(s0, s1, goal, cfg.rewards);
    entry.table.update(s0, action_id, r, s1);

    EpisodeRecord rec;
    rec.episode = ep;
    rec.action_id = action_id;
    rec.force = action.target_force;
    rec.reward = r;
    rec.success = s1 == goal;
    rec.state_after = s1;
    report.episodes.push_back(rec);

    if (rec.success) {
      report.success = true;  // greedy-towards-skill-goal: stop at first success
      break;
    }
  }
  report.action_set_size = entry.actions.size();
  return report;
}

void save_report(const LearningReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write learning report '" + path + "'");
  out << "# lfd-learn-report v1\n";
  out << "success " << (report.success ? 1 : 0) << "\n";
  out << "cluster " << report.cluster_id << "\n";
  out << "seed " << report.seed << "\n";
  out << "action_set " << report.action_set_size << "\n";
  if (!report.note.empty()) out << "note " << report.note << "\n";
  for (const auto& e : report.episodes) {
    out << "episode " << e.episode << " action " << e.action_id << " force " << fmt_g17(e.force)
        << " reward " << fmt_g17(e.reward) << " outcome " << (e.success ? "success" : "fail")
        << " state " << e.state_after << "\n";
  }
}

LearningReport load_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open learning report '" + path + "'");
  LearningReport report;
  std::string line;
  while (std::getline(in, line)) {
    const std::string body = trim(line);
    if (body.empty() || body[0] == '#') continue;
    const auto toks = split_ws(body);
    if (toks[0] == "success") report.success = toks[1] == "1";
    else if (toks[0] == "cluster") report.cluster_id = std::stoi(toks[1]);
    else if (toks[0] == "seed") report.seed = std::stoull(toks[1]);
    else if (toks[0] == "action_set") report.action_set_size = std::stoi(toks[1]);
    else if (toks[0] == "note") report.note = body.substr(5);
    else if (toks[0] == "episode" && toks.size() >= 12) {
      EpisodeRecord e;
      e.episode = std::stoi(toks[1]);
      e.action_id = std::stoi(toks[3]);
      e.force = std::stod(toks[5]);
      e.reward = std::stod(toks[7]);
      e.success = toks[9] == "success";
      e.state_after = toks[11];
      report.episodes.push_back(e);
    }
  }
  return report;
}

std::string report_csv(const LearningReport& report) {
  std::ostringstream out;
  out << "episode,action_id,force,reward,outcome\n";
  for (const auto& e : report.episodes) {
    out << e.episode << "," << e.action_id << "," << fmt_g17(e.force) << "," << fmt_g17(e.reward) << ","
        << (e.success ? "success" : "fail") << "\n";
  }
  return out.str();
}

}  // namespace lfd
