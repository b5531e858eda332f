#include "lfd/skills.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace lfd {

namespace {

constexpr int kPrevNone = kSkillClassCount;  // categorical slot for "no previous class"

const char* kSkillNames[kSkillClassCount] = {
    "Approach", "Grasp",       "Transport",      "Retract",         "Scoop",
    "Unscoop",  "GuardedMove", "VisualServoing", "MoveWithContact", "MoveToContact",
};

double feature_value(const SegmentFeatureVector& fv, int feature) {
  switch (feature) {
    case 0: return fv.psi;
    case 1: return fv.phi;
    case 2: return fv.uX;
    case 3: return fv.prev_class ? static_cast<double>(*fv.prev_class) : kPrevNone;
    default: return fv.object_id;
  }
}

bool test_passes(const SegmentFeatureVector& fv, int feature, double split) {
  if (feature == 4) return feature_value(fv, feature) <= split;
  return feature_value(fv, feature) == split;
}

double entropy(const std::map<SkillClass, int>& counts, int total) {
  double h = 0.0;
  for (const auto& [cls, c] : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / total;
    h -= p * std::log2(p);
  }
  return h;
}

}  // namespace

std::string to_string(SkillClass c) { return kSkillNames[static_cast<int>(c)]; }

std::optional<SkillClass> skill_from_string(const std::string& name) {
  for (int i = 0; i < kSkillClassCount; ++i)
    if (name == kSkillNames[i]) return static_cast<SkillClass>(i);
  return std::nullopt;
}

bool is_force_based(SkillClass c) {
  switch (c) {
    case SkillClass::MoveToContact:
    case SkillClass::MoveWithContact:
    case SkillClass::GuardedMove:
    case SkillClass::Grasp:
      return true;
    default:
      return false;
  }
}

SegmentFeatureVector features_of(const Segment& seg, std::optional<SkillClass> prev_class) {
  SegmentFeatureVector fv;
  fv.phi = seg.phi;
  fv.psi = seg.psi;
  fv.uX = seg.uX;
  fv.prev_class = prev_class;
  fv.object_id = seg.interacting_object_id;
  return fv;
}

std::vector<LabeledExample> builtin_training_set() {
  using S = SkillClass;
  struct Row {
    int psi, phi, uX;
    S label;
    std::vector<std::optional<S>> prevs;
  };
  const std::optional<S> none = std::nullopt;
  const std::vector<Row> rows = {
      {0, 0, 0, S::Approach, {none, S::Retract, S::Transport, S::Unscoop}},
      {0, 0, 0, S::MoveToContact, {S::Approach, S::GuardedMove}},
      {0, 0, 0, S::GuardedMove, {S::VisualServoing}},
      {0, 0, 1, S::VisualServoing, {none, S::Approach}},
      {0, 0, 1, S::Retract,
       {S::MoveWithContact, S::Grasp, S::Scoop, S::Unscoop, S::Transport, S::MoveToContact}},
      {1, 0, 0, S::Grasp, {S::Approach, S::MoveToContact}},
      {1, 0, 1, S::MoveWithContact, {S::MoveToContact, S::Approach, S::GuardedMove, S::MoveWithContact}},
      {1, 0, 1, S::Transport, {S::Grasp}},
      {1, 1, 0, S::Scoop, {S::MoveToContact, S::Transport, S::MoveWithContact}},
      {1, 1, 1, S::Unscoop, {S::Scoop}},
  };
  std::vector<LabeledExample> out;
  for (const auto& row : rows) {
    for (const auto& prev : row.prevs) {
      for (int object_id : {0, 1, 7}) {
        SegmentFeatureVector fv;
        fv.psi = row.psi;
        fv.phi = row.phi;
        fv.uX = row.uX;
        fv.prev_class = prev;
        fv.object_id = object_id;
        out.push_back({fv, row.label});
      }
    }
  }
  return out;
}

std::vector<LabeledExample> load_training_set(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open skill table '" + path + "'");
  nlohmann::json doc = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
  std::vector<LabeledExample> out;
  for (const auto& row : doc.at("rows")) {
    LabeledExample ex;
    ex.features.psi = row.at("psi").get<int>();
    ex.features.phi = row.at("phi").get<int>();
    ex.features.uX = row.at("uX").get<int>();
    ex.features.object_id = row.at("object_id").get<int>();
    const std::string prev = row.at("prev").get<std::string>();
    if (prev != "None") {
      auto cls = skill_from_string(prev);
      if (!cls) throw Error("skill table '" + path + "': unknown class '" + prev + "'");
      ex.features.prev_class = *cls;
    }
    auto label = skill_from_string(row.at("label").get<std::string>());
    if (!label) throw Error("skill table '" + path + "': unknown label");
    ex.label = *label;
    out.push_back(ex);
  }
  return out;
}

void save_training_set(const std::vector<LabeledExample>& rows, const std::string& path) {
  nlohmann::json doc;
  doc["rows"] = nlohmann::json::array();
  for (const auto& ex : rows) {
    nlohmann::json row;
    row["psi"] = ex.features.psi;
    row["phi"] = ex.features.phi;
    row["uX"] = ex.features.uX;
    row["prev"] = ex.features.prev_class ? to_string(*ex.features.prev_class) : "None";
    row["object_id"] = ex.features.object_id;
    row["label"] = to_string(ex.label);
    doc["rows"].push_back(row);
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write skill table '" + path + "'");
  out << doc.dump(2) << "\n";
}

int DecisionTree::build(std::vector<int>& rows, const std::vector<LabeledExample>& data) {
  std::map<SkillClass, int> counts;
  for (int r : rows) counts[data[r].label]++;
  if (counts.size() == 1) {
    Node leaf;
    leaf.leaf = true;
    leaf.label = data[rows.front()].label;
    nodes_.push_back(leaf);
    return static_cast<int>(nodes_.size()) - 1;
  }

  // Candidate tests: equality on psi/phi/uX/prev, thresholds between
  // consecutive object ids.
  struct Candidate {
    int feature;
    double split;
  };
  std::vector<Candidate> candidates;
  for (int feature = 0; feature < 5; ++feature) {
    std::set<double> values;
    for (int r : rows) values.insert(feature_value(data[r].features, feature));
    if (values.size() < 2 && feature != 3) continue;
    if (feature == 4) {
      double prev = 0.0;
      bool first = true;
      for (double v : values) {
        if (!first) candidates.push_back({4, (prev + v) / 2.0});
        prev = v;
        first = false;
      }
    } else if (feature == 3) {
      if (values.size() < 2) continue;
      for (double v : values) candidates.push_back({3, v});
    } else {
      candidates.push_back({feature, 1.0});
    }
  }

  const double parent_h = entropy(counts, static_cast<int>(rows.size()));
  double best_gain = 0.0;
  const Candidate* best = nullptr;
  const Candidate* fallback = nullptr;  // any separating test, for zero-gain splits
  for (const auto& cand : candidates) {
    std::map<SkillClass, int> yes_counts, no_counts;
    int yes_n = 0, no_n = 0;
    for (int r : rows) {
      if (test_passes(data[r].features, cand.feature, cand.split)) {
        yes_counts[data[r].label]++;
        ++yes_n;
      } else {
        no_counts[data[r].label]++;
        ++no_n;
      }
    }
    if (yes_n == 0 || no_n == 0) continue;
    if (!fallback) fallback = &cand;
    const double gain = parent_h - (yes_n * entropy(yes_counts, yes_n) + no_n * entropy(no_counts, no_n)) /
                                       static_cast<double>(rows.size());
    if (gain > best_gain + 1e-12) {
      best_gain = gain;
      best = &cand;
    }
  }
  if (!best) best = fallback;
  if (!best) {
    // Identical feature vectors with diverging labels.
    std::string labels;
    for (const auto& [cls, c] : counts) labels += (labels.empty() ? "" : ", ") + to_string(cls);
    const auto& fv = data[rows.front()].features;
    throw Error("contradictory labels {" + labels + "} for features psi=" + std::to_string(fv.psi) +
                " phi=" + std::to_string(fv.phi) + " uX=" + std::to_string(fv.uX) + " prev=" +
                (fv.prev_class ? to_string(*fv.prev_class) : "None") +
                " object_id=" + std::to_string(fv.object_id));
  }

  std::vector<int> yes_rows, no_rows;
  for (int r : rows)
    (test_passes(data[r].features, best->feature, best->split) ? yes_rows : no_rows).push_back(r);

  Node node;
  node.feature = best->feature;
  node.split = best->split;
  nodes_.push_back(node);
  const int index = static_cast<int>(nodes_.size()) - 1;
  const int yes = build(yes_rows, data);
  const int no = build(no_rows, data);
  nodes_[index].yes = yes;
  nodes_[index].no = no;
  return index;
}

DecisionTree DecisionTree::train(const std::vector<LabeledExample>& dataset) {
  if (dataset.empty()) throw Error("decision tree: empty training set");
  DecisionTree tree;
  std::vector<int> rows(dataset.size());
  for (size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<int>(i);
  tree.build(rows, dataset);

  int correct = 0;
  for (const auto& ex : dataset) correct += tree.classify(ex.features) == ex.label;
  tree.training_accuracy_ = static_cast<double>(correct) / dataset.size();
  return tree;
}

SkillClass DecisionTree::classify(const SegmentFeatureVector& features) const {
  int at = 0;
  while (!nodes_[at].leaf)
    at = test_passes(features, nodes_[at].feature, nodes_[at].split) ? nodes_[at].yes : nodes_[at].no;
  return nodes_[at].label;
}

TransitionTable TransitionTable::builtin() {
  TransitionTable table;
  for (int from = 0; from < kSkillClassCount; ++from) {
    for (int to = 0; to < kSkillClassCount; ++to) {
      const auto f = static_cast<SkillClass>(from);
      const auto t = static_cast<SkillClass>(to);
      const bool needs_contact = t == SkillClass::MoveWithContact || t == SkillClass::Grasp;
      table.set(f, t, needs_contact && !is_force_based(f) ? TransitionRule::BridgeMoveToContact
                                                          : TransitionRule::Direct);
    }
  }
  return table;
}

void TransitionTable::set(SkillClass from, SkillClass to, TransitionRule rule) {
  rules_[{from, to}] = rule;
}

TransitionRule TransitionTable::lookup(SkillClass from, SkillClass to) const {
  auto it = rules_.find({from, to});
  if (it == rules_.end())
    throw Error("no transition rule for pair (" + to_string(from) + ", " + to_string(to) + ")");
  return it->second;
}

std::vector<SkillClass> classify_segments(const DecisionTree& tree, const std::vector<Segment>& segments) {
  std::vector<SkillClass> out;
  std::optional<SkillClass> prev;
  for (const auto& seg : segments) {
    out.push_back(tree.classify(features_of(seg, prev)));
    prev = out.back();
  }
  return out;
}

std::vector<std::pair<SkillClass, std::optional<size_t>>> insert_transitions(
    const std::vector<std::pair<SkillClass, size_t>>& classified, const TransitionTable& table) {
  if (classified.empty()) throw Error("insert_transitions: empty skill sequence");
  std::vector<std::pair<SkillClass, std::optional<size_t>>> out;
  out.emplace_back(classified.front().first, classified.front().second);
  for (size_t i = 1; i < classified.size(); ++i) {
    if (table.lookup(classified[i - 1].first, classified[i].first) == TransitionRule::BridgeMoveToContact)
      out.emplace_back(SkillClass::MoveToContact, std::nullopt);
    out.emplace_back(classified[i].first, classified[i].second);
  }
  return out;
}

Policy build_policy(const DemonstrationTrace& trace, const std::vector<Segment>& segments,
                    const DecisionTree& tree, const ObjectDatabase& db, const TransitionTable& table) {
  if (segments.empty()) throw Error("build_policy: no segments");
  const auto classes = classify_segments(tree, segments);
  std::vector<std::pair<SkillClass, size_t>> classified;
  for (size_t i = 0; i < classes.size(); ++i) classified.emplace_back(classes[i], i);
  const auto chain = insert_transitions(classified, table);

  Policy policy;
  for (size_t i = 0; i < chain.size(); ++i) {
    PolicyStep step;
    step.skill = chain[i].first;
    if (chain[i].second) {
      const Segment& seg = segments[*chain[i].second];
      step.segment_index = chain[i].second;
      step.object_id = seg.interacting_object_id;
      step.start_frame = seg.start_frame;
      step.end_frame = seg.end_frame;
      step.goal_state = trace.frames[seg.end_frame].find_object(seg.interacting_object_id)->state;
    } else {
      // Transition-inserted: goal is the state at the beginning of the next
      // step's segment.
      if (i + 1 >= chain.size() || !chain[i + 1].second)
        throw Error("build_policy: transition step without a following segment");
      const Segment& next = segments[*chain[i + 1].second];
      step.object_id = next.interacting_object_id;
      step.start_frame = next.start_frame;
      step.end_frame = next.start_frame;
      step.goal_state = trace.frames[next.start_frame].find_object(next.interacting_object_id)->state;
    }
    const auto& labels = db.at(trace.class_of(step.object_id)).state_labels;
    if (std::find(labels.begin(), labels.end(), step.goal_state.label) == labels.end())
      throw Error("goal state '" + step.goal_state.label + "' not admissible for class '" +
                  trace.class_of(step.object_id) + "'");
    policy.steps.push_back(std::move(step));
  }
  return policy;
}

void attach_execution_refs(Policy& policy, const DemonstrationTrace& trace,
                           const ContactParams& params) {
  for (size_t i = 0; i < policy.steps.size(); ++i) {
    PolicyStep& step = policy.steps[i];
    if (step.skill == SkillClass::MoveWithContact && step.segment_index) {
      step.exec_path.clear();
      for (int t = step.start_frame; t <= step.end_frame; ++t)
        step.exec_path.push_back(trace.frames[t].hand_tip);
      step.exec_target = step.exec_path.front();
      continue;
    }
    if (is_force_based(step.skill)) {
      // Press where the upcoming contact trajectory begins.
      const PolicyStep* next = i + 1 < policy.steps.size() ? &policy.steps[i + 1] : nullptr;
      if (next && !next->exec_path.empty()) {
        step.exec_target = next->exec_path.front();
      } else if (next && next->segment_index) {
        step.exec_target = trace.frames[next->start_frame].hand_tip;
      } else {
        step.exec_target = trace.frames[step.start_frame].hand_tip;
      }
      continue;
    }
    // Positional skill: go to the demonstrated tip pose at segment end; an
    // approach feeding a contact stops just short of the press point.
    const PolicyStep* next = i + 1 < policy.steps.size() ? &policy.steps[i + 1] : nullptr;
    if (next && is_force_based(next->skill)) {
      const Vec3 press = trace.frames[next->start_frame].hand_tip;
      step.exec_target = press + Vec3(0, 0, params.contact_distance / 2.0);
    } else {
      step.exec_target = trace.frames[step.end_frame].hand_tip;
    }
  }
  // Second pass so force steps placed before their successor's path was
  // filled see the final values.
  for (size_t i = 0; i + 1 < policy.steps.size(); ++i) {
    PolicyStep& step = policy.steps[i];
    const PolicyStep& next = policy.steps[i + 1];
    if (is_force_based(step.skill) && step.skill != SkillClass::MoveWithContact &&
        !next.exec_path.empty())
      step.exec_target = next.exec_path.front();
  }
}

void save_policy(const Policy& policy, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write policy file '" + path + "'");
  out << "# lfd-policy v1\n";
  out << "trace " << policy.trace_path << "\n";
  for (const auto& step : policy.steps) {
    out << "step " << to_string(step.skill) << " " << step.goal_state.label << " " << step.start_frame
        << " " << step.end_frame << "\n";
  }
  out << "step-objects";
  for (const auto& step : policy.steps) out << " " << step.object_id;
  out << "\n";
}

Policy load_policy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open policy file '" + path + "'");
  Policy policy;
  std::string line;
  int line_no = 0;
  std::vector<int> step_objects;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = trim(line);
    if (body.empty() || body[0] == '#') continue;
    const auto toks = split_ws(body);
    if (toks[0] == "trace" && toks.size() == 2) {
      policy.trace_path = toks[1];
    } else if (toks[0] == "step" && toks.size() == 5) {
      PolicyStep step;
      auto cls = skill_from_string(toks[1]);
      if (!cls)
        throw Error(path + ":" + std::to_string(line_no) + ": unknown skill class '" + toks[1] + "'");
      step.skill = *cls;
      step.goal_state.label = toks[2];
      step.start_frame = std::stoi(toks[3]);
      step.end_frame = std::stoi(toks[4]);
      if (step.end_frame > step.start_frame) step.segment_index = policy.steps.size();
      policy.steps.push_back(std::move(step));
    } else if (toks[0] == "step-objects") {
      for (size_t i = 1; i < toks.size(); ++i) step_objects.push_back(std::stoi(toks[i]));
    } else {
      throw Error(path + ":" + std::to_string(line_no) + ": unrecognized policy record");
    }
  }
  if (step_objects.size() == policy.steps.size()) {
    for (size_t i = 0; i < step_objects.size(); ++i) policy.steps[i].object_id = step_objects[i];
  }
  return policy;
}

}  // namespace lfd
