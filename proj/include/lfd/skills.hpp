#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lfd/pik.hpp"
#include "lfd/trace.hpp"

namespace lfd {

enum class SkillClass {
  Approach,
  Grasp,
  Transport,
  Retract,
  Scoop,
  Unscoop,
  GuardedMove,
  VisualServoing,
  MoveWithContact,
  MoveToContact,
};

inline constexpr int kSkillClassCount = 10;

std::string to_string(SkillClass c);
std::optional<SkillClass> skill_from_string(const std::string& name);

/// Force-based skills run the impedance controller; the rest are positional.
bool is_force_based(SkillClass c);

/// The classification features: the two contact bits, the relative-motion
/// step, the previous segment's class, and the object id.
struct SegmentFeatureVector {
  int phi = 0;
  int psi = 0;
  int uX = 0;
  std::optional<SkillClass> prev_class;
  int object_id = 0;
};

SegmentFeatureVector features_of(const Segment& seg, std::optional<SkillClass> prev_class);

struct LabeledExample {
  SegmentFeatureVector features;
  SkillClass label;
};

/// The skill-labeling table: canonical feature vectors per class plus
/// jittered copies (alternate previous-class values, varied object ids).
/// The shipped config/skill_labels.json carries the same rows; pass a
/// custom file to `infer --skill-table` to relabel without a code change.
std::vector<LabeledExample> builtin_training_set();

std::vector<LabeledExample> load_training_set(const std::string& path);
void save_training_set(const std::vector<LabeledExample>& rows, const std::string& path);

/// Binary decision tree trained by top-down induction with information-gain
/// splits. Deterministic: equal-gain ties resolve to the lower feature
/// index, then the lower split value.
class DecisionTree {
 public:
  static DecisionTree train(const std::vector<LabeledExample>& dataset);

  SkillClass classify(const SegmentFeatureVector& features) const;

  double training_accuracy() const { return training_accuracy_; }
  int node_count() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    bool leaf = false;
    SkillClass label = SkillClass::Approach;
    int feature = 0;       // 0 psi, 1 phi, 2 uX, 3 prev_class, 4 object_id
    double split = 0.0;    // equality value (features 0-3) or threshold (feature 4)
    int yes = -1, no = -1;
  };
  std::vector<Node> nodes_;
  double training_accuracy_ = 0.0;

  int build(std::vector<int>& rows, const std::vector<LabeledExample>& data);
};

enum class TransitionRule { Direct, BridgeMoveToContact };

/// Pairwise skill-chaining rules. The builtin table is total: entering a
/// contact-holding skill (MoveWithContact, Grasp) from a positional skill
/// requires a MoveToContact bridge; every other pair chains directly.
class TransitionTable {
 public:
  static TransitionTable builtin();
  static TransitionTable empty() { return TransitionTable(); }

  void set(SkillClass from, SkillClass to, TransitionRule rule);
  TransitionRule lookup(SkillClass from, SkillClass to) const;  // throws on unknown pairs

 private:
  std::map<std::pair<SkillClass, SkillClass>, TransitionRule> rules_;
};

struct PolicyStep {
  SkillClass skill = SkillClass::Approach;
  ObjectState goal_state;
  std::optional<size_t> segment_index;  // nullopt: transition-inserted
  int object_id = -1;
  int start_frame = 0;
  int end_frame = 0;

  // Execution anchors derived from the demonstration (not persisted in the
  // policy file; recomputed from the trace).
  Vec3 exec_target{Vec3::Zero()};
  std::vector<Vec3> exec_path;
};

struct Policy {
  std::vector<PolicyStep> steps;
  std::string trace_path;
};

/// Classifies segments in order, feeding each classification back as the
/// next segment's previous-class feature.
std::vector<SkillClass> classify_segments(const DecisionTree& tree, const std::vector<Segment>& segments);

/// Inserts bridge skills required by the transition table. Inserted steps
/// carry no segment. Idempotent.
std::vector<std::pair<SkillClass, std::optional<size_t>>> insert_transitions(
    const std::vector<std::pair<SkillClass, size_t>>& classified,
    const TransitionTable& table = TransitionTable::builtin());

/// Full inference: classify, insert transitions, attach goal states (the
/// demonstrated object state at each segment's final frame; for inserted
/// steps the state at the beginning of the following segment).
Policy build_policy(const DemonstrationTrace& trace, const std::vector<Segment>& segments,
                    const DecisionTree& tree, const ObjectDatabase& db,
                    const TransitionTable& table = TransitionTable::builtin());

/// Fills each step's execution anchors from the demonstration: contact
/// skills get the recorded tip path over their segment, positional skills
/// the tip pose at segment end (approaches ahead of a contact stop just
/// short of the upcoming press point).
void attach_execution_refs(Policy& policy, const DemonstrationTrace& trace,
                           const ContactParams& params);

void save_policy(const Policy& policy, const std::string& path);
Policy load_policy(const std::string& path);

}  // namespace lfd
