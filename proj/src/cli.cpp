#include "lfd/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lfd/environment.hpp"
#include "lfd/qlearning.hpp"
#include "lfd/scenario.hpp"

namespace lfd::cli {

namespace {

namespace fs = std::filesystem;

constexpr const char* kToolVersion = "lfd 0.1.0";

std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot hash missing file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return to_hex(fnv1a64(buf.str()));
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << text;
}

void emit(const std::string& out_path, const std::string& text) {
  if (out_path.empty())
    std::cout << text;
  else
    write_text(out_path, text);
}

// Config resolution: --config, then $LFD_CONFIG, then builtin defaults.
PipelineConfig load_config(const std::string& path) {
  if (!path.empty()) return PipelineConfig::load(path);
  if (const char* env = std::getenv("LFD_CONFIG"); env && *env) return PipelineConfig::load(env);
  return PipelineConfig::defaults();
}

Environment make_env(const ScenarioSpec& scenario, const ObjectDatabase& db,
                     const PipelineConfig& cfg) {
  Environment env = Environment::from_scenario(scenario, db);
  env.set_peel_state_fraction(cfg.peel_state_fraction);
  return env;
}

struct SegmentationResult {
  std::vector<Keypoint> keypoints;
  std::vector<Segment> segments;
};

SegmentationResult segment_trace_file(const std::string& trace_path, const PipelineConfig& cfg,
                                      const ObjectDatabase& db) {
  const DemonstrationTrace trace = load_trace(trace_path, &db);
  SegmentationResult out;
  out.keypoints = detect_keypoints(trace, db, cfg.contact);
  out.segments = segment_trace(trace, db, out.keypoints, cfg.contact);
  return out;
}

Policy infer_policy(const std::string& trace_path, const PipelineConfig& cfg, const ObjectDatabase& db,
                    const std::string& skill_table_path) {
  const DemonstrationTrace trace = load_trace(trace_path, &db);
  const auto keypoints = detect_keypoints(trace, db, cfg.contact);
  const auto segments = segment_trace(trace, db, keypoints, cfg.contact);
  const auto rows = skill_table_path.empty() ? builtin_training_set() : load_training_set(skill_table_path);
  const DecisionTree tree = DecisionTree::train(rows);
  Policy policy = build_policy(trace, segments, tree, db);
  policy.trace_path = trace_path;
  return policy;
}

std::string run_log_csv(const std::vector<SkillOutcome>& outcomes, const Policy& policy, int dof) {
  std::ostringstream out;
  out << "step,skill,tick,x,y,z,force";
  for (int i = 0; i < dof; ++i) out << ",tau" << i;
  out << "\n";
  for (size_t s = 0; s < outcomes.size(); ++s) {
    const auto& o = outcomes[s];
    for (size_t t = 0; t < o.pose_log.size(); ++t) {
      out << s << "," << to_string(policy.steps[s].skill) << "," << t;
      for (int k = 0; k < 3; ++k) out << "," << fmt_g17(o.pose_log[t][k]);
      out << "," << fmt_g17(t < o.force_log.size() ? o.force_log[t] : 0.0);
      for (int i = 0; i < dof; ++i) {
        out << ",";
        if (t < o.torque_log.size()) out << fmt_g17(o.torque_log[t][i]);
      }
      out << "\n";
    }
  }
  return out.str();
}

std::string outcomes_text(const std::vector<SkillOutcome>& outcomes, const Policy& policy) {
  std::ostringstream out;
  out << "# lfd-run v1\n";
  bool all_ok = outcomes.size() == policy.steps.size();
  for (size_t s = 0; s < outcomes.size(); ++s) {
    const auto& o = outcomes[s];
    all_ok &= o.success;
    out << "step " << s << " " << to_string(policy.steps[s].skill) << " "
        << (o.success ? "success" : "failure") << " steps " << o.steps_used << " final "
        << o.final_state.label;
    if (!o.note.empty()) out << " note " << o.note;
    out << "\n";
  }
  out << "result " << (all_ok ? "success" : "failure") << "\n";
  return out.str();
}

struct LearnArtifacts {
  LearningReport report;
  bool success = false;
};

LearnArtifacts do_learn(const std::string& policy_path, const std::string& scenario_name,
                        const std::string& trace_override, const PipelineConfig& cfg,
                        const std::string& qstore_dir, const std::string& report_path) {
  const ObjectDatabase db = ObjectDatabase::builtin();
  Policy policy = load_policy(policy_path);
  const std::string trace_path = trace_override.empty() ? policy.trace_path : trace_override;
  const DemonstrationTrace trace = load_trace(trace_path, &db);
  attach_execution_refs(policy, trace, cfg.contact);

  const ScenarioSpec scenario = resolve_scenario(scenario_name);
  EnvFactory factory = [&]() { return make_env(scenario, db, cfg); };

  StiffnessClusterer clusterer;
  std::vector<double> stiffnesses;
  for (const auto& cls : db.peelable_classes()) stiffnesses.push_back(db.at(cls).stiffness);
  clusterer.fit(stiffnesses, 2);

  SkillExecutor executor(ArmModel(cfg.arm), cfg.gains, cfg.execution);
  QStore store = qstore_dir.empty() ? QStore()
                                    : QStore::load(qstore_dir, cfg.hp, cfg.actions);
  LearnArtifacts out;
  out.report = learn_until_success(policy, factory, executor, store, clusterer, cfg.learner());
  out.success = out.report.success;
  if (!qstore_dir.empty()) store.save(qstore_dir);
  if (!report_path.empty()) save_report(out.report, report_path);
  return out;
}

}  // namespace

std::string segments_text(const std::vector<Keypoint>& keypoints, const std::vector<Segment>& segments) {
  std::ostringstream out;
  out << "# lfd-segments v1\n";
  for (const auto& k : keypoints)
    out << "keypoint " << k.frame << " " << k.feature << " "
        << (k.direction == FlipDirection::Make ? "make" : "break") << "\n";
  for (size_t i = 0; i < segments.size(); ++i) {
    const Segment& s = segments[i];
    out << "segment " << i << " " << s.start_frame << " " << s.end_frame << " psi=" << s.psi
        << " phi=" << s.phi << " uX=" << s.uX << " uY=" << s.uY << " object=" << s.interacting_object_id
        << "\n";
  }
  return out.str();
}

std::string policy_summary(const Policy& policy) {
  std::ostringstream out;
  for (const auto& step : policy.steps)
    out << to_string(step.skill) << " " << step.goal_state.label << " " << step.start_frame << " "
        << step.end_frame << "\n";
  return out.str();
}

int run(int argc, char** argv) {
  CLI::App app{"one-shot learning-from-demonstration pipeline for contact tasks"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path,
                 "pipeline config JSON (falls back to $LFD_CONFIG, then builtin defaults)");

  // gen-trace
  auto* gen = app.add_subcommand("gen-trace", "synthesize a demonstration trace from a scenario");
  std::string gen_scenario, gen_out;
  uint64_t gen_seed = 7;
  gen->add_option("scenario", gen_scenario, "builtin name or scenario JSON path")->required();
  gen->add_option("-o,--out", gen_out, "trace output path")->required();
  gen->add_option("--seed", gen_seed, "generator seed");

  // segment
  auto* seg = app.add_subcommand("segment", "detect keypoints and slice a trace into segments");
  std::string seg_trace, seg_out;
  seg->add_option("trace", seg_trace)->required();
  seg->add_option("--params", config_path, "config file with the contact parameters");
  seg->add_option("-o,--out", seg_out, "output path (stdout when omitted)");

  // infer
  auto* inf = app.add_subcommand("infer", "infer the skill policy from a trace");
  std::string inf_trace, inf_out, inf_table;
  inf->add_option("trace", inf_trace)->required();
  inf->add_option("-o,--out", inf_out, "policy output path (stdout summary when omitted)");
  inf->add_option("--skill-table", inf_table, "custom skill-labeling table JSON");

  // run
  auto* runc = app.add_subcommand("run", "execute a policy in a simulated scenario");
  std::string run_policy, run_env, run_trace, run_log, run_out;
  double run_force = -1.0;
  runc->add_option("policy", run_policy)->required();
  runc->add_option("--env", run_env, "scenario (builtin name or JSON path)")->required();
  runc->add_option("--trace", run_trace, "override the trace path recorded in the policy");
  runc->add_option("--force", run_force, "contact-trajectory target force, N");
  runc->add_option("--log", run_log, "per-step CSV log path");
  runc->add_option("-o,--out", run_out, "outcome summary path (stdout when omitted)");

  // learn
  auto* lrn = app.add_subcommand("learn", "tune contact forces by self-evaluation");
  std::string lrn_policy, lrn_env, lrn_trace, lrn_qstore, lrn_out;
  lrn->add_option("policy", lrn_policy)->required();
  lrn->add_option("scenario", lrn_env)->required();
  lrn->add_option("--trace", lrn_trace, "override the trace path recorded in the policy");
  lrn->add_option("--qstore", lrn_qstore, "directory for persisted Q tables");
  lrn->add_option("-o,--out", lrn_out, "learning report path");

  // report
  auto* rep = app.add_subcommand("report", "render a learning report as CSV");
  std::string rep_in, rep_out;
  rep->add_option("report", rep_in)->required();
  rep->add_option("-o,--out", rep_out, "CSV output path (stdout when omitted)");

  // pipeline
  auto* pipe = app.add_subcommand("pipeline", "segment, infer, execute and learn in one pass");
  std::string pipe_trace, pipe_env, pipe_out_dir;
  pipe->add_option("trace", pipe_trace)->required();
  pipe->add_option("scenario", pipe_env)->required();
  pipe->add_option("--out", pipe_out_dir, "artifact directory")->required();

  // gen-config / gen-skill-table
  auto* gcfg = app.add_subcommand("gen-config", "write the commented default config");
  std::string gcfg_out = "defaults.json";
  gcfg->add_option("-o,--out", gcfg_out);
  auto* gtab = app.add_subcommand("gen-skill-table", "write the builtin skill-labeling table");
  std::string gtab_out = "skill_labels.json";
  gtab->add_option("-o,--out", gtab_out);
  auto* gscn = app.add_subcommand("gen-scenario", "write a builtin scenario as editable JSON");
  std::string gscn_name, gscn_out;
  gscn->add_option("scenario", gscn_name, "builtin scenario name")->required();
  gscn->add_option("-o,--out", gscn_out, "output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const ObjectDatabase db = ObjectDatabase::builtin();

    if (*gen) {
      const ScenarioSpec scenario = resolve_scenario(gen_scenario);
      const SynthesizedDemo demo = synthesize_trace(scenario, gen_seed, &db);
      save_trace(demo.trace, gen_out);
      save_truth(demo.truth, truth_path_for(gen_out));
      std::cout << "wrote " << gen_out << " (" << demo.trace.frames.size() << " frames, "
                << demo.truth.keypoints.size() << " ground-truth keypoints)\n";
      return 0;
    }

    const PipelineConfig cfg = load_config(config_path);

    if (*seg) {
      const auto result = segment_trace_file(seg_trace, cfg, db);
      emit(seg_out, segments_text(result.keypoints, result.segments));
      return 0;
    }

    if (*inf) {
      const Policy policy = infer_policy(inf_trace, cfg, db, inf_table);
      if (inf_out.empty()) {
        std::cout << policy_summary(policy);
      } else {
        save_policy(policy, inf_out);
        std::cout << policy_summary(policy);
      }
      return 0;
    }

    if (*runc) {
      Policy policy = load_policy(run_policy);
      const std::string trace_path = run_trace.empty() ? policy.trace_path : run_trace;
      const DemonstrationTrace trace = load_trace(trace_path, &db);
      attach_execution_refs(policy, trace, cfg.contact);
      const ScenarioSpec scenario = resolve_scenario(run_env);
      Environment env = make_env(scenario, db, cfg);

      std::map<size_t, ContactTrajectoryAction> bindings;
      const double force = run_force > 0 ? run_force : cfg.actions.base_force;
      for (size_t i = 0; i < policy.steps.size(); ++i)
        if (policy.steps[i].skill == SkillClass::MoveWithContact) bindings[i] = {0, force};

      SkillExecutor executor(ArmModel(cfg.arm), cfg.gains, cfg.execution);
      const auto outcomes = executor.execute_policy(policy, env, bindings);
      if (!run_log.empty()) write_text(run_log, run_log_csv(outcomes, policy, executor.arm().dof()));
      const std::string text = outcomes_text(outcomes, policy);
      emit(run_out, text);
      const bool ok = outcomes.size() == policy.steps.size() &&
                      std::all_of(outcomes.begin(), outcomes.end(),
                                  [](const SkillOutcome& o) { return o.success; });
      return ok ? 0 : 1;
    }

    if (*lrn) {
      const auto result = do_learn(lrn_policy, lrn_env, lrn_trace, cfg, lrn_qstore,
                                   lrn_out.empty() ? "learn_report.txt" : lrn_out);
      std::cout << (result.success ? "task learned" : "learning did not reach the goal") << " after "
                << result.report.episodes.size() << " episodes (action set "
                << result.report.action_set_size << ")\n";
      return result.success ? 0 : 1;
    }

    if (*rep) {
      emit(rep_out, report_csv(load_report(rep_in)));
      return 0;
    }

    if (*pipe) {
      fs::create_directories(pipe_out_dir);
      nlohmann::json manifest;
      manifest["tool"] = kToolVersion;
      manifest["config_hash"] = to_hex(fnv1a64(canonical_config_text()));
      if (!config_path.empty()) manifest["config_hash"] = file_hash(config_path);
      manifest["trace_hash"] = file_hash(pipe_trace);
      manifest["stages"] = nlohmann::json::array();
      bool success = false;
      std::string failed_stage;

      auto stage = [&](const std::string& name, const std::vector<std::string>& outputs,
                       const std::function<void()>& body) {
        const auto start = std::chrono::steady_clock::now();
        try {
          body();
        } catch (const std::exception& e) {
          throw Error("stage '" + name + "': " + e.what());
        }
        const auto ms =
            std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start)
                .count();
        nlohmann::json entry;
        entry["name"] = name;
        entry["millis"] = ms;
        entry["outputs"] = nlohmann::json::array();
        for (const auto& path : outputs)
          entry["outputs"].push_back({{"path", path}, {"hash", file_hash(path)}});
        manifest["stages"].push_back(entry);
      };

      const std::string seg_path = pipe_out_dir + "/segments.txt";
      const std::string pol_path = pipe_out_dir + "/policy.txt";
      const std::string log_path = pipe_out_dir + "/run_log.csv";
      const std::string res_path = pipe_out_dir + "/run_outcomes.txt";
      const std::string rep_path = pipe_out_dir + "/learn_report.txt";
      const std::string csv_path = pipe_out_dir + "/episodes.csv";
      const std::string qdir = pipe_out_dir + "/qstore";

      stage("segment", {seg_path}, [&] {
        const auto result = segment_trace_file(pipe_trace, cfg, db);
        write_text(seg_path, segments_text(result.keypoints, result.segments));
      });
      stage("infer", {pol_path}, [&] {
        Policy policy = infer_policy(pipe_trace, cfg, db, "");
        save_policy(policy, pol_path);
      });
      stage("run", {log_path, res_path}, [&] {
        Policy policy = load_policy(pol_path);
        const DemonstrationTrace trace = load_trace(pipe_trace, &db);
        attach_execution_refs(policy, trace, cfg.contact);
        Environment env = make_env(resolve_scenario(pipe_env), db, cfg);
        std::map<size_t, ContactTrajectoryAction> bindings;
        for (size_t i = 0; i < policy.steps.size(); ++i)
          if (policy.steps[i].skill == SkillClass::MoveWithContact)
            bindings[i] = {0, cfg.actions.base_force};
        SkillExecutor executor(ArmModel(cfg.arm), cfg.gains, cfg.execution);
        const auto outcomes = executor.execute_policy(policy, env, bindings);
        write_text(log_path, run_log_csv(outcomes, policy, executor.arm().dof()));
        write_text(res_path, outcomes_text(outcomes, policy));
      });
      stage("learn", {rep_path}, [&] {
        const auto result = do_learn(pol_path, pipe_env, pipe_trace, cfg, qdir, rep_path);
        success = result.success;
      });
      stage("report", {csv_path},
            [&] { write_text(csv_path, report_csv(load_report(rep_path))); });

      manifest["success"] = success;
      write_text(pipe_out_dir + "/manifest.json", manifest.dump(2) + "\n");
      std::cout << (success ? "pipeline complete: goal state achieved\n"
                            : "pipeline complete: goal state NOT achieved\n");
      return success ? 0 : 1;
    }

    if (*gcfg) {
      write_text(gcfg_out, canonical_config_text());
      return 0;
    }
    if (*gtab) {
      save_training_set(builtin_training_set(), gtab_out);
      return 0;
    }
    if (*gscn) {
      save_scenario(resolve_scenario(gscn_name), gscn_out);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace lfd::cli
