#include "batchrl/commands.hpp"

#include <cstring>

#include "CLI11.hpp"
#include "batchrl/checkpoint.hpp"
#include "batchrl/errors.hpp"
#include "batchrl/evaluation.hpp"
#include "batchrl/nmpc.hpp"
#include "batchrl/plot_data.hpp"
#include "batchrl/run_directory.hpp"
#include "json.hpp"

namespace batchrl::cli {

using nlohmann::json;

namespace {

constexpr std::uint64_t kOcpStream = 5;
constexpr std::uint64_t kNmpcStream = 6;

json report_json(const EvalReport& r) {
  return {{"episodes", r.count}, {"mean", r.mean}, {"std", r.std_dev}, {"p2", r.p2},
          {"p98", r.p98}};
}

json phase_json(const std::vector<PhaseRecord>& records, const std::string& final_checkpoint) {
  json j;
  j["epochs_run"] = records.size();
  j["final_checkpoint"] = final_checkpoint;
  if (!records.empty()) j["final_epoch"] = report_json(records.back().report.returns);
  return j;
}

std::unique_ptr<PlantModel> plant_of(const RunConfig& config, PlantKind kind) {
  return make_plant(kind, config.plant_options);
}

const OdeModel& as_ode(const PlantModel& plant, const char* purpose) {
  const auto* ode = dynamic_cast<const OdeModel*>(&plant);
  if (ode == nullptr || !ode->deterministic()) {
    throw ConfigError(std::string(purpose) + " needs a deterministic smooth model; '" +
                      plant.name() + "' is not one");
  }
  return *ode;
}

void write_evaluation(RunDirectory& dir, const std::string& subdir, const EvaluationResult& r,
                      double interval_length, const char* mode) {
  dir.write(subdir + "/returns.csv", returns_csv(r.trajectories));
  dir.write(subdir + "/trajectories.csv", trajectories_csv(r.trajectories, interval_length));
  json j = report_json(r.report);
  j["mode"] = mode;
  dir.write(subdir + "/report.json", j.dump(2) + "\n");
}

EvaluationResult run_nmpc(const RunConfig& config, const PlantModel& plant) {
  if (is_cs3(config.plant)) {
    throw ConfigError("the NMPC comparator covers the smooth case studies (cs1, cs2) only");
  }
  const auto model = plant_of(config, PlantKind::Cs1Approx);
  const OdeModel& ode = as_ode(*model, "NMPC");
  return summarize_trajectories(nmpc_episodes(plant, ode, config.nmpc, config.evaluation.episodes,
                                              derive_seed(config.seed, {kNmpcStream}),
                                              config.threads));
}

// Reference numbers that put the CS1/CS2 results in context: the
// deterministic optimum of the plant itself under the assumed initial state.
json plant_reference(const RunConfig& config) {
  json j;
  if (is_cs3(config.plant)) return j;
  IntegrationSettings s;
  s.intervals = config.plant_options.intervals == 0 ? 10 : config.plant_options.intervals;
  s.substeps = config.plant_options.substeps;
  Cs1Model plant(Cs1Model::Dynamics::Plant, s, 0.0);
  OcpProblem p;
  p.model = &plant;
  p.state = plant.nominal_initial_state();
  Rng rng = make_rng(config.seed, {kOcpStream, 1});
  const OcpSolution sol = solve_ocp(p, config.nmpc, rng);
  j["initial_state"] = p.state;
  j["plant_deterministic_optimum"] = sol.objective;
  j["note"] =
      "The CS1/CS2 initial state y(0) = (1, 0) is an assumption. Under it the noise-free plant "
      "optimum is plant_deterministic_optimum; online returns should be read against that value.";
  return j;
}

const char* mode_name(ActionMode m) { return m == ActionMode::Sample ? "sample" : "mean"; }

bool frozen_bit_identical(const PolicyParams& before, const PolicyParams& after) {
  if (before.size() != after.size()) return false;
  for (std::size_t i = 0; i < before.size(); ++i) {
    if (!before.is_frozen(i)) continue;
    const double a = before.values()[i];
    const double b = after.values()[i];
    if (std::memcmp(&a, &b, sizeof(double)) != 0) return false;
  }
  return true;
}

PolicyParams load_policy_for(const fs::path& checkpoint, const PlantModel& plant) {
  PolicyParams p = load_checkpoint(checkpoint);
  if (p.config().state_inputs != plant.state_count() ||
      p.config().actions != plant.control_count()) {
    throw ConfigError("checkpoint '" + checkpoint.string() + "' does not fit plant '" +
                      plant.name() + "'");
  }
  return p;
}

std::optional<double> ocp_optimum(const RunConfig& config, const PlantModel& offline) {
  if (!config.stop_at_ocp_gap) return std::nullopt;
  const OdeModel& ode = as_ode(offline, "the OCP stopping rule");
  OcpProblem p;
  p.model = &ode;
  p.state = ode.nominal_initial_state();
  Rng rng = make_rng(config.seed, {kOcpStream, 0});
  return solve_ocp(p, config.nmpc, rng).objective;
}

OfflineOutcome offline_into(RunDirectory& dir, const RunConfig& config, PolicyParams& params) {
  const auto offline = plant_of(config, config.offline_plant);
  B2BConfig b2b = config.b2b;
  OfflineOutcome outcome;
  outcome.ocp_optimum = ocp_optimum(config, *offline);
  if (outcome.ocp_optimum) {
    b2b.ocp_optimum = outcome.ocp_optimum;
    b2b.ocp_tolerance = *config.stop_at_ocp_gap;
  }
  RunCheckpointSink sink(dir);
  PhaseResult r = offline_phase(params, *offline, b2b, &sink);
  dir.write("progress_offline.csv", progress_csv(r.records));
  params = std::move(r.params);
  outcome.records = std::move(r.records);
  outcome.final_checkpoint = r.final_checkpoint;
  return outcome;
}

OnlineOutcome online_into(RunDirectory& dir, const RunConfig& config, const PlantModel& plant,
                          PolicyParams& params) {
  CountingPlant counted(plant);
  const auto layers = config.b2b.resolved_trainable_layers(params.config());
  const PolicyParams transferred = transfer_freeze(params, layers);
  RunCheckpointSink sink(dir);
  PhaseResult r = online_phase(transferred, counted, config.b2b, &sink);
  dir.write("progress_online.csv", progress_csv(r.records));
  OnlineOutcome outcome;
  outcome.true_plant_episodes = counted.episodes();
  outcome.frozen_unchanged = frozen_bit_identical(transferred, r.params);
  params = std::move(r.params);
  outcome.records = std::move(r.records);
  outcome.final_checkpoint = r.final_checkpoint;
  return outcome;
}

json online_json(const OnlineOutcome& o, const RunConfig& config, const PolicyParams& params) {
  json j = phase_json(o.records, o.final_checkpoint);
  j["episodes_per_epoch"] = config.b2b.online_episodes;
  j["true_plant_episodes"] = o.true_plant_episodes;
  j["trainable_layers"] = config.b2b.resolved_trainable_layers(params.config());
  j["frozen_parameters_unchanged"] = o.frozen_unchanged;
  return j;
}

void finish(RunDirectory& dir, const RunConfig& config, const json& summary) {
  dir.write("summary.json", summary.dump(2) + "\n");
  dir.finalize(serialize_config(config));
}

}  // namespace

OfflineOutcome train_offline(const RunConfig& config, const fs::path& out) {
  config.validate();
  RunDirectory dir(out, "train-offline");
  dir.write("config.json", serialize_config(config));
  const auto plant = plant_of(config, config.offline_plant);
  PolicyParams params = PolicyParams::initialize(make_policy_config(config, *plant), config.seed);
  OfflineOutcome outcome = offline_into(dir, config, params);

  json summary;
  summary["command"] = "train-offline";
  summary["offline_plant"] = std::string(to_string(config.offline_plant));
  summary["seed"] = config.seed;
  summary["offline"] = phase_json(outcome.records, outcome.final_checkpoint);
  if (outcome.ocp_optimum) summary["offline"]["ocp_optimum"] = *outcome.ocp_optimum;
  finish(dir, config, summary);
  return outcome;
}

OnlineOutcome adapt_online(const RunConfig& config, const fs::path& checkpoint,
                           const fs::path& out) {
  config.validate();
  const auto plant = plant_of(config, config.plant);
  PolicyParams params = load_policy_for(checkpoint, *plant);
  RunDirectory dir(out, "adapt-online");
  dir.write("config.json", serialize_config(config));
  dir.write("checkpoints/source.txt", write_checkpoint(params));
  OnlineOutcome outcome = online_into(dir, config, *plant, params);

  json summary;
  summary["command"] = "adapt-online";
  summary["plant"] = std::string(to_string(config.plant));
  summary["seed"] = config.seed;
  summary["source_checkpoint"] = fs::path(checkpoint).generic_string();
  summary["online"] = online_json(outcome, config, params);
  summary["reference"] = plant_reference(config);
  finish(dir, config, summary);
  return outcome;
}

PipelineOutcome run_pipeline(const RunConfig& config, const fs::path& out) {
  config.validate();
  RunDirectory dir(out, "run-pipeline");
  dir.write("config.json", serialize_config(config));
  const auto plant = plant_of(config, config.plant);
  PolicyParams params = PolicyParams::initialize(make_policy_config(config, *plant), config.seed);

  PipelineOutcome outcome;
  outcome.offline = offline_into(dir, config, params);
  outcome.online = online_into(dir, config, *plant, params);

  const EvaluationResult eval = evaluate(params, *plant, config.evaluation.episodes, config.seed,
                                         config.threads, config.evaluation.mode);
  write_evaluation(dir, "evaluation", eval, plant->interval_length(),
                   mode_name(config.evaluation.mode));
  outcome.evaluation = eval.report;

  json summary;
  summary["command"] = "run-pipeline";
  summary["plant"] = std::string(to_string(config.plant));
  summary["offline_plant"] = std::string(to_string(config.offline_plant));
  summary["seed"] = config.seed;
  summary["offline"] = phase_json(outcome.offline.records, outcome.offline.final_checkpoint);
  if (outcome.offline.ocp_optimum) {
    summary["offline"]["ocp_optimum"] = *outcome.offline.ocp_optimum;
  }
  summary["online"] = online_json(outcome.online, config, params);
  summary["evaluation"] = report_json(eval.report);
  summary["evaluation"]["mode"] = mode_name(config.evaluation.mode);

  if (config.evaluation.compare_nmpc && !is_cs3(config.plant)) {
    const EvaluationResult nmpc = run_nmpc(config, *plant);
    write_evaluation(dir, "nmpc", nmpc, plant->interval_length(), "nmpc");
    outcome.nmpc = nmpc.report;
    summary["nmpc"] = report_json(nmpc.report);
  }
  summary["reference"] = plant_reference(config);
  finish(dir, config, summary);
  return outcome;
}

EvaluationOutcome evaluate_policy(const RunConfig& config, const fs::path& checkpoint,
                                  const fs::path& out) {
  config.validate();
  const auto plant = plant_of(config, config.plant);
  const PolicyParams params = load_policy_for(checkpoint, *plant);
  RunDirectory dir(out, "evaluate");
  dir.write("config.json", serialize_config(config));
  const EvaluationResult eval = evaluate(params, *plant, config.evaluation.episodes, config.seed,
                                         config.threads, config.evaluation.mode);
  write_evaluation(dir, "evaluation", eval, plant->interval_length(),
                   mode_name(config.evaluation.mode));
  json summary;
  summary["command"] = "evaluate";
  summary["plant"] = std::string(to_string(config.plant));
  summary["checkpoint"] = fs::path(checkpoint).generic_string();
  summary["evaluation"] = report_json(eval.report);
  finish(dir, config, summary);
  return {eval.report};
}

EvaluationOutcome nmpc_eval(const RunConfig& config, const fs::path& out) {
  config.validate();
  const auto plant = plant_of(config, config.plant);
  RunDirectory dir(out, "nmpc-eval");
  dir.write("config.json", serialize_config(config));
  const EvaluationResult r = run_nmpc(config, *plant);
  write_evaluation(dir, "nmpc", r, plant->interval_length(), "nmpc");
  json summary;
  summary["command"] = "nmpc-eval";
  summary["plant"] = std::string(to_string(config.plant));
  summary["multistarts"] = config.nmpc.multistarts;
  summary["nmpc"] = report_json(r.report);
  finish(dir, config, summary);
  return {r.report};
}

std::vector<std::string> emit_plots(const fs::path& run, const fs::path& out,
                                    const std::optional<fs::path>& nmpc_run) {
  return emit_plot_data(run, out, nmpc_run);
}

namespace {

void print_report(std::ostream& out, const char* label, const EvalReport& r) {
  out << label << ": mean " << format_double(r.mean) << ", std " << format_double(r.std_dev)
      << ", p2 " << format_double(r.p2) << ", p98 " << format_double(r.p98) << " over "
      << r.count << " episodes\n";
}

void print_phase(std::ostream& out, const char* label, const std::vector<PhaseRecord>& records,
                 const std::string& checkpoint) {
  out << label << ": " << records.size() << " epochs";
  if (!records.empty()) {
    out << ", last epoch mean return " << format_double(records.back().report.returns.mean);
  }
  out << ", checkpoint " << checkpoint << "\n";
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Batch-to-batch policy-gradient training for uncertain batch processes"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::optional<std::size_t> episodes;
  std::optional<std::size_t> threads;
  app.add_option("--config", config_path, "JSON configuration file (defaults when omitted)");
  app.add_option("--seed", seed, "Master seed");
  app.add_option("--out", out_dir, "Output directory (must not exist or be empty)");
  app.add_option("--episodes", episodes,
                 "Episodes: offline K0 for train-offline, online K for adapt-online, "
                 "evaluation episodes otherwise");
  app.add_option("--threads", threads, "Worker threads for episode rollouts");

  std::string checkpoint;
  std::string plant_name;
  std::optional<std::size_t> multistarts;
  std::string run_dir;
  std::string nmpc_dir;

  auto* train = app.add_subcommand("train-offline", "Train a policy on the approximate model");
  auto* adapt = app.add_subcommand("adapt-online", "Adapt a trained policy on the true plant");
  adapt->add_option("--checkpoint", checkpoint, "Policy checkpoint to start from")->required();
  auto* pipeline =
      app.add_subcommand("run-pipeline", "Offline training, transfer, online adaptation");
  auto* eval = app.add_subcommand("evaluate", "Monte-Carlo evaluation of a fixed policy");
  eval->add_option("--checkpoint", checkpoint, "Policy checkpoint")->required();
  eval->add_option("--plant", plant_name, "Plant to evaluate on (cs1, cs2, cs3, ...)");
  auto* nmpc = app.add_subcommand("nmpc-eval", "Monte-Carlo evaluation of shrinking-horizon NMPC");
  nmpc->add_option("--plant", plant_name, "True plant (cs1 or cs2)");
  nmpc->add_option("--multistarts", multistarts, "Random starts per NLP solve");
  auto* plots = app.add_subcommand("emit-plots", "Write plot data files for a finished run");
  plots->add_option("--run", run_dir, "Run directory to read")->required();
  plots->add_option("--nmpc", nmpc_dir, "Optional nmpc-eval run for the overlay files");
  for (auto* sub : {train, adapt, pipeline, eval, nmpc, plots}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (out_dir.empty()) throw ConfigError("--out is required");
    if (plots->parsed()) {
      const auto files =
          emit_plots(run_dir, out_dir, nmpc_dir.empty() ? std::nullopt
                                                         : std::optional<fs::path>(nmpc_dir));
      out << "wrote " << files.size() << " files to " << out_dir << "\n";
      return 0;
    }

    std::optional<PlantKind> plant_kind;
    if (!plant_name.empty()) plant_kind = parse_plant_kind(plant_name);
    RunConfig config = !config_path.empty() ? parse_config(config_path)
                       : plant_kind         ? default_config(*plant_kind)
                                            : default_config();
    if (plant_kind) {
      const PlantKind kind = *plant_kind;
      if (is_cs3(kind) != is_cs3(config.plant)) {
        throw ConfigError("--plant " + plant_name + " belongs to a different case study than '" +
                          std::string(to_string(config.plant)) + "' in the configuration");
      }
      config.plant = kind;
    }
    if (seed) set_seed(config, *seed);
    if (threads) set_threads(config, *threads);
    if (multistarts) config.nmpc.multistarts = *multistarts;
    if (episodes) {
      if (train->parsed()) {
        config.b2b.offline_episodes = *episodes;
      } else if (adapt->parsed()) {
        config.b2b.online_episodes = *episodes;
      } else {
        config.evaluation.episodes = *episodes;
      }
    }
    config.validate();

    if (train->parsed()) {
      const auto o = train_offline(config, out_dir);
      print_phase(out, "offline", o.records, o.final_checkpoint);
    } else if (adapt->parsed()) {
      const auto o = adapt_online(config, checkpoint, out_dir);
      print_phase(out, "online", o.records, o.final_checkpoint);
      out << "true-plant episodes: " << o.true_plant_episodes << "\n";
    } else if (pipeline->parsed()) {
      const auto o = run_pipeline(config, out_dir);
      print_phase(out, "offline", o.offline.records, o.offline.final_checkpoint);
      print_phase(out, "online", o.online.records, o.online.final_checkpoint);
      if (o.evaluation) print_report(out, "evaluation", *o.evaluation);
      if (o.nmpc) print_report(out, "nmpc", *o.nmpc);
    } else if (eval->parsed()) {
      print_report(out, "evaluation", evaluate_policy(config, checkpoint, out_dir).report);
    } else if (nmpc->parsed()) {
      print_report(out, "nmpc", nmpc_eval(config, out_dir).report);
    }
    return 0;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "file error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace batchrl::cli
