// Command-line driver: simulate | evaluate | baseline | export | validate.
// Exit codes: 0 success, 1 completion below threshold, 2 config error,
// 3 endpoint unreachable, 4 data error.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "beliefsim/belief_metrics.hpp"
#include "beliefsim/engine.hpp"
#include "beliefsim/llm_agent.hpp"
#include "beliefsim/report.hpp"
#include "beliefsim/trace_io.hpp"

namespace {

using namespace beliefsim;

constexpr int kExitOk = 0;
constexpr int kExitIncomplete = 1;
constexpr int kExitConfig = 2;
constexpr int kExitEndpoint = 3;
constexpr int kExitData = 4;

struct CommonArgs {
  std::optional<std::uint64_t> seed;
  bool strict_schema = false;
};

SchemaMode schema_mode(const CommonArgs& common) {
  return common.strict_schema ? SchemaMode::strict : SchemaMode::lenient;
}

struct SimulateArgs {
  std::string config_path;
  std::optional<std::string> out;
  std::optional<int> parallelism;
  bool lenient_parse = false;
};

int cmd_simulate(const SimulateArgs& args, const CommonArgs& common) {
  engine::RunConfig config = engine::load_run_config(args.config_path);
  if (common.seed) config.seed = *common.seed;
  if (args.parallelism) config.parallelism = *args.parallelism;
  if (args.out) config.output_path = *args.out;
  if (args.lenient_parse) {
    config.lenient_parse = true;
    config.agent.lenient_parse = true;
  }

  if (config.agent.kind == "llm" &&
      !llm::endpoint_reachable(config.agent.endpoint)) {
    std::cerr << "error: endpoint unreachable: " << config.agent.endpoint.base_url
              << "\n";
    return kExitEndpoint;
  }

  engine::RunResult result = engine::run_from_config(config);
  save_cohort(result.cohort, config.output_path);

  const double fraction =
      result.cohort.empty()
          ? 0.0
          : static_cast<double>(result.completed) /
                static_cast<double>(result.cohort.size());
  std::cout << "wrote " << result.cohort.size() << " traces to "
            << config.output_path << " (" << result.completed << " complete";
  if (result.audit) std::cout << "; audit: " << result.audit->path().string();
  std::cout << ")\n";
  if (fraction < config.completion_threshold) {
    std::cerr << "error: completion fraction " << fraction
              << " below threshold " << config.completion_threshold << "\n";
    return kExitIncomplete;
  }
  return kExitOk;
}

struct EvaluateArgs {
  std::string subject_path;
  std::string reference_path;
  std::string out_dir = "report_out";
  double kl_pseudocount = 0.5;
  std::string group;
};

int cmd_evaluate(const EvaluateArgs& args, const CommonArgs& common) {
  const Cohort subject = load_cohort(args.subject_path, schema_mode(common));
  const Cohort reference = load_cohort(args.reference_path, schema_mode(common));

  metrics::CompareOptions options;
  options.kl_pseudocount = args.kl_pseudocount;
  options.group = args.group;
  metrics::MetricReport report = metrics::compare_cohorts(subject, reference, options);

  report::ReportBundle bundle;
  bundle.comparisons.push_back(std::move(report));
  bundle.out_dir = args.out_dir;
  const std::map<std::string, std::string> extra = {
      {"subject_path", args.subject_path},
      {"reference_path", args.reference_path},
      {"schema_mode", common.strict_schema ? "strict" : "lenient"},
  };
  const auto outcome =
      report::write_bundle(bundle, {&subject, &reference}, extra);

  std::cout << "report bundle written to " << args.out_dir << "\n";
  for (const auto& [format, error] : outcome.format_errors)
    std::cout << "note: " << format << " not produced: " << error << "\n";
  return kExitOk;
}

struct BaselineArgs {
  std::string subject_path;
  int seeds = 100;
  double kl_pseudocount = 0.5;
  std::optional<std::string> out;
};

int cmd_baseline(const BaselineArgs& args, const CommonArgs& common) {
  if (args.seeds < 1) throw std::invalid_argument("--seeds must be >= 1");
  const Cohort cohort = load_cohort(args.subject_path, schema_mode(common));
  const std::uint64_t base = common.seed.value_or(0);

  std::string table = "seed,kl,wasserstein\n";
  double kl_sum = 0.0, w_sum = 0.0;
  for (int i = 0; i < args.seeds; ++i) {
    const std::uint64_t seed = base + static_cast<std::uint64_t>(i);
    const auto split =
        metrics::baseline_half_split(cohort, seed, args.kl_pseudocount);
    kl_sum += split.kl;
    w_sum += split.wasserstein;
    table += std::to_string(seed) + "," + report::full_precision(split.kl) + "," +
             report::full_precision(split.wasserstein) + "\n";
  }
  table += "mean," + report::full_precision(kl_sum / args.seeds) + "," +
           report::full_precision(w_sum / args.seeds) + "\n";

  if (args.out) {
    std::ofstream out(*args.out, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + *args.out + "'");
    out << table;
  } else {
    std::cout << table;
  }
  return kExitOk;
}

struct ExportArgs {
  std::string subject_path;
  std::string out_dir = "export_out";
  std::vector<std::string> which = {"stage1", "follow_signal", "bnd"};
};

int cmd_export(const ExportArgs& args, const CommonArgs& common) {
  const Cohort cohort = load_cohort(args.subject_path, schema_mode(common));
  for (const auto& name : args.which) {
    report::HistogramKind kind;
    if (name == "stage1") kind = report::HistogramKind::stage1;
    else if (name == "follow_signal") kind = report::HistogramKind::follow_signal;
    else if (name == "bnd") kind = report::HistogramKind::bnd;
    else throw std::invalid_argument("unknown export kind '" + name + "'");
    report::export_histograms(cohort, kind, args.out_dir);
  }
  std::cout << "histograms written to " << args.out_dir << "\n";
  return kExitOk;
}

struct ValidateArgs {
  std::string subject_path;
};

int cmd_validate(const ValidateArgs& args, const CommonArgs& common) {
  const Cohort cohort = load_cohort(args.subject_path, schema_mode(common));
  std::cout << "OK: " << cohort.size() << " traces ("
            << (common.strict_schema ? "strict" : "lenient") << " schema)\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"belief-dynamics simulation and evaluation toolkit"};
  app.require_subcommand(1);

  CommonArgs common;
  app.add_option("--seed", common.seed, "Base seed for randomized subcommands");
  app.add_flag("--strict-schema", common.strict_schema,
               "Reject unknown fields in trace files");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand(
      "simulate", "Run the three-stage protocol over a cohort of agents");
  simulate->add_option("--config", sim.config_path, "Run config (JSON)")
      ->required();
  simulate->add_option("--out", sim.out, "Override the config output_path");
  simulate->add_option("--parallelism", sim.parallelism,
                       "Override the config parallelism");
  simulate->add_flag("--lenient-parse", sim.lenient_parse,
                     "Lenient parsing of model replies");

  EvaluateArgs eval;
  auto* evaluate = app.add_subcommand(
      "evaluate", "Compare a subject cohort against a reference cohort");
  evaluate->add_option("--subject", eval.subject_path, "Subject cohort file")
      ->required();
  evaluate->add_option("--reference", eval.reference_path, "Reference cohort file")
      ->required();
  evaluate->add_option("--out", eval.out_dir, "Output directory");
  evaluate->add_option("--kl-pseudocount", eval.kl_pseudocount,
                       "Per-bin pseudocount for KL smoothing");
  evaluate->add_option("--group", eval.group, "Group label for table averages");

  BaselineArgs base;
  auto* baseline = app.add_subcommand(
      "baseline", "Half-split divergence baseline over many seeds");
  baseline->add_option("--subject", base.subject_path, "Cohort file")->required();
  baseline->add_option("--seeds", base.seeds, "Number of seeds");
  baseline->add_option("--kl-pseudocount", base.kl_pseudocount,
                       "Per-bin pseudocount for KL smoothing");
  baseline->add_option("--out", base.out, "Write the table here instead of stdout");

  ExportArgs exp;
  auto* export_cmd = app.add_subcommand(
      "export", "Export histogram and raw-value CSVs for figure reproduction");
  export_cmd->add_option("--subject", exp.subject_path, "Cohort file")->required();
  export_cmd->add_option("--out", exp.out_dir, "Output directory");
  export_cmd
      ->add_option("--which", exp.which,
                   "Any of: stage1 follow_signal bnd (default: all)")
      ->check(CLI::IsMember({"stage1", "follow_signal", "bnd"}));

  ValidateArgs val;
  auto* validate_cmd =
      app.add_subcommand("validate", "Schema-check a trace file");
  validate_cmd->add_option("--subject", val.subject_path, "Trace file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) return cmd_simulate(sim, common);
    if (evaluate->parsed()) return cmd_evaluate(eval, common);
    if (baseline->parsed()) return cmd_baseline(base, common);
    if (export_cmd->parsed()) return cmd_export(exp, common);
    if (validate_cmd->parsed()) return cmd_validate(val, common);
  } catch (const engine::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const llm::EndpointError& e) {
    std::cerr << "endpoint error: " << e.what() << "\n";
    return kExitEndpoint;
  } catch (const TraceFileError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const ValidationError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIncomplete;
  }
  return kExitOk;
}
