#include "bregdistill/cli.hpp"

#include <fstream>
#include <optional>

#include <CLI11.hpp>

#include "bregdistill/config.hpp"
#include "bregdistill/errors.hpp"
#include "bregdistill/experiment.hpp"
#include "bregdistill/verify.hpp"

namespace bregdistill {

namespace {

struct Options {
  std::string config;
  std::vector<std::string> overrides;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string only;
  std::size_t samples = 0;
  std::string checkpoint;
};

ExperimentConfig resolve(const Options& o) {
  std::optional<std::filesystem::path> path;
  if (!o.config.empty()) path = o.config;
  std::vector<std::string> overrides = o.overrides;
  if (o.seed) overrides.push_back("seed=" + std::to_string(*o.seed));
  return load_config(path, overrides);
}

std::filesystem::path out_dir(const Options& o, const ExperimentConfig& cfg) {
  return o.out.empty() ? cfg.output_dir : std::filesystem::path(o.out);
}

int cmd_verify(const Options& o, std::ostream& out, std::ostream& err) {
  SuiteFilter filter;
  if (!o.only.empty()) filter.only = o.only;
  std::ofstream file;
  if (!o.out.empty()) {
    std::filesystem::create_directories(o.out);
    file.open(std::filesystem::path(o.out) / "verify_report.jsonl", std::ios::binary);
    if (!file) throw IoError("cannot write verify report under " + o.out);
  }
  std::size_t failed = 0;
  const auto reports = run_verify_suite(filter, {}, [&](const OracleReport& r) {
    const std::string line = report_to_json(r);
    out << line << "\n";
    if (file) file << line << "\n";
    failed += !r.passed;
  });
  err << "verify: " << reports.size() << " checks, " << failed << " failed\n";
  return failed == 0 ? kExitOk : kExitFailure;
}

int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
  const ExperimentConfig cfg = resolve(o);
  const auto dir = out_dir(o, cfg);
  const TrainOutcome outcome = run_train(cfg, dir);
  if (outcome.result.failed) {
    err << "train: numeric failure at round " << outcome.result.failed_round << ": " << outcome.result.failure
        << "\n";
    return kExitFailure;
  }
  const auto& last = outcome.result.records.back();
  out << "train: " << cfg.distill.convex_function().label() << " seed " << cfg.distill.seed << " rounds "
      << cfg.distill.rounds << " final sw2 " << last.sw2 << " mode_cov_min " << last.mode_cov_min << "\n";
  out << "train: outputs in " << dir.string() << " (config hash " << outcome.manifest.config_hash << ")\n";
  return kExitOk;
}

int cmd_sweep(const Options& o, std::ostream& out, std::ostream& err) {
  const ExperimentConfig cfg = resolve(o);
  const auto dir = out_dir(o, cfg);
  const auto rows = run_sweep(cfg, dir, &err);
  out << sweep_summary_csv(rows);
  return kExitOk;
}

int cmd_eval(const Options& o, std::ostream& out, std::ostream&) {
  const ExperimentConfig cfg = resolve(o);
  const std::size_t samples = o.samples ? o.samples : cfg.eval_samples;
  const EvalReport report =
      run_eval(cfg, o.checkpoint, samples, o.seed.value_or(cfg.distill.seed), out_dir(o, cfg));
  out << eval_report_json(report);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bregman density-ratio distillation lab", "bregdistill"};
  app.require_subcommand(1);
  Options o;
  std::uint64_t seed = 0;

  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "configuration file (key = value lines)")->check(CLI::ExistingFile);
    sub->add_option("--override", o.overrides, "KEY=VALUE, repeatable")->take_all();
    sub->add_option("--out", o.out, "output directory");
  };

  CLI::App* verify = app.add_subcommand("verify", "run the oracle suite");
  verify->add_option("--only", o.only, "check group")
      ->check(CLI::IsMember(verify_check_groups()));
  verify->add_option("--out", o.out, "also write verify_report.jsonl here");

  CLI::App* train = app.add_subcommand("train", "run one distillation");
  add_config(train);
  train->add_option("--seed", seed, "override the configured seed");

  CLI::App* sweep = app.add_subcommand("sweep", "run the divergence x seed grid");
  add_config(sweep);

  CLI::App* eval = app.add_subcommand("eval", "sample a generator checkpoint and score it");
  add_config(eval);
  eval->add_option("--checkpoint", o.checkpoint, "generator checkpoint")->required();
  eval->add_option("--samples", o.samples, "number of samples")->check(CLI::PositiveNumber);
  eval->add_option("--seed", seed, "sampling seed (default: config seed)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }
  for (CLI::App* sub : {train, eval})
    if (sub->parsed() && sub->count("--seed")) o.seed = seed;

  try {
    if (verify->parsed()) return cmd_verify(o, out, err);
    if (train->parsed()) return cmd_train(o, out, err);
    if (sweep->parsed()) return cmd_sweep(o, out, err);
    return cmd_eval(o, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ArgumentError& e) {
    err << "argument error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const CheckpointError& e) {
    err << "checkpoint error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace bregdistill
