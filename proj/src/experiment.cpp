#include "bregdistill/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>

#include <json.hpp>

#include "bregdistill/checkpoint.hpp"
#include "bregdistill/errors.hpp"
#include "bregdistill/metrics.hpp"

namespace bregdistill {

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

std::string fmt(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string manifest_json(const RunManifest& m) {
  nlohmann::json j;
  j["version"] = kVersion;
  j["config_hash"] = m.config_hash;
  j["started"] = m.started;
  j["finished"] = m.finished;
  j["status"] = m.status;
  if (m.failed_round) j["failed_round"] = *m.failed_round;
  if (!m.failure.empty()) j["failure"] = m.failure;
  j["artifacts"] = nlohmann::json::array();
  for (const auto& p : m.artifacts) j["artifacts"].push_back(p.string());
  return j.dump(2) + "\n";
}

TrainOutcome run_train(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  ensure_dir(out_dir);
  TrainOutcome outcome;
  RunManifest& m = outcome.manifest;
  m.config_hash = config_hash(cfg);
  m.started = utc_timestamp();
  const auto config_path = out_dir / "config.cfg";
  write_text(config_path, canonical_config(cfg));
  outcome.result = distill_run(cfg.distill, out_dir, m.config_hash);
  m.finished = utc_timestamp();
  m.status = outcome.result.failed ? "failed" : "ok";
  if (outcome.result.failed) {
    m.failed_round = outcome.result.failed_round;
    m.failure = outcome.result.failure;
  }
  m.artifacts.push_back(config_path);
  for (const auto& p : outcome.result.artifacts) m.artifacts.push_back(p);
  for (const auto& p : m.artifacts)
    if (!std::filesystem::exists(p)) throw IoError("manifest artifact missing: " + p.string());
  const auto manifest_path = out_dir / "manifest.json";
  write_text(manifest_path, manifest_json(m));
  return outcome;
}

std::string sweep_run_name(const DivergenceSpec& spec, std::uint64_t seed) {
  std::string name = spec.name;
  if (spec.lambda) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%g", *spec.lambda);
    name += std::string("_") + buf;
  }
  return name + "-seed" + std::to_string(seed);
}

std::string sweep_summary_csv(const std::vector<SweepRow>& rows) {
  std::string out = "config,seed,final_sw2,status,config_mean_sw2,rank\n";
  for (const auto& r : rows)
    out += r.config + "," + std::to_string(r.seed) + "," + fmt(r.final_sw2) + "," + r.status + "," +
           fmt(r.config_mean_sw2) + "," + std::to_string(r.rank) + "\n";
  return out;
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                                std::ostream* progress) {
  ensure_dir(out_dir);
  std::vector<SweepRow> rows;
  std::vector<std::string> order;
  for (const auto& spec : cfg.sweep_divergences) {
    const std::string label = spec.label();
    if (std::find(order.begin(), order.end(), label) == order.end()) order.push_back(label);
    for (std::uint64_t seed : cfg.sweep_seeds) {
      ExperimentConfig run = cfg;
      run.distill.divergence = spec.name;
      run.distill.lambda = spec.lambda;
      run.distill.seed = seed;
      SweepRow row{label, seed, std::nan(""), "failed", 0.0, 0};
      try {
        const TrainOutcome o = run_train(run, out_dir / sweep_run_name(spec, seed));
        if (!o.result.failed && !o.result.records.empty()) {
          row.final_sw2 = o.result.records.back().sw2;
          row.status = "ok";
        }
      } catch (const std::exception& e) {
        if (progress) *progress << "sweep run " << label << " seed " << seed << " failed: " << e.what() << "\n";
      }
      if (progress)
        *progress << label << " seed " << seed << ": " << row.status << " final_sw2 " << fmt(row.final_sw2) << "\n";
      rows.push_back(row);
    }
  }
  // Mean over the successful seeds of each configuration; rank 1 is the lowest.
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (const auto& r : rows) {
    auto& a = acc[r.config];
    if (r.status == "ok") {
      a.first += r.final_sw2;
      ++a.second;
    }
  }
  std::vector<std::pair<double, std::string>> means;
  for (const auto& label : order) {
    const auto& a = acc[label];
    means.push_back({a.second ? a.first / static_cast<double>(a.second) : std::nan(""), label});
  }
  std::vector<std::pair<double, std::string>> ranked = means;
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) {
    if (std::isnan(x.first)) return false;
    if (std::isnan(y.first)) return true;
    return x.first < y.first;
  });
  for (auto& r : rows) {
    for (std::size_t i = 0; i < ranked.size(); ++i)
      if (ranked[i].second == r.config) {
        r.config_mean_sw2 = ranked[i].first;
        r.rank = i + 1;
      }
  }
  write_text(out_dir / "summary.csv", sweep_summary_csv(rows));
  return rows;
}

std::string eval_report_json(const EvalReport& r) {
  nlohmann::json j;
  j["samples"] = r.samples;
  j["seed"] = r.seed;
  j["sw2"] = r.sw2;
  j["mmd"] = r.mmd;
  j["mode_fractions"] = r.mode_fractions;
  return j.dump(2) + "\n";
}

EvalReport run_eval(const ExperimentConfig& cfg, const std::filesystem::path& checkpoint, std::size_t samples,
                    std::uint64_t seed, const std::filesystem::path& out_dir) {
  if (samples < 1) throw ArgumentError("--samples must be at least 1");
  const Checkpoint ckpt = read_checkpoint(checkpoint);
  if (ckpt.metadata.role != "generator")
    throw CheckpointError(checkpoint.string() + " holds a '" + ckpt.metadata.role + "' network, not a generator");
  const Generator gen = Generator::from_net(ckpt.net);
  const GaussianMixture& teacher = cfg.distill.teacher;
  if (gen.dim() != teacher.dim()) throw CheckpointError("generator dimension does not match the teacher");

  Rng rng = Rng(seed).derive(4);
  const auto student = gen.sample(rng, samples);
  const auto reference = sample(teacher, rng, samples);
  EvalReport report;
  report.samples = samples;
  report.seed = seed;
  report.sw2 = sliced_wasserstein2(student, reference, cfg.distill.projections, rng);
  report.mmd = mmd_rbf(subsample(student, cfg.distill.mmd_points, rng), subsample(reference, cfg.distill.mmd_points, rng));
  report.mode_fractions = mode_coverage(student, teacher);

  ensure_dir(out_dir);
  write_samples_csv(out_dir / "samples.csv", student);
  write_text(out_dir / "eval_report.json", eval_report_json(report));
  return report;
}

}  // namespace bregdistill
