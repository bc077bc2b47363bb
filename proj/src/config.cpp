#include "bregdistill/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "bregdistill/errors.hpp"

namespace bregdistill {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(s);
  while (std::getline(ss, cell, sep)) {
    cell = trim(cell);
    if (!cell.empty()) out.push_back(cell);
  }
  return out;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out))
    throw ConfigError(key + ": expected a finite number, got '" + v + "'");
  return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

std::size_t to_size(const std::string& key, const std::string& v) { return static_cast<std::size_t>(to_uint(key, v)); }

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

Vec to_vec(const std::string& key, const std::string& v) {
  Vec out;
  for (const auto& cell : split(v, ',')) out.push_back(to_double(key, cell));
  return out;
}

std::vector<std::size_t> to_widths(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  for (const auto& cell : split(v, ',')) {
    const std::size_t w = to_size(key, cell);
    if (w == 0) throw ConfigError(key + ": widths must be positive");
    out.push_back(w);
  }
  return out;
}

template <typename T>
std::string join(const std::vector<T>& xs, const std::function<std::string(const T&)>& f) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + f(xs[i]);
  return out;
}

std::string join_sizes(const std::vector<std::size_t>& xs) {
  return join<std::size_t>(xs, [](const std::size_t& x) { return std::to_string(x); });
}

std::string join_doubles(const Vec& xs) {
  return join<double>(xs, [](const double& x) { return fmt_double(x); });
}

struct Field {
  std::function<void(ExperimentConfig&, const std::string& key, const std::string& value)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

const std::map<std::string, Field>& fields() {
  using C = ExperimentConfig;
  using S = const std::string&;
  static const std::map<std::string, Field> table = {
      {"seed", {[](C& c, S k, S v) { c.distill.seed = to_uint(k, v); },
                [](const C& c) { return std::to_string(c.distill.seed); }}},
      {"rounds", {[](C& c, S k, S v) { c.distill.rounds = to_size(k, v); },
                  [](const C& c) { return std::to_string(c.distill.rounds); }}},
      {"batch_size", {[](C& c, S k, S v) { c.distill.batch_size = to_size(k, v); },
                      [](const C& c) { return std::to_string(c.distill.batch_size); }}},
      {"warmup_steps", {[](C& c, S k, S v) { c.distill.warmup_steps = to_size(k, v); },
                        [](const C& c) { return std::to_string(c.distill.warmup_steps); }}},
      {"divergence.name", {[](C& c, S, S v) { c.distill.divergence = v; },
                           [](const C& c) { return c.distill.divergence; }}},
      {"divergence.lambda",
       {[](C& c, S k, S v) {
          if (v == "none" || v.empty())
            c.distill.lambda.reset();
          else
            c.distill.lambda = to_double(k, v);
        },
        [](const C& c) { return c.distill.lambda ? fmt_double(*c.distill.lambda) : std::string("none"); }}},
      {"schedule.kind",
       {[](C& c, S k, S v) {
          if (v == "ve")
            c.distill.schedule.kind = ScheduleKind::VarianceExploding;
          else if (v == "vp")
            c.distill.schedule.kind = ScheduleKind::VariancePreserving;
          else
            throw ConfigError(k + ": expected ve or vp, got '" + v + "'");
        },
        [](const C& c) { return std::string(c.distill.schedule.kind == ScheduleKind::VarianceExploding ? "ve" : "vp"); }}},
      {"schedule.t_min", {[](C& c, S k, S v) { c.distill.schedule.t_min = to_double(k, v); },
                          [](const C& c) { return fmt_double(c.distill.schedule.t_min); }}},
      {"schedule.t_max", {[](C& c, S k, S v) { c.distill.schedule.t_max = to_double(k, v); },
                          [](const C& c) { return fmt_double(c.distill.schedule.t_max); }}},
      {"schedule.beta_min", {[](C& c, S k, S v) { c.distill.schedule.beta_min = to_double(k, v); },
                             [](const C& c) { return fmt_double(c.distill.schedule.beta_min); }}},
      {"schedule.beta_max", {[](C& c, S k, S v) { c.distill.schedule.beta_max = to_double(k, v); },
                             [](const C& c) { return fmt_double(c.distill.schedule.beta_max); }}},
      {"schedule.time_law",
       {[](C& c, S k, S v) {
          if (v == "log_uniform")
            c.distill.schedule.time_law = TimeLaw::LogUniform;
          else if (v == "uniform")
            c.distill.schedule.time_law = TimeLaw::Uniform;
          else
            throw ConfigError(k + ": expected log_uniform or uniform, got '" + v + "'");
        },
        [](const C& c) {
          return std::string(c.distill.schedule.time_law == TimeLaw::LogUniform ? "log_uniform" : "uniform");
        }}},
      {"generator.kind",
       {[](C& c, S k, S v) {
          if (v == "affine")
            c.distill.generator_kind = GeneratorKind::Affine;
          else if (v == "mlp")
            c.distill.generator_kind = GeneratorKind::Mlp;
          else
            throw ConfigError(k + ": expected affine or mlp, got '" + v + "'");
        },
        [](const C& c) { return std::string(generator_kind_name(c.distill.generator_kind)); }}},
      {"generator.hidden", {[](C& c, S k, S v) { c.distill.generator_hidden = to_widths(k, v); },
                            [](const C& c) { return join_sizes(c.distill.generator_hidden); }}},
      {"generator.lr", {[](C& c, S k, S v) { c.distill.generator_lr = to_double(k, v); },
                        [](const C& c) { return fmt_double(c.distill.generator_lr); }}},
      {"score.source",
       {[](C& c, S k, S v) {
          if (v == "learned")
            c.distill.student_score = StudentScoreKind::Learned;
          else if (v == "analytic")
            c.distill.student_score = StudentScoreKind::Analytic;
          else
            throw ConfigError(k + ": expected learned or analytic, got '" + v + "'");
        },
        [](const C& c) {
          return std::string(c.distill.student_score == StudentScoreKind::Learned ? "learned" : "analytic");
        }}},
      {"score.hidden", {[](C& c, S k, S v) { c.distill.score_hidden = to_widths(k, v); },
                        [](const C& c) { return join_sizes(c.distill.score_hidden); }}},
      {"score.lr", {[](C& c, S k, S v) { c.distill.score_lr = to_double(k, v); },
                    [](const C& c) { return fmt_double(c.distill.score_lr); }}},
      {"classifier.hidden", {[](C& c, S k, S v) { c.distill.classifier_hidden = to_widths(k, v); },
                             [](const C& c) { return join_sizes(c.distill.classifier_hidden); }}},
      {"classifier.lr", {[](C& c, S k, S v) { c.distill.classifier_lr = to_double(k, v); },
                         [](const C& c) { return fmt_double(c.distill.classifier_lr); }}},
      {"ratio.source",
       {[](C& c, S k, S v) {
          if (v == "classifier")
            c.distill.ratio_source = RatioSourceKind::Classifier;
          else if (v == "analytic")
            c.distill.ratio_source = RatioSourceKind::Analytic;
          else
            throw ConfigError(k + ": expected classifier or analytic, got '" + v + "'");
        },
        [](const C& c) {
          return std::string(c.distill.ratio_source == RatioSourceKind::Classifier ? "classifier" : "analytic");
        }}},
      {"update.score", {[](C& c, S k, S v) { c.distill.update.score_steps = to_size(k, v); },
                        [](const C& c) { return std::to_string(c.distill.update.score_steps); }}},
      {"update.classifier", {[](C& c, S k, S v) { c.distill.update.classifier_steps = to_size(k, v); },
                             [](const C& c) { return std::to_string(c.distill.update.classifier_steps); }}},
      {"update.generator", {[](C& c, S k, S v) { c.distill.update.generator_steps = to_size(k, v); },
                            [](const C& c) { return std::to_string(c.distill.update.generator_steps); }}},
      {"weighting.time",
       {[](C& c, S k, S v) {
          if (v == "sigma2_alpha")
            c.distill.weighting = TimeWeighting::SigmaSquaredAlpha;
          else if (v == "constant")
            c.distill.weighting = TimeWeighting::Constant;
          else
            throw ConfigError(k + ": expected sigma2_alpha or constant, got '" + v + "'");
        },
        [](const C& c) {
          return std::string(c.distill.weighting == TimeWeighting::Constant ? "constant" : "sigma2_alpha");
        }}},
      {"weighting.normalize", {[](C& c, S k, S v) { c.distill.normalize_weights = to_bool(k, v); },
                               [](const C& c) { return std::string(c.distill.normalize_weights ? "true" : "false"); }}},
      {"metrics.record_interval", {[](C& c, S k, S v) { c.distill.record_interval = to_size(k, v); },
                                   [](const C& c) { return std::to_string(c.distill.record_interval); }}},
      {"metrics.samples", {[](C& c, S k, S v) { c.distill.metric_samples = to_size(k, v); },
                           [](const C& c) { return std::to_string(c.distill.metric_samples); }}},
      {"metrics.projections", {[](C& c, S k, S v) { c.distill.projections = to_size(k, v); },
                               [](const C& c) { return std::to_string(c.distill.projections); }}},
      {"metrics.mmd_points", {[](C& c, S k, S v) { c.distill.mmd_points = to_size(k, v); },
                              [](const C& c) { return std::to_string(c.distill.mmd_points); }}},
      {"metrics.divergence_t", {[](C& c, S k, S v) { c.distill.divergence_t = to_double(k, v); },
                                [](const C& c) { return fmt_double(c.distill.divergence_t); }}},
      {"metrics.divergence_samples", {[](C& c, S k, S v) { c.distill.divergence_samples = to_size(k, v); },
                                      [](const C& c) { return std::to_string(c.distill.divergence_samples); }}},
      {"output.dir", {[](C& c, S, S v) { c.output_dir = v; }, [](const C& c) { return c.output_dir.string(); }}},
      {"output.wallclock", {[](C& c, S k, S v) { c.distill.wallclock = to_bool(k, v); },
                            [](const C& c) { return std::string(c.distill.wallclock ? "true" : "false"); }}},
      {"output.checkpoint_interval", {[](C& c, S k, S v) { c.distill.checkpoint_interval = to_size(k, v); },
                                      [](const C& c) { return std::to_string(c.distill.checkpoint_interval); }}},
      {"sweep.divergences",
       {[](C& c, S, S v) {
          c.sweep_divergences.clear();
          for (const auto& item : split(v, ',')) c.sweep_divergences.push_back(parse_divergence_spec(item));
        },
        [](const C& c) {
          return join<DivergenceSpec>(c.sweep_divergences, [](const DivergenceSpec& d) {
            return d.lambda ? d.name + ":" + fmt_double(*d.lambda) : d.name;
          });
        }}},
      {"sweep.seeds",
       {[](C& c, S k, S v) {
          c.sweep_seeds.clear();
          for (const auto& item : split(v, ',')) c.sweep_seeds.push_back(to_uint(k, item));
        },
        [](const C& c) {
          return join<std::uint64_t>(c.sweep_seeds, [](const std::uint64_t& s) { return std::to_string(s); });
        }}},
      {"eval.samples", {[](C& c, S k, S v) { c.eval_samples = to_size(k, v); },
                        [](const C& c) { return std::to_string(c.eval_samples); }}},
  };
  return table;
}

// teacher.components = K, then teacher.<k>.weight / .mean / .cov for k < K.
GaussianMixture build_teacher(const RawConfig& teacher_keys) {
  const auto count_it = teacher_keys.find("teacher.components");
  if (count_it == teacher_keys.end()) throw ConfigError("teacher.* keys need teacher.components");
  const std::size_t k_count = to_size("teacher.components", count_it->second);
  if (k_count < 1) throw ConfigError("teacher.components must be at least 1");
  std::set<std::string> used{"teacher.components"};
  std::vector<GaussianComponent> comps;
  for (std::size_t k = 0; k < k_count; ++k) {
    const std::string prefix = "teacher." + std::to_string(k) + ".";
    auto need = [&](const std::string& field) {
      const auto it = teacher_keys.find(prefix + field);
      if (it == teacher_keys.end()) throw ConfigError("missing " + prefix + field);
      used.insert(prefix + field);
      return to_vec(prefix + field, it->second);
    };
    const Vec weight = need("weight");
    const Vec mean = need("mean");
    const Vec cov = need("cov");
    if (weight.size() != 1) throw ConfigError(prefix + "weight must be a single number");
    const std::size_t d = mean.size();
    if (cov.size() != d * d) throw ConfigError(prefix + "cov must list d * d entries row by row");
    comps.push_back({weight[0], mean, Matrix(d, d, cov)});
  }
  for (const auto& [key, value] : teacher_keys)
    if (!used.count(key)) throw ConfigError("unknown config key '" + key + "'");
  try {
    return GaussianMixture(std::move(comps));
  } catch (const std::exception& e) {
    throw ConfigError(std::string("teacher: ") + e.what());
  }
}

}  // namespace

std::string DivergenceSpec::label() const { return make_instance(name, lambda).label(); }

DivergenceSpec parse_divergence_spec(const std::string& text) {
  const std::string t = trim(text);
  const auto colon = t.find(':');
  DivergenceSpec spec;
  spec.name = trim(t.substr(0, colon));
  if (colon != std::string::npos) spec.lambda = to_double("divergence lambda", trim(t.substr(colon + 1)));
  try {
    make_instance(spec.name, spec.lambda);
  } catch (const ArgumentError& e) {
    throw ConfigError("divergence '" + t + "': " + e.what());
  }
  return spec;
}

RawConfig parse_raw_config(const std::string& text, const std::string& origin) {
  RawConfig raw;
  std::stringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
    raw[key] = trim(line.substr(eq + 1));
  }
  return raw;
}

std::pair<std::string, std::string> parse_override(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || trim(text.substr(0, eq)).empty())
    throw ConfigError("override '" + text + "' is not KEY=VALUE");
  return {trim(text.substr(0, eq)), trim(text.substr(eq + 1))};
}

ExperimentConfig build_config(const RawConfig& raw) {
  ExperimentConfig cfg;
  RawConfig teacher_keys;
  for (const auto& [key, value] : raw) {
    if (key.rfind("teacher.", 0) == 0) {
      teacher_keys[key] = value;
      continue;
    }
    const auto it = fields().find(key);
    if (it == fields().end()) throw ConfigError("unknown config key '" + key + "'");
    it->second.set(cfg, key, value);
  }
  if (!teacher_keys.empty()) cfg.distill.teacher = build_teacher(teacher_keys);
  if (cfg.sweep_seeds.empty()) throw ConfigError("sweep.seeds must not be empty");
  if (cfg.sweep_divergences.empty()) throw ConfigError("sweep.divergences must not be empty");
  if (cfg.eval_samples < 1) throw ConfigError("eval.samples must be positive");
  try {
    cfg.distill.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::optional<std::filesystem::path>& path,
                             const std::vector<std::string>& overrides) {
  RawConfig raw;
  if (path) {
    std::ifstream in(*path);
    if (!in) throw ConfigError("cannot read config file " + path->string());
    std::stringstream buf;
    buf << in.rdbuf();
    raw = parse_raw_config(buf.str(), path->string());
  }
  for (const auto& o : overrides) {
    auto [key, value] = parse_override(o);
    raw[key] = value;
  }
  return build_config(raw);
}

std::string canonical_config(const ExperimentConfig& cfg) {
  std::map<std::string, std::string> out;
  for (const auto& [key, field] : fields()) out[key] = field.get(cfg);
  const auto& teacher = cfg.distill.teacher;
  out["teacher.components"] = std::to_string(teacher.size());
  for (std::size_t k = 0; k < teacher.size(); ++k) {
    const auto& c = teacher.component(k);
    const std::string prefix = "teacher." + std::to_string(k) + ".";
    out[prefix + "weight"] = fmt_double(c.weight);
    out[prefix + "mean"] = join_doubles(c.mean);
    out[prefix + "cov"] = join_doubles(Vec(c.cov.data().begin(), c.cov.data().end()));
  }
  std::string text;
  for (const auto& [key, value] : out) text += key + " = " + value + "\n";
  return text;
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const ExperimentConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical_config(cfg))));
  return buf;
}

std::vector<std::string> known_config_keys() {
  std::vector<std::string> keys;
  for (const auto& [key, field] : fields()) keys.push_back(key);
  keys.insert(keys.end(), {"teacher.components", "teacher.<k>.weight", "teacher.<k>.mean", "teacher.<k>.cov"});
  return keys;
}

}  // namespace bregdistill
