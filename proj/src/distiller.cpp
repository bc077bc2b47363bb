#include "bregdistill/distiller.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "bregdistill/checkpoint.hpp"
#include "bregdistill/errors.hpp"
#include "bregdistill/metrics.hpp"

namespace bregdistill {

namespace {

void check_batch(const Generator& gen, const ScoreProvider& teacher, const ScoreProvider& student,
                 const GradientBatch& batch) {
  const std::size_t n = batch.size();
  if (n == 0) throw ArgumentError("gradient batch is empty");
  if (batch.eps.size() != n || batch.xi.size() != n)
    throw ShapeError("gradient batch times, latents and noises must align");
  if (!batch.sample_weights.empty() && batch.sample_weights.size() != n)
    throw ShapeError("gradient batch sample weights must align with the samples");
  const std::size_t d = gen.dim();
  if (teacher.dim() != d || student.dim() != d) throw ShapeError("score providers and generator disagree on dimension");
  for (std::size_t i = 0; i < n; ++i)
    if (batch.eps[i].size() != d || batch.xi[i].size() != d)
      throw ShapeError("gradient batch sample " + std::to_string(i) + " has wrong dimension");
}

// Shared by the Bregman and unit-weight paths. With `cf` null every weight is 1.
GeneratorGradient weighted_gradient(const Generator& gen, const ScoreProvider& teacher, const ScoreProvider& student,
                                    const RatioField* ratio, const ConvexFunction* cf,
                                    const DiffusionSchedule& sched, const GradientBatch& batch,
                                    const GradientOptions& options) {
  check_batch(gen, teacher, student, batch);
  const std::size_t n = batch.size();
  const std::size_t d = gen.dim();

  Vec coef(n), alpha(n), share(n);
  std::vector<Vec> diff(n);
  GeneratorGradient out;
  out.bregman_weights.resize(n);

  double bound_t = std::nan("");
  NoiseLevel level;
  ScoreProvider::ScoreAtTime teacher_at, student_at;
  RatioField::LogRatioAtTime ratio_at;
  Vec x_t(d);
  double share_total = 0.0;
  double weighted_sum = 0.0;

  for (std::size_t i = 0; i < n; ++i) {
    const double t = batch.times[i];
    if (!(t == bound_t)) {
      level = schedule_at(sched, t);
      teacher_at = teacher.at(t);
      student_at = student.at(t);
      if (cf) ratio_at = ratio->at(t);
      bound_t = t;
    }
    const Vec x = gen.apply(batch.eps[i]);
    for (std::size_t j = 0; j < d; ++j) x_t[j] = level.alpha * x[j] + level.sigma * batch.xi[i][j];

    const Vec sp = teacher_at(x_t);
    const Vec sq = student_at(x_t);
    diff[i].resize(d);
    for (std::size_t j = 0; j < d; ++j) {
      diff[i][j] = sp[j] - sq[j];
      if (!std::isfinite(diff[i][j])) throw NumericError("non-finite score at sample " + std::to_string(i));
    }
    double w = 1.0;
    if (cf) {
      const double log_r = ratio_at(x_t);
      if (std::isnan(log_r)) throw NumericError("non-finite ratio at sample " + std::to_string(i));
      w = cf->weight(std::exp(clamp_log_ratio(log_r)));
      if (!std::isfinite(w) || !(w > 0.0))
        throw NumericError("invalid Bregman weight " + std::to_string(w) + " at sample " + std::to_string(i));
    }
    out.bregman_weights[i] = w;
    coef[i] = time_weight(options.weighting, level);
    alpha[i] = level.alpha;
    share[i] = batch.sample_weights.empty() ? 1.0 / static_cast<double>(n) : batch.sample_weights[i];
    share_total += share[i];
    weighted_sum += share[i] * w;
  }
  out.mean_weight = weighted_sum / share_total;

  out.gradient.assign(gen.net().parameter_count(), 0.0);
  Vec upstream(d);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = options.normalize_weights ? out.bregman_weights[i] / out.mean_weight : out.bregman_weights[i];
    const double scale = coef[i] * w;
    for (std::size_t j = 0; j < d; ++j) upstream[j] = -share[i] * alpha[i] * (scale * diff[i][j]);
    gen.pullback(batch.eps[i], upstream, out.gradient);
  }
  return out;
}

Sampler teacher_sampler(const GaussianMixture& teacher) {
  return [&teacher](Rng& rng, std::size_t n) { return sample(teacher, rng, n); };
}

Sampler student_sampler(const Generator& gen) {
  return [&gen](Rng& rng, std::size_t n) { return gen.sample(rng, n); };
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

GradientBatch draw_gradient_batch(std::size_t n, std::size_t dim, const DiffusionSchedule& sched, Rng& rng) {
  GradientBatch batch;
  batch.times.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    batch.times.push_back(sample_time(sched, rng));
    Vec eps(dim), xi(dim);
    for (double& v : eps) v = rng.normal();
    for (double& v : xi) v = rng.normal();
    batch.eps.push_back(std::move(eps));
    batch.xi.push_back(std::move(xi));
  }
  return batch;
}

GeneratorGradient generator_gradient(const Generator& gen, const ScoreProvider& teacher,
                                     const ScoreProvider& student, const RatioField& ratio,
                                     const ConvexFunction& cf, const DiffusionSchedule& sched,
                                     const GradientBatch& batch, const GradientOptions& options) {
  return weighted_gradient(gen, teacher, student, &ratio, &cf, sched, batch, options);
}

GeneratorGradient vsd_gradient(const Generator& gen, const ScoreProvider& teacher, const ScoreProvider& student,
                               const DiffusionSchedule& sched, const GradientBatch& batch,
                               const GradientOptions& options) {
  return weighted_gradient(gen, teacher, student, nullptr, nullptr, sched, batch, options);
}

void DistillConfig::validate() const {
  schedule.validate();
  convex_function();
  const std::size_t d = teacher.dim();
  if (d < 1 || d > 2) throw ConfigError("teacher dimension must be 1 or 2");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (rounds < 1) throw ConfigError("rounds must be positive");
  if (update.generator_steps < 1) throw ConfigError("update.generator must be at least 1");
  if (record_interval < 1) throw ConfigError("record_interval must be positive");
  if (metric_samples < 1 || projections < 1 || mmd_points < 1 || divergence_samples < 1)
    throw ConfigError("metric sample counts must be positive");
  for (double lr : {generator_lr, score_lr, classifier_lr})
    if (!std::isfinite(lr) || lr < 0.0) throw ConfigError("learning rates must be finite and non-negative");
  if (generator_kind == GeneratorKind::Mlp && generator_hidden.empty())
    throw ConfigError("generator.hidden must list at least one width for an mlp generator");
  if (generator_kind != GeneratorKind::Affine &&
      (ratio_source == RatioSourceKind::Analytic || student_score == StudentScoreKind::Analytic))
    throw ConfigError("analytic ratio or student score requires an affine generator");
  if (divergence_t < schedule.t_min || divergence_t > schedule.t_max)
    throw ConfigError("metrics.divergence_t lies outside the schedule");
}

ConvexFunction DistillConfig::convex_function() const {
  try {
    return make_instance(divergence, lambda);
  } catch (const ArgumentError& e) {
    throw ConfigError(std::string("divergence: ") + e.what());
  }
}

DistillState make_distill_state(const DistillConfig& cfg) {
  cfg.validate();
  const std::size_t d = cfg.teacher.dim();
  Rng master(cfg.seed);
  Rng init = master.derive(1);

  Generator gen = cfg.generator_kind == GeneratorKind::Affine
                      ? Generator::affine(AffineGenerator{Matrix::identity(d), Vec(d, 0.0)})
                      : Generator::mlp(d, cfg.generator_hidden, init);
  AdamConfig gen_adam;
  gen_adam.learning_rate = cfg.generator_lr;
  AdamConfig score_adam;
  score_adam.learning_rate = cfg.score_lr;
  AdamConfig clf_adam;
  clf_adam.learning_rate = cfg.classifier_lr;
  ScoreNet score(d, cfg.schedule, init, cfg.score_hidden, score_adam);
  RatioClassifier clf(d, init, cfg.classifier_hidden, clf_adam);
  AdamState gen_opt = make_adam_state(gen.net().parameter_count(), gen_adam, gen.net().parameter_blocks());

  DistillState state{std::move(gen), std::move(gen_opt), std::move(score), std::move(clf), master.derive(2),
                     std::chrono::steady_clock::now(), 0, 1.0, {}};

  const Sampler teacher = teacher_sampler(cfg.teacher);
  const Sampler student = student_sampler(state.generator);
  for (std::size_t k = 0; k < cfg.warmup_steps; ++k) {
    if (cfg.student_score == StudentScoreKind::Learned)
      score_step(state.score, student, state.train_rng, cfg.batch_size);
    if (cfg.ratio_source == RatioSourceKind::Classifier)
      classifier_step(state.classifier, teacher, student, cfg.schedule, state.train_rng, cfg.batch_size);
  }
  return state;
}

double estimate_divergence(const DistillState& state, const DistillConfig& cfg, Rng& rng) {
  const ConvexFunction cf = cfg.convex_function();
  const RatioField ratio = cfg.ratio_source == RatioSourceKind::Analytic
                               ? analytic_ratio(cfg.teacher, state.generator.as_affine(), cfg.schedule)
                               : state.classifier.ratio_field();
  const auto log_ratio = ratio.at(cfg.divergence_t);
  const auto clean = sample(cfg.teacher, rng, cfg.divergence_samples);
  const auto noisy = noisy_batch(clean, cfg.schedule, rng, cfg.divergence_t);
  const double h1 = cf.value(1.0);
  const double dh1 = cf.first(1.0);
  double sum = 0.0;
  for (const auto& s : noisy) {
    const double r = std::exp(clamp_log_ratio(log_ratio(s.x_t)));
    sum += cf.value(r) - h1 - dh1 * (r - 1.0);
  }
  return sum / static_cast<double>(noisy.size());
}

TrainRecord evaluate_state(DistillState& state, const DistillConfig& cfg) {
  // A fixed stream per evaluation: an unchanged generator gives unchanged metrics.
  Rng rng = Rng(cfg.seed).derive(3);
  TrainRecord rec;
  rec.round = state.round;
  const auto teacher = sample(cfg.teacher, rng, cfg.metric_samples);
  const auto student = state.generator.sample(rng, cfg.metric_samples);
  rec.sw2 = sliced_wasserstein2(student, teacher, cfg.projections, rng);
  const auto teacher_sub = subsample(teacher, cfg.mmd_points, rng);
  const auto student_sub = subsample(student, cfg.mmd_points, rng);
  rec.mmd = mmd_rbf(student_sub, teacher_sub);
  rec.mode_fractions = mode_coverage(student, cfg.teacher);
  rec.mode_cov_min = *std::min_element(rec.mode_fractions.begin(), rec.mode_fractions.end());
  rec.divergence_est = estimate_divergence(state, cfg, rng);
  rec.mean_weight = state.last_mean_weight;
  if (cfg.wallclock)
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - state.started).count();
  for (double v : {rec.sw2, rec.mmd, rec.divergence_est, rec.mean_weight})
    if (!std::isfinite(v)) throw NumericError("non-finite metric at round " + std::to_string(state.round));
  return rec;
}

TrainRecord distill_round(DistillState& state, const DistillConfig& cfg, bool record) {
  const std::size_t round = state.round + 1;
  try {
    const Sampler teacher = teacher_sampler(cfg.teacher);
    const Sampler student = student_sampler(state.generator);
    if (cfg.student_score == StudentScoreKind::Learned)
      for (std::size_t k = 0; k < cfg.update.score_steps; ++k)
        score_step(state.score, student, state.train_rng, cfg.batch_size);
    if (cfg.ratio_source == RatioSourceKind::Classifier)
      for (std::size_t k = 0; k < cfg.update.classifier_steps; ++k)
        classifier_step(state.classifier, teacher, student, cfg.schedule, state.train_rng, cfg.batch_size);

    const ConvexFunction cf = cfg.convex_function();
    const ScoreProvider teacher_score = ScoreProvider::analytic_teacher(cfg.teacher, cfg.schedule);
    GradientOptions options{cfg.weighting, cfg.normalize_weights};
    for (std::size_t k = 0; k < cfg.update.generator_steps; ++k) {
      const bool analytic = cfg.generator_kind == GeneratorKind::Affine;
      const RatioField ratio = cfg.ratio_source == RatioSourceKind::Analytic
                                   ? analytic_ratio(cfg.teacher, state.generator.as_affine(), cfg.schedule)
                                   : state.classifier.ratio_field();
      const ScoreProvider student_score =
          cfg.student_score == StudentScoreKind::Analytic && analytic
              ? ScoreProvider::analytic_student(state.generator.as_affine(), cfg.schedule)
              : ScoreProvider::learned(state.score);
      const GradientBatch batch =
          draw_gradient_batch(cfg.batch_size, state.generator.dim(), cfg.schedule, state.train_rng);
      const GeneratorGradient g =
          generator_gradient(state.generator, teacher_score, student_score, ratio, cf, cfg.schedule, batch, options);
      adam_update(state.generator_opt, state.generator.parameters(), g.gradient);
      state.last_mean_weight = g.mean_weight;
    }
    state.round = round;
    TrainRecord rec;
    rec.round = round;
    rec.mean_weight = state.last_mean_weight;
    if (record) {
      rec = evaluate_state(state, cfg);
      state.history.push_back(rec);
    }
    return rec;
  } catch (const NumericError& e) {
    throw NumericError("round " + std::to_string(round) + ": " + e.what());
  }
}

std::string metric_csv_header() { return "round,divergence_est,sw2,mmd,mode_cov_min,mean_weight,seconds"; }

std::string metric_csv_row(const TrainRecord& rec) {
  return std::to_string(rec.round) + "," + fmt(rec.divergence_est) + "," + fmt(rec.sw2) + "," + fmt(rec.mmd) + "," +
         fmt(rec.mode_cov_min) + "," + fmt(rec.mean_weight) + "," + fmt(rec.seconds);
}

RunResult distill_run(const DistillConfig& cfg, const std::optional<std::filesystem::path>& out_dir,
                      const std::string& config_hash) {
  RunResult result;
  DistillState state = make_distill_state(cfg);

  std::ofstream csv;
  std::filesystem::path csv_path;
  auto save_checkpoints = [&](bool register_paths) {
    if (!out_dir) return;
    const std::pair<const char*, const DenseNet*> nets[] = {{"generator", &state.generator.net()},
                                                            {"score_net", &state.score.net()},
                                                            {"ratio_classifier", &state.classifier.net()}};
    for (const auto& [role, net] : nets) {
      const auto path = *out_dir / (std::string(role) + ".ckpt.json");
      // Write then rename so an interrupted write never replaces a good checkpoint.
      const auto tmp = path.string() + ".tmp";
      write_checkpoint(tmp, *net, CheckpointMetadata{role, cfg.seed, state.round, config_hash});
      std::filesystem::rename(tmp, path);
      if (register_paths) result.artifacts.push_back(path);
    }
  };

  if (out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(*out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + out_dir->string() + ": " + ec.message());
    csv_path = *out_dir / "metrics.csv";
    csv.open(csv_path, std::ios::binary);
    if (!csv) throw IoError("cannot write " + csv_path.string());
    csv << metric_csv_header() << '\n';
    result.artifacts.push_back(csv_path);
    save_checkpoints(true);
  }

  for (std::size_t r = 0; r < cfg.rounds; ++r) {
    const bool record = (r + 1) % cfg.record_interval == 0;
    try {
      TrainRecord rec = distill_round(state, cfg, record);
      if (record) {
        result.records.push_back(rec);
        if (out_dir) {
          csv << metric_csv_row(rec) << '\n';
          csv.flush();
          if (!csv) throw IoError("failed writing " + csv_path.string());
        }
      }
    } catch (const NumericError& e) {
      result.failed = true;
      result.failed_round = r + 1;
      result.failure = e.what();
      return result;
    }
    if (cfg.checkpoint_interval > 0 && (r + 1) % cfg.checkpoint_interval == 0) save_checkpoints(false);
  }
  save_checkpoints(false);
  return result;
}

}  // namespace bregdistill
