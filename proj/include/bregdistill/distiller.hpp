#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "bregdistill/adam.hpp"
#include "bregdistill/analytic.hpp"
#include "bregdistill/bregman.hpp"
#include "bregdistill/diffusion.hpp"
#include "bregdistill/generator.hpp"
#include "bregdistill/ratio_classifier.hpp"
#include "bregdistill/score_model.hpp"

namespace bregdistill {

// Samples entering one generator update. `sample_weights` empty means the
// plain batch average; otherwise weight i replaces 1/n (quadrature mode).
struct GradientBatch {
  Vec times;
  std::vector<Vec> eps;
  std::vector<Vec> xi;
  Vec sample_weights;

  std::size_t size() const { return times.size(); }
};

GradientBatch draw_gradient_batch(std::size_t n, std::size_t dim, const DiffusionSchedule& sched, Rng& rng);

struct GradientOptions {
  TimeWeighting weighting = TimeWeighting::Constant;
  // Divide the Bregman weights by their batch mean.
  bool normalize_weights = false;
};

struct GeneratorGradient {
  // Descent direction for D_h(r_t || 1): apply params -= lr * gradient.
  Vec gradient;
  // Raw per-sample h''(r) r, before any normalization.
  Vec bregman_weights;
  double mean_weight = 0.0;
};

// Weighted score-difference gradient. The ratio and both scores are only
// evaluated, never differentiated. Each sample contributes
//   -c_i * alpha_t * (dG/dtheta)^T [ w(t) h''(r) r (s_teacher - s_student) ](x_t)
// with x_t = alpha_t G(eps) + sigma_t xi and c_i the sample weight.
GeneratorGradient generator_gradient(const Generator& gen, const ScoreProvider& teacher,
                                     const ScoreProvider& student, const RatioField& ratio,
                                     const ConvexFunction& cf, const DiffusionSchedule& sched,
                                     const GradientBatch& batch, const GradientOptions& options = {});

// The score-difference gradient with unit weight, w(t) (s_teacher - s_student).
GeneratorGradient vsd_gradient(const Generator& gen, const ScoreProvider& teacher, const ScoreProvider& student,
                               const DiffusionSchedule& sched, const GradientBatch& batch,
                               const GradientOptions& options = {});

enum class RatioSourceKind { Classifier, Analytic };
enum class StudentScoreKind { Learned, Analytic };

struct UpdateRatio {
  std::size_t score_steps = 2;
  std::size_t classifier_steps = 2;
  std::size_t generator_steps = 1;
};

struct DistillConfig {
  std::string divergence = "KL";
  std::optional<double> lambda;
  DiffusionSchedule schedule = DiffusionSchedule::variance_exploding();
  GaussianMixture teacher = default_two_mode_teacher();
  GeneratorKind generator_kind = GeneratorKind::Mlp;
  std::vector<std::size_t> generator_hidden{64, 64};
  std::vector<std::size_t> score_hidden{128, 128};
  std::vector<std::size_t> classifier_hidden{64, 64};
  TimeWeighting weighting = TimeWeighting::SigmaSquaredAlpha;
  std::size_t batch_size = 256;
  UpdateRatio update;
  std::size_t rounds = 2000;
  double generator_lr = 1e-3;
  double score_lr = 1e-3;
  double classifier_lr = 1e-3;
  // Auxiliary updates on the initial generator before round 1.
  std::size_t warmup_steps = 200;
  RatioSourceKind ratio_source = RatioSourceKind::Classifier;
  StudentScoreKind student_score = StudentScoreKind::Learned;
  bool normalize_weights = false;
  std::uint64_t seed = 0;
  std::size_t record_interval = 100;
  std::size_t checkpoint_interval = 0;
  std::size_t metric_samples = 10000;
  std::size_t projections = 128;
  std::size_t mmd_points = 1000;
  // Noise level at which the divergence estimate is recorded.
  double divergence_t = 0.5;
  std::size_t divergence_samples = 4096;
  bool wallclock = false;

  void validate() const;
  ConvexFunction convex_function() const;
};

struct TrainRecord {
  std::size_t round = 0;
  double divergence_est = 0.0;
  double sw2 = 0.0;
  double mmd = 0.0;
  Vec mode_fractions;
  double mode_cov_min = 0.0;
  double mean_weight = 0.0;
  double seconds = 0.0;
};

struct DistillState {
  Generator generator;
  AdamState generator_opt;
  ScoreNet score;
  RatioClassifier classifier;
  Rng train_rng;
  std::chrono::steady_clock::time_point started;
  std::size_t round = 0;
  double last_mean_weight = 1.0;
  std::vector<TrainRecord> history;
};

DistillState make_distill_state(const DistillConfig& cfg);

// One round: score refresh, classifier refresh, generator update(s). When
// `record` is set the returned record carries fresh metrics.
TrainRecord distill_round(DistillState& state, const DistillConfig& cfg, bool record);

TrainRecord evaluate_state(DistillState& state, const DistillConfig& cfg);

// Sample-based D_h(r_t || 1) at cfg.divergence_t using the configured ratio source.
double estimate_divergence(const DistillState& state, const DistillConfig& cfg, Rng& rng);

std::string metric_csv_header();
std::string metric_csv_row(const TrainRecord& rec);

struct RunResult {
  std::vector<TrainRecord> records;
  std::vector<std::filesystem::path> artifacts;
  bool failed = false;
  std::size_t failed_round = 0;
  std::string failure;
};

// Runs all rounds. With an output directory it writes metrics.csv and the
// generator / score_net / ratio_classifier checkpoints; after a numeric
// failure the last good checkpoints remain on disk.
RunResult distill_run(const DistillConfig& cfg, const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                      const std::string& config_hash = "");

}  // namespace bregdistill
