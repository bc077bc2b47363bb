#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "bregdistill/adam.hpp"
#include "bregdistill/analytic.hpp"
#include "bregdistill/dense_net.hpp"
#include "bregdistill/diffusion.hpp"
#include "bregdistill/ratio_classifier.hpp"

namespace bregdistill {

// Learned score s(x, t) = net(x, embed(t)) / sigma_t, i.e. the network predicts
// sigma_t times the score (the negated noise for a denoiser).
class ScoreNet {
 public:
  ScoreNet(std::size_t dim, DiffusionSchedule sched, Rng& rng, std::vector<std::size_t> hidden = {128, 128},
           AdamConfig adam = {});
  ScoreNet(std::size_t dim, DiffusionSchedule sched, DenseNet net, AdamConfig adam = {});

  std::size_t dim() const { return dim_; }
  const DiffusionSchedule& schedule() const { return sched_; }
  const DenseNet& net() const { return net_; }
  DenseNet& net() { return net_; }
  AdamState& optimizer() { return optimizer_; }

  Vec score(std::span<const double> x, double t) const;

 private:
  std::size_t dim_;
  DiffusionSchedule sched_;
  DenseNet net_;
  AdamState optimizer_;
};

// Mean over the batch of |sigma_t s(x_t, t) + xi|^2, the sigma^2-weighted
// denoising objective, with one (t, xi) per sample drawn from rng.
LossAndGradient dsm_loss(const ScoreNet& model, const std::vector<Vec>& x0_batch, Rng& rng);
// Same on pre-drawn noisy samples.
LossAndGradient dsm_loss(const ScoreNet& model, std::span<const NoisySample> batch);

double score_step(ScoreNet& model, const Sampler& source, Rng& rng, std::size_t batch_size,
                  double lr_scale = 1.0);

class ScoreProvider;

FitReport fit_score(ScoreNet& model, const Sampler& source, std::size_t steps, Rng& rng,
                    const FitOptions& options = {});

enum class ScoreKind { AnalyticTeacher, AnalyticStudent, Learned };

// Uniform view over the teacher score, the closed-form score of an affine
// student and a learned score network.
class ScoreProvider {
 public:
  using ScoreAtTime = std::function<Vec(std::span<const double>)>;

  static ScoreProvider analytic_teacher(const GaussianMixture& teacher, const DiffusionSchedule& sched);
  static ScoreProvider analytic_student(const AffineGenerator& gen, const DiffusionSchedule& sched);
  // Snapshot of the network's current parameters.
  static ScoreProvider learned(const ScoreNet& model);

  ScoreKind kind() const { return kind_; }
  std::size_t dim() const { return dim_; }
  const DiffusionSchedule& schedule() const { return sched_; }

  // Binds t once (marginal parameters, time embedding) for repeated evaluation.
  ScoreAtTime at(double t) const;
  Vec operator()(std::span<const double> x, double t) const { return at(t)(x); }

 private:
  ScoreProvider(ScoreKind kind, std::size_t dim, DiffusionSchedule sched);

  ScoreKind kind_;
  std::size_t dim_;
  DiffusionSchedule sched_;
  std::shared_ptr<const GaussianMixture> density_;
  std::shared_ptr<const ScoreNet> model_;
};

Vec score_at(const ScoreProvider& provider, std::span<const double> x, double t);

}  // namespace bregdistill
