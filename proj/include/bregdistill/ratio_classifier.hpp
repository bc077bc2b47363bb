#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "bregdistill/adam.hpp"
#include "bregdistill/analytic.hpp"
#include "bregdistill/dense_net.hpp"
#include "bregdistill/diffusion.hpp"

namespace bregdistill {

// Draws n clean samples.
using Sampler = std::function<std::vector<Vec>(Rng&, std::size_t)>;

// Time-conditioned logistic classifier: teacher/data samples are labeled 1,
// student samples 0, and the logit l_t(x) yields the ratio estimate
// q_t / p_t = exp(-l_t(x)).
class RatioClassifier {
 public:
  RatioClassifier(std::size_t dim, Rng& rng, std::vector<std::size_t> hidden = {64, 64},
                  AdamConfig adam = {});
  // Wraps an existing network of widths [dim + 16, ..., 1].
  RatioClassifier(std::size_t dim, DenseNet net, AdamConfig adam = {});

  std::size_t dim() const { return dim_; }
  const DenseNet& net() const { return net_; }
  DenseNet& net() { return net_; }
  AdamState& optimizer() { return optimizer_; }

  double logit(std::span<const double> x, double t) const;
  // exp(-l) with l clamped to [-30, 30].
  double ratio(std::span<const double> x, double t) const;
  // Snapshot of the current network as a ratio field (provenance = classifier).
  RatioField ratio_field() const;

 private:
  std::size_t dim_;
  DenseNet net_;
  AdamState optimizer_;
};

struct LossAndGradient {
  double loss = 0.0;
  Vec gradient;
};

// Mean binary cross-entropy over both batches against sigmoid(l_t(x)).
LossAndGradient classifier_loss(const RatioClassifier& clf, std::span<const NoisySample> teacher_batch,
                                std::span<const NoisySample> student_batch);

struct FitOptions {
  std::size_t batch_size = 256;
  // When set every sample uses this time instead of a draw from the schedule.
  std::optional<double> fixed_time;
  // Cosine learning-rate decay to lr * lr_floor over the fit.
  bool cosine_decay = true;
  double lr_floor = 0.05;
};

struct FitReport {
  std::vector<double> losses;
};

// Draws clean samples, perturbs each with its own (t, xi) and runs `steps`
// optimizer updates. Deterministic given rng.
FitReport fit_classifier(RatioClassifier& clf, const Sampler& teacher, const Sampler& student,
                         const DiffusionSchedule& sched, std::size_t steps, Rng& rng,
                         const FitOptions& options = {});

// One update on freshly drawn batches; returns the loss before the update.
double classifier_step(RatioClassifier& clf, const Sampler& teacher, const Sampler& student,
                       const DiffusionSchedule& sched, Rng& rng, std::size_t batch_size, double lr_scale = 1.0,
                       std::optional<double> fixed_time = std::nullopt);

double ratio_estimate(const RatioClassifier& clf, std::span<const double> x, double t);

// Draws a noisy batch from clean samples, one (t, xi) per sample.
std::vector<NoisySample> noisy_batch(const std::vector<Vec>& clean, const DiffusionSchedule& sched, Rng& rng,
                                     std::optional<double> fixed_time = std::nullopt);

}  // namespace bregdistill
