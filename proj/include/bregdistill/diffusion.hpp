#pragma once

#include <span>

#include "bregdistill/linalg.hpp"
#include "bregdistill/rng.hpp"

namespace bregdistill {

enum class ScheduleKind { VarianceExploding, VariancePreserving };
enum class TimeLaw { LogUniform, Uniform };

// Forward perturbation kernel x_t = alpha_t x_0 + sigma_t xi over [t_min, t_max].
//   VE: alpha_t = 1, sigma_t = t.
//   VP: alpha_t = exp(-t^2 (beta_max - beta_min) / 4 - t beta_min / 2), sigma_t = sqrt(1 - alpha_t^2).
struct DiffusionSchedule {
  ScheduleKind kind = ScheduleKind::VarianceExploding;
  double t_min = 0.01;
  double t_max = 3.0;
  double beta_min = 0.1;
  double beta_max = 20.0;
  TimeLaw time_law = TimeLaw::LogUniform;

  static DiffusionSchedule variance_exploding(double t_min = 0.01, double t_max = 3.0);
  static DiffusionSchedule variance_preserving(double beta_min = 0.1, double beta_max = 20.0,
                                               double t_min = 1e-3, double t_max = 1.0);

  // Throws ArgumentError when the parameters are inconsistent.
  void validate() const;
};

struct NoiseLevel {
  double alpha = 1.0;
  double sigma = 0.0;
};

struct NoisySample {
  Vec x_t;
  double t = 0.0;
  Vec x0;
  Vec xi;
};

NoiseLevel schedule_at(const DiffusionSchedule& sched, double t);
NoisySample perturb(const DiffusionSchedule& sched, std::span<const double> x0, double t,
                    std::span<const double> xi);
double sample_time(const DiffusionSchedule& sched, Rng& rng);

// Scalar time weighting w(t) applied to generator updates.
enum class TimeWeighting { SigmaSquaredAlpha, Constant };
double time_weight(TimeWeighting kind, NoiseLevel level);

}  // namespace bregdistill
