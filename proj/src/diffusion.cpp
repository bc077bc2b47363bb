#include "bregdistill/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bregdistill/errors.hpp"

namespace bregdistill {

DiffusionSchedule DiffusionSchedule::variance_exploding(double t_min, double t_max) {
  DiffusionSchedule s;
  s.kind = ScheduleKind::VarianceExploding;
  s.t_min = t_min;
  s.t_max = t_max;
  s.validate();
  return s;
}

DiffusionSchedule DiffusionSchedule::variance_preserving(double beta_min, double beta_max, double t_min,
                                                         double t_max) {
  DiffusionSchedule s;
  s.kind = ScheduleKind::VariancePreserving;
  s.beta_min = beta_min;
  s.beta_max = beta_max;
  s.t_min = t_min;
  s.t_max = t_max;
  s.validate();
  return s;
}

void DiffusionSchedule::validate() const {
  if (!(t_min > 0.0) || !(t_max > t_min) || !std::isfinite(t_max))
    throw ArgumentError("schedule needs 0 < t_min < t_max < inf");
  if (kind == ScheduleKind::VariancePreserving) {
    if (!(beta_min > 0.0) || !(beta_max >= beta_min))
      throw ArgumentError("VP schedule needs 0 < beta_min <= beta_max");
  }
}

NoiseLevel schedule_at(const DiffusionSchedule& sched, double t) {
  if (!(t >= sched.t_min && t <= sched.t_max)) {
    throw ArgumentError("time " + std::to_string(t) + " outside [" + std::to_string(sched.t_min) + ", " +
                        std::to_string(sched.t_max) + "]");
  }
  if (sched.kind == ScheduleKind::VarianceExploding) return {1.0, t};
  const double log_alpha = -0.25 * t * t * (sched.beta_max - sched.beta_min) - 0.5 * t * sched.beta_min;
  const double alpha = std::exp(log_alpha);
  // 1 - alpha^2 = -expm1(2 log alpha), accurate near t = 0.
  return {alpha, std::sqrt(-std::expm1(2.0 * log_alpha))};
}

NoisySample perturb(const DiffusionSchedule& sched, std::span<const double> x0, double t,
                    std::span<const double> xi) {
  if (x0.size() != xi.size())
    throw ShapeError("perturb: x0 has dimension " + std::to_string(x0.size()) + ", noise has " +
                     std::to_string(xi.size()));
  const NoiseLevel lvl = schedule_at(sched, t);
  NoisySample s;
  s.t = t;
  s.x0.assign(x0.begin(), x0.end());
  s.xi.assign(xi.begin(), xi.end());
  s.x_t.resize(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) s.x_t[i] = lvl.alpha * x0[i] + lvl.sigma * xi[i];
  return s;
}

double sample_time(const DiffusionSchedule& sched, Rng& rng) {
  const double u = rng.uniform();
  if (sched.time_law == TimeLaw::Uniform) return sched.t_min + (sched.t_max - sched.t_min) * u;
  const double lo = std::log(sched.t_min);
  const double hi = std::log(sched.t_max);
  const double t = std::exp(lo + (hi - lo) * u);
  // exp/log rounding can step a hair outside the interval.
  return std::min(std::max(t, sched.t_min), sched.t_max);
}

double time_weight(TimeWeighting kind, NoiseLevel level) {
  switch (kind) {
    case TimeWeighting::SigmaSquaredAlpha:
      return level.sigma * level.sigma * level.alpha;
    case TimeWeighting::Constant:
      return 1.0;
  }
  return 1.0;
}

}  // namespace bregdistill
