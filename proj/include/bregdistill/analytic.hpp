#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "bregdistill/diffusion.hpp"
#include "bregdistill/linalg.hpp"
#include "bregdistill/rng.hpp"

namespace bregdistill {

struct GaussianComponent {
  double weight = 1.0;
  Vec mean;
  Matrix cov;
};

// Finite Gaussian mixture in dimension 1 or 2 with cached Cholesky factors.
// All density evaluations go through a max-shifted log-sum-exp.
class GaussianMixture {
 public:
  explicit GaussianMixture(std::vector<GaussianComponent> components);
  static GaussianMixture gaussian(Vec mean, Matrix cov);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return components_.size(); }
  const GaussianComponent& component(std::size_t k) const { return components_[k]; }
  const std::vector<GaussianComponent>& components() const { return components_; }

  double log_density(std::span<const double> x) const;
  Vec score(std::span<const double> x) const;
  // Posterior component probabilities at x.
  Vec responsibilities(std::span<const double> x) const;

  // Mean and per-axis standard deviation of the whole mixture.
  Vec mean() const;
  Vec axis_std() const;

 private:
  struct Cached {
    double log_weight;
    double log_norm;  // -0.5 * log det(2 pi Sigma)
    Matrix chol;
    Matrix precision;
  };
  // Fills log_terms[k] = log w_k + log N(x; mu_k, Sigma_k).
  void component_log_terms(std::span<const double> x, std::span<double> log_terms) const;

  std::size_t dim_ = 0;
  std::vector<GaussianComponent> components_;
  std::vector<Cached> cached_;
};

// Default toy teacher: equal-weight N((-1.5, 0), 0.15 I) and N((1.5, 0), 0.15 I).
GaussianMixture default_two_mode_teacher();

double gm_log_density(const GaussianMixture& gm, std::span<const double> x);
Vec gm_score(const GaussianMixture& gm, std::span<const double> x);
// Component k maps to N(alpha_t mu_k, alpha_t^2 Sigma_k + sigma_t^2 I); weights unchanged.
GaussianMixture gm_marginal(const GaussianMixture& gm, const DiffusionSchedule& sched, double t);
GaussianMixture gm_marginal(const GaussianMixture& gm, NoiseLevel level);

// G(eps) = A eps + b with eps ~ N(0, I).
struct AffineGenerator {
  Matrix a;
  Vec b;

  std::size_t dim() const { return b.size(); }
  Vec apply(std::span<const double> eps) const;

  // Flat parameters [A row-major, b].
  Vec parameters() const;
  static AffineGenerator from_parameters(std::size_t dim, std::span<const double> params);
};

// Throws DegenerateGeneratorError unless |det A| > 1e-12.
void check_nondegenerate(const AffineGenerator& gen);
// N(b, A A^T).
GaussianMixture pushforward(const AffineGenerator& gen);
// N(alpha_t b, alpha_t^2 A A^T + sigma_t^2 I).
GaussianMixture affine_pushforward(const AffineGenerator& gen, const DiffusionSchedule& sched, double t);
GaussianMixture affine_pushforward(const AffineGenerator& gen, NoiseLevel level);

// Ratios are clamped to [e^-30, e^30] before they are used as weights.
inline constexpr double kLogRatioClamp = 30.0;
double clamp_log_ratio(double log_ratio);
double clamped_ratio(double log_ratio);

enum class RatioSource { Analytic, Classifier };

// r_t(x) = q_t(x) / p_t(x), represented through its logarithm. `at(t)` binds a
// noise level once so repeated evaluations at the same t are cheap.
class RatioField {
 public:
  using LogRatioAtTime = std::function<double(std::span<const double>)>;
  using Binder = std::function<LogRatioAtTime(double t)>;

  RatioField(Binder binder, RatioSource source) : binder_(std::move(binder)), source_(source) {}

  LogRatioAtTime at(double t) const { return binder_(t); }
  double log_ratio(std::span<const double> x, double t) const { return binder_(t)(x); }
  double operator()(std::span<const double> x, double t) const;
  RatioSource provenance() const { return source_; }

 private:
  Binder binder_;
  RatioSource source_;
};

// Ratio of the generator's noisy marginal to the teacher's, valid at any t in range.
RatioField analytic_ratio(const GaussianMixture& teacher, const AffineGenerator& gen,
                          const DiffusionSchedule& sched);
// Same, with marginals precomputed at a single t; evaluating at any other t throws.
RatioField analytic_ratio(const GaussianMixture& teacher, const AffineGenerator& gen,
                          const DiffusionSchedule& sched, double t);

// Time-independent ratio q / p of two fixed densities.
RatioField mixture_ratio(const GaussianMixture& q, const GaussianMixture& p);

std::vector<Vec> sample(const GaussianMixture& gm, Rng& rng, std::size_t n);
std::vector<Vec> sample(const AffineGenerator& gen, Rng& rng, std::size_t n);

// Standard normal vectors of dimension d.
std::vector<Vec> sample_standard_normal(Rng& rng, std::size_t n, std::size_t d);

}  // namespace bregdistill
