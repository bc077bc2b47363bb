#include "bregdistill/analytic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <string>

#include "bregdistill/errors.hpp"

namespace bregdistill {

namespace {

constexpr std::size_t kMaxDim = 2;

double log_sum_exp(std::span<const double> terms) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : terms) m = std::max(m, v);
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (double v : terms) acc += std::exp(v - m);
  return m + std::log(acc);
}

}  // namespace

GaussianMixture::GaussianMixture(std::vector<GaussianComponent> components)
    : components_(std::move(components)) {
  if (components_.empty()) throw ArgumentError("mixture needs at least one component");
  dim_ = components_.front().mean.size();
  if (dim_ < 1 || dim_ > kMaxDim) throw ArgumentError("mixture dimension must be 1 or 2");
  double total = 0.0;
  for (std::size_t k = 0; k < components_.size(); ++k) {
    const auto& c = components_[k];
    if (c.mean.size() != dim_ || c.cov.rows() != dim_ || c.cov.cols() != dim_)
      throw ShapeError("mixture component " + std::to_string(k) + " has inconsistent dimension");
    if (!(c.weight > 0.0)) throw ArgumentError("mixture weights must be positive");
    total += c.weight;
    for (std::size_t i = 0; i < dim_; ++i)
      for (std::size_t j = 0; j < i; ++j)
        if (std::abs(c.cov(i, j) - c.cov(j, i)) > 1e-12 * (1.0 + std::abs(c.cov(i, j))))
          throw ArgumentError("mixture covariance " + std::to_string(k) + " is not symmetric");
    Cached cache;
    cache.log_weight = std::log(c.weight);
    try {
      cache.chol = cholesky(c.cov);
    } catch (const DomainError&) {
      throw ArgumentError("mixture covariance " + std::to_string(k) + " is not positive definite");
    }
    double log_det = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) log_det += 2.0 * std::log(cache.chol(i, i));
    cache.log_norm = -0.5 * (log_det + static_cast<double>(dim_) * std::log(2.0 * std::numbers::pi));
    cache.precision = inverse(c.cov);
    cached_.push_back(std::move(cache));
  }
  if (std::abs(total - 1.0) > 1e-12) throw ArgumentError("mixture weights must sum to 1");
}

GaussianMixture GaussianMixture::gaussian(Vec mean, Matrix cov) {
  return GaussianMixture({GaussianComponent{1.0, std::move(mean), std::move(cov)}});
}

void GaussianMixture::component_log_terms(std::span<const double> x, std::span<double> log_terms) const {
  for (std::size_t k = 0; k < components_.size(); ++k) {
    const auto& c = components_[k];
    const auto& cache = cached_[k];
    std::array<double, kMaxDim> diff{};
    for (std::size_t i = 0; i < dim_; ++i) diff[i] = x[i] - c.mean[i];
    double quad = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < dim_; ++j) row += cache.precision(i, j) * diff[j];
      quad += diff[i] * row;
    }
    log_terms[k] = cache.log_weight + cache.log_norm - 0.5 * quad;
  }
}

double GaussianMixture::log_density(std::span<const double> x) const {
  if (x.size() != dim_) throw ShapeError("log_density: point has wrong dimension");
  if (components_.size() == 1) {
    double t;
    component_log_terms(x, std::span<double>(&t, 1));
    return t;
  }
  std::vector<double> terms(components_.size());
  component_log_terms(x, terms);
  return log_sum_exp(terms);
}

Vec GaussianMixture::responsibilities(std::span<const double> x) const {
  if (x.size() != dim_) throw ShapeError("responsibilities: point has wrong dimension");
  Vec terms(components_.size());
  component_log_terms(x, terms);
  const double lse = log_sum_exp(terms);
  for (double& v : terms) v = std::exp(v - lse);
  return terms;
}

Vec GaussianMixture::score(std::span<const double> x) const {
  if (x.size() != dim_) throw ShapeError("score: point has wrong dimension");
  Vec resp = components_.size() == 1 ? Vec{1.0} : responsibilities(x);
  Vec s(dim_, 0.0);
  for (std::size_t k = 0; k < components_.size(); ++k) {
    const auto& c = components_[k];
    const auto& cache = cached_[k];
    for (std::size_t i = 0; i < dim_; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < dim_; ++j) row += cache.precision(i, j) * (x[j] - c.mean[j]);
      s[i] -= resp[k] * row;
    }
  }
  return s;
}

Vec GaussianMixture::mean() const {
  Vec m(dim_, 0.0);
  for (const auto& c : components_)
    for (std::size_t i = 0; i < dim_; ++i) m[i] += c.weight * c.mean[i];
  return m;
}

Vec GaussianMixture::axis_std() const {
  const Vec m = mean();
  Vec var(dim_, 0.0);
  for (const auto& c : components_)
    for (std::size_t i = 0; i < dim_; ++i) {
      const double d = c.mean[i] - m[i];
      var[i] += c.weight * (c.cov(i, i) + d * d);
    }
  for (double& v : var) v = std::sqrt(v);
  return var;
}

GaussianMixture default_two_mode_teacher() {
  const Matrix cov{{0.15, 0.0}, {0.0, 0.15}};
  return GaussianMixture({{0.5, {-1.5, 0.0}, cov}, {0.5, {1.5, 0.0}, cov}});
}

double gm_log_density(const GaussianMixture& gm, std::span<const double> x) { return gm.log_density(x); }
Vec gm_score(const GaussianMixture& gm, std::span<const double> x) { return gm.score(x); }

GaussianMixture gm_marginal(const GaussianMixture& gm, NoiseLevel level) {
  std::vector<GaussianComponent> comps;
  comps.reserve(gm.size());
  const double a2 = level.alpha * level.alpha;
  const double s2 = level.sigma * level.sigma;
  for (const auto& c : gm.components()) {
    GaussianComponent out;
    out.weight = c.weight;
    out.mean.resize(c.mean.size());
    for (std::size_t i = 0; i < c.mean.size(); ++i) out.mean[i] = level.alpha * c.mean[i];
    out.cov = a2 * c.cov;
    for (std::size_t i = 0; i < gm.dim(); ++i) out.cov(i, i) += s2;
    comps.push_back(std::move(out));
  }
  return GaussianMixture(std::move(comps));
}

GaussianMixture gm_marginal(const GaussianMixture& gm, const DiffusionSchedule& sched, double t) {
  return gm_marginal(gm, schedule_at(sched, t));
}

Vec AffineGenerator::apply(std::span<const double> eps) const {
  Vec x = a * eps;
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += b[i];
  return x;
}


Vec AffineGenerator::parameters() const {
  Vec p(a.data().begin(), a.data().end());
  p.insert(p.end(), b.begin(), b.end());
  return p;
}

AffineGenerator AffineGenerator::from_parameters(std::size_t dim, std::span<const double> params) {
  if (params.size() != dim * dim + dim) throw ShapeError("affine generator parameter count mismatch");
  AffineGenerator g;
  g.a = Matrix(dim, dim, Vec(params.begin(), params.begin() + static_cast<std::ptrdiff_t>(dim * dim)));
  g.b.assign(params.begin() + static_cast<std::ptrdiff_t>(dim * dim), params.end());
  return g;
}

void check_nondegenerate(const AffineGenerator& gen) {
  if (gen.a.rows() != gen.dim() || gen.a.cols() != gen.dim())
    throw ShapeError("affine generator matrix must be d x d with d = len(b)");
  if (!(std::abs(determinant(gen.a)) > 1e-12))
    throw DegenerateGeneratorError("affine generator matrix is rank deficient (|det A| <= 1e-12)");
}

GaussianMixture pushforward(const AffineGenerator& gen) {
  check_nondegenerate(gen);
  Matrix cov = gen.a * gen.a.transpose();
  return GaussianMixture::gaussian(gen.b, std::move(cov));
}

GaussianMixture affine_pushforward(const AffineGenerator& gen, NoiseLevel level) {
  return gm_marginal(pushforward(gen), level);
}

GaussianMixture affine_pushforward(const AffineGenerator& gen, const DiffusionSchedule& sched, double t) {
  return affine_pushforward(gen, schedule_at(sched, t));
}

double clamp_log_ratio(double log_ratio) {
  return std::clamp(log_ratio, -kLogRatioClamp, kLogRatioClamp);
}

double clamped_ratio(double log_ratio) { return std::exp(clamp_log_ratio(log_ratio)); }

double RatioField::operator()(std::span<const double> x, double t) const {
  return std::exp(log_ratio(x, t));
}

RatioField analytic_ratio(const GaussianMixture& teacher, const AffineGenerator& gen,
                          const DiffusionSchedule& sched) {
  if (teacher.dim() != gen.dim()) throw ShapeError("teacher and generator dimensions differ");
  check_nondegenerate(gen);
  auto binder = [teacher, gen, sched](double t) -> RatioField::LogRatioAtTime {
    const NoiseLevel lvl = schedule_at(sched, t);
    auto p_t = std::make_shared<const GaussianMixture>(gm_marginal(teacher, lvl));
    auto q_t = std::make_shared<const GaussianMixture>(affine_pushforward(gen, lvl));
    return [p_t, q_t](std::span<const double> x) { return q_t->log_density(x) - p_t->log_density(x); };
  };
  return RatioField(std::move(binder), RatioSource::Analytic);
}

RatioField analytic_ratio(const GaussianMixture& teacher, const AffineGenerator& gen,
                          const DiffusionSchedule& sched, double t) {
  if (teacher.dim() != gen.dim()) throw ShapeError("teacher and generator dimensions differ");
  const NoiseLevel lvl = schedule_at(sched, t);
  auto p_t = std::make_shared<const GaussianMixture>(gm_marginal(teacher, lvl));
  auto q_t = std::make_shared<const GaussianMixture>(affine_pushforward(gen, lvl));
  RatioField::LogRatioAtTime bound = [p_t, q_t](std::span<const double> x) {
    return q_t->log_density(x) - p_t->log_density(x);
  };
  auto binder = [bound, t](double when) -> RatioField::LogRatioAtTime {
    if (when != t) throw ArgumentError("ratio field was built for a single time");
    return bound;
  };
  return RatioField(std::move(binder), RatioSource::Analytic);
}

RatioField mixture_ratio(const GaussianMixture& q, const GaussianMixture& p) {
  if (q.dim() != p.dim()) throw ShapeError("mixture_ratio: dimensions differ");
  auto qp = std::make_shared<const GaussianMixture>(q);
  auto pp = std::make_shared<const GaussianMixture>(p);
  RatioField::LogRatioAtTime bound = [qp, pp](std::span<const double> x) {
    return qp->log_density(x) - pp->log_density(x);
  };
  return RatioField([bound](double) { return bound; }, RatioSource::Analytic);
}

std::vector<Vec> sample_standard_normal(Rng& rng, std::size_t n, std::size_t d) {
  std::vector<Vec> out(n, Vec(d));
  for (auto& v : out)
    for (double& x : v) x = rng.normal();
  return out;
}

std::vector<Vec> sample(const GaussianMixture& gm, Rng& rng, std::size_t n) {
  if (n < 1) throw ArgumentError("sample: n must be at least 1");
  std::vector<Matrix> chols;
  for (const auto& c : gm.components()) chols.push_back(cholesky(c.cov));
  std::vector<Vec> out;
  out.reserve(n);
  const std::size_t d = gm.dim();
  Vec z(d);
  for (std::size_t s = 0; s < n; ++s) {
    const double u = rng.uniform();
    std::size_t k = 0;
    double cum = gm.component(0).weight;
    while (u >= cum && k + 1 < gm.size()) cum += gm.component(++k).weight;
    for (double& v : z) v = rng.normal();
    Vec x = gm.component(k).mean;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j <= i; ++j) x[i] += chols[k](i, j) * z[j];
    out.push_back(std::move(x));
  }
  return out;
}

std::vector<Vec> sample(const AffineGenerator& gen, Rng& rng, std::size_t n) {
  if (n < 1) throw ArgumentError("sample: n must be at least 1");
  check_nondegenerate(gen);
  std::vector<Vec> out;
  out.reserve(n);
  Vec eps(gen.dim());
  for (std::size_t s = 0; s < n; ++s) {
    for (double& v : eps) v = rng.normal();
    out.push_back(gen.apply(eps));
  }
  return out;
}

}  // namespace bregdistill
