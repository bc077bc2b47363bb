#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bregdistill/analytic.hpp"
#include "bregdistill/quadrature.hpp"

namespace bregdistill {

enum class ConvexKind { LR, KL, BE, LS, SBA, Custom };

// Strictly convex generator h of a Bregman divergence together with h', h''
// and the two weight forms h''(r) r and h''(e^-l) e^-l. Immutable.
class ConvexFunction {
 public:
  using ScalarFn = std::function<double(double)>;

  ConvexKind kind() const { return kind_; }
  std::optional<double> lambda() const { return lambda_; }
  // "LR", "KL", "BE", "LS", "SBA(5)" or the custom name.
  const std::string& label() const { return label_; }

  double value(double r) const { return h_(r); }
  double first(double r) const { return dh_(r); }
  double second(double r) const { return d2h_(r); }
  // h''(r) r for r > 0; throws DomainError otherwise.
  double weight(double r) const;
  // h''(e^-l) e^-l.
  double logit_weight(double l) const { return logit_weight_(l); }

 private:
  friend ConvexFunction make_instance(std::string_view, std::optional<double>);
  friend ConvexFunction make_custom(std::string, ScalarFn, ScalarFn, ScalarFn);

  ConvexKind kind_ = ConvexKind::KL;
  std::optional<double> lambda_;
  std::string label_;
  ScalarFn h_, dh_, d2h_, weight_, logit_weight_;
};

// Registry lookup. `lambda` must be given iff name == "SBA". SBA with lambda == 0
// is the KL instance and lambda == -1 the BE instance (limits of the family);
// lambda within 1e-6 of either singular point (but not equal) is rejected.
ConvexFunction make_instance(std::string_view name, std::optional<double> lambda = std::nullopt);

// User-supplied h, h', h''. Rejected unless h'' > 0 on r = 0.1, 0.2, ..., 10.
ConvexFunction make_custom(std::string name, ConvexFunction::ScalarFn h, ConvexFunction::ScalarFn dh,
                           ConvexFunction::ScalarFn d2h);

double weight(const ConvexFunction& cf, double r);
double logit_weight(const ConvexFunction& cf, double l);

// Probe grid r = 0.1, 0.2, ..., 10 used for convexity and table checks.
std::vector<double> ratio_probe_grid();

// Product trapezoid grid covering [mean - half_width * std, mean + half_width * std]
// of every density along every axis.
QuadratureGrid support_grid(std::span<const GaussianMixture> densities, std::size_t nodes_per_axis,
                            double half_width = 8.0);

// Union-bound estimate of the probability mass of `p` outside the grid's box.
double tail_mass_outside(const GaussianMixture& p, const QuadratureGrid& grid);

// D_h(r || r*) = int p_t [h(r) - h(r*) - h'(r*)(r - r*)] dx at time t.
// Throws CoverageError if more than 1e-6 of p_t's mass lies outside the grid.
double divergence(const ConvexFunction& cf, const RatioField& r, const RatioField& r_star,
                  const GaussianMixture& p_t, const QuadratureGrid& grid, double t);
// D_h(r || 1).
double divergence_to_one(const ConvexFunction& cf, const RatioField& r, const GaussianMixture& p_t,
                         const QuadratureGrid& grid, double t);

}  // namespace bregdistill
