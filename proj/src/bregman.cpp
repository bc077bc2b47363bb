#include "bregdistill/bregman.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "bregdistill/errors.hpp"

namespace bregdistill {

namespace {

constexpr double kSingularLambdaBand = 1e-6;

double sigmoid(double l) {
  if (l >= 0.0) return 1.0 / (1.0 + std::exp(-l));
  const double e = std::exp(l);
  return e / (1.0 + e);
}

std::string format_lambda(double lambda) {
  std::ostringstream os;
  os << lambda;
  return os.str();
}

}  // namespace

double ConvexFunction::weight(double r) const {
  if (!(r > 0.0)) throw DomainError("Bregman weight needs r > 0");
  return weight_(r);
}

ConvexFunction make_instance(std::string_view name, std::optional<double> lambda) {
  if (lambda && name != "SBA") throw ArgumentError("lambda is only accepted for SBA");
  ConvexFunction cf;
  if (name == "SBA") {
    if (!lambda) throw ArgumentError("SBA needs a lambda");
    const double lam = *lambda;
    if (!std::isfinite(lam)) throw ArgumentError("SBA lambda must be finite");
    if (lam == 0.0) return make_instance("KL");
    if (lam == -1.0) return make_instance("BE");
    if (std::abs(lam) < kSingularLambdaBand || std::abs(lam + 1.0) < kSingularLambdaBand)
      throw ArgumentError("SBA lambda " + format_lambda(lam) +
                          " is too close to a singular point of 1 / (lambda (lambda + 1))");
    const double denom = lam * (lam + 1.0);
    cf.kind_ = ConvexKind::SBA;
    cf.lambda_ = lam;
    cf.label_ = "SBA(" + format_lambda(lam) + ")";
    cf.h_ = [lam, denom](double r) { return (std::pow(r, 1.0 + lam) - r) / denom; };
    cf.dh_ = [lam, denom](double r) { return ((1.0 + lam) * std::pow(r, lam) - 1.0) / denom; };
    cf.d2h_ = [lam](double r) { return std::pow(r, lam - 1.0); };
    cf.weight_ = [lam](double r) { return std::pow(r, lam); };
    cf.logit_weight_ = [lam](double l) { return std::exp(-lam * l); };
    return cf;
  }
  cf.label_ = std::string(name);
  if (name == "LR") {
    cf.kind_ = ConvexKind::LR;
    cf.h_ = [](double r) { return r * std::log(r) - (1.0 + r) * std::log1p(r); };
    cf.dh_ = [](double r) { return std::log(r) - std::log1p(r); };
    cf.d2h_ = [](double r) { return 1.0 / (r * (1.0 + r)); };
    cf.weight_ = [](double r) { return 1.0 / (1.0 + r); };
    cf.logit_weight_ = sigmoid;
  } else if (name == "KL") {
    cf.kind_ = ConvexKind::KL;
    cf.h_ = [](double r) { return r * std::log(r) - r; };
    cf.dh_ = [](double r) { return std::log(r); };
    cf.d2h_ = [](double r) { return 1.0 / r; };
    cf.weight_ = [](double) { return 1.0; };
    cf.logit_weight_ = [](double) { return 1.0; };
  } else if (name == "BE") {
    cf.kind_ = ConvexKind::BE;
    cf.h_ = [](double r) { return -std::log(r); };
    cf.dh_ = [](double r) { return -1.0 / r; };
    cf.d2h_ = [](double r) { return 1.0 / (r * r); };
    cf.weight_ = [](double r) { return 1.0 / r; };
    cf.logit_weight_ = [](double l) { return std::exp(l); };
  } else if (name == "LS") {
    cf.kind_ = ConvexKind::LS;
    cf.h_ = [](double r) { return 0.5 * r * r; };
    cf.dh_ = [](double r) { return r; };
    cf.d2h_ = [](double) { return 1.0; };
    cf.weight_ = [](double r) { return r; };
    cf.logit_weight_ = [](double l) { return std::exp(-l); };
  } else {
    throw ArgumentError("unknown convex function '" + std::string(name) + "'");
  }
  return cf;
}

std::vector<double> ratio_probe_grid() {
  std::vector<double> grid;
  for (int i = 1; i <= 100; ++i) grid.push_back(0.1 * i);
  return grid;
}

ConvexFunction make_custom(std::string name, ConvexFunction::ScalarFn h, ConvexFunction::ScalarFn dh,
                           ConvexFunction::ScalarFn d2h) {
  if (!h || !dh || !d2h) throw ArgumentError("custom convex function needs h, h' and h''");
  for (double r : ratio_probe_grid()) {
    const double c = d2h(r);
    if (!(c > 0.0) || !std::isfinite(c))
      throw ArgumentError("custom convex function '" + name + "' is not strictly convex at r = " +
                          format_lambda(r));
  }
  ConvexFunction cf;
  cf.kind_ = ConvexKind::Custom;
  cf.label_ = std::move(name);
  cf.h_ = std::move(h);
  cf.dh_ = std::move(dh);
  cf.d2h_ = std::move(d2h);
  cf.weight_ = [d2h = cf.d2h_](double r) { return d2h(r) * r; };
  cf.logit_weight_ = [d2h = cf.d2h_](double l) {
    const double r = std::exp(-l);
    return d2h(r) * r;
  };
  return cf;
}

double weight(const ConvexFunction& cf, double r) { return cf.weight(r); }
double logit_weight(const ConvexFunction& cf, double l) { return cf.logit_weight(l); }

QuadratureGrid support_grid(std::span<const GaussianMixture> densities, std::size_t nodes_per_axis,
                            double half_width) {
  if (densities.empty()) throw ArgumentError("support_grid needs at least one density");
  const std::size_t d = densities.front().dim();
  std::vector<QuadratureRule> axes;
  for (std::size_t a = 0; a < d; ++a) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& gm : densities) {
      if (gm.dim() != d) throw ShapeError("support_grid: densities differ in dimension");
      const Vec m = gm.mean();
      const Vec s = gm.axis_std();
      lo = std::min(lo, m[a] - half_width * s[a]);
      hi = std::max(hi, m[a] + half_width * s[a]);
    }
    axes.push_back(uniform_rule(lo, hi, nodes_per_axis));
  }
  return QuadratureGrid(std::move(axes));
}

double tail_mass_outside(const GaussianMixture& p, const QuadratureGrid& grid) {
  if (grid.dimension() != p.dim()) throw ShapeError("grid and density dimensions differ");
  double mass = 0.0;
  for (const auto& c : p.components()) {
    for (std::size_t a = 0; a < p.dim(); ++a) {
      const double s = std::sqrt(c.cov(a, a));
      const double below = 0.5 * std::erfc((c.mean[a] - grid.lower(a)) / (s * std::sqrt(2.0)));
      const double above = 0.5 * std::erfc((grid.upper(a) - c.mean[a]) / (s * std::sqrt(2.0)));
      mass += c.weight * (below + above);
    }
  }
  return mass;
}

namespace {

void require_coverage(const GaussianMixture& p_t, const QuadratureGrid& grid) {
  const double tail = tail_mass_outside(p_t, grid);
  if (tail > 1e-6)
    throw CoverageError("quadrature grid leaves " + format_lambda(tail) + " of the density's mass uncovered");
}

}  // namespace

double divergence(const ConvexFunction& cf, const RatioField& r, const RatioField& r_star,
                  const GaussianMixture& p_t, const QuadratureGrid& grid, double t) {
  require_coverage(p_t, grid);
  const auto log_r = r.at(t);
  const auto log_r_star = r_star.at(t);
  double acc = 0.0;
  grid.for_each([&](std::span<const double> x, double w) {
    const double rv = std::exp(log_r(x));
    const double rs = std::exp(log_r_star(x));
    const double gap = cf.value(rv) - cf.value(rs) - cf.first(rs) * (rv - rs);
    const double term = w * std::exp(p_t.log_density(x)) * gap;
    if (!std::isfinite(term)) throw NumericError("divergence integrand is not finite");
    acc += term;
  });
  return acc;
}

double divergence_to_one(const ConvexFunction& cf, const RatioField& r, const GaussianMixture& p_t,
                         const QuadratureGrid& grid, double t) {
  require_coverage(p_t, grid);
  const auto log_r = r.at(t);
  const double h1 = cf.value(1.0);
  const double dh1 = cf.first(1.0);
  double acc = 0.0;
  grid.for_each([&](std::span<const double> x, double w) {
    const double rv = std::exp(log_r(x));
    const double gap = cf.value(rv) - h1 - dh1 * (rv - 1.0);
    const double term = w * std::exp(p_t.log_density(x)) * gap;
    if (!std::isfinite(term)) throw NumericError("divergence integrand is not finite");
    acc += term;
  });
  return acc;
}

}  // namespace bregdistill
