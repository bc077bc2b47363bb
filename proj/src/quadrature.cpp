#include "bregdistill/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "bregdistill/errors.hpp"

namespace bregdistill {

double QuadratureRule::integrate(const std::function<double(double)>& f) const {
  double acc = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) acc += weights[i] * f(nodes[i]);
  return acc;
}

namespace {

// Eigenvalues of a symmetric tridiagonal matrix (implicit QL with Wilkinson shifts).
Vec tridiagonal_eigenvalues(Vec diag, Vec off) {
  const std::size_t n = diag.size();
  off.push_back(0.0);
  for (std::size_t l = 0; l < n; ++l) {
    for (int iter = 0; iter < 200; ++iter) {
      std::size_t m = l;
      for (; m + 1 < n; ++m) {
        const double dd = std::abs(diag[m]) + std::abs(diag[m + 1]);
        if (std::abs(off[m]) <= 1e-16 * dd) break;
      }
      if (m == l) break;
      double g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
      double r = std::hypot(g, 1.0);
      g = diag[m] - diag[l] + off[l] / (g + std::copysign(r, g));
      double s = 1.0, c = 1.0, p = 0.0;
      std::size_t i = m;
      bool underflow = false;
      while (i-- > l) {
        double f = s * off[i];
        const double b = c * off[i];
        r = std::hypot(f, g);
        off[i + 1] = r;
        if (r == 0.0) {
          diag[i + 1] -= p;
          off[m] = 0.0;
          underflow = true;
          break;
        }
        s = f / r;
        c = g / r;
        g = diag[i + 1] - p;
        r = (diag[i] - g) * s + 2.0 * c * b;
        p = s * r;
        diag[i + 1] = g + p;
        g = c * r - b;
      }
      if (underflow) continue;
      diag[l] -= p;
      off[l] = g;
      off[m] = 0.0;
    }
  }
  return diag;
}

// Normalized Hermite functions phi_k(x) = He_k(x) exp(-x^2/4) / sqrt(k!), k = 0..n.
// Returns phi_n and phi_{n-1}; accumulates sum_{k<n} phi_k^2.
struct HermiteEval {
  double phi_n;
  double phi_nm1;
  double sum_sq;
};

HermiteEval eval_hermite(std::size_t n, double x) {
  double prev = 0.0;
  double cur = std::exp(-0.25 * x * x);
  double sum_sq = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    sum_sq += cur * cur;
    const double kd = static_cast<double>(k);
    const double next = (x * cur - std::sqrt(kd) * prev) / std::sqrt(kd + 1.0);
    prev = cur;
    cur = next;
  }
  return {cur, prev, sum_sq};
}

}  // namespace

QuadratureRule hermite_rule(std::size_t n) {
  if (n < 1 || n > 200) throw ArgumentError("hermite_rule: n must lie in [1, 200], got " + std::to_string(n));

  // Golub-Welsch: nodes are eigenvalues of the Jacobi matrix of the
  // probabilists' Hermite recurrence, polished by Newton on phi_n.
  Vec diag(n, 0.0), off(n > 0 ? n - 1 : 0);
  for (std::size_t k = 1; k < n; ++k) off[k - 1] = std::sqrt(static_cast<double>(k));
  Vec nodes = tridiagonal_eigenvalues(diag, off);
  std::sort(nodes.begin(), nodes.end());

  const double nd = static_cast<double>(n);
  QuadratureRule rule;
  rule.kind = QuadratureKind::GaussHermite;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double x = nodes[i];
    for (int it = 0; it < 3; ++it) {
      const HermiteEval h = eval_hermite(n, x);
      const double deriv = std::sqrt(nd) * h.phi_nm1 - 0.5 * x * h.phi_n;
      if (deriv == 0.0) break;
      x -= h.phi_n / deriv;
    }
    const HermiteEval h = eval_hermite(n, x);
    // Christoffel weight: 1 / sum_k He_k(x)^2 / k! = exp(-x^2/2) / sum_k phi_k(x)^2.
    rule.nodes[i] = x;
    rule.weights[i] = std::exp(-0.5 * x * x) / h.sum_sq;
  }
  // Symmetrize away rounding differences.
  for (std::size_t i = 0; i < n / 2; ++i) {
    const double x = 0.5 * (rule.nodes[n - 1 - i] - rule.nodes[i]);
    const double w = 0.5 * (rule.weights[i] + rule.weights[n - 1 - i]);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

QuadratureRule uniform_rule(double lo, double hi, std::size_t n) {
  if (n < 2) throw ArgumentError("uniform_rule: need at least two nodes");
  if (!(hi > lo)) throw ArgumentError("uniform_rule: empty interval");
  QuadratureRule rule;
  rule.kind = QuadratureKind::UniformGrid;
  rule.nodes.resize(n);
  rule.weights.assign(n, (hi - lo) / static_cast<double>(n - 1));
  for (std::size_t i = 0; i < n; ++i)
    rule.nodes[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  rule.weights.front() *= 0.5;
  rule.weights.back() *= 0.5;
  return rule;
}

QuadratureGrid::QuadratureGrid(std::vector<QuadratureRule> axes) : axes_(std::move(axes)) {
  if (axes_.empty()) throw ArgumentError("quadrature grid needs at least one axis");
  for (const auto& a : axes_) {
    if (a.nodes.empty() || a.nodes.size() != a.weights.size())
      throw ShapeError("quadrature axis has mismatched nodes/weights");
    size_ *= a.nodes.size();
  }
}

void QuadratureGrid::for_each(const std::function<void(std::span<const double>, double)>& f) const {
  const std::size_t d = axes_.size();
  std::vector<std::size_t> idx(d, 0);
  Vec point(d);
  for (std::size_t flat = 0; flat < size_; ++flat) {
    double w = 1.0;
    for (std::size_t a = 0; a < d; ++a) {
      point[a] = axes_[a].nodes[idx[a]];
      w *= axes_[a].weights[idx[a]];
    }
    f(point, w);
    for (std::size_t a = d; a-- > 0;) {
      if (++idx[a] < axes_[a].nodes.size()) break;
      idx[a] = 0;
    }
  }
}

double QuadratureGrid::integrate(const std::function<double(std::span<const double>)>& f) const {
  double acc = 0.0;
  for_each([&](std::span<const double> x, double w) { acc += w * f(x); });
  return acc;
}

}  // namespace bregdistill
