#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "bregdistill/linalg.hpp"

namespace bregdistill {

enum class QuadratureKind { GaussHermite, UniformGrid };

// One-dimensional rule: sum_i weights[i] f(nodes[i]).
// GaussHermite rules integrate against the standard normal density (weights
// sum to one). UniformGrid rules are trapezoid rules on [lo, hi] against dx.
struct QuadratureRule {
  Vec nodes;
  Vec weights;
  QuadratureKind kind = QuadratureKind::GaussHermite;

  double integrate(const std::function<double(double)>& f) const;
};

// Gauss-Hermite rule for E_{z ~ N(0,1)}[f(z)], exact for polynomials of degree <= 2n-1.
// 1 <= n <= 200.
QuadratureRule hermite_rule(std::size_t n);

// Trapezoid rule on [lo, hi] with n >= 2 equally spaced nodes.
QuadratureRule uniform_rule(double lo, double hi, std::size_t n);

// Tensor product of one-dimensional rules, one per axis.
class QuadratureGrid {
 public:
  explicit QuadratureGrid(std::vector<QuadratureRule> axes);

  std::size_t dimension() const { return axes_.size(); }
  std::size_t size() const { return size_; }
  const QuadratureRule& axis(std::size_t i) const { return axes_[i]; }

  // Calls f(point, weight) for every node of the product rule in a fixed order.
  void for_each(const std::function<void(std::span<const double>, double)>& f) const;
  double integrate(const std::function<double(std::span<const double>)>& f) const;

  // Bounding box of the nodes along one axis.
  double lower(std::size_t axis) const { return axes_[axis].nodes.front(); }
  double upper(std::size_t axis) const { return axes_[axis].nodes.back(); }

 private:
  std::vector<QuadratureRule> axes_;
  std::size_t size_ = 1;
};

}  // namespace bregdistill
