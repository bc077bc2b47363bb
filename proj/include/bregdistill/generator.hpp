#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "bregdistill/analytic.hpp"
#include "bregdistill/dense_net.hpp"

namespace bregdistill {

enum class GeneratorKind { Affine, Mlp };

// One-step map G(eps) from a standard normal latent of the same dimension.
// The affine kind is a single identity-activation layer whose parameter
// vector is [A row-major, b], the same layout as AffineGenerator.
class Generator {
 public:
  static Generator affine(const AffineGenerator& gen);
  static Generator mlp(std::size_t dim, std::vector<std::size_t> hidden, Rng& rng,
                       Activation activation = Activation::Silu);
  // Reconstructs the kind from a network: a single layer is affine.
  static Generator from_net(DenseNet net);

  GeneratorKind kind() const { return kind_; }
  std::size_t dim() const { return net_.input_width(); }
  const DenseNet& net() const { return net_; }
  DenseNet& net() { return net_; }
  std::span<const double> parameters() const { return net_.parameters(); }
  std::span<double> parameters() { return net_.parameters(); }

  Vec apply(std::span<const double> eps) const;
  // grad += (dG(eps)/dtheta)^T upstream
  void pullback(std::span<const double> eps, std::span<const double> upstream, std::span<double> grad) const;

  // Affine kind only.
  AffineGenerator as_affine() const;

  std::vector<Vec> sample(Rng& rng, std::size_t n) const;

 private:
  Generator(GeneratorKind kind, DenseNet net);

  GeneratorKind kind_;
  DenseNet net_;
};

std::string_view generator_kind_name(GeneratorKind kind);

}  // namespace bregdistill
