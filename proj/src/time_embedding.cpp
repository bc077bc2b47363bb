#include "bregdistill/time_embedding.hpp"

#include <cmath>

#include "bregdistill/errors.hpp"

namespace bregdistill {

namespace {
// Geometric frequency ladder 0.25 * sqrt(2)^k; log t for t in [0.01, 3] spans ~5.7.
constexpr double kBaseFrequency = 0.25;
constexpr double kFrequencyRatio = 1.4142135623730951;
}  // namespace

void embed_time(double t, std::span<double> out) {
  if (!(t > 0.0)) throw DomainError("time embedding needs t > 0");
  if (out.size() != kTimeEmbeddingWidth) throw ShapeError("time embedding buffer has wrong width");
  const double u = std::log(t);
  double w = kBaseFrequency;
  for (std::size_t k = 0; k < kTimeFrequencies; ++k) {
    out[2 * k] = std::sin(w * u);
    out[2 * k + 1] = std::cos(w * u);
    w *= kFrequencyRatio;
  }
}

void conditioned_input(std::span<const double> x, double t, Vec& out) {
  out.resize(x.size() + kTimeEmbeddingWidth);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i];
  embed_time(t, std::span<double>(out).subspan(x.size()));
}

Vec conditioned_input(std::span<const double> x, double t) {
  Vec out;
  conditioned_input(x, t, out);
  return out;
}

}  // namespace bregdistill
