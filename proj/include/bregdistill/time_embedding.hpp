#pragma once

#include <cstddef>
#include <span>

#include "bregdistill/linalg.hpp"

namespace bregdistill {

inline constexpr std::size_t kTimeFrequencies = 8;
inline constexpr std::size_t kTimeEmbeddingWidth = 2 * kTimeFrequencies;

// Sinusoidal features of log t: [sin(w_k log t), cos(w_k log t)] for k < 8.
void embed_time(double t, std::span<double> out);

// [x, embed(t)] as a single network input.
Vec conditioned_input(std::span<const double> x, double t);
void conditioned_input(std::span<const double> x, double t, Vec& out);

}  // namespace bregdistill
