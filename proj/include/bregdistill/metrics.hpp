#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bregdistill/analytic.hpp"
#include "bregdistill/linalg.hpp"
#include "bregdistill/rng.hpp"

namespace bregdistill {

struct SampleSet {
  std::vector<Vec> points;
  std::string label;

  std::size_t size() const { return points.size(); }
  std::size_t dim() const { return points.empty() ? 0 : points.front().size(); }
};

// Root mean over random unit directions of the squared 1D W2 between the
// sorted projections. Unequal sets are subsampled to the smaller size.
double sliced_wasserstein2(std::span<const Vec> a, std::span<const Vec> b, std::size_t projections, Rng& rng);

// Biased (V-statistic) squared MMD with the Gaussian kernel exp(-|x-y|^2 / (2 h^2)).
// Without a bandwidth the median pairwise distance of the pooled sets is used.
double mmd_rbf(std::span<const Vec> a, std::span<const Vec> b, std::optional<double> bandwidth = std::nullopt);

double median_pairwise_distance(std::span<const Vec> a, std::span<const Vec> b);

// Fraction of samples whose most responsible teacher component is k.
Vec mode_coverage(std::span<const Vec> samples, const GaussianMixture& teacher);

// Uniform subset of n points without replacement (all points if n >= size).
std::vector<Vec> subsample(std::span<const Vec> points, std::size_t n, Rng& rng);

void write_samples_csv(const std::filesystem::path& path, std::span<const Vec> points);
std::vector<Vec> read_samples_csv(const std::filesystem::path& path);

}  // namespace bregdistill
