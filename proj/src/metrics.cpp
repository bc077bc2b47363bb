#include "bregdistill/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "bregdistill/errors.hpp"

namespace bregdistill {

namespace {

void check_sets(std::span<const Vec> a, std::span<const Vec> b) {
  if (a.empty() || b.empty()) throw ArgumentError("sample sets must be nonempty");
  const std::size_t d = a.front().size();
  auto same = [d](const Vec& p) { return p.size() == d; };
  if (!std::all_of(a.begin(), a.end(), same) || !std::all_of(b.begin(), b.end(), same))
    throw ShapeError("sample sets must share one dimension");
}

double squared_distance(const Vec& x, const Vec& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    s += d * d;
  }
  return s;
}

}  // namespace

std::vector<Vec> subsample(std::span<const Vec> points, std::size_t n, Rng& rng) {
  if (n >= points.size()) return {points.begin(), points.end()};
  std::vector<std::size_t> idx(points.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < n; ++i) std::swap(idx[i], idx[i + rng.index(idx.size() - i)]);
  std::vector<Vec> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(points[idx[i]]);
  return out;
}

double sliced_wasserstein2(std::span<const Vec> a, std::span<const Vec> b, std::size_t projections, Rng& rng) {
  check_sets(a, b);
  if (projections < 1) throw ArgumentError("at least one projection is required");
  std::vector<Vec> a_sub, b_sub;
  if (a.size() > b.size()) {
    a_sub = subsample(a, b.size(), rng);
    a = a_sub;
  } else if (b.size() > a.size()) {
    b_sub = subsample(b, a.size(), rng);
    b = b_sub;
  }
  const std::size_t d = a.front().size();
  const std::size_t n = a.size();
  Vec dir(d), pa(n), pb(n);
  double total = 0.0;
  for (std::size_t k = 0; k < projections; ++k) {
    double len = 0.0;
    while (len < 1e-12) {
      for (double& v : dir) v = rng.normal();
      len = norm(dir);
    }
    for (double& v : dir) v /= len;
    for (std::size_t i = 0; i < n; ++i) {
      pa[i] = dot(dir, a[i]);
      pb[i] = dot(dir, b[i]);
    }
    std::sort(pa.begin(), pa.end());
    std::sort(pb.begin(), pb.end());
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += (pa[i] - pb[i]) * (pa[i] - pb[i]);
    total += s / static_cast<double>(n);
  }
  return std::sqrt(total / static_cast<double>(projections));
}

double median_pairwise_distance(std::span<const Vec> a, std::span<const Vec> b) {
  std::vector<const Vec*> pooled;
  for (const auto& p : a) pooled.push_back(&p);
  for (const auto& p : b) pooled.push_back(&p);
  std::vector<double> dist;
  dist.reserve(pooled.size() * (pooled.size() - 1) / 2);
  for (std::size_t i = 0; i < pooled.size(); ++i)
    for (std::size_t j = i + 1; j < pooled.size(); ++j) dist.push_back(squared_distance(*pooled[i], *pooled[j]));
  if (dist.empty()) return 1.0;
  auto mid = dist.begin() + static_cast<std::ptrdiff_t>(dist.size() / 2);
  std::nth_element(dist.begin(), mid, dist.end());
  return std::sqrt(*mid);
}

double mmd_rbf(std::span<const Vec> a, std::span<const Vec> b, std::optional<double> bandwidth) {
  check_sets(a, b);
  double h = bandwidth ? *bandwidth : median_pairwise_distance(a, b);
  if (!(h > 0.0) || !std::isfinite(h)) {
    if (bandwidth) throw ArgumentError("MMD bandwidth must be positive");
    h = 1.0;
  }
  const double inv = 1.0 / (2.0 * h * h);
  auto mean_kernel = [inv](std::span<const Vec> x, std::span<const Vec> y) {
    double s = 0.0;
    for (const auto& p : x)
      for (const auto& q : y) s += std::exp(-squared_distance(p, q) * inv);
    return s / (static_cast<double>(x.size()) * static_cast<double>(y.size()));
  };
  const double value = mean_kernel(a, a) + mean_kernel(b, b) - 2.0 * mean_kernel(a, b);
  return std::max(value, 0.0);
}

Vec mode_coverage(std::span<const Vec> samples, const GaussianMixture& teacher) {
  if (samples.empty()) throw ArgumentError("mode_coverage: empty sample set");
  std::vector<std::size_t> counts(teacher.size(), 0);
  for (const auto& x : samples) {
    const Vec resp = teacher.responsibilities(x);
    ++counts[static_cast<std::size_t>(std::max_element(resp.begin(), resp.end()) - resp.begin())];
  }
  Vec out(counts.size());
  for (std::size_t k = 0; k < counts.size(); ++k)
    out[k] = static_cast<double>(counts[k]) / static_cast<double>(samples.size());
  return out;
}

void write_samples_csv(const std::filesystem::path& path, std::span<const Vec> points) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << std::setprecision(17);
  for (const auto& p : points) {
    for (std::size_t i = 0; i < p.size(); ++i) out << (i ? "," : "") << p[i];
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<Vec> read_samples_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<Vec> points;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    Vec p;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        p.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw IoError("malformed sample value '" + cell + "' in " + path.string());
      }
    }
    if (!points.empty() && p.size() != points.front().size())
      throw IoError("inconsistent column count in " + path.string());
    points.push_back(std::move(p));
  }
  return points;
}

}  // namespace bregdistill
