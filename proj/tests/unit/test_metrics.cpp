#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>

#include "bregdistill/errors.hpp"
#include "bregdistill/metrics.hpp"

using namespace bregdistill;

namespace {

// Minimum-cost perfect matching (Hungarian algorithm, O(n^3)) on a dense cost
// matrix; returns the optimal total cost.
double assignment_cost(const std::vector<std::vector<double>>& cost) {
  const std::size_t n = cost.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) minv[j] = cur, way[j] = j0;
        if (minv[j] < delta) delta = minv[j], j1 = j;
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) u[p[j]] += delta, v[j] -= delta;
        else minv[j] -= delta;
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  double total = 0.0;
  for (std::size_t j = 1; j <= n; ++j) total += cost[p[j] - 1][j - 1];
  return total;
}

double exact_w2(const std::vector<Vec>& a, const std::vector<Vec>& b) {
  std::vector<std::vector<double>> cost(a.size(), std::vector<double>(b.size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a[i].size(); ++k) s += (a[i][k] - b[j][k]) * (a[i][k] - b[j][k]);
      cost[i][j] = s;
    }
  return std::sqrt(assignment_cost(cost) / static_cast<double>(a.size()));
}

std::vector<Vec> gaussian_cloud(Rng& rng, std::size_t n, Vec shift) {
  std::vector<Vec> out(n, Vec(shift.size()));
  for (auto& x : out)
    for (std::size_t k = 0; k < x.size(); ++k) x[k] = shift[k] + rng.normal();
  return out;
}

}  // namespace

TEST_CASE("sliced W2 trivial cases") {
  Rng rng(1);
  const auto a = gaussian_cloud(rng, 300, {0.0, 0.0});
  CHECK(sliced_wasserstein2(a, a, 64, rng) == 0.0);
  const std::vector<Vec> zero{{0.0}}, one{{1.0}};
  CHECK(sliced_wasserstein2(zero, one, 16, rng) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("sorted 1D matching equals the optimal assignment") {
  Rng rng(2);
  const auto a = gaussian_cloud(rng, 64, {0.0});
  const auto b = gaussian_cloud(rng, 64, {0.4});
  CHECK(sliced_wasserstein2(a, b, 8, rng) == doctest::Approx(exact_w2(a, b)).epsilon(1e-12));
}

TEST_CASE("sliced W2 of a mean shift agrees with the transport oracle") {
  Rng rng(3);
  const auto a = gaussian_cloud(rng, 10000, {0.0, 0.0});
  const auto b = gaussian_cloud(rng, 10000, {1.0, 0.0});
  const double sw = sliced_wasserstein2(a, b, 128, rng);

  // A pure shift moves every point by delta, so each projection onto u moves
  // by <delta, u> and SW2^2 = |delta|^2 / d. The exact 2D transport on
  // subsets recovers |delta| itself.
  const double w2 = exact_w2(subsample(a, 512, rng), subsample(b, 512, rng));
  CHECK(w2 == doctest::Approx(1.0).epsilon(0.10));
  CHECK(sw == doctest::Approx(w2 / std::sqrt(2.0)).epsilon(0.10));
  CHECK(sw <= w2);
}

TEST_CASE("sliced W2 is symmetric for a shared projection seed") {
  Rng data(4);
  const auto a = gaussian_cloud(data, 500, {0.0, 0.0});
  const auto b = gaussian_cloud(data, 500, {0.5, -0.3});
  Rng r1(9), r2(9);
  CHECK(sliced_wasserstein2(a, b, 32, r1) == sliced_wasserstein2(b, a, 32, r2));
}

TEST_CASE("sliced W2 resamples unequal sets and validates input") {
  Rng rng(5);
  const auto a = gaussian_cloud(rng, 400, {0.0});
  const auto b = gaussian_cloud(rng, 1000, {2.0});
  CHECK(sliced_wasserstein2(a, b, 4, rng) == doctest::Approx(2.0).epsilon(0.1));
  CHECK_THROWS_AS(sliced_wasserstein2({}, b, 4, rng), ArgumentError);
  CHECK_THROWS_AS(sliced_wasserstein2(a, b, 0, rng), ArgumentError);
  const auto c = gaussian_cloud(rng, 10, {0.0, 0.0});
  CHECK_THROWS_AS(sliced_wasserstein2(a, c, 4, rng), ShapeError);
}

TEST_CASE("MMD properties") {
  Rng rng(6);
  const auto a = gaussian_cloud(rng, 300, {0.0, 0.0});
  const auto b = gaussian_cloud(rng, 300, {0.8, 0.0});
  CHECK(std::abs(mmd_rbf(a, a)) < 1e-12);
  CHECK(mmd_rbf(a, b) == doctest::Approx(mmd_rbf(b, a)).epsilon(1e-12));

  // Tight clusters far apart: within-set kernel values tend to 1 and the cross
  // term to 0, so the estimate saturates at 2.
  std::vector<Vec> tight = a, far = a;
  for (auto& x : tight) x = {0.01 * x[0], 0.01 * x[1]};
  for (auto& x : far) x = {1000.0 + 0.01 * x[0], 0.01 * x[1]};
  CHECK(mmd_rbf(tight, far, 1.0) == doctest::Approx(2.0).epsilon(1e-3));

  double previous = -1.0;
  for (double shift : {0.0, 0.25, 0.5, 1.0, 2.0, 4.0}) {
    std::vector<Vec> moved = a;
    for (auto& x : moved) x[0] += shift;
    const double m = mmd_rbf(a, moved, 1.0);
    CHECK(m > previous);
    previous = m;
  }
  CHECK_THROWS_AS(mmd_rbf(a, b, 0.0), ArgumentError);
  CHECK_THROWS_AS(mmd_rbf({}, b), ArgumentError);
}

TEST_CASE("mode coverage") {
  const GaussianMixture teacher = default_two_mode_teacher();
  Rng rng(7);
  const auto own = sample(teacher, rng, 10000);
  const Vec fractions = mode_coverage(own, teacher);
  REQUIRE(fractions.size() == 2);
  CHECK(std::abs(fractions[0] - 0.5) < 0.02);
  CHECK(fractions[0] + fractions[1] == 1.0);

  const std::vector<Vec> at_mean(50, teacher.component(1).mean);
  const Vec all = mode_coverage(at_mean, teacher);
  CHECK(all[1] == 1.0);
  CHECK(all[0] == 0.0);

  const GaussianMixture lopsided({{0.2, {-2.0}, Matrix{{0.3}}}, {0.3, {0.0}, Matrix{{0.3}}}, {0.5, {2.0}, Matrix{{0.3}}}});
  const Vec f3 = mode_coverage(sample(lopsided, rng, 10000), lopsided);
  CHECK(std::abs(f3[0] - 0.2) < 0.02);
  CHECK(std::abs(f3[1] - 0.3) < 0.02);
  CHECK(std::abs(f3[2] - 0.5) < 0.02);
  CHECK(f3[0] + f3[1] + f3[2] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(mode_coverage({}, teacher), ArgumentError);
}

TEST_CASE("subsample draws without replacement") {
  Rng rng(8);
  std::vector<Vec> points;
  for (int i = 0; i < 100; ++i) points.push_back({double(i)});
  auto picked = subsample(points, 40, rng);
  CHECK(picked.size() == 40);
  std::sort(picked.begin(), picked.end());
  CHECK(std::adjacent_find(picked.begin(), picked.end()) == picked.end());
  CHECK(subsample(points, 500, rng).size() == 100);
}

TEST_CASE("sample CSV round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "bregdistill_metrics_test";
  std::filesystem::create_directories(dir);
  const std::vector<Vec> points{{0.1, -2.5}, {1e-17, 3.0}, {0.3333333333333333, 7.25}};
  write_samples_csv(dir / "s.csv", points);
  CHECK(read_samples_csv(dir / "s.csv") == points);
  CHECK_THROWS_AS(read_samples_csv(dir / "missing.csv"), IoError);
  std::filesystem::remove_all(dir);
}
