#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "bregdistill/diffusion.hpp"
#include "bregdistill/errors.hpp"

using namespace bregdistill;

TEST_CASE("VE schedule has alpha = 1 and sigma = t") {
  const auto ve = DiffusionSchedule::variance_exploding();
  const NoiseLevel lvl = schedule_at(ve, 0.5);
  CHECK(lvl.alpha == 1.0);
  CHECK(lvl.sigma == 0.5);
  CHECK_THROWS_AS(schedule_at(ve, 0.001), ArgumentError);
  CHECK_THROWS_AS(schedule_at(ve, 3.5), ArgumentError);
}

TEST_CASE("VP schedule approaches (1, 0) as t goes to zero") {
  const auto vp = DiffusionSchedule::variance_preserving(0.1, 20.0, 1e-9, 1.0);
  const NoiseLevel lvl = schedule_at(vp, 1e-9);
  CHECK(lvl.alpha == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(lvl.sigma < 1e-4);
  CHECK(lvl.sigma > 0.0);
}

TEST_CASE("VP schedule preserves variance") {
  const auto vp = DiffusionSchedule::variance_preserving();
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const double t = rng.uniform(vp.t_min, vp.t_max);
    const NoiseLevel lvl = schedule_at(vp, t);
    CHECK(std::abs(lvl.alpha * lvl.alpha + lvl.sigma * lvl.sigma - 1.0) < 1e-12);
    CHECK(lvl.alpha > 0.0);
    CHECK(lvl.alpha <= 1.0);
    CHECK(lvl.sigma > 0.0);
  }
}

TEST_CASE("schedule validation") {
  DiffusionSchedule s;
  s.t_min = 0.5;
  s.t_max = 0.5;
  CHECK_THROWS_AS(s.validate(), ArgumentError);
  s.t_min = 0.0;
  s.t_max = 1.0;
  CHECK_THROWS_AS(s.validate(), ArgumentError);
}

TEST_CASE("perturb applies the forward kernel") {
  const auto ve = DiffusionSchedule::variance_exploding();
  const NoisySample s = perturb(ve, Vec{1.0}, 0.5, Vec{2.0});
  CHECK(s.x_t == Vec{2.0});
  CHECK(s.x0 == Vec{1.0});
  CHECK(s.xi == Vec{2.0});
  CHECK(s.t == 0.5);
  const auto vp = DiffusionSchedule::variance_preserving();
  const NoisySample z = perturb(vp, Vec{1.5, -2.0}, 0.3, Vec{0.0, 0.0});
  const NoiseLevel lvl = schedule_at(vp, 0.3);
  CHECK(z.x_t == Vec{lvl.alpha * 1.5, lvl.alpha * -2.0});
  CHECK_THROWS_AS(perturb(ve, Vec{1.0}, 0.5, Vec{1.0, 2.0}), ShapeError);
}

TEST_CASE("reconstruction identity holds bit-exactly") {
  const auto vp = DiffusionSchedule::variance_preserving();
  Rng rng(9);
  for (int i = 0; i < 200; ++i) {
    const double t = sample_time(vp, rng);
    const Vec x0{rng.normal(), rng.normal()};
    const Vec xi{rng.normal(), rng.normal()};
    const NoisySample s = perturb(vp, x0, t, xi);
    const NoiseLevel lvl = schedule_at(vp, s.t);
    for (std::size_t k = 0; k < 2; ++k) CHECK(s.x_t[k] == lvl.alpha * s.x0[k] + lvl.sigma * s.xi[k]);
  }
}

TEST_CASE("empirical variance of x_t matches sigma_t^2") {
  const auto vp = DiffusionSchedule::variance_preserving();
  const double t = 0.4;
  const NoiseLevel lvl = schedule_at(vp, t);
  Rng rng(21);
  const int n = 100000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = perturb(vp, Vec{0.7}, t, Vec{rng.normal()}).x_t[0];
    sum += x;
    sum_sq += x * x;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  CHECK(std::abs(var / (lvl.sigma * lvl.sigma) - 1.0) < 0.03);
}

TEST_CASE("sample_time stays in range and has the log-uniform median") {
  const auto ve = DiffusionSchedule::variance_exploding(0.01, 3.0);
  Rng rng(5);
  std::vector<double> draws(100000);
  for (double& t : draws) {
    t = sample_time(ve, rng);
    REQUIRE(t >= ve.t_min);
    REQUIRE(t <= ve.t_max);
  }
  std::nth_element(draws.begin(), draws.begin() + draws.size() / 2, draws.end());
  const double median = draws[draws.size() / 2];
  CHECK(std::abs(median / std::sqrt(0.01 * 3.0) - 1.0) < 0.05);

  Rng a(8), b(8);
  for (int i = 0; i < 50; ++i) CHECK(sample_time(ve, a) == sample_time(ve, b));
}

TEST_CASE("uniform time law") {
  auto ve = DiffusionSchedule::variance_exploding(0.1, 2.0);
  ve.time_law = TimeLaw::Uniform;
  Rng rng(1);
  double sum = 0.0;
  for (int i = 0; i < 20000; ++i) sum += sample_time(ve, rng);
  CHECK(sum / 20000 == doctest::Approx(1.05).epsilon(0.02));
}

TEST_CASE("marginal consistency for Gaussian clean data") {
  // x0 ~ N(m, S) with S = L L^T, L = [[0.8, 0], [0.3, 0.5]].
  const auto vp = DiffusionSchedule::variance_preserving();
  const double t = 0.35;
  const NoiseLevel lvl = schedule_at(vp, t);
  const double m[2] = {1.0, -0.5};
  const double s00 = 0.64, s01 = 0.24, s11 = 0.09 + 0.25;
  Rng rng(77);
  const int n = 100000;
  double mean[2] = {0, 0}, c00 = 0, c01 = 0, c11 = 0;
  std::vector<Vec> xs;
  xs.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double z0 = rng.normal(), z1 = rng.normal();
    const Vec x0{m[0] + 0.8 * z0, m[1] + 0.3 * z0 + 0.5 * z1};
    xs.push_back(perturb(vp, x0, t, Vec{rng.normal(), rng.normal()}).x_t);
    mean[0] += xs.back()[0];
    mean[1] += xs.back()[1];
  }
  mean[0] /= n;
  mean[1] /= n;
  for (const auto& x : xs) {
    c00 += (x[0] - mean[0]) * (x[0] - mean[0]);
    c01 += (x[0] - mean[0]) * (x[1] - mean[1]);
    c11 += (x[1] - mean[1]) * (x[1] - mean[1]);
  }
  c00 /= n;
  c01 /= n;
  c11 /= n;
  const double a2 = lvl.alpha * lvl.alpha, s2 = lvl.sigma * lvl.sigma;
  const double e00 = a2 * s00 + s2, e01 = a2 * s01, e11 = a2 * s11 + s2;
  CHECK(std::abs(mean[0] - lvl.alpha * m[0]) < 3.0 * std::sqrt(e00 / n));
  CHECK(std::abs(mean[1] - lvl.alpha * m[1]) < 3.0 * std::sqrt(e11 / n));
  // Covariance agreement in relative Frobenius norm.
  const double err = std::sqrt((c00 - e00) * (c00 - e00) + 2 * (c01 - e01) * (c01 - e01) + (c11 - e11) * (c11 - e11));
  const double ref = std::sqrt(e00 * e00 + 2 * e01 * e01 + e11 * e11);
  CHECK(err / ref < 0.05);
}

TEST_CASE("time weighting") {
  CHECK(time_weight(TimeWeighting::Constant, {0.5, 0.3}) == 1.0);
  CHECK(time_weight(TimeWeighting::SigmaSquaredAlpha, {0.5, 0.3}) == doctest::Approx(0.045));
}
