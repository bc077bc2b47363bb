#include <doctest.h>

#include <cmath>

#include "bregdistill/bregman.hpp"
#include "bregdistill/errors.hpp"

using namespace bregdistill;

namespace {

std::vector<ConvexFunction> table_rows() {
  return {make_instance("LR"),       make_instance("KL"),       make_instance("BE"),
          make_instance("LS"),       make_instance("SBA", -0.5), make_instance("SBA", 0.5),
          make_instance("SBA", 3.0), make_instance("SBA", 5.0)};
}

GaussianMixture normal1d(double m, double var) { return GaussianMixture::gaussian({m}, Matrix{{var}}); }

QuadratureGrid grid_for(const GaussianMixture& p, const GaussianMixture& q) {
  std::vector<GaussianMixture> ds{p, q};
  return support_grid(ds, 4001);
}

}  // namespace

TEST_CASE("closed-form weights") {
  CHECK(weight(make_instance("KL"), 3.7) == 1.0);
  CHECK(weight(make_instance("LS"), 2.5) == 2.5);
  CHECK(weight(make_instance("LR"), 1.0) == 0.5);
  CHECK(weight(make_instance("SBA", 5.0), 2.0) == doctest::Approx(32.0).epsilon(1e-15));
  CHECK(weight(make_instance("BE"), 4.0) == 0.25);
  CHECK_THROWS_AS(weight(make_instance("KL"), 0.0), DomainError);
  CHECK_THROWS_AS(weight(make_instance("LS"), -1.0), DomainError);
}

TEST_CASE("closed-form logit weights") {
  CHECK(logit_weight(make_instance("LR"), 0.0) == 0.5);
  CHECK(logit_weight(make_instance("SBA", 5.0), 1.0) == doctest::Approx(0.0067379469990854670).epsilon(1e-14));
  CHECK(logit_weight(make_instance("BE"), -2.0) == doctest::Approx(0.1353352832366127).epsilon(1e-14));
  CHECK(logit_weight(make_instance("KL"), 4.0) == 1.0);
  CHECK(logit_weight(make_instance("LS"), 2.0) == doctest::Approx(std::exp(-2.0)));
}

TEST_CASE("registry aliases and validation") {
  const auto sba1 = make_instance("SBA", 1.0);
  const auto ls = make_instance("LS");
  for (double r : ratio_probe_grid()) CHECK(std::abs(sba1.weight(r) - ls.weight(r)) < 1e-12);

  CHECK(make_instance("SBA", 0.0).kind() == ConvexKind::KL);
  const auto be = make_instance("SBA", -1.0);
  CHECK(be.kind() == ConvexKind::BE);
  CHECK(be.weight(4.0) == 0.25);

  CHECK_THROWS_AS(make_instance("SBA", 5e-7), ArgumentError);
  CHECK_THROWS_AS(make_instance("SBA", -1.0 + 5e-7), ArgumentError);
  CHECK_THROWS_AS(make_instance("SBA"), ArgumentError);
  CHECK_THROWS_AS(make_instance("KL", 2.0), ArgumentError);
  CHECK_THROWS_AS(make_instance("JS"), ArgumentError);
  CHECK(make_instance("SBA", 5.0).label() == "SBA(5)");
  CHECK(make_instance("SBA", -0.5).label() == "SBA(-0.5)");
}

TEST_CASE("registry closed forms of h") {
  CHECK(make_instance("LR").value(2.0) ==
        doctest::Approx(2.0 * std::log(2.0) - 3.0 * std::log(3.0)).epsilon(1e-15));
  CHECK(make_instance("KL").value(2.0) == doctest::Approx(2.0 * std::log(2.0) - 2.0));
  CHECK(make_instance("BE").value(2.0) == doctest::Approx(-std::log(2.0)));
  CHECK(make_instance("LS").value(2.0) == 2.0);
  CHECK(make_instance("SBA", 2.0).value(2.0) == doctest::Approx((8.0 - 2.0) / 6.0));
}

TEST_CASE("strict convexity on the probe grid") {
  for (const auto& cf : table_rows())
    for (double r : ratio_probe_grid()) CHECK(cf.second(r) > 0.0);
}

TEST_CASE("table consistency against finite differences of h") {
  const double step = 1e-5;
  for (const auto& cf : table_rows()) {
    for (double r : ratio_probe_grid()) {
      const double fd_first = (cf.value(r + step) - cf.value(r - step)) / (2 * step);
      CHECK(std::abs(fd_first - cf.first(r)) <= 1e-6 * std::max(1.0, std::abs(cf.first(r))));
      const double fd_second = (cf.first(r + step) - cf.first(r - step)) / (2 * step);
      const double w = cf.weight(r);
      CHECK(std::abs(fd_second * r - w) / w < 1e-4);
    }
  }
}

TEST_CASE("logit-ratio duality") {
  for (const auto& cf : table_rows()) {
    for (int i = 0; i <= 200; ++i) {
      const double l = -10.0 + 0.1 * i;
      const double a = cf.weight(std::exp(-l));
      const double b = cf.logit_weight(l);
      CHECK(std::abs(a - b) <= 1e-10 * std::max(1.0, std::abs(b)));
    }
  }
}

TEST_CASE("KL weight is constant and SBA weights are ordered by lambda above r = 1") {
  const auto kl = make_instance("KL");
  for (double r : ratio_probe_grid()) CHECK(kl.weight(r) == 1.0);
  const double lambdas[] = {-0.5, 0.5, 1.0, 3.0, 5.0, 10.0};
  for (double r : ratio_probe_grid()) {
    if (r <= 1.0) continue;
    for (int i = 0; i + 1 < 6; ++i)
      CHECK(make_instance("SBA", lambdas[i]).weight(r) < make_instance("SBA", lambdas[i + 1]).weight(r));
  }
}

TEST_CASE("custom instances are checked for convexity") {
  auto ok = make_custom("cosh", [](double r) { return std::cosh(r); }, [](double r) { return std::sinh(r); },
                        [](double r) { return std::cosh(r); });
  CHECK(ok.kind() == ConvexKind::Custom);
  CHECK(ok.weight(2.0) == doctest::Approx(2.0 * std::cosh(2.0)));
  CHECK(ok.logit_weight(0.0) == doctest::Approx(std::cosh(1.0)));
  CHECK_THROWS_AS(make_custom("concave", [](double r) { return std::log(r); }, [](double r) { return 1.0 / r; },
                              [](double r) { return -1.0 / (r * r); }),
                  ArgumentError);
}

TEST_CASE("divergence of a ratio with itself is zero") {
  const auto p = normal1d(0.0, 1.0);
  const auto q = normal1d(0.5, 1.0);
  const auto r = mixture_ratio(q, p);
  const auto grid = grid_for(p, q);
  for (const auto& cf : table_rows()) CHECK(std::abs(divergence(cf, r, r, p, grid, 0.0)) < 1e-10);
}

TEST_CASE("LS divergence between two Gaussian ratios") {
  // E_p[r1 r2] = exp(m1 m2) for unit-variance Gaussians against N(0,1).
  const auto p = normal1d(0.0, 1.0);
  const auto q1 = normal1d(0.5, 1.0);
  const auto q2 = normal1d(0.25, 1.0);
  const double expected = (std::exp(0.25) - 2.0 * std::exp(0.125) + std::exp(0.0625)) / 2.0;
  CHECK(expected == doctest::Approx(0.041111).epsilon(1e-4));
  const double v = divergence(make_instance("LS"), mixture_ratio(q1, p), mixture_ratio(q2, p), p, grid_for(p, q1), 0.0);
  CHECK(std::abs(v - expected) < 1e-10);
}

TEST_CASE("divergence to one: closed-form Gaussian values") {
  const auto p = normal1d(0.0, 1.0);
  const auto q = normal1d(0.5, 1.0);
  const auto grid = grid_for(p, q);
  const auto r = mixture_ratio(q, p);
  CHECK(std::abs(divergence_to_one(make_instance("LS"), r, p, grid, 0.0) - (std::exp(0.25) - 1.0) / 2.0) < 1e-10);
  CHECK(std::abs(divergence_to_one(make_instance("KL"), r, p, grid, 0.0) - 0.125) < 1e-10);
  const auto same = mixture_ratio(p, p);
  for (const auto& cf : table_rows()) CHECK(std::abs(divergence_to_one(cf, same, p, grid, 0.0)) < 1e-10);
}

TEST_CASE("KL instance with r* = 1 reproduces KL(q || p)") {
  const auto p = normal1d(0.3, 1.7);
  const auto q = normal1d(-0.2, 0.8);
  const auto grid = grid_for(p, q);
  const double kl = 0.5 * (std::log(1.7 / 0.8) + (0.8 + 0.25) / 1.7 - 1.0);
  CHECK(std::abs(divergence_to_one(make_instance("KL"), mixture_ratio(q, p), p, grid, 0.0) - kl) < 1e-10);
  CHECK(std::abs(divergence(make_instance("KL"), mixture_ratio(q, p), mixture_ratio(p, p), p, grid, 0.0) - kl) < 1e-10);
}

TEST_CASE("divergence is non-negative on random Gaussian triples") {
  Rng rng(17);
  for (const auto& cf : table_rows()) {
    for (int i = 0; i < 50; ++i) {
      const double sp = rng.uniform(1.0, 1.5);
      const auto p = normal1d(rng.uniform(-0.5, 0.5), sp * sp);
      const double s1 = sp * rng.uniform(0.6, 1.0), s2 = sp * rng.uniform(0.6, 1.0);
      const auto q1 = normal1d(rng.uniform(-0.5, 0.5), s1 * s1);
      const auto q2 = normal1d(rng.uniform(-0.5, 0.5), s2 * s2);
      std::vector<GaussianMixture> ds{p, q1, q2};
      const auto grid = support_grid(ds, 2001);
      const double v = divergence(cf, mixture_ratio(q1, p), mixture_ratio(q2, p), p, grid, 0.0);
      CAPTURE(cf.label());
      CHECK(v >= -1e-8);
    }
  }
}

TEST_CASE("divergence refuses grids that miss the support") {
  const auto p = normal1d(0.0, 1.0);
  const QuadratureGrid narrow({uniform_rule(-2.0, 2.0, 101)});
  CHECK_THROWS_AS(divergence_to_one(make_instance("KL"), mixture_ratio(p, p), p, narrow, 0.0), CoverageError);
}
