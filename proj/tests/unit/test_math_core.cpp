#include <doctest.h>

#include <cmath>
#include <numeric>

#include "bregdistill/adam.hpp"
#include "bregdistill/checkpoint.hpp"
#include "bregdistill/dense_net.hpp"
#include "bregdistill/errors.hpp"
#include "bregdistill/quadrature.hpp"
#include "bregdistill/rng.hpp"
#include "test_support.hpp"

using namespace bregdistill;

TEST_CASE("net_apply evaluates a single affine layer") {
  auto net = DenseNet::from_parameters({1, 1}, Activation::Silu, {2.0, 1.0});
  const Vec out = net_apply(net, Vec{3.0});
  REQUIRE(out.size() == 1);
  CHECK(out[0] == 7.0);
}

TEST_CASE("net_apply of an all-zero network is zero") {
  auto net = DenseNet::zeros({3, 8, 8, 2}, Activation::Silu);
  const Vec out = net_apply(net, Vec{0.3, -1.0, 2.0});
  CHECK(out == Vec{0.0, 0.0});
}

TEST_CASE("net_apply rejects inputs of the wrong width and names the layer") {
  Rng rng(1);
  DenseNet net({2, 4, 1}, Activation::Silu, rng);
  try {
    net_apply(net, Vec{1.0});
    FAIL("expected a shape error");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("layer 0") != std::string::npos);
  }
}

TEST_CASE("checkpoint round trip reproduces outputs bit-exactly") {
  Rng rng(7);
  DenseNet net({2, 16, 16, 2}, Activation::Silu, rng);
  const std::string text = serialize_checkpoint(net, {"generator", 7, 12, "abc"});
  const Checkpoint back = parse_checkpoint(text);
  CHECK(back.metadata.role == "generator");
  CHECK(back.metadata.seed == 7);
  CHECK(back.metadata.step == 12);
  CHECK(back.metadata.config_hash == "abc");
  for (int i = 0; i < 20; ++i) {
    const Vec x{rng.normal(), rng.normal()};
    CHECK(net.apply(x) == back.net.apply(x));
  }
  CHECK(serialize_checkpoint(back.net, back.metadata) == text);
}

TEST_CASE("corrupt checkpoints are rejected") {
  CHECK_THROWS_AS(parse_checkpoint("{not json"), CheckpointError);
  Rng rng(3);
  DenseNet net({1, 2, 1}, Activation::Tanh, rng);
  std::string text = serialize_checkpoint(net, {"score_net", 0, 0, ""});
  text.replace(text.find("\"widths\""), 8, "\"widthz\"");
  CHECK_THROWS_AS(parse_checkpoint(text), CheckpointError);
}

TEST_CASE("net_gradients of a linear layer follow the chain rule") {
  auto net = DenseNet::from_parameters({1, 1}, Activation::Identity, {2.0, 1.0});
  const NetGradients g = net_gradients(net, Vec{3.0}, Vec{1.0});
  CHECK(g.parameters == Vec{3.0, 1.0});
  CHECK(g.input == Vec{2.0});
}

TEST_CASE("zero upstream yields zero gradients") {
  Rng rng(2);
  DenseNet net({2, 16, 16, 2}, Activation::Silu, rng);
  const NetGradients g = net_gradients(net, Vec{0.4, -0.2}, Vec{0.0, 0.0});
  for (double v : g.parameters) CHECK(v == 0.0);
  for (double v : g.input) CHECK(v == 0.0);
}

TEST_CASE("net_gradients match central finite differences on a 2x16 network") {
  Rng rng(11);
  DenseNet net({2, 16, 16, 2}, Activation::Silu, rng);
  const Vec x{0.7, -1.3};
  const Vec up{0.6, -1.1};
  const NetGradients g = net_gradients(net, x, up);
  const Vec fd = testing::fd_parameter_gradient(net, x, up, 1e-4);
  CHECK(testing::max_relative_error(g.parameters, fd) < 1e-5);
  const Vec fd_in = testing::fd_input_gradient(net, x, up, 1e-4);
  CHECK(testing::max_relative_error(g.input, fd_in) < 1e-5);
}

TEST_CASE("gradient oracle holds for every architecture used in the repository") {
  // generator [2,64,64,2], score net [d+16,128,128,d], classifier [d+16,64,64,1], affine [d,d]
  const std::vector<std::vector<std::size_t>> archs = {
      {2, 64, 64, 2}, {17, 128, 128, 1}, {18, 128, 128, 2}, {17, 64, 64, 1}, {18, 64, 64, 1}, {2, 2}, {1, 1}};
  Rng rng(5);
  for (const auto& widths : archs) {
    const Activation act = widths.size() == 2 ? Activation::Identity : Activation::Silu;
    DenseNet net(widths, act, rng);
    double worst = 0.0;
    for (int probe = 0; probe < 100; ++probe) {
      Vec x(widths.front()), up(widths.back());
      for (double& v : x) v = rng.normal();
      for (double& v : up) v = rng.normal();
      const NetGradients g = net_gradients(net, x, up);
      // Parameter FD on a random subset keeps the large nets fast.
      const Vec fd_in = testing::fd_input_gradient(net, x, up, 1e-4);
      worst = std::max(worst, testing::max_relative_error(g.input, fd_in));
      const std::size_t idx = rng.index(net.parameter_count());
      const double fd_p = testing::fd_single_parameter(net, x, up, idx, 1e-4);
      const double scale = std::max(std::abs(fd_p), 1e-3 * testing::max_abs(g.parameters) + 1e-12);
      worst = std::max(worst, std::abs(g.parameters[idx] - fd_p) / scale);
    }
    CAPTURE(widths.size());
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("adam leaves parameters unchanged for zero gradients") {
  AdamState s = make_adam_state(3);
  Vec p{1.0, -2.0, 0.5};
  adam_update(s, p, Vec{0.0, 0.0, 0.0});
  CHECK(p == Vec{1.0, -2.0, 0.5});
  CHECK(s.step == 1);
}

TEST_CASE("adam first step moves by about lr times the gradient sign") {
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  AdamState s = make_adam_state(1, cfg);
  Vec p{0.0};
  adam_update(s, p, Vec{1.0});
  // m_hat = 1, v_hat = 1 -> step = 0.1 / (1 + 1e-8)
  CHECK(p[0] == doctest::Approx(-0.1 / (1.0 + 1e-8)).epsilon(1e-15));
  CHECK(s.second_moment[0] >= 0.0);
}

TEST_CASE("adam is deterministic and rejects non-finite gradients") {
  auto run = [] {
    AdamState s = make_adam_state(2);
    Vec p{0.3, 0.1};
    Rng rng(4);
    for (int i = 0; i < 50; ++i) adam_update(s, p, Vec{rng.normal(), rng.normal()});
    return p;
  };
  CHECK(run() == run());
  AdamState s = make_adam_state(2, {}, {{"layer0.bias", 0, 2}});
  Vec p{0.0, 0.0};
  try {
    adam_update(s, p, Vec{1.0, std::nan("")});
    FAIL("expected numeric error");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("layer0.bias[1]") != std::string::npos);
  }
  CHECK_THROWS_AS(make_adam_state(1, {1e-3, 1.0, 0.999, 1e-8}), ArgumentError);
}

TEST_CASE("hermite_rule integrates standard normal moments") {
  const QuadratureRule r3 = hermite_rule(3);
  CHECK(r3.integrate([](double x) { return x * x; }) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(r3.integrate([](double x) { return x * x * x * x; }) - 3.0) < 1e-10);
  CHECK(std::abs(r3.integrate([](double x) { return x * x * x * x * x; })) < 1e-12);
}

TEST_CASE("hermite_rule weights sum to one for every n") {
  for (std::size_t n = 1; n <= 200; ++n) {
    const QuadratureRule r = hermite_rule(n);
    CAPTURE(n);
    const double total = std::accumulate(r.weights.begin(), r.weights.end(), 0.0);
    CHECK(std::abs(total - 1.0) < 1e-12);
    for (double w : r.weights) CHECK(w > 0.0);
  }
  CHECK_THROWS_AS(hermite_rule(0), ArgumentError);
  CHECK_THROWS_AS(hermite_rule(201), ArgumentError);
}

TEST_CASE("hermite_rule is exact up to degree 2n-1") {
  // E[x^(2k)] = (2k-1)!!
  const QuadratureRule r = hermite_rule(10);
  double double_factorial = 1.0;
  for (int k = 1; k <= 9; ++k) {
    double_factorial *= (2 * k - 1);
    const double m = r.integrate([k](double x) { return std::pow(x, 2 * k); });
    CHECK(m == doctest::Approx(double_factorial).epsilon(1e-11));
  }
}

TEST_CASE("Gauss-Hermite reproduces Gaussian ratio identities") {
  // For p = N(0,1), q_i = N(m_i, 1): E_p[(q1/p)(q2/p)] = exp(m1 m2).
  const QuadratureRule r = hermite_rule(60);
  for (double m1 : {-0.8, 0.25, 0.5}) {
    for (double m2 : {-0.3, 0.5, 1.0}) {
      const double v = r.integrate([&](double x) {
        return std::exp(m1 * x - 0.5 * m1 * m1) * std::exp(m2 * x - 0.5 * m2 * m2);
      });
      CHECK(std::abs(v - std::exp(m1 * m2)) < 1e-8);
    }
  }
}

TEST_CASE("uniform grid trapezoid integrates a Gaussian density") {
  const QuadratureRule r = uniform_rule(-10, 10, 801);
  const double total =
      r.integrate([](double x) { return std::exp(-0.5 * x * x) / std::sqrt(2 * 3.14159265358979323846); });
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("rng streams are reproducible and derived streams differ") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.normal() == b.normal());
  Rng c = a.derive(1), d = a.derive(2);
  CHECK(c.uniform() != d.uniform());
}
