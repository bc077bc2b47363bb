#include <doctest.h>

#include <cmath>
#include <numeric>

#include "bregdistill/errors.hpp"
#include "bregdistill/ratio_classifier.hpp"
#include "test_support.hpp"

using namespace bregdistill;

namespace {

std::vector<NoisySample> fixed_batch(double mean, std::size_t n, double t, Rng& rng) {
  const auto sched = DiffusionSchedule::variance_exploding();
  std::vector<Vec> clean(n);
  for (auto& x : clean) x = {mean + rng.normal()};
  return noisy_batch(clean, sched, rng, t);
}

Sampler gaussian_sampler(double mean) {
  return [mean](Rng& rng, std::size_t n) {
    std::vector<Vec> out(n);
    for (auto& x : out) x = {mean + rng.normal()};
    return out;
  };
}

double mean_of(const std::vector<double>& v, std::size_t from, std::size_t to) {
  return std::accumulate(v.begin() + from, v.begin() + to, 0.0) / static_cast<double>(to - from);
}

}  // namespace

TEST_CASE("uninformative classifier has loss log 2") {
  Rng rng(1);
  RatioClassifier clf(1, DenseNet::zeros({17, 8, 1}, Activation::Silu));
  const auto teacher = fixed_batch(0.0, 32, 0.5, rng);
  const auto student = fixed_batch(0.5, 48, 0.5, rng);
  CHECK(classifier_loss(clf, teacher, student).loss == doctest::Approx(std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("separated batches with saturated logits have tiny loss") {
  Rng rng(2);
  DenseNet net = DenseNet::zeros({17, 1}, Activation::Silu);
  net.weight(0)[0] = 1000.0;  // logit = 1000 x
  RatioClassifier clf(1, net);
  std::vector<NoisySample> teacher, student;
  for (int i = 0; i < 20; ++i) {
    teacher.push_back(NoisySample{{1.0 + 0.1 * i}, 0.5, {}, {}});
    student.push_back(NoisySample{{-1.0 - 0.1 * i}, 0.5, {}, {}});
  }
  CHECK(classifier_loss(clf, teacher, student).loss < 1e-3);
}

TEST_CASE("classifier loss gradient matches finite differences") {
  Rng rng(3);
  RatioClassifier clf(2, rng, {12, 10});
  std::vector<NoisySample> teacher, student;
  const auto sched = DiffusionSchedule::variance_exploding();
  for (int i = 0; i < 10; ++i) {
    const Vec a{rng.normal(), rng.normal()}, b{0.7 + rng.normal(), rng.normal()};
    const Vec xi{rng.normal(), rng.normal()};
    teacher.push_back(perturb(sched, a, sample_time(sched, rng), xi));
    student.push_back(perturb(sched, b, sample_time(sched, rng), xi));
  }
  const auto analytic = classifier_loss(clf, teacher, student);
  Vec fd(analytic.gradient.size());
  for (std::size_t i = 0; i < fd.size(); ++i) {
    RatioClassifier probe = clf;
    const double base = probe.net().parameters()[i];
    probe.net().parameters()[i] = base + 1e-6;
    const double plus = classifier_loss(probe, teacher, student).loss;
    probe.net().parameters()[i] = base - 1e-6;
    const double minus = classifier_loss(probe, teacher, student).loss;
    fd[i] = (plus - minus) / 2e-6;
  }
  CHECK(testing::max_relative_error(analytic.gradient, fd) < 1e-4);
}

TEST_CASE("empty batches are rejected") {
  Rng rng(4);
  RatioClassifier clf(1, rng);
  const auto batch = fixed_batch(0.0, 4, 0.5, rng);
  CHECK_THROWS_AS(classifier_loss(clf, {}, batch), ArgumentError);
  CHECK_THROWS_AS(classifier_loss(clf, batch, {}), ArgumentError);
}

TEST_CASE("ratio estimate is exp of the negated logit") {
  DenseNet net = DenseNet::zeros({17, 1}, Activation::Silu);
  RatioClassifier clf(1, net);
  const Vec x{0.3};
  CHECK(ratio_estimate(clf, x, 0.5) == 1.0);

  clf.net().bias(0)[0] = 2.0;
  CHECK(ratio_estimate(clf, x, 0.5) == doctest::Approx(0.1353352832366127).epsilon(1e-14));
  const double l = clf.logit(x, 0.5);
  const double r = ratio_estimate(clf, x, 0.5);
  CHECK(std::abs(1.0 / (1.0 + std::exp(-l)) - 1.0 / (1.0 + r)) < 1e-12);

  clf.net().bias(0)[0] = -80.0;
  CHECK(ratio_estimate(clf, x, 0.5) == doctest::Approx(std::exp(30.0)));
  const RatioField field = clf.ratio_field();
  CHECK(field.provenance() == RatioSource::Classifier);
  CHECK(field(x, 0.5) == doctest::Approx(std::exp(30.0)));
}

TEST_CASE("ratio field is a snapshot") {
  Rng rng(5);
  RatioClassifier clf(1, rng);
  const Vec x{0.4};
  const RatioField field = clf.ratio_field();
  const double before = field(x, 0.3);
  clf.net().parameters()[0] += 1.0;
  CHECK(field(x, 0.3) == before);
}

TEST_CASE("training lowers the loss and is deterministic") {
  const auto sched = DiffusionSchedule::variance_exploding();
  auto fit = [&](std::uint64_t seed) {
    Rng init(seed);
    RatioClassifier clf(1, init);
    Rng rng(seed + 100);
    FitOptions options;
    options.batch_size = 64;
    const FitReport report = fit_classifier(clf, gaussian_sampler(0.0), gaussian_sampler(1.5), sched, 400, rng, options);
    return std::make_pair(clf.net().parameters()[0], report.losses);
  };
  const auto [p1, losses] = fit(7);
  const auto [p2, again] = fit(7);
  CHECK(p1 == p2);
  CHECK(losses == again);
  REQUIRE(losses.size() == 400);
  CHECK(mean_of(losses, 300, 400) < mean_of(losses, 0, 100));
}

TEST_CASE("identical classes give a near-zero logit") {
  const auto sched = DiffusionSchedule::variance_exploding();
  Rng init(0);
  RatioClassifier clf(1, init);
  Rng rng(1);
  FitOptions options;
  options.fixed_time = 0.1;
  fit_classifier(clf, gaussian_sampler(0.0), gaussian_sampler(0.0), sched, 1500, rng, options);
  double worst = 0.0;
  for (int i = 0; i < 46; ++i) {
    const Vec x{-2.0 + 0.1 * i};
    worst = std::max(worst, std::abs(clf.logit(x, 0.1)));
  }
  CHECK(worst < 0.15);
}

TEST_CASE("wrong network shape is rejected") {
  CHECK_THROWS_AS(RatioClassifier(1, DenseNet::zeros({3, 1}, Activation::Silu)), ShapeError);
  CHECK_THROWS_AS(RatioClassifier(1, DenseNet::zeros({17, 2}, Activation::Silu)), ShapeError);
}
