#include "bregdistill/ratio_classifier.hpp"

#include <cmath>
#include <memory>
#include <string>

#include "bregdistill/errors.hpp"
#include "bregdistill/time_embedding.hpp"

namespace bregdistill {

namespace {

std::vector<std::size_t> classifier_widths(std::size_t dim, const std::vector<std::size_t>& hidden) {
  std::vector<std::size_t> w{dim + kTimeEmbeddingWidth};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(1);
  return w;
}

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double l) {
  if (l >= 0.0) return 1.0 / (1.0 + std::exp(-l));
  const double e = std::exp(l);
  return e / (1.0 + e);
}

}  // namespace

RatioClassifier::RatioClassifier(std::size_t dim, Rng& rng, std::vector<std::size_t> hidden, AdamConfig adam)
    : RatioClassifier(dim, DenseNet(classifier_widths(dim, hidden), Activation::Silu, rng), adam) {}

RatioClassifier::RatioClassifier(std::size_t dim, DenseNet net, AdamConfig adam)
    : dim_(dim), net_(std::move(net)) {
  if (net_.input_width() != dim + kTimeEmbeddingWidth || net_.output_width() != 1)
    throw ShapeError("classifier network must map dim + 16 inputs to one logit");
  optimizer_ = make_adam_state(net_.parameter_count(), adam, net_.parameter_blocks());
}

double RatioClassifier::logit(std::span<const double> x, double t) const {
  if (x.size() != dim_) throw ShapeError("classifier input has wrong dimension");
  return net_.apply(conditioned_input(x, t))[0];
}

double RatioClassifier::ratio(std::span<const double> x, double t) const { return clamped_ratio(-logit(x, t)); }

RatioField RatioClassifier::ratio_field() const {
  auto snapshot = std::make_shared<const DenseNet>(net_);
  const std::size_t dim = dim_;
  auto binder = [snapshot, dim](double t) -> RatioField::LogRatioAtTime {
    return [snapshot, dim, t](std::span<const double> x) {
      if (x.size() != dim) throw ShapeError("classifier input has wrong dimension");
      return clamp_log_ratio(-snapshot->apply(conditioned_input(x, t))[0]);
    };
  };
  return RatioField(std::move(binder), RatioSource::Classifier);
}

double ratio_estimate(const RatioClassifier& clf, std::span<const double> x, double t) { return clf.ratio(x, t); }

LossAndGradient classifier_loss(const RatioClassifier& clf, std::span<const NoisySample> teacher_batch,
                                std::span<const NoisySample> student_batch) {
  if (teacher_batch.empty() || student_batch.empty()) throw ArgumentError("classifier_loss: empty batch");
  const DenseNet& net = clf.net();
  LossAndGradient out{0.0, Vec(net.parameter_count(), 0.0)};
  const double n = static_cast<double>(teacher_batch.size() + student_batch.size());
  DenseNet::Tape tape;
  Vec input;
  auto accumulate = [&](const NoisySample& s, double label) {
    conditioned_input(s.x_t, s.t, input);
    net.forward(input, tape);
    const double l = tape.output[0];
    // -[y log sigma(l) + (1 - y) log(1 - sigma(l))]
    out.loss += label > 0.5 ? softplus(-l) : softplus(l);
    const double upstream = (sigmoid(l) - label) / n;
    net.backward(tape, std::span<const double>(&upstream, 1), out.gradient);
  };
  for (const auto& s : teacher_batch) accumulate(s, 1.0);
  for (const auto& s : student_batch) accumulate(s, 0.0);
  out.loss /= n;
  return out;
}

std::vector<NoisySample> noisy_batch(const std::vector<Vec>& clean, const DiffusionSchedule& sched, Rng& rng,
                                     std::optional<double> fixed_time) {
  std::vector<NoisySample> out;
  out.reserve(clean.size());
  Vec xi;
  for (const auto& x0 : clean) {
    const double t = fixed_time ? *fixed_time : sample_time(sched, rng);
    xi.resize(x0.size());
    for (double& v : xi) v = rng.normal();
    out.push_back(perturb(sched, x0, t, xi));
  }
  return out;
}

double classifier_step(RatioClassifier& clf, const Sampler& teacher, const Sampler& student,
                       const DiffusionSchedule& sched, Rng& rng, std::size_t batch_size, double lr_scale,
                       std::optional<double> fixed_time) {
  const auto teacher_noisy = noisy_batch(teacher(rng, batch_size), sched, rng, fixed_time);
  const auto student_noisy = noisy_batch(student(rng, batch_size), sched, rng, fixed_time);
  LossAndGradient lg = classifier_loss(clf, teacher_noisy, student_noisy);
  if (!std::isfinite(lg.loss)) throw NumericError("classifier loss is not finite");
  adam_update(clf.optimizer(), clf.net().parameters(), lg.gradient, lr_scale);
  return lg.loss;
}

FitReport fit_classifier(RatioClassifier& clf, const Sampler& teacher, const Sampler& student,
                         const DiffusionSchedule& sched, std::size_t steps, Rng& rng, const FitOptions& options) {
  if (steps < 1) throw ArgumentError("fit_classifier: steps must be at least 1");
  if (options.batch_size < 1) throw ArgumentError("fit_classifier: batch size must be at least 1");
  FitReport report;
  report.losses.reserve(steps);
  for (std::size_t step = 0; step < steps; ++step) {
    const double scale = options.cosine_decay ? cosine_decay(step, steps, options.lr_floor) : 1.0;
    try {
      report.losses.push_back(
          classifier_step(clf, teacher, student, sched, rng, options.batch_size, scale, options.fixed_time));
    } catch (const NumericError& e) {
      throw NumericError("fit_classifier step " + std::to_string(step) + ": " + e.what());
    }
  }
  return report;
}

}  // namespace bregdistill
