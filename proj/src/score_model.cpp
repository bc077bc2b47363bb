#include "bregdistill/score_model.hpp"

#include <cmath>
#include <string>

#include "bregdistill/errors.hpp"
#include "bregdistill/time_embedding.hpp"

namespace bregdistill {

namespace {

std::vector<std::size_t> score_widths(std::size_t dim, const std::vector<std::size_t>& hidden) {
  std::vector<std::size_t> w{dim + kTimeEmbeddingWidth};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(dim);
  return w;
}

}  // namespace

ScoreNet::ScoreNet(std::size_t dim, DiffusionSchedule sched, Rng& rng, std::vector<std::size_t> hidden,
                   AdamConfig adam)
    : ScoreNet(dim, sched, DenseNet(score_widths(dim, hidden), Activation::Silu, rng), adam) {}

ScoreNet::ScoreNet(std::size_t dim, DiffusionSchedule sched, DenseNet net, AdamConfig adam)
    : dim_(dim), sched_(sched), net_(std::move(net)) {
  sched_.validate();
  if (net_.input_width() != dim + kTimeEmbeddingWidth || net_.output_width() != dim)
    throw ShapeError("score network must map dim + 16 inputs to dim outputs");
  optimizer_ = make_adam_state(net_.parameter_count(), adam, net_.parameter_blocks());
}

Vec ScoreNet::score(std::span<const double> x, double t) const {
  if (x.size() != dim_) throw ShapeError("score input has wrong dimension");
  const double sigma = schedule_at(sched_, t).sigma;
  Vec out = net_.apply(conditioned_input(x, t));
  for (double& v : out) v /= sigma;
  return out;
}

LossAndGradient dsm_loss(const ScoreNet& model, std::span<const NoisySample> batch) {
  if (batch.empty()) throw ArgumentError("dsm_loss: empty batch");
  const DenseNet& net = model.net();
  const std::size_t d = model.dim();
  LossAndGradient out{0.0, Vec(net.parameter_count(), 0.0)};
  const double n = static_cast<double>(batch.size());
  DenseNet::Tape tape;
  Vec input;
  Vec upstream(d);
  for (const auto& s : batch) {
    if (s.x_t.size() != d || s.xi.size() != d) throw ShapeError("dsm_loss: sample has wrong dimension");
    conditioned_input(s.x_t, s.t, input);
    net.forward(input, tape);
    // sigma_t s(x_t) = net output, so the residual is output + xi.
    for (std::size_t i = 0; i < d; ++i) {
      const double r = tape.output[i] + s.xi[i];
      out.loss += r * r;
      upstream[i] = 2.0 * r / n;
    }
    net.backward(tape, upstream, out.gradient);
  }
  out.loss /= n;
  return out;
}

LossAndGradient dsm_loss(const ScoreNet& model, const std::vector<Vec>& x0_batch, Rng& rng) {
  if (x0_batch.empty()) throw ArgumentError("dsm_loss: empty batch");
  const auto noisy = noisy_batch(x0_batch, model.schedule(), rng);
  return dsm_loss(model, noisy);
}

double score_step(ScoreNet& model, const Sampler& source, Rng& rng, std::size_t batch_size, double lr_scale) {
  LossAndGradient lg = dsm_loss(model, source(rng, batch_size), rng);
  if (!std::isfinite(lg.loss)) throw NumericError("score loss is not finite");
  adam_update(model.optimizer(), model.net().parameters(), lg.gradient, lr_scale);
  return lg.loss;
}

FitReport fit_score(ScoreNet& model, const Sampler& source, std::size_t steps, Rng& rng, const FitOptions& options) {
  if (steps < 1) throw ArgumentError("fit_score: steps must be at least 1");
  if (options.batch_size < 1) throw ArgumentError("fit_score: batch size must be at least 1");
  FitReport report;
  report.losses.reserve(steps);
  for (std::size_t step = 0; step < steps; ++step) {
    const double scale = options.cosine_decay ? cosine_decay(step, steps, options.lr_floor) : 1.0;
    try {
      report.losses.push_back(score_step(model, source, rng, options.batch_size, scale));
    } catch (const NumericError& e) {
      throw NumericError("fit_score step " + std::to_string(step) + ": " + e.what());
    }
  }
  return report;
}

ScoreProvider::ScoreProvider(ScoreKind kind, std::size_t dim, DiffusionSchedule sched)
    : kind_(kind), dim_(dim), sched_(sched) {
  sched_.validate();
}

ScoreProvider ScoreProvider::analytic_teacher(const GaussianMixture& teacher, const DiffusionSchedule& sched) {
  ScoreProvider p(ScoreKind::AnalyticTeacher, teacher.dim(), sched);
  p.density_ = std::make_shared<const GaussianMixture>(teacher);
  return p;
}

ScoreProvider ScoreProvider::analytic_student(const AffineGenerator& gen, const DiffusionSchedule& sched) {
  ScoreProvider p(ScoreKind::AnalyticStudent, gen.dim(), sched);
  p.density_ = std::make_shared<const GaussianMixture>(pushforward(gen));
  return p;
}

ScoreProvider ScoreProvider::learned(const ScoreNet& model) {
  ScoreProvider p(ScoreKind::Learned, model.dim(), model.schedule());
  p.model_ = std::make_shared<const ScoreNet>(model);
  return p;
}

ScoreProvider::ScoreAtTime ScoreProvider::at(double t) const {
  const NoiseLevel level = schedule_at(sched_, t);
  const std::size_t d = dim_;
  if (kind_ == ScoreKind::Learned) {
    auto model = model_;
    Vec embedding(kTimeEmbeddingWidth);
    embed_time(t, embedding);
    return [model, embedding, level, d](std::span<const double> x) {
      if (x.size() != d) throw ShapeError("score input has wrong dimension");
      Vec input(x.begin(), x.end());
      input.insert(input.end(), embedding.begin(), embedding.end());
      Vec out = model->net().apply(input);
      for (double& v : out) v /= level.sigma;
      return out;
    };
  }
  auto marginal = std::make_shared<const GaussianMixture>(gm_marginal(*density_, level));
  return [marginal, d](std::span<const double> x) {
    if (x.size() != d) throw ShapeError("score input has wrong dimension");
    return marginal->score(x);
  };
}

Vec score_at(const ScoreProvider& provider, std::span<const double> x, double t) { return provider(x, t); }

}  // namespace bregdistill
