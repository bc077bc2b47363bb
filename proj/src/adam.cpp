#include "bregdistill/adam.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "bregdistill/errors.hpp"

namespace bregdistill {

AdamState make_adam_state(std::size_t parameter_count, AdamConfig config,
                          std::vector<ParameterBlock> blocks) {
  if (!(config.beta1 > 0.0 && config.beta1 < 1.0) || !(config.beta2 > 0.0 && config.beta2 < 1.0))
    throw ArgumentError("adam decay rates must lie in (0, 1)");
  if (!(config.epsilon > 0.0)) throw ArgumentError("adam epsilon must be positive");
  AdamState s;
  s.config = config;
  s.first_moment.assign(parameter_count, 0.0);
  s.second_moment.assign(parameter_count, 0.0);
  s.blocks = std::move(blocks);
  return s;
}

namespace {

std::string block_name(const AdamState& state, std::size_t index) {
  for (const auto& b : state.blocks)
    if (index >= b.offset && index < b.offset + b.size)
      return b.name + "[" + std::to_string(index - b.offset) + "]";
  return "parameter[" + std::to_string(index) + "]";
}

}  // namespace

void adam_update(AdamState& state, std::span<double> params, std::span<const double> grads,
                 double lr_scale) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size())
    throw ShapeError("adam: parameter, gradient and accumulator sizes differ");
  for (std::size_t i = 0; i < grads.size(); ++i)
    if (!std::isfinite(grads[i]))
      throw NumericError("adam: non-finite gradient in " + block_name(state, i));

  const AdamConfig& c = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  const double lr = c.learning_rate * lr_scale;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g * g;
    const double m_hat = m / correction1;
    const double v_hat = v / correction2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + c.epsilon);
  }
}

double cosine_decay(std::uint64_t step, std::uint64_t total, double floor) {
  if (total == 0) return 1.0;
  const double progress = std::min(1.0, static_cast<double>(step) / static_cast<double>(total));
  return floor + (1.0 - floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace bregdistill
