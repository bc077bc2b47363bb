#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bregdistill/dense_net.hpp"
#include "bregdistill/linalg.hpp"

namespace bregdistill {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  Vec first_moment;
  Vec second_moment;
  // Optional layout used to name the offending block in error messages.
  std::vector<ParameterBlock> blocks;
};

AdamState make_adam_state(std::size_t parameter_count, AdamConfig config = {},
                          std::vector<ParameterBlock> blocks = {});

// One bias-corrected adaptive-moment step, in place. `lr_scale` multiplies the
// configured learning rate (used by decay schedules).
void adam_update(AdamState& state, std::span<double> params, std::span<const double> grads,
                 double lr_scale = 1.0);

// Cosine decay from 1 down to `floor` over `total` steps.
double cosine_decay(std::uint64_t step, std::uint64_t total, double floor = 0.0);

}  // namespace bregdistill
