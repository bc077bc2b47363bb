#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bregdistill/linalg.hpp"
#include "bregdistill/rng.hpp"

namespace bregdistill {

enum class Activation { Identity, Silu, Tanh };

std::string_view activation_name(Activation a);
Activation parse_activation(std::string_view name);

// Named contiguous slice of a flat parameter vector.
struct ParameterBlock {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
};

// Fully connected feed-forward network. Hidden layers use `hidden`, the last
// layer is always the identity. Parameters live in one flat vector laid out
// layer by layer as [weight (out x in, row-major), bias (out)].
class DenseNet {
 public:
  // Activations and pre-activations recorded by forward() for backward().
  struct Tape {
    std::vector<Vec> inputs;    // input to each layer
    std::vector<Vec> preacts;   // pre-activation of each layer
    Vec output;
  };

  DenseNet() = default;
  // Fan-in scaled uniform initialization U(-1/sqrt(in), 1/sqrt(in)).
  DenseNet(std::vector<std::size_t> widths, Activation hidden, Rng& rng);
  static DenseNet zeros(std::vector<std::size_t> widths, Activation hidden);
  static DenseNet from_parameters(std::vector<std::size_t> widths, Activation hidden, Vec params);

  const std::vector<std::size_t>& widths() const { return widths_; }
  std::size_t input_width() const { return widths_.front(); }
  std::size_t output_width() const { return widths_.back(); }
  std::size_t layer_count() const { return widths_.size() - 1; }
  Activation hidden_activation() const { return hidden_; }

  std::span<const double> parameters() const { return params_; }
  std::span<double> parameters() { return params_; }
  std::size_t parameter_count() const { return params_.size(); }
  std::vector<ParameterBlock> parameter_blocks() const;

  std::span<const double> weight(std::size_t layer) const;
  std::span<double> weight(std::size_t layer);
  std::span<const double> bias(std::size_t layer) const;
  std::span<double> bias(std::size_t layer);

  Vec apply(std::span<const double> input) const;
  void forward(std::span<const double> input, Tape& tape) const;

  // Accumulates (+=) d<upstream, output>/d params into `param_grad` and writes
  // the input gradient into `input_grad` when it is non-empty.
  void backward(const Tape& tape, std::span<const double> upstream,
                std::span<double> param_grad, std::span<double> input_grad = {}) const;

 private:
  DenseNet(std::vector<std::size_t> widths, Activation hidden);
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const {
    return offsets_[layer] + widths_[layer] * widths_[layer + 1];
  }

  std::vector<std::size_t> widths_;
  Activation hidden_ = Activation::Silu;
  std::vector<std::size_t> offsets_;
  Vec params_;
};

struct NetGradients {
  Vec parameters;
  Vec input;
};

Vec net_apply(const DenseNet& net, std::span<const double> input);
NetGradients net_gradients(const DenseNet& net, std::span<const double> input,
                           std::span<const double> upstream);

}  // namespace bregdistill
