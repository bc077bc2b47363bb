#include "bregdistill/dense_net.hpp"

#include <cmath>
#include <string>

#include "bregdistill/errors.hpp"

namespace bregdistill {

namespace {

double activate(Activation a, double z) {
  switch (a) {
    case Activation::Identity:
      return z;
    case Activation::Silu:
      return z / (1.0 + std::exp(-z));
    case Activation::Tanh:
      return std::tanh(z);
  }
  return z;
}

double activate_derivative(Activation a, double z) {
  switch (a) {
    case Activation::Identity:
      return 1.0;
    case Activation::Silu: {
      const double s = 1.0 / (1.0 + std::exp(-z));
      return s * (1.0 + z * (1.0 - s));
    }
    case Activation::Tanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
  }
  return 1.0;
}

}  // namespace

std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::Identity:
      return "identity";
    case Activation::Silu:
      return "silu";
    case Activation::Tanh:
      return "tanh";
  }
  return "identity";
}

Activation parse_activation(std::string_view name) {
  if (name == "identity") return Activation::Identity;
  if (name == "silu") return Activation::Silu;
  if (name == "tanh") return Activation::Tanh;
  throw ArgumentError("unknown activation '" + std::string(name) + "'");
}

DenseNet::DenseNet(std::vector<std::size_t> widths, Activation hidden)
    : widths_(std::move(widths)), hidden_(hidden) {
  if (widths_.size() < 2) throw ShapeError("a network needs at least an input and an output width");
  std::size_t total = 0;
  for (std::size_t k = 0; k < widths_.size(); ++k) {
    if (widths_[k] == 0) throw ShapeError("layer width " + std::to_string(k) + " is zero");
  }
  for (std::size_t k = 0; k + 1 < widths_.size(); ++k) {
    offsets_.push_back(total);
    total += widths_[k] * widths_[k + 1] + widths_[k + 1];
  }
  params_.assign(total, 0.0);
}

DenseNet::DenseNet(std::vector<std::size_t> widths, Activation hidden, Rng& rng)
    : DenseNet(std::move(widths), hidden) {
  for (std::size_t k = 0; k < layer_count(); ++k) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(widths_[k]));
    for (double& w : weight(k)) w = rng.uniform(-bound, bound);
    for (double& b : bias(k)) b = rng.uniform(-bound, bound);
  }
}

DenseNet DenseNet::zeros(std::vector<std::size_t> widths, Activation hidden) {
  return DenseNet(std::move(widths), hidden);
}

DenseNet DenseNet::from_parameters(std::vector<std::size_t> widths, Activation hidden, Vec params) {
  DenseNet net(std::move(widths), hidden);
  if (params.size() != net.params_.size()) {
    throw ShapeError("parameter vector has " + std::to_string(params.size()) +
                     " entries, architecture needs " + std::to_string(net.params_.size()));
  }
  for (double p : params)
    if (!std::isfinite(p)) throw NumericError("non-finite network parameter");
  net.params_ = std::move(params);
  return net;
}

std::vector<ParameterBlock> DenseNet::parameter_blocks() const {
  std::vector<ParameterBlock> blocks;
  for (std::size_t k = 0; k < layer_count(); ++k) {
    blocks.push_back({"layer" + std::to_string(k) + ".weight", weight_offset(k),
                      widths_[k] * widths_[k + 1]});
    blocks.push_back({"layer" + std::to_string(k) + ".bias", bias_offset(k), widths_[k + 1]});
  }
  return blocks;
}

std::span<const double> DenseNet::weight(std::size_t layer) const {
  return std::span<const double>(params_).subspan(weight_offset(layer),
                                                  widths_[layer] * widths_[layer + 1]);
}
std::span<double> DenseNet::weight(std::size_t layer) {
  return std::span<double>(params_).subspan(weight_offset(layer), widths_[layer] * widths_[layer + 1]);
}
std::span<const double> DenseNet::bias(std::size_t layer) const {
  return std::span<const double>(params_).subspan(bias_offset(layer), widths_[layer + 1]);
}
std::span<double> DenseNet::bias(std::size_t layer) {
  return std::span<double>(params_).subspan(bias_offset(layer), widths_[layer + 1]);
}

void DenseNet::forward(std::span<const double> input, Tape& tape) const {
  if (input.size() != input_width()) {
    throw ShapeError("layer 0 expects input width " + std::to_string(input_width()) + ", got " +
                     std::to_string(input.size()));
  }
  const std::size_t layers = layer_count();
  tape.inputs.resize(layers);
  tape.preacts.resize(layers);
  tape.inputs[0].assign(input.begin(), input.end());
  for (std::size_t k = 0; k < layers; ++k) {
    const std::size_t in = widths_[k];
    const std::size_t out = widths_[k + 1];
    const double* w = params_.data() + weight_offset(k);
    const double* b = params_.data() + bias_offset(k);
    const Vec& x = tape.inputs[k];
    Vec& z = tape.preacts[k];
    z.resize(out);
    for (std::size_t i = 0; i < out; ++i) {
      double acc = b[i];
      const double* row = w + i * in;
      for (std::size_t j = 0; j < in; ++j) acc += row[j] * x[j];
      z[i] = acc;
    }
    Vec& next = (k + 1 < layers) ? tape.inputs[k + 1] : tape.output;
    next.resize(out);
    const Activation act = (k + 1 < layers) ? hidden_ : Activation::Identity;
    for (std::size_t i = 0; i < out; ++i) next[i] = activate(act, z[i]);
  }
}

Vec DenseNet::apply(std::span<const double> input) const {
  Tape tape;
  forward(input, tape);
  return std::move(tape.output);
}

void DenseNet::backward(const Tape& tape, std::span<const double> upstream,
                        std::span<double> param_grad, std::span<double> input_grad) const {
  if (upstream.size() != output_width()) {
    throw ShapeError("layer " + std::to_string(layer_count() - 1) + " expects upstream width " +
                     std::to_string(output_width()) + ", got " + std::to_string(upstream.size()));
  }
  if (param_grad.size() != params_.size()) throw ShapeError("parameter gradient buffer has wrong size");
  if (!input_grad.empty() && input_grad.size() != input_width())
    throw ShapeError("input gradient buffer has wrong size");

  Vec delta(upstream.begin(), upstream.end());
  Vec prev;
  for (std::size_t k = layer_count(); k-- > 0;) {
    const std::size_t in = widths_[k];
    const std::size_t out = widths_[k + 1];
    const Activation act = (k + 1 < layer_count()) ? hidden_ : Activation::Identity;
    if (act != Activation::Identity) {
      for (std::size_t i = 0; i < out; ++i) delta[i] *= activate_derivative(act, tape.preacts[k][i]);
    }
    const Vec& x = tape.inputs[k];
    double* gw = param_grad.data() + weight_offset(k);
    double* gb = param_grad.data() + bias_offset(k);
    const double* w = params_.data() + weight_offset(k);
    for (std::size_t i = 0; i < out; ++i) {
      const double d = delta[i];
      gb[i] += d;
      double* grow = gw + i * in;
      for (std::size_t j = 0; j < in; ++j) grow[j] += d * x[j];
    }
    if (k == 0 && input_grad.empty()) break;
    prev.assign(in, 0.0);
    for (std::size_t i = 0; i < out; ++i) {
      const double d = delta[i];
      const double* row = w + i * in;
      for (std::size_t j = 0; j < in; ++j) prev[j] += row[j] * d;
    }
    delta.swap(prev);
  }
  if (!input_grad.empty()) {
    for (std::size_t j = 0; j < input_width(); ++j) input_grad[j] = delta[j];
  }
}

Vec net_apply(const DenseNet& net, std::span<const double> input) { return net.apply(input); }

NetGradients net_gradients(const DenseNet& net, std::span<const double> input,
                           std::span<const double> upstream) {
  DenseNet::Tape tape;
  net.forward(input, tape);
  NetGradients g{Vec(net.parameter_count(), 0.0), Vec(net.input_width(), 0.0)};
  net.backward(tape, upstream, g.parameters, g.input);
  return g;
}

}  // namespace bregdistill
