#include "bregdistill/generator.hpp"

#include "bregdistill/errors.hpp"

namespace bregdistill {

Generator::Generator(GeneratorKind kind, DenseNet net) : kind_(kind), net_(std::move(net)) {
  if (net_.input_width() != net_.output_width())
    throw ShapeError("generator must map a latent to a sample of the same dimension");
}

Generator Generator::affine(const AffineGenerator& gen) {
  const std::size_t d = gen.dim();
  if (gen.a.rows() != d || gen.a.cols() != d) throw ShapeError("affine generator matrix must be square");
  return Generator(GeneratorKind::Affine, DenseNet::from_parameters({d, d}, Activation::Identity, gen.parameters()));
}

Generator Generator::mlp(std::size_t dim, std::vector<std::size_t> hidden, Rng& rng, Activation activation) {
  if (hidden.empty()) throw ArgumentError("an MLP generator needs at least one hidden layer");
  std::vector<std::size_t> widths{dim};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(dim);
  return Generator(GeneratorKind::Mlp, DenseNet(widths, activation, rng));
}

Generator Generator::from_net(DenseNet net) {
  const GeneratorKind kind = net.layer_count() == 1 ? GeneratorKind::Affine : GeneratorKind::Mlp;
  return Generator(kind, std::move(net));
}

Vec Generator::apply(std::span<const double> eps) const {
  if (eps.size() != dim()) throw ShapeError("generator latent has wrong dimension");
  return net_.apply(eps);
}

void Generator::pullback(std::span<const double> eps, std::span<const double> upstream,
                         std::span<double> grad) const {
  if (grad.size() != net_.parameter_count()) throw ShapeError("generator gradient buffer has wrong size");
  DenseNet::Tape tape;
  net_.forward(eps, tape);
  net_.backward(tape, upstream, grad);
}

AffineGenerator Generator::as_affine() const {
  if (kind_ != GeneratorKind::Affine) throw ArgumentError("generator is not affine");
  return AffineGenerator::from_parameters(dim(), net_.parameters());
}

std::vector<Vec> Generator::sample(Rng& rng, std::size_t n) const {
  if (n < 1) throw ArgumentError("sample count must be at least 1");
  std::vector<Vec> out;
  out.reserve(n);
  Vec eps(dim());
  for (std::size_t i = 0; i < n; ++i) {
    for (double& e : eps) e = rng.normal();
    out.push_back(net_.apply(eps));
  }
  return out;
}

std::string_view generator_kind_name(GeneratorKind kind) {
  return kind == GeneratorKind::Affine ? "affine" : "mlp";
}

}  // namespace bregdistill
