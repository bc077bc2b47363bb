#include "bregdistill/verify.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include <json.hpp>

#include "bregdistill/distiller.hpp"
#include "bregdistill/errors.hpp"
#include "bregdistill/quadrature.hpp"
#include "bregdistill/score_model.hpp"

namespace bregdistill {

namespace {

using nlohmann::json;

double relative_norm_error(const Vec& value, const Vec& reference) {
  Vec diff(value.size());
  for (std::size_t i = 0; i < value.size(); ++i) diff[i] = value[i] - reference[i];
  const double scale = norm(reference);
  return scale > 0.0 ? norm(diff) / scale : norm(diff);
}

AffineGenerator with_parameter(const AffineGenerator& gen, std::size_t index, double delta) {
  Vec p = gen.parameters();
  p.at(index) += delta;
  return AffineGenerator::from_parameters(gen.dim(), p);
}

// Tensor-product Gauss-Hermite batch over (eps, xi) at a single t.
GradientBatch hermite_batch(std::size_t dim, double t, std::size_t nodes) {
  const QuadratureRule rule = hermite_rule(nodes);
  std::vector<QuadratureRule> axes(2 * dim, rule);
  const QuadratureGrid grid(std::move(axes));
  GradientBatch batch;
  batch.times.reserve(grid.size());
  grid.for_each([&](std::span<const double> point, double w) {
    batch.times.push_back(t);
    batch.eps.emplace_back(point.begin(), point.begin() + static_cast<std::ptrdiff_t>(dim));
    batch.xi.emplace_back(point.begin() + static_cast<std::ptrdiff_t>(dim), point.end());
    batch.sample_weights.push_back(w);
  });
  return batch;
}

Vec select(const Vec& full, const std::vector<std::size_t>& parameters) {
  Vec out;
  out.reserve(parameters.size());
  for (std::size_t i : parameters) out.push_back(full.at(i));
  return out;
}

}  // namespace

OracleReport make_report(std::string check, double error, double tolerance) {
  OracleReport r;
  r.check = std::move(check);
  r.error = error;
  r.tolerance = tolerance;
  r.passed = std::isfinite(error) && error <= tolerance;
  return r;
}

std::string report_to_json(const OracleReport& report) {
  json j;
  j["check"] = report.check;
  if (!report.instance.empty()) j["instance"] = report.instance;
  if (!report.teacher.empty()) j["teacher"] = report.teacher;
  if (report.t) j["t"] = *report.t;
  j["error"] = std::isfinite(report.error) ? json(report.error) : json(nullptr);
  j["tolerance"] = report.tolerance;
  j["pass"] = report.passed;
  if (!report.values.empty()) j["values"] = report.values;
  if (!report.reference.empty()) j["reference"] = report.reference;
  if (!report.detail.empty()) j["detail"] = report.detail;
  return j.dump();
}

OracleReport report_from_json(const std::string& line) {
  try {
    const json j = json::parse(line);
    OracleReport r;
    r.check = j.at("check").get<std::string>();
    r.instance = j.value("instance", "");
    r.teacher = j.value("teacher", "");
    if (j.contains("t")) r.t = j.at("t").get<double>();
    r.error = j.at("error").is_null() ? std::nan("") : j.at("error").get<double>();
    r.tolerance = j.at("tolerance").get<double>();
    r.passed = j.at("pass").get<bool>();
    if (j.contains("values")) r.values = j.at("values").get<Vec>();
    if (j.contains("reference")) r.reference = j.at("reference").get<Vec>();
    r.detail = j.value("detail", "");
    return r;
  } catch (const json::exception& e) {
    throw ArgumentError(std::string("malformed oracle report: ") + e.what());
  }
}

OracleTeacher unimodal_oracle_teacher() {
  return {"gaussian-1d", GaussianMixture::gaussian({0.8}, Matrix{{1.3 * 1.3}}),
          AffineGenerator{Matrix{{1.1}}, Vec{0.3}}, {0, 1}};
}

OracleTeacher bimodal_oracle_teacher() {
  const Matrix cov{{0.3, 0.0}, {0.0, 0.2}};
  GaussianMixture teacher({{0.6, {-1.0, 0.0}, cov}, {0.4, {1.0, 0.0}, cov}});
  return {"two-mode-2d", std::move(teacher), AffineGenerator{Matrix{{0.45, 0.0}, {0.0, 0.35}}, Vec{0.9, 0.1}},
          {0, 3, 4, 5}};
}

QuadratureGrid oracle_grid(const GaussianMixture& teacher, const AffineGenerator& gen, const DiffusionSchedule& sched,
                           double t, std::size_t nodes_per_axis) {
  const GaussianMixture densities[] = {gm_marginal(teacher, sched, t), affine_pushforward(gen, sched, t)};
  return support_grid(densities, nodes_per_axis);
}

Vec fd_divergence_gradient(const ConvexFunction& cf, const GaussianMixture& teacher, const AffineGenerator& gen,
                           const DiffusionSchedule& sched, double t, double step,
                           const std::vector<std::size_t>& parameters, const QuadratureGrid& grid, bool richardson) {
  if (!(step >= 1e-6 && step <= 1e-3)) throw ArgumentError("finite-difference step must lie in [1e-6, 1e-3]");
  const GaussianMixture p_t = gm_marginal(teacher, sched, t);
  auto value = [&](std::size_t index, double delta) {
    return divergence_to_one(cf, analytic_ratio(teacher, with_parameter(gen, index, delta), sched, t), p_t, grid, t);
  };
  Vec out;
  out.reserve(parameters.size());
  for (std::size_t index : parameters) {
    const double coarse = (value(index, step) - value(index, -step)) / (2.0 * step);
    if (!richardson) {
      out.push_back(coarse);
      continue;
    }
    const double h = 0.5 * step;
    const double fine = (value(index, h) - value(index, -h)) / (2.0 * h);
    out.push_back((4.0 * fine - coarse) / 3.0);
  }
  return out;
}

Vec quadrature_generator_gradient(const ConvexFunction& cf, const GaussianMixture& teacher,
                                  const AffineGenerator& gen, const DiffusionSchedule& sched, double t,
                                  std::size_t hermite_nodes, const std::vector<std::size_t>& parameters) {
  const GradientBatch batch = hermite_batch(gen.dim(), t, hermite_nodes);
  const GeneratorGradient g =
      generator_gradient(Generator::affine(gen), ScoreProvider::analytic_teacher(teacher, sched),
                         ScoreProvider::analytic_student(gen, sched), analytic_ratio(teacher, gen, sched, t), cf,
                         sched, batch);
  return select(g.gradient, parameters);
}

Vec quadrature_vsd_gradient(const GaussianMixture& teacher, const AffineGenerator& gen,
                            const DiffusionSchedule& sched, double t, std::size_t hermite_nodes,
                            const std::vector<std::size_t>& parameters) {
  const GradientBatch batch = hermite_batch(gen.dim(), t, hermite_nodes);
  const GeneratorGradient g = vsd_gradient(Generator::affine(gen), ScoreProvider::analytic_teacher(teacher, sched),
                                           ScoreProvider::analytic_student(gen, sched), sched, batch);
  return select(g.gradient, parameters);
}

Vec vanishing_term(const GaussianMixture& teacher, const AffineGenerator& gen, const DiffusionSchedule& sched,
                   double t, const std::vector<std::size_t>& parameters, const RatioBuilder& builder,
                   const QuadratureGrid& grid, double step) {
  const GaussianMixture p_t = gm_marginal(teacher, sched, t);
  auto integral = [&](const AffineGenerator& g) {
    const auto log_r = builder(g).at(t);
    return grid.integrate([&](std::span<const double> x) { return std::exp(p_t.log_density(x) + log_r(x)); });
  };
  Vec out;
  for (std::size_t index : parameters) {
    const double coarse = (integral(with_parameter(gen, index, step)) - integral(with_parameter(gen, index, -step))) /
                          (2.0 * step);
    const double h = 0.5 * step;
    const double fine =
        (integral(with_parameter(gen, index, h)) - integral(with_parameter(gen, index, -h))) / (2.0 * h);
    out.push_back((4.0 * fine - coarse) / 3.0);
  }
  return out;
}

RatioField unnormalized_ratio(const GaussianMixture& teacher, const AffineGenerator& gen,
                              const DiffusionSchedule& sched) {
  auto binder = [teacher, gen, sched](double t) -> RatioField::LogRatioAtTime {
    const NoiseLevel lvl = schedule_at(sched, t);
    auto p_t = std::make_shared<const GaussianMixture>(gm_marginal(teacher, lvl));
    auto q_t = std::make_shared<const GaussianMixture>(affine_pushforward(gen, lvl));
    // log N(x; m, S) + 0.5 log det S drops the determinant from the normalizer.
    const double half_log_det = 0.5 * std::log(determinant(q_t->component(0).cov));
    return [p_t, q_t, half_log_det](std::span<const double> x) {
      return q_t->log_density(x) + half_log_det - p_t->log_density(x);
    };
  };
  return RatioField(std::move(binder), RatioSource::Analytic);
}

std::vector<ConvexFunction> oracle_instances() {
  return {make_instance("LR"),       make_instance("KL"),      make_instance("BE"),      make_instance("LS"),
          make_instance("SBA", -0.5), make_instance("SBA", 0.5), make_instance("SBA", 3.0), make_instance("SBA", 5.0)};
}

OracleReport check_gradient_case(const ConvexFunction& cf, const OracleTeacher& teacher, double t,
                                 const OracleSettings& settings) {
  const std::size_t d = teacher.teacher.dim();
  const QuadratureGrid grid = oracle_grid(teacher.teacher, teacher.generator, settings.schedule, t,
                                          d == 1 ? settings.grid_nodes_1d : settings.grid_nodes_2d);
  const Vec fd = fd_divergence_gradient(cf, teacher.teacher, teacher.generator, settings.schedule, t,
                                        settings.fd_step, teacher.parameters, grid);
  const Vec g = quadrature_generator_gradient(cf, teacher.teacher, teacher.generator, settings.schedule, t,
                                              d == 1 ? settings.hermite_nodes_1d : settings.hermite_nodes_2d,
                                              teacher.parameters);
  OracleReport r = make_report("gradient", relative_norm_error(g, fd), settings.gradient_tolerance);
  r.instance = cf.label();
  r.teacher = teacher.name;
  r.t = t;
  r.values = g;
  r.reference = fd;
  return r;
}

std::vector<OracleReport> check_gradient_identity(const OracleSettings& settings) {
  std::vector<OracleReport> out;
  for (const auto& teacher : {unimodal_oracle_teacher(), bimodal_oracle_teacher()})
    for (const auto& cf : oracle_instances())
      for (double t : settings.times) out.push_back(check_gradient_case(cf, teacher, t, settings));
  return out;
}

std::vector<OracleReport> check_kl_reduction(const OracleSettings& settings) {
  std::vector<OracleReport> out;
  const ConvexFunction kl = make_instance("KL");
  for (const auto& teacher : {unimodal_oracle_teacher(), bimodal_oracle_teacher()}) {
    const std::size_t d = teacher.teacher.dim();
    const std::size_t nodes = d == 1 ? settings.hermite_nodes_1d : settings.hermite_nodes_2d;
    for (double t : settings.times) {
      const GradientBatch batch = hermite_batch(d, t, nodes);
      const Generator gen = Generator::affine(teacher.generator);
      const auto tp = ScoreProvider::analytic_teacher(teacher.teacher, settings.schedule);
      const auto sp = ScoreProvider::analytic_student(teacher.generator, settings.schedule);
      const GeneratorGradient bregman =
          generator_gradient(gen, tp, sp, analytic_ratio(teacher.teacher, teacher.generator, settings.schedule, t),
                             kl, settings.schedule, batch);
      // A ratio field far from the true one must not matter for KL.
      const GeneratorGradient other =
          generator_gradient(gen, tp, sp, mixture_ratio(pushforward(teacher.generator), teacher.teacher), kl,
                             settings.schedule, batch);
      const GeneratorGradient vsd = vsd_gradient(gen, tp, sp, settings.schedule, batch);
      std::size_t mismatches = 0;
      for (std::size_t i = 0; i < vsd.gradient.size(); ++i)
        mismatches += (bregman.gradient[i] != vsd.gradient[i]) + (other.gradient[i] != vsd.gradient[i]);
      std::size_t non_unit = 0;
      for (double w : bregman.bregman_weights) non_unit += w != 1.0;
      for (double w : other.bregman_weights) non_unit += w != 1.0;
      OracleReport r = make_report("kl_reduction", static_cast<double>(mismatches + non_unit), 0.0);
      r.instance = kl.label();
      r.teacher = teacher.name;
      r.t = t;
      r.values = bregman.gradient;
      r.reference = vsd.gradient;
      r.detail = "bitwise comparison; error counts differing components and non-unit weights";
      out.push_back(r);
    }
  }
  return out;
}

OracleReport check_vanishing_term(const OracleTeacher& teacher, double t, const OracleSettings& settings,
                                  const RatioBuilder& builder, const std::string& label) {
  const auto& sched = settings.schedule;
  const RatioBuilder b = builder ? builder : [&](const AffineGenerator& g) {
    return analytic_ratio(teacher.teacher, g, sched);
  };
  const std::size_t d = teacher.teacher.dim();
  const QuadratureGrid grid =
      oracle_grid(teacher.teacher, teacher.generator, sched, t, d == 1 ? settings.grid_nodes_1d : settings.grid_nodes_2d);
  const Vec v = vanishing_term(teacher.teacher, teacher.generator, sched, t, teacher.parameters, b, grid);
  double worst = 0.0;
  for (double x : v) worst = std::max(worst, std::abs(x));
  OracleReport r = make_report("vanishing_term", worst, settings.vanishing_tolerance);
  r.instance = label;
  r.teacher = teacher.name;
  r.t = t;
  r.values = v;
  return r;
}

std::vector<OracleReport> check_vanishing_terms(const OracleSettings& settings) {
  std::vector<OracleReport> out;
  for (const auto& teacher : {unimodal_oracle_teacher(), bimodal_oracle_teacher()})
    for (double t : settings.times) out.push_back(check_vanishing_term(teacher, t, settings));
  return out;
}

std::vector<OracleReport> check_table(const std::vector<ConvexFunction>& instances) {
  std::vector<OracleReport> out;
  for (const auto& cf : instances) {
    double worst = 0.0;
    for (double r : ratio_probe_grid()) {
      // Richardson-refined second difference of h.
      auto second = [&](double h) { return (cf.value(r + h) - 2.0 * cf.value(r) + cf.value(r - h)) / (h * h); };
      const double h = 1e-3 * r;
      const double d2 = (4.0 * second(0.5 * h) - second(h)) / 3.0;
      const double w = cf.weight(r);
      worst = std::max(worst, std::abs(d2 * r - w) / std::abs(w));
    }
    OracleReport table = make_report("table_weight", worst, 1e-4);
    table.instance = cf.label();
    table.detail = "second differences of h times r against h''(r) r on r in [0.1, 10]";
    out.push_back(table);

    double dual = 0.0;
    for (int i = 0; i <= 200; ++i) {
      const double l = -10.0 + 0.1 * i;
      const double a = cf.logit_weight(l);
      const double b = cf.weight(std::exp(-l));
      dual = std::max(dual, std::abs(a - b) / std::max(std::abs(b), 1e-300));
    }
    OracleReport duality = make_report("logit_duality", dual, 1e-10);
    duality.instance = cf.label();
    duality.detail = "relative gap of logit_weight(l) and weight(exp(-l)) on l in [-10, 10]";
    out.push_back(duality);
  }
  return out;
}

std::vector<OracleReport> check_table() {
  std::vector<ConvexFunction> rows{make_instance("LR"), make_instance("KL"), make_instance("BE"), make_instance("LS"),
                                   make_instance("SBA", 5.0)};
  auto out = check_table(rows);

  double identity = 0.0;
  const ConvexFunction sba1 = make_instance("SBA", 1.0);
  const ConvexFunction ls = make_instance("LS");
  for (double r : ratio_probe_grid()) identity = std::max(identity, std::abs(sba1.weight(r) - ls.weight(r)) / r);
  OracleReport same = make_report("sba1_equals_ls", identity, 1e-12);
  same.instance = sba1.label();
  same.detail = "weight of SBA(1) against LS on r in [0.1, 10]";
  out.push_back(same);
  return out;
}

std::vector<OracleReport> check_divergence_values() {
  std::vector<OracleReport> out;
  const GaussianMixture p = GaussianMixture::gaussian({0.0}, Matrix{{1.0}});
  const GaussianMixture q = GaussianMixture::gaussian({0.5}, Matrix{{1.0}});
  const GaussianMixture both[] = {p, q};
  const QuadratureGrid grid = support_grid(both, 4001);
  const RatioField r = mixture_ratio(q, p);
  const struct {
    const char* name;
    double expected;
  } cases[] = {{"LS", 0.5 * (std::exp(0.25) - 1.0)}, {"KL", 0.125}};
  for (const auto& c : cases) {
    const double value = divergence_to_one(make_instance(c.name), r, p, grid, 0.0);
    OracleReport rep = make_report("divergence_value", std::abs(value - c.expected), 1e-6);
    rep.instance = c.name;
    rep.teacher = "N(0,1) vs N(0.5,1)";
    rep.values = {value};
    rep.reference = {c.expected};
    out.push_back(rep);
  }
  return out;
}

std::vector<std::string> verify_check_groups() { return {"table", "divergence", "kl", "vanishing", "gradient"}; }

std::vector<OracleReport> run_verify_suite(const SuiteFilter& filter, const OracleSettings& settings,
                                           const std::function<void(const OracleReport&)>& on_report) {
  if (filter.only) {
    const auto groups = verify_check_groups();
    if (std::find(groups.begin(), groups.end(), *filter.only) == groups.end())
      throw ArgumentError("unknown check group '" + *filter.only + "'");
  }
  std::vector<OracleReport> all;
  auto run = [&](const std::string& group, const std::function<std::vector<OracleReport>()>& f) {
    if (filter.only && *filter.only != group) return;
    for (auto& r : f()) {
      if (on_report) on_report(r);
      all.push_back(std::move(r));
    }
  };
  run("table", [] { return check_table(); });
  run("divergence", [] { return check_divergence_values(); });
  run("kl", [&] { return check_kl_reduction(settings); });
  run("vanishing", [&] { return check_vanishing_terms(settings); });
  run("gradient", [&] { return check_gradient_identity(settings); });
  return all;
}

}  // namespace bregdistill
