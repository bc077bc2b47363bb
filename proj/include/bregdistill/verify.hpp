#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "bregdistill/analytic.hpp"
#include "bregdistill/bregman.hpp"
#include "bregdistill/diffusion.hpp"

namespace bregdistill {

struct OracleReport {
  std::string check;
  std::string instance;
  std::string teacher;
  std::optional<double> t;
  double error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  // Per-component values where the check has them (gradients, integrals).
  Vec values;
  Vec reference;
  std::string detail;
};

OracleReport make_report(std::string check, double error, double tolerance);
std::string report_to_json(const OracleReport& report);
OracleReport report_from_json(const std::string& line);

// A teacher with a name used in reports, plus the affine student the
// gradient oracles linearize around.
struct OracleTeacher {
  std::string name;
  GaussianMixture teacher;
  AffineGenerator generator;
  // Indices into [A row-major, b] that the oracle differentiates.
  std::vector<std::size_t> parameters;
};

OracleTeacher unimodal_oracle_teacher();  // 1D N(0.8, 1.3^2)
// 2D mixture of N((-1, 0), diag(0.3, 0.2)) and N((1, 0), same) weighted 0.6 / 0.4.
OracleTeacher bimodal_oracle_teacher();

struct OracleSettings {
  DiffusionSchedule schedule = DiffusionSchedule::variance_exploding();
  std::vector<double> times{0.1, 0.5, 1.0};
  // Divergence grid resolution per axis.
  std::size_t grid_nodes_1d = 2001;
  std::size_t grid_nodes_2d = 241;
  // Gauss-Hermite nodes per latent / noise axis.
  std::size_t hermite_nodes_1d = 64;
  std::size_t hermite_nodes_2d = 32;
  double fd_step = 1e-4;
  double gradient_tolerance = 1e-3;
  double vanishing_tolerance = 1e-6;
};

// Trapezoid grid over the union of p_t and q_t, fixed at the base generator.
QuadratureGrid oracle_grid(const GaussianMixture& teacher, const AffineGenerator& gen, const DiffusionSchedule& sched,
                           double t, std::size_t nodes_per_axis);

// Central differences of D_h(r_t || 1) over the selected parameters, with one
// Richardson step ((4 D_{h/2} - D_h) / 3). `step` must lie in [1e-6, 1e-3].
Vec fd_divergence_gradient(const ConvexFunction& cf, const GaussianMixture& teacher, const AffineGenerator& gen,
                           const DiffusionSchedule& sched, double t, double step,
                           const std::vector<std::size_t>& parameters, const QuadratureGrid& grid,
                           bool richardson = true);

// Generator gradient with analytic ratio and scores, expectation over
// (eps, xi) by tensor-product Gauss-Hermite, restricted to `parameters`.
Vec quadrature_generator_gradient(const ConvexFunction& cf, const GaussianMixture& teacher,
                                  const AffineGenerator& gen, const DiffusionSchedule& sched, double t,
                                  std::size_t hermite_nodes, const std::vector<std::size_t>& parameters);
// Same expectation through the unit-weight path.
Vec quadrature_vsd_gradient(const GaussianMixture& teacher, const AffineGenerator& gen,
                            const DiffusionSchedule& sched, double t, std::size_t hermite_nodes,
                            const std::vector<std::size_t>& parameters);

// Builds a ratio field from generator parameters; used for the vanishing term.
using RatioBuilder = std::function<RatioField(const AffineGenerator&)>;

// Per-parameter integral of p_t(x) d r_t(x) / d theta_i over the grid.
Vec vanishing_term(const GaussianMixture& teacher, const AffineGenerator& gen, const DiffusionSchedule& sched,
                   double t, const std::vector<std::size_t>& parameters, const RatioBuilder& builder,
                   const QuadratureGrid& grid, double step = 1e-5);

// A ratio whose numerator omits the Gaussian normalizing determinant, so its
// p_t-integral depends on the generator parameters.
RatioField unnormalized_ratio(const GaussianMixture& teacher, const AffineGenerator& gen,
                              const DiffusionSchedule& sched);

std::vector<ConvexFunction> oracle_instances();

std::vector<OracleReport> check_gradient_identity(const OracleSettings& settings = {});
OracleReport check_gradient_case(const ConvexFunction& cf, const OracleTeacher& teacher, double t,
                                 const OracleSettings& settings);
std::vector<OracleReport> check_kl_reduction(const OracleSettings& settings = {});
OracleReport check_vanishing_term(const OracleTeacher& teacher, double t, const OracleSettings& settings = {},
                                  const RatioBuilder& builder = {}, const std::string& label = "analytic");
std::vector<OracleReport> check_vanishing_terms(const OracleSettings& settings = {});
std::vector<OracleReport> check_table(const std::vector<ConvexFunction>& instances);
std::vector<OracleReport> check_table();
std::vector<OracleReport> check_divergence_values();

struct SuiteFilter {
  std::optional<std::string> only;  // gradient | vanishing | table | kl | divergence
};

std::vector<OracleReport> run_verify_suite(const SuiteFilter& filter = {}, const OracleSettings& settings = {},
                                           const std::function<void(const OracleReport&)>& on_report = {});

std::vector<std::string> verify_check_groups();

}  // namespace bregdistill
