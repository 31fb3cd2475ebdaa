// SPDX-License-Identifier: Apache-2.0
//
// Affine Kantorovich functional and the two Monge-Ampere solvers.
//
// For a grid section phi = phi0 + u with node masses mu,
//   F(u) = sum_i mu_i u_i + J(u) - J(0),   J(u) = int phi* dnu,
// where phi* is the envelope of the node branches (see laguerre.hpp), so the
// second term is the discrete int (phi* - phi0*) dnu. dF/du_i = mu_i - mass_i.
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "hma/grid.hpp"
#include "hma/laguerre.hpp"
#include "hma/measures.hpp"

namespace hma {

enum class Normalization { MeanZeroAgainstMu, SupZero };

struct ConvergenceRecord {
  int iteration = 0;
  double value = 0.0;     // F, or D for Einstein solves
  double residual = 0.0;  // sup of the gradient density
  double step = 0.0;
  double extra = 0.0;     // Einstein: log sum e^{-lambda u} mu0
  double osc = 0.0;
  bool c0_ok = true;
  bool lipschitz_ok = true;
};

struct KantorovichState {
  GridSection phi;
  double F_value = 0.0;
  double grad_norm = 0.0;
  int iteration = 0;
  Normalization normalization = Normalization::MeanZeroAgainstMu;
  bool converged = false;
  bool estimates_ok = true;  // every accepted iterate passed check_c0 and lipschitz_bound_check
  std::vector<ConvergenceRecord> log;
};

struct SolverOptions {
  double tol = 1e-5;
  int max_iters = 500;
  int radius = -1;
  double nu_floor = 1e-12;  // lower bound on nu density relative to its mean
  /// Random smooth initial u of this amplitude when set; u = 0 otherwise.
  std::optional<std::uint64_t> seed;
  double init_amplitude = 0.02;
  std::function<void(const ConvergenceRecord&)> on_iterate;
};

double kantorovich_value(const GridSection& phi, const GridDensity& mu, const GridDensity& nu, int radius = -1);
/// mu - ma_nu(phi) as node masses; the Gateaux derivative is sum_i v_i g_i.
std::vector<double> kantorovich_gradient(const GridSection& phi, const GridDensity& mu, const GridDensity& nu,
                                         int radius = -1);

/// Mass vector divided by cell volume fraction, i.e. a density on M.
double residual_density(const Grid& grid, const std::vector<double>& g);

/// Node values of the c-convex envelope of u: nodes whose Laguerre cell is
/// empty are lowered to touch the envelope of the others.
std::vector<double> project_node_convex(const GridSection& phi, const GridDensity& nu, int radius = -1);

/// Smooth random u with a few Fourier modes per axis, seeded.
std::vector<double> random_smooth(const Grid& grid, std::uint64_t seed, double amplitude);

KantorovichState solve_grid(const GridDensity& mu, const GridDensity& nu, const HessianModel& model,
                            const SolverOptions& opts = {});

struct SemidiscreteOptions {
  double tol = 1e-10;  // on |mass_i - lambda_i| / lambda_min, floored at 64 eps absolute
  int max_iters = 200;
  int radius = -1;
  double nu_floor = 1e-12;
  std::function<void(const ConvergenceRecord&)> on_iterate;
};

struct SemidiscreteResult {
  PiecewiseAffineSection pa;
  std::vector<double> mass;
  double residual = 0.0;
  double F_value = 0.0;
  int iterations = 0;
  std::vector<ConvergenceRecord> log;
};

SemidiscreteResult solve_semidiscrete(const AtomicMeasure& mu, const GridDensity& nu, const HessianModel& model,
                                      const SemidiscreteOptions& opts = {});

/// sup over segments [x0, x1] of the doubled fundamental box K of
/// int_0^1 (1 - t) <x1 - x0, Hess Phi0 (x1 - x0)> dt.
double c0_bound(const HessianModel& model);
bool check_c0(const GridSection& phi);

struct LipschitzCheck {
  double constant = 0.0;  // largest neighbor difference quotient of u
  double bound = 0.0;
  bool ok = true;
};

/// For convex Phi = Phi0 + u and r > 0 with x +- r e in Omega,
///   |du(x; e)| <= (osc u + sup [Phi0(x + r e) - 2 Phi0(x) + Phi0(x - r e)]) / r.
LipschitzCheck lipschitz_bound_check(const GridSection& phi);

/// Throws NuDegenerate when some dual cell carries less than floor times the mean mass.
void check_nu_floor(const GridDensity& nu, double floor);

/// Projected preconditioned descent shared by the grid solvers. `evaluate`
/// returns the objective and its node gradient (a mass vector) for a c-convex
/// u, given the Laguerre result of u; `normalize` fixes the additive constant;
/// `shift` adds a diagonal term to the Laplacian preconditioner.
struct DescentProblem {
  std::function<double(const GridSection&, const LaguerreResult&, std::vector<double>& grad, double& extra)> evaluate;
  std::function<void(GridSection&)> normalize;
  GridDensity nu;
  double shift = 0.0;
  const char* name = "solve_grid";
};

KantorovichState projected_descent(GridSection init, const DescentProblem& problem, const SolverOptions& opts);

}  // namespace hma
