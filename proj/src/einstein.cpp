// SPDX-License-Identifier: Apache-2.0
#include "hma/einstein.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hma/errors.hpp"

namespace hma {

namespace {

std::vector<Vec> nodes_of(const Grid& g) {
  std::vector<Vec> x(g.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = g.node(i);
  return x;
}

void guard(const std::vector<double>& u, double lambda) {
  if (std::abs(lambda) * oscillation(u) > 500.0) {
    throw OverflowGuard("lambda * osc(u) exceeds 500; the exponential term would overflow");
  }
}

// log sum e^{-lambda u_i} mu0_i and the weights e^{-lambda u_i} mu0_i / Z.
double log_partition(const std::vector<double>& u, const GridDensity& mu0, double lambda, std::vector<double>* q) {
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (mu0.mass[i] > 0.0) top = std::max(top, -lambda * u[i]);
  }
  double z = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) z += mu0.mass[i] * std::exp(-lambda * u[i] - top);
  if (q) {
    q->resize(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) (*q)[i] = mu0.mass[i] * std::exp(-lambda * u[i] - top) / z;
  }
  return top + std::log(z);
}

void check_problem(const EinsteinProblem& p, const Grid& grid) {
  if (p.mu0.grid.shape != grid.shape) throw DomainError("mu0 must live on the grid of phi");
  if (!std::isfinite(p.lambda)) throw DomainError("lambda must be finite");
}

double J_of(const HessianModel& model, const Grid& grid, const std::vector<double>& u, const GridDensity& nu,
            int radius) {
  LaguerreOptions o;
  o.radius = radius;
  return laguerre(model, nodes_of(grid), u, nu, o).integral;
}

}  // namespace

double ding_value(const GridSection& phi, const EinsteinProblem& problem, int radius) {
  check_problem(problem, phi.grid);
  if (problem.lambda == 0.0) return kantorovich_value(phi, problem.mu0, problem.nu, radius);
  guard(phi.u, problem.lambda);
  const double J = J_of(phi.model, phi.grid, phi.u, problem.nu, radius);
  const double J0 = J_of(phi.model, phi.grid, std::vector<double>(phi.u.size(), 0.0), problem.nu, radius);
  return J - J0 - log_partition(phi.u, problem.mu0, problem.lambda, nullptr) / problem.lambda;
}

std::vector<double> ding_gradient(const GridSection& phi, const EinsteinProblem& problem, int radius) {
  check_problem(problem, phi.grid);
  if (problem.lambda == 0.0) return kantorovich_gradient(phi, problem.mu0, problem.nu, radius);
  guard(phi.u, problem.lambda);
  LaguerreOptions o;
  o.radius = radius;
  const auto r = laguerre(phi.model, nodes_of(phi.grid), phi.u, problem.nu, o);
  std::vector<double> q;
  log_partition(phi.u, problem.mu0, problem.lambda, &q);
  std::vector<double> g(q.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = q[i] - r.mass[i];
  return g;
}

KantorovichState solve_einstein(const EinsteinProblem& problem, const SolverOptions& opts) {
  if (problem.lambda == 0.0) return solve_grid(problem.mu0, problem.nu, problem.model, opts);
  check_probability(problem.mu0, "mu0");
  check_probability(problem.nu, "nu");
  check_nu_floor(problem.nu, opts.nu_floor);
  const double lambda = problem.lambda;
  GridSection init = GridSection::zero(problem.model, problem.mu0.grid.shape);
  if (opts.seed) init.u = random_smooth(init.grid, *opts.seed, opts.init_amplitude);
  const double J0 = J_of(problem.model, init.grid, std::vector<double>(init.u.size(), 0.0), problem.nu, opts.radius);

  DescentProblem dp;
  dp.nu = problem.nu;
  dp.name = "solve_einstein";
  dp.shift = std::max(0.0, -lambda) / static_cast<double>(init.u.size());
  dp.evaluate = [&](const GridSection& phi, const LaguerreResult& r, std::vector<double>& grad, double& extra) {
    guard(phi.u, lambda);
    std::vector<double> q;
    extra = log_partition(phi.u, problem.mu0, lambda, &q);
    grad.resize(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) grad[i] = q[i] - r.mass[i];
    return r.integral - J0 - extra / lambda;
  };
  dp.normalize = [&](GridSection& phi) {
    const double c = log_partition(phi.u, problem.mu0, lambda, nullptr) / lambda;
    for (double& v : phi.u) v += c;
  };
  return projected_descent(std::move(init), dp, opts);
}

double mabuchi_value(const GridDensity& mu, const EinsteinProblem& problem, const SolverOptions& opts) {
  if (mu.grid.shape != problem.mu0.grid.shape) throw DomainError("mu and mu0 must share a grid");
  double entropy = 0.0;
  for (std::size_t i = 0; i < mu.mass.size(); ++i) {
    if (mu.mass[i] == 0.0) continue;
    if (problem.mu0.mass[i] == 0.0) throw EntropyInfinite("mu charges a cell where mu0 vanishes");
    entropy += mu.mass[i] * std::log(mu.mass[i] / problem.mu0.mass[i]);
  }
  if (problem.lambda == 0.0) return entropy;
  const auto st = solve_grid(mu, problem.nu, problem.model, opts);
  return problem.lambda * st.F_value + entropy;
}

HolderCheck holder_midpoint_check(const std::vector<double>& u0, const std::vector<double>& u1,
                                  const GridDensity& mu0, double tol) {
  HolderCheck out;
  out.t = {0.0, 0.25, 0.5, 0.75, 1.0};
  std::vector<double> w(u0.size());
  for (double t : out.t) {
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = (1.0 - t) * u0[i] + t * u1[i];
    // log sum e^{w} mu0 is log_partition at lambda = -1.
    out.values.push_back(log_partition(w, mu0, -1.0, nullptr));
  }
  const int triples[4][3] = {{0, 1, 2}, {1, 2, 3}, {2, 3, 4}, {0, 2, 4}};
  out.worst = -std::numeric_limits<double>::infinity();
  for (const auto& tr : triples) {
    out.worst = std::max(out.worst, out.values[tr[1]] - 0.5 * (out.values[tr[0]] + out.values[tr[2]]));
  }
  out.ok = out.worst <= tol;
  return out;
}

}  // namespace hma
