// SPDX-License-Identifier: Apache-2.0
//
// Ding and Mabuchi functionals for ma_nu(phi) = e^{-lambda (phi - phi0)} mu0.
//
// On a grid, with node masses mu0 and Z(u) = sum_i e^{-lambda u_i} mu0_i,
//   D(u) = J(u) - J(0) - log Z(u) / lambda,
//   dD/du_i = -mass_i + e^{-lambda u_i} mu0_i / Z.
// lambda = 0 is the Kantorovich functional with mu = mu0.
#pragma once

#include <vector>

#include "hma/solver.hpp"

namespace hma {

struct EinsteinProblem {
  HessianModel model;
  GridDensity nu;   // on the dual chart, full support
  GridDensity mu0;  // on the primal grid
  double lambda = -1.0;
};

double ding_value(const GridSection& phi, const EinsteinProblem& problem, int radius = -1);
std::vector<double> ding_gradient(const GridSection& phi, const EinsteinProblem& problem, int radius = -1);

/// Normalized so that sum e^{-lambda u} mu0 = 1 (lambda != 0).
KantorovichState solve_einstein(const EinsteinProblem& problem, const SolverOptions& opts = {});

/// lambda inf F_{mu, nu} + sum mu log(mu / mu0), with 0 log 0 = 0.
double mabuchi_value(const GridDensity& mu, const EinsteinProblem& problem, const SolverOptions& opts = {});

struct HolderCheck {
  std::vector<double> t;
  std::vector<double> values;
  double worst = 0.0;  // largest f(mid) - (f(a) + f(b)) / 2 over the sampled triples
  bool ok = true;
};

/// Midpoint convexity of t -> log sum e^{(1 - t) u0 + t u1} mu0 at t in {0, 1/4, 1/2, 3/4, 1}.
HolderCheck holder_midpoint_check(const std::vector<double>& u0, const std::vector<double>& u1,
                                  const GridDensity& mu0, double tol = 1e-12);

}  // namespace hma
