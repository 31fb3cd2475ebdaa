// SPDX-License-Identifier: Apache-2.0
//
// Generalized Legendre transform on grids, the pairing [x, p], the induced
// cost and the gradient map T_phi.
//
// With q = q0 + <p, .> the pairing is [x, p] = sup_g (g.q)(x) - q(x) and the
// cost is c(x, p) = -[x, p] + Phi0(x) - <p, x> + Phi0*(p), which equals
// inf over the orbit y of x of Phi0(y) + Phi0*(p) - <p, y> >= 0. On tori this is
// the periodic Q-distance squared over two between x and Q^{-1} p.
#pragma once

#include <vector>

#include "hma/geometry.hpp"
#include "hma/grid.hpp"

namespace hma {

struct PairingResult {
  double value = 0.0;
  GroupIndex word;  // attaining deck transformation
};

/// Throws TruncationSaturated when the maximizing word lies on the shell.
PairingResult pairing(const HessianModel& model, const Vec& x, const Vec& p, int radius = -1);
double cost_function(const HessianModel& model, const Vec& x, const Vec& p, int radius = -1);
/// Direct truncated minimum over the orbit of x; same value as cost_function.
double cost_direct(const HessianModel& model, const Vec& x, const Vec& p, int radius = -1);

/// (phi* - phi0*)(p) = max over nodes x_i and words of -c(x_i, p) - u_i.
double legendre_at(const GridSection& phi, const Vec& p, int radius = -1);
DualGridSection legendre_transform(const GridSection& phi, const std::vector<int>& dual_shape, int radius = -1);
/// u(x) = max over dual nodes p_j of -c(x, p_j) - w_j, sampled on the nodes of `like`.
GridSection inverse_transform(const DualGridSection& w, const GridSection& like, int radius = -1);
/// s** by two grid transforms with the dual grid shaped like the primal one.
GridSection convexify(const GridSection& s, int radius = -1);

struct GradientMapResult {
  Vec x;                 // fundamental-domain representative after refinement
  std::size_t node = 0;  // attaining grid node
  GroupIndex word;       // lift of the node attaining the max
  bool tie = false;      // several nodes attain the max (phi* not differentiable at p)
};

/// T_phi(p): argmax node (lowest flat index on ties). In 1D x is the exact
/// maximizer over the piecewise-linear interpolant; otherwise one local
/// quadratic fit per axis.
GradientMapResult gradient_map(const GridSection& phi, const Vec& p, int radius = -1);

struct VariationCheck {
  double analytic = 0.0;
  double numeric = 0.0;
};

/// -v(T_phi(p)) against ((phi + h v)*(p) - (phi - h v)*(p)) / 2h. In 1D both
/// sides use the piecewise-linear interpolants of phi and v.
VariationCheck legendre_variation_check(const GridSection& phi, const std::vector<double>& v, const Vec& p,
                                        double h, int radius = -1);

/// Largest gap of s** below s expected from the dual grid spacing alone for a
/// c-convex s: (h*)^2 / 8 times the largest curvature of phi* along the axes.
double interpolation_error_estimate(const GridSection& s);

}  // namespace hma
