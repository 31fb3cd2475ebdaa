// SPDX-License-Identifier: Apache-2.0
//
// Quasi-periodic tilings of the universal cover from semi-discrete solutions,
// and piecewise-affine approximation of grid sections.
//
// A branch (i, w) of a PiecewiseAffineSection is the affine function of the
// slope p given by the lifted atom y = w x_i (see laguerre.hpp). Its cell is
// the set of x in Omega such that the branch attains the envelope at
// p = dPhi0(x). On tori this is the periodic power diagram of the lifted
// atoms in the Q-metric; cell volumes equal the nu-masses of the Laguerre
// cells when nu is uniform.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hma/laguerre.hpp"
#include "hma/solver.hpp"

namespace hma {

struct PaValue {
  double value = 0.0;     // E(dPhi0(x)) - Phi0*(dPhi0(x)) + Phi0(x)
  double relative = 0.0;  // value - Phi0(x) = max_{i,w} -D(w x_i, x) - psi_i
  int atom = -1;
  GroupIndex word;
  bool tie = false;
};

/// Exact finite max over atoms and words within the truncation radius around
/// the lift of x. Ties (relative gap below 1e-12) are flagged.
PaValue pa_evaluate(const PiecewiseAffineSection& pa, const Vec& x);

/// Row a . x <= b. For n = 1 on a non-quadratic model the rows are the
/// interval endpoints in x.
struct HalfSpace {
  Vec a;
  double b = 0.0;
  BranchLabel other;  // competing branch, site -1 for the window
};

struct TilingCell {
  int atom = -1;
  GroupIndex word;
  std::vector<HalfSpace> h;  // facets only
  std::vector<Vec> v;        // counter-clockwise in 2D, [lo, hi] in 1D
  double volume = 0.0;
};

struct Tiling {
  Box window;
  std::vector<TilingCell> cells;

  double total_volume() const;
  /// Index of the cell containing x, -1 if none.
  int locate(const Vec& x, double tol = 1e-12) const;
};

/// Cells of every branch active in the window, each clipped to the window.
/// Throws TruncationSaturated when a branch on the truncation shell bounds an
/// active cell, UnsupportedDimension for n >= 3 (use cell_halfspaces).
Tiling extract_tiling(const PiecewiseAffineSection& pa, const Box& window);

/// Unreduced H-representation of the cell of branch (atom, word) against all
/// competitors within the truncation radius. Quadratic models, any n.
std::vector<HalfSpace> cell_halfspaces(const PiecewiseAffineSection& pa, int atom, const GroupIndex& word);

std::string tiling_json(const Tiling& t, const PiecewiseAffineSection& pa);
/// 2D only.
std::string tiling_svg(const Tiling& t, const PiecewiseAffineSection& pa);

/// u = Phi - Phi0 of the primal piecewise-affine section at the grid nodes.
GridSection pa_to_grid(const PiecewiseAffineSection& pa, const std::vector<int>& shape, const GridDensity& nu);

struct PaApproxOptions {
  std::optional<GridDensity> nu;  // default: uniform in the dual slope coordinate
  std::uint64_t seed = 0;
  int kmeans_iters = 200;
  SemidiscreteOptions semidiscrete;
};

struct PaApproximation {
  PiecewiseAffineSection pa;
  AtomicMeasure mu;
  std::vector<double> u_pa;  // at the nodes of phi.grid
  double error = 0.0;        // osc(u_pa - u) / 2
};

/// Quantizes ma_nu(phi) to N atoms by seeded mass-weighted k-means in the grid
/// chart (periodic), then solves the semi-discrete problem.
PaApproximation pa_approximate(const GridSection& phi, int n_atoms, const PaApproxOptions& opts = {});

/// Mass-weighted periodic k-means on the nodes of a grid density. Returns
/// fundamental-domain centers with their cluster masses; empty clusters are
/// dropped.
AtomicMeasure quantize(const GridDensity& mu, const HessianModel& model, int n_atoms, std::uint64_t seed,
                       int iters = 200);

}  // namespace hma
