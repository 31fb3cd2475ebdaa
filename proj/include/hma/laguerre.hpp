// SPDX-License-Identifier: Apache-2.0
//
// Exact Laguerre-cell integration on the dual manifold.
//
// A set of sites x_i in the fundamental domain with potentials psi_i defines
// the branches l_{i,g}(p) = <p, g x_i> - Phi0(g x_i) - psi_i, one per deck
// transformation g. Their upper envelope E(p) = max l equals phi*(p) for the
// section whose c-transform data is (x_i, psi_i), and the cells of the
// envelope are the Laguerre (power) cells. Integrating nu over the cells
// gives the Monge-Ampere masses, the Kantorovich term J = int E dnu and the
// mass derivatives used by Newton.
//
// n = 1 works for every catalog model through a sorted upper envelope. n = 2
// is available for tori, where in chart coordinates s = Q^{-1} p the cells
// form a periodic power diagram in the Q-metric; cells are clipped half-plane
// by half-plane with neighbors found in a periodic bucket grid.
#pragma once

#include <Eigen/Sparse>

#include <vector>

#include "hma/geometry.hpp"
#include "hma/measures.hpp"

namespace hma {

struct BranchLabel {
  int site = -1;  // -1: not a branch (window or start-box edge)
  GroupIndex word;
};

struct LaguerreOptions {
  int radius = -1;  // -1: model default
  bool couplings = false;
  bool vertices = false;
  bool cells = false;
};

/// Envelope vertex in slope coordinates with E(p).
struct EnvelopeVertex {
  Vec p;
  double value = 0.0;
  int site = -1;
};

/// 2D: cell of branch (site, identity) in chart coordinates. Edge k runs from
/// polygon[k] to polygon[k+1] and separates the cell from edge_label[k].
struct LaguerreCell {
  int site = -1;
  std::vector<Vec> polygon;
  std::vector<BranchLabel> edge_label;
};

/// 1D: maximal interval [from, to] of slopes on which one branch is active.
struct EnvelopePiece {
  BranchLabel branch;
  double from = 0.0;
  double to = 0.0;
};

struct LaguerreResult {
  std::vector<double> mass;  // nu-mass per site (all lifts)
  double integral = 0.0;     // int_D E dnu
  /// (i, j, d mass_i / d psi_j) for i != j; duplicates are to be summed.
  std::vector<Eigen::Triplet<double>> couplings;
  std::vector<EnvelopeVertex> vertices;
  bool translate_vertices = false;  // 2D: vertices are given for identity cells only
  std::vector<LaguerreCell> cells;
  std::vector<EnvelopePiece> pieces;

  std::vector<int> empty_sites() const;
};

LaguerreResult laguerre(const HessianModel& model, const std::vector<Vec>& sites, const std::vector<double>& psi,
                        const GridDensity& nu, const LaguerreOptions& opts = {});

/// Phi^{cc}(x) = sup_p <p, x> - E(p), evaluated over the envelope vertices.
/// Requires opts.vertices. x must lie in the fundamental domain.
double envelope_conjugate(const HessianModel& model, const LaguerreResult& r, const Vec& x);

/// Sparse matrix of -d mass / d psi (a weighted graph Laplacian).
Eigen::SparseMatrix<double> mass_jacobian(const LaguerreResult& r, int n_sites);

/// Finite data (x_i, psi_i) of a piecewise affine section: phi* - phi0* is the
/// max over i and deck transformations g of -D(g x_i, T(p)) - psi_i, with D the
/// Bregman divergence of Phi0, and phi = (phi*)*.
struct PiecewiseAffineSection {
  HessianModel model;
  std::vector<Vec> atoms;
  std::vector<double> potentials;
  int radius = -1;
};

}  // namespace hma
