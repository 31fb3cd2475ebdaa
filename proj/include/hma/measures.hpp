// SPDX-License-Identifier: Apache-2.0
//
// Probability measures on M (atomic or grid densities over the fundamental
// domain) and on M* (grid densities over the dual chart), plus the
// nu-Monge-Ampere operator ma_nu(phi) = (T_phi)_* nu.
#pragma once

#include <string>
#include <vector>

#include "hma/geometry.hpp"
#include "hma/grid.hpp"

namespace hma {

struct AtomicMeasure {
  std::vector<Vec> points;  // fundamental-domain representatives
  std::vector<double> weights;

  std::size_t size() const { return points.size(); }
  double min_weight() const;
};

/// Reduces the points to the fundamental domain, merges atoms closer than
/// merge_tol (summing weights) and checks positivity and unit total mass.
AtomicMeasure make_atomic(const HessianModel& model, const std::vector<Vec>& points,
                          const std::vector<double>& weights, double merge_tol = 1e-9);

/// Piecewise-constant density given by its cell masses. On the dual chart the
/// density is constant in the slope coordinate p within each chart cell.
struct GridDensity {
  Grid grid;
  std::vector<double> mass;

  double total() const;
  double density(std::size_t i) const { return mass[i] / grid.cell_volume(i); }
  bool is_uniform(double rel_tol = 1e-14) const;
};

/// Throws DomainError unless masses are nonnegative and sum to 1 within tol.
void check_probability(const GridDensity& d, const std::string& what, double tol = 1e-10);

GridDensity uniform_density(const Grid& grid);
/// Cell integrals of 1 + amplitude cos(2 pi frequency (x_axis - lo) / period),
/// normalized; exact per cell.
GridDensity cosine_density(const Grid& grid, double amplitude, int axis = 0, int frequency = 1);
/// Periodized Gaussian, 4-point Gauss-Legendre per axis in every cell.
GridDensity gaussian_density(const Grid& grid, const Vec& center, double sigma);
/// Normalizes raw nonnegative cell masses.
GridDensity density_from_masses(const Grid& grid, std::vector<double> mass);
/// Uniform in the slope coordinate p (Lebesgue on Omega*), on the dual chart.
GridDensity slope_uniform_density(const DualModel& dual, const Grid& grid);

/// Exact pushforward of nu under the gradient map of phi: the nu-mass of the
/// Laguerre cell of each node, returned on the primal grid of phi.
GridDensity ma_measure(const GridSection& phi, const GridDensity& nu, int radius = -1);
/// Histogram variant: bins the nu-mass of each dual cell at T_phi(dual node).
GridDensity ma_measure_binned(const GridSection& phi, const GridDensity& nu, int radius = -1);

struct PiecewiseAffineSection;
/// nu-measure of the dual cell where atom i attains the max.
double mass_of_cell(const PiecewiseAffineSection& pa, int atom, const GridDensity& nu);
std::vector<double> cell_masses(const PiecewiseAffineSection& pa, const GridDensity& nu);

/// Periodic 1D W1 between two cell histograms of width h (each cell's mass
/// spread uniformly), exact: min over c of int |F1 - F2 - c|.
double wasserstein1_periodic(const std::vector<double>& a, const std::vector<double>& b, double h);
/// Exact in 1D; in 2D an axis-sweep transshipment upper bound.
double wasserstein1_grid(const GridDensity& a, const GridDensity& b);

}  // namespace hma
