// SPDX-License-Identifier: Apache-2.0
//
// Cell-centered periodic grids over a box and the grid sections built on them.
#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "hma/geometry.hpp"

namespace hma {

/// Cell-centered grid: node_i = lo + (i + 1/2) h along each axis, row-major
/// with the last axis fastest. A geometric grid places node_i at
/// lo (hi/lo)^((i + 1/2)/m) instead, so that the dilation hi/lo maps the grid
/// onto itself.
struct Grid {
  Box box;
  std::vector<int> shape;
  bool geometric = false;

  static Grid over(const Box& box, std::vector<int> shape, bool geometric = false);

  int dim() const { return static_cast<int>(shape.size()); }
  std::size_t size() const;
  /// Uniform spacing, or the mean spacing of a geometric axis.
  double spacing(int axis) const { return (box.hi[axis] - box.lo[axis]) / shape[axis]; }
  /// Position at fractional index t along an axis (t = i + 1/2 is node i).
  double coord(int axis, double t) const;
  /// Fractional index of a position, inverse of coord.
  double index_of(int axis, double x) const;
  double cell_volume(std::size_t flat) const;
  Vec node(std::size_t flat) const;
  Box cell(std::size_t flat) const;
  std::vector<int> unravel(std::size_t flat) const;
  std::size_t ravel(const std::vector<int>& index) const;
  /// Periodic neighbor along one axis.
  std::size_t neighbor(std::size_t flat, int axis, int step) const;
  /// Cell containing x (x taken modulo the box).
  std::size_t locate(const Vec& x) const;
};

Grid primal_grid(const HessianModel& model, std::vector<int> shape);
Grid dual_grid(const DualModel& dual, std::vector<int> shape);

/// phi = phi0 + u with u sampled at the nodes of a grid over the fundamental
/// domain. Off-grid evaluation reduces to the fundamental domain and
/// interpolates multilinearly, so periodicity is structural.
struct GridSection {
  HessianModel model;
  Grid grid;
  std::vector<double> u;

  static GridSection zero(const HessianModel& model, std::vector<int> shape);
  static GridSection sample(const HessianModel& model, std::vector<int> shape,
                            const std::function<double(const Vec&)>& f);

  double evaluate(const Vec& x) const;
  double osc() const;
};

/// w = phi* - phi0* sampled on a grid over the dual chart.
struct DualGridSection {
  DualModel dual;
  Grid grid;
  std::vector<double> w;

  Vec slope(std::size_t flat) const { return dual.to_slope(grid.node(flat)); }
};

double oscillation(const std::vector<double>& v);
double sup_norm(const std::vector<double>& v);
/// sup |a - b - c| minimized over constants c.
double sup_distance_mod_constants(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace hma
