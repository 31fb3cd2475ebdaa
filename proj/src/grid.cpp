// SPDX-License-Identifier: Apache-2.0
#include "hma/grid.hpp"

#include <algorithm>
#include <cmath>

#include "hma/errors.hpp"

namespace hma {

namespace {

int wrap(int i, int n) {
  const int r = i % n;
  return r < 0 ? r + n : r;
}

}  // namespace

Grid Grid::over(const Box& box, std::vector<int> shape, bool geometric) {
  if (static_cast<int>(shape.size()) != box.dim()) throw DomainError("Grid: shape rank differs from box dimension");
  for (int n : shape) {
    if (n < 1) throw DomainError("Grid: every axis needs at least one cell");
  }
  if (geometric && !(box.lo.minCoeff() > 0.0)) throw DomainError("Grid: geometric axes need a positive box");
  return Grid{box, std::move(shape), geometric};
}

double Grid::coord(int axis, double t) const {
  const double lo = box.lo[axis], hi = box.hi[axis];
  if (geometric) return lo * std::pow(hi / lo, t / shape[axis]);
  return lo + t * (hi - lo) / shape[axis];
}

double Grid::index_of(int axis, double x) const {
  const double lo = box.lo[axis], hi = box.hi[axis];
  if (geometric) return shape[axis] * std::log(x / lo) / std::log(hi / lo);
  return (x - lo) / (hi - lo) * shape[axis];
}

std::size_t Grid::size() const {
  std::size_t n = 1;
  for (int s : shape) n *= static_cast<std::size_t>(s);
  return n;
}

double Grid::cell_volume(std::size_t flat) const {
  const Box c = cell(flat);
  double v = 1.0;
  for (int k = 0; k < dim(); ++k) v *= c.hi[k] - c.lo[k];
  return v;
}

std::vector<int> Grid::unravel(std::size_t flat) const {
  std::vector<int> idx(shape.size());
  for (int k = dim() - 1; k >= 0; --k) {
    idx[k] = static_cast<int>(flat % shape[k]);
    flat /= shape[k];
  }
  return idx;
}

std::size_t Grid::ravel(const std::vector<int>& index) const {
  std::size_t flat = 0;
  for (int k = 0; k < dim(); ++k) flat = flat * shape[k] + static_cast<std::size_t>(wrap(index[k], shape[k]));
  return flat;
}

Vec Grid::node(std::size_t flat) const {
  const auto idx = unravel(flat);
  Vec x(dim());
  for (int k = 0; k < dim(); ++k) x[k] = coord(k, idx[k] + 0.5);
  return x;
}

Box Grid::cell(std::size_t flat) const {
  const auto idx = unravel(flat);
  Box b{Vec(dim()), Vec(dim())};
  for (int k = 0; k < dim(); ++k) {
    b.lo[k] = coord(k, idx[k]);
    b.hi[k] = coord(k, idx[k] + 1);
  }
  return b;
}

std::size_t Grid::neighbor(std::size_t flat, int axis, int step) const {
  auto idx = unravel(flat);
  idx[axis] += step;
  return ravel(idx);
}

std::size_t Grid::locate(const Vec& x) const {
  std::vector<int> idx(dim());
  for (int k = 0; k < dim(); ++k) {
    idx[k] = wrap(static_cast<int>(std::floor(index_of(k, x[k]))), shape[k]);
  }
  return ravel(idx);
}

Grid primal_grid(const HessianModel& model, std::vector<int> shape) {
  return Grid::over(model.fundamental_domain(), std::move(shape), !model.is_quadratic());
}

Grid dual_grid(const DualModel& dual, std::vector<int> shape) { return Grid::over(dual.chart(), std::move(shape)); }

GridSection GridSection::zero(const HessianModel& model, std::vector<int> shape) {
  Grid g = primal_grid(model, std::move(shape));
  std::vector<double> u(g.size(), 0.0);
  return GridSection{model, std::move(g), std::move(u)};
}

GridSection GridSection::sample(const HessianModel& model, std::vector<int> shape,
                                const std::function<double(const Vec&)>& f) {
  GridSection s = zero(model, std::move(shape));
  for (std::size_t i = 0; i < s.u.size(); ++i) s.u[i] = f(s.grid.node(i));
  return s;
}

double GridSection::evaluate(const Vec& x) const {
  const Vec rep = model.reduce_exponents(x).first;
  const int n = grid.dim();
  // Per axis: the two bracketing node indices (periodic) and the weight of the
  // upper one. Across the wrap the bracketing nodes are images under the
  // generator, which on the log barrier is a dilation.
  std::vector<int> lower(n), upper(n);
  std::vector<double> weight(n);
  for (int k = 0; k < n; ++k) {
    const int m = grid.shape[k];
    const double lo = grid.box.lo[k], hi = grid.box.hi[k];
    const double t = grid.index_of(k, rep[k]) - 0.5;
    int i0 = static_cast<int>(std::floor(t));
    double a, b;  // positions of the bracketing nodes
    if (i0 < 0) {
      i0 = -1;
      b = grid.coord(k, 0.5);
      const double last = grid.coord(k, m - 0.5);
      a = model.is_quadratic() ? last - (hi - lo) : last / (hi / lo);
    } else if (i0 >= m - 1) {
      i0 = m - 1;
      a = grid.coord(k, m - 0.5);
      const double first = grid.coord(k, 0.5);
      b = model.is_quadratic() ? first + (hi - lo) : first * (hi / lo);
    } else {
      a = grid.coord(k, i0 + 0.5);
      b = grid.coord(k, i0 + 1.5);
    }
    lower[k] = wrap(i0, m);
    upper[k] = wrap(i0 + 1, m);
    weight[k] = std::clamp((rep[k] - a) / (b - a), 0.0, 1.0);
  }
  double value = 0.0;
  std::vector<int> idx(n);
  for (int corner = 0; corner < (1 << n); ++corner) {
    double w = 1.0;
    for (int k = 0; k < n; ++k) {
      const bool up = (corner >> k) & 1;
      idx[k] = up ? upper[k] : lower[k];
      w *= up ? weight[k] : 1.0 - weight[k];
    }
    if (w != 0.0) value += w * u[grid.ravel(idx)];
  }
  return value;
}

double GridSection::osc() const { return oscillation(u); }

double oscillation(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *hi - *lo;
}

double sup_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s = std::max(s, std::abs(x));
  return s;
}

double sup_distance_mod_constants(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw DomainError("sup_distance_mod_constants: size mismatch");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return 0.5 * oscillation(d);
}

}  // namespace hma
