// SPDX-License-Identifier: Apache-2.0
#include "hma/measures.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "hma/errors.hpp"
#include "hma/laguerre.hpp"
#include "hma/legendre.hpp"

namespace hma {

double AtomicMeasure::min_weight() const { return *std::min_element(weights.begin(), weights.end()); }

AtomicMeasure make_atomic(const HessianModel& model, const std::vector<Vec>& points,
                          const std::vector<double>& weights, double merge_tol) {
  if (points.empty() || points.size() != weights.size()) {
    throw DomainError("make_atomic: need one positive weight per point");
  }
  AtomicMeasure out;
  double total = 0.0;
  for (std::size_t k = 0; k < points.size(); ++k) {
    if (!(weights[k] > 0.0)) throw DomainError("make_atomic: weights must be positive");
    const Vec rep = model.reduce_exponents(points[k]).first;
    bool merged = false;
    for (std::size_t j = 0; j < out.points.size(); ++j) {
      if ((out.points[j] - rep).cwiseAbs().maxCoeff() <= merge_tol) {
        out.weights[j] += weights[k];
        merged = true;
        break;
      }
    }
    if (!merged) {
      out.points.push_back(rep);
      out.weights.push_back(weights[k]);
    }
    total += weights[k];
  }
  if (std::abs(total - 1.0) > 1e-12) throw DomainError("make_atomic: weights must sum to 1");
  return out;
}

double GridDensity::total() const {
  double t = 0.0;
  for (double m : mass) t += m;
  return t;
}

bool GridDensity::is_uniform(double rel_tol) const {
  const auto [lo, hi] = std::minmax_element(mass.begin(), mass.end());
  return *hi - *lo <= rel_tol * std::abs(*hi);
}

void check_probability(const GridDensity& d, const std::string& what, double tol) {
  if (d.mass.size() != d.grid.size()) throw DomainError(what + ": mass array does not match its grid");
  for (double m : d.mass) {
    if (!(m >= 0.0) || !std::isfinite(m)) throw DomainError(what + ": masses must be finite and nonnegative");
  }
  if (std::abs(d.total() - 1.0) > tol) throw DomainError(what + ": total mass differs from 1");
}

GridDensity uniform_density(const Grid& grid) {
  return GridDensity{grid, std::vector<double>(grid.size(), 1.0 / static_cast<double>(grid.size()))};
}

GridDensity density_from_masses(const Grid& grid, std::vector<double> mass) {
  if (mass.size() != grid.size()) throw DomainError("density_from_masses: size mismatch");
  double total = 0.0;
  for (double m : mass) {
    if (!(m >= 0.0) || !std::isfinite(m)) throw DomainError("density_from_masses: masses must be nonnegative");
    total += m;
  }
  if (!(total > 0.0)) throw DomainError("density_from_masses: zero total mass");
  for (double& m : mass) m /= total;
  return GridDensity{grid, std::move(mass)};
}

GridDensity cosine_density(const Grid& grid, double amplitude, int axis, int frequency) {
  if (std::abs(amplitude) >= 1.0) throw DomainError("cosine_density: |amplitude| must be below 1");
  const double lo = grid.box.lo[axis];
  const double L = grid.box.hi[axis] - lo;
  const double h = grid.spacing(axis);
  const double k = 2.0 * std::numbers::pi * frequency / L;
  std::vector<double> mass(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const int j = grid.unravel(i)[axis];
    const double a = j * h, b = (j + 1) * h;
    mass[i] = h + amplitude * (std::sin(k * b) - std::sin(k * a)) / k;
  }
  return density_from_masses(grid, std::move(mass));
}

GridDensity gaussian_density(const Grid& grid, const Vec& center, double sigma) {
  if (!(sigma > 0.0)) throw DomainError("gaussian_density: sigma must be positive");
  static const double gx[4] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563, 0.8611363115940526};
  static const double gw[4] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461, 0.3478548451374538};
  const int n = grid.dim();
  const Vec L = grid.box.extent();
  std::vector<double> mass(grid.size(), 0.0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Box c = grid.cell(i);
    const int total = 1 << (2 * n);
    for (int q = 0; q < total; ++q) {
      Vec x(n);
      double w = 1.0;
      for (int k = 0; k < n; ++k) {
        const int g = (q >> (2 * k)) & 3;
        const double half = 0.5 * (c.hi[k] - c.lo[k]);
        x[k] = c.lo[k] + half * (1.0 + gx[g]);
        w *= gw[g] * half;
      }
      double v = 0.0;
      for (int img = 0; img < static_cast<int>(std::pow(3, n)); ++img) {
        double r2 = 0.0;
        int code = img;
        for (int k = 0; k < n; ++k) {
          const double d = x[k] - center[k] + ((code % 3) - 1) * L[k];
          code /= 3;
          r2 += d * d;
        }
        v += std::exp(-0.5 * r2 / (sigma * sigma));
      }
      mass[i] += w * v;
    }
  }
  return density_from_masses(grid, std::move(mass));
}

GridDensity slope_uniform_density(const DualModel& dual, const Grid& grid) {
  if (dual.linear_chart()) return uniform_density(grid);
  std::vector<double> mass(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Box c = grid.cell(i);
    mass[i] = std::abs(dual.to_slope(c.hi)[0] - dual.to_slope(c.lo)[0]);
  }
  return density_from_masses(grid, std::move(mass));
}

GridDensity ma_measure(const GridSection& phi, const GridDensity& nu, int radius) {
  std::vector<Vec> sites(phi.grid.size());
  for (std::size_t i = 0; i < sites.size(); ++i) sites[i] = phi.grid.node(i);
  LaguerreOptions opts;
  opts.radius = radius;
  const auto r = laguerre(phi.model, sites, phi.u, nu, opts);
  return GridDensity{phi.grid, r.mass};
}

GridDensity ma_measure_binned(const GridSection& phi, const GridDensity& nu, int radius) {
  std::vector<double> mass(phi.grid.size(), 0.0);
  const DualModel dual = phi.model.dual();
  for (std::size_t j = 0; j < nu.grid.size(); ++j) {
    if (nu.mass[j] == 0.0) continue;
    const auto t = gradient_map(phi, dual.to_slope(nu.grid.node(j)), radius);
    mass[t.node] += nu.mass[j];
  }
  return GridDensity{phi.grid, std::move(mass)};
}

double mass_of_cell(const PiecewiseAffineSection& pa, int atom, const GridDensity& nu) {
  if (atom < 0 || atom >= static_cast<int>(pa.atoms.size())) throw DomainError("mass_of_cell: atom out of range");
  return cell_masses(pa, nu)[atom];
}

std::vector<double> cell_masses(const PiecewiseAffineSection& pa, const GridDensity& nu) {
  LaguerreOptions opts;
  opts.radius = pa.radius;
  return laguerre(pa.model, pa.atoms, pa.potentials, nu, opts).mass;
}

namespace {

// Lebesgue measure of {x in cell : D(x) < c} for D linear from d0 to d1.
double below(double d0, double d1, double c, double h) {
  if (d0 == d1) return d0 < c ? h : 0.0;
  const double t = std::clamp((c - d0) / (d1 - d0), 0.0, 1.0);
  return d1 > d0 ? h * t : h * (1.0 - t);
}

double abs_integral(double d0, double d1, double c, double h) {
  const double e0 = d0 - c, e1 = d1 - c;
  if ((e0 >= 0.0) == (e1 >= 0.0)) return 0.5 * h * std::abs(e0 + e1);
  return 0.5 * h * (e0 * e0 + e1 * e1) / std::abs(e1 - e0);
}

}  // namespace

double wasserstein1_periodic(const std::vector<double>& a, const std::vector<double>& b, double h) {
  if (a.size() != b.size() || a.empty()) throw DomainError("wasserstein1_periodic: size mismatch");
  const std::size_t n = a.size();
  std::vector<double> D(n + 1, 0.0);
  for (std::size_t k = 0; k < n; ++k) D[k + 1] = D[k] + a[k] - b[k];
  // The minimizing shift c is a median of D under Lebesgue measure.
  const double L = h * n;
  double lo = *std::min_element(D.begin(), D.end());
  double hi = *std::max_element(D.begin(), D.end());
  for (int it = 0; it < 200 && hi > lo; ++it) {
    const double mid = 0.5 * (lo + hi);
    double m = 0.0;
    for (std::size_t k = 0; k < n; ++k) m += below(D[k], D[k + 1], mid, h);
    if (m < 0.5 * L) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double c = 0.5 * (lo + hi);
  double w = 0.0;
  for (std::size_t k = 0; k < n; ++k) w += abs_integral(D[k], D[k + 1], c, h);
  return w;
}

double wasserstein1_grid(const GridDensity& a, const GridDensity& b) {
  if (a.grid.shape != b.grid.shape || a.mass.size() != b.mass.size()) {
    throw DomainError("wasserstein1_grid: measures live on different grids");
  }
  const int n = a.grid.dim();
  if (n == 1) return wasserstein1_periodic(a.mass, b.mass, a.grid.spacing(0));
  if (n != 2) throw UnsupportedDimension("wasserstein1_grid: n > 2");
  // Rows along axis 1: first fix each row up to a uniform imbalance, then move
  // the row sums along axis 0.
  const int r = a.grid.shape[0], c = a.grid.shape[1];
  double cost = 0.0;
  std::vector<double> A(r, 0.0), Bs(r, 0.0);
  for (int i = 0; i < r; ++i) {
    std::vector<double> ra(c), rb(c);
    for (int j = 0; j < c; ++j) {
      ra[j] = a.mass[static_cast<std::size_t>(i) * c + j];
      rb[j] = b.mass[static_cast<std::size_t>(i) * c + j];
      A[i] += ra[j];
      Bs[i] += rb[j];
    }
    const double shift = (A[i] - Bs[i]) / c;
    for (double& v : rb) v += shift;
    cost += wasserstein1_periodic(ra, rb, a.grid.spacing(1));
  }
  return cost + wasserstein1_periodic(A, Bs, a.grid.spacing(0));
}

}  // namespace hma
