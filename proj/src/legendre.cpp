// SPDX-License-Identifier: Apache-2.0
#include "hma/legendre.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hma/errors.hpp"
#include "hma/parallel.hpp"

namespace hma {

namespace {

int resolve_radius(const HessianModel& model, int radius) { return radius < 0 ? model.default_radius() : radius; }

// Lifts y = g x_i of every node with Phi0(y), for |word| <= R.
struct LiftTable {
  std::vector<Vec> y;
  std::vector<double> phi0;
  std::vector<int> node;
  std::vector<GroupIndex> word;
  std::vector<bool> shell;
};

LiftTable lift_nodes(const HessianModel& model, const std::vector<Vec>& nodes, int R) {
  LiftTable t;
  const auto ball = model.group_ball(R);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (const auto& g : ball) {
      const Vec y = g.map(nodes[i]);
      t.y.push_back(y);
      t.phi0.push_back(model.reference_potential(y));
      t.node.push_back(static_cast<int>(i));
      t.word.push_back(g.exponents);
      t.shell.push_back(g.on_shell);
    }
  }
  return t;
}

std::vector<Vec> grid_nodes(const Grid& g) {
  std::vector<Vec> nodes(g.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) nodes[i] = g.node(i);
  return nodes;
}

struct ArgMax {
  double value = -std::numeric_limits<double>::infinity();
  std::size_t entry = 0;
  bool tie = false;
};

// Max of <p, y> - Phi0(y) - u over the lift table; lowest node index among
// entries within the tie tolerance wins.
ArgMax branch_max(const LiftTable& t, const std::vector<double>& u, const Vec& p) {
  ArgMax best;
  const std::size_t n = t.y.size();
  std::vector<double> val(n);
  for (std::size_t k = 0; k < n; ++k) {
    val[k] = p.dot(t.y[k]) - t.phi0[k] - u[t.node[k]];
    if (val[k] > best.value) best.value = val[k];
  }
  const double tol = 1e-12 * std::max(1.0, std::abs(best.value));
  int chosen_node = -1;
  for (std::size_t k = 0; k < n; ++k) {
    if (val[k] < best.value - tol) continue;
    if (chosen_node < 0 || t.node[k] < chosen_node) {
      if (chosen_node >= 0) best.tie = true;
      chosen_node = t.node[k];
      best.entry = k;
    } else if (t.node[k] != chosen_node) {
      best.tie = true;
    }
  }
  return best;
}


// Max over the piecewise-linear interpolant of u in 1D: on each lifted cell
// [y0, y1] the objective <p, y> - Phi0(y) - u(y) is strictly concave and its
// maximizer is dPhi0*(p - slope) clamped to the cell.
struct PlMax {
  double value = -std::numeric_limits<double>::infinity();
  double y = 0.0;
  std::size_t i0 = 0, i1 = 0;
  double s = 0.0;
  bool shell = false;
  GroupIndex word;
};

PlMax pl_max_1d(const GridSection& phi, const std::vector<double>& u, const Vec& p, int R) {
  const HessianModel& model = phi.model;
  const int m = phi.grid.shape[0];
  PlMax best;
  for (const auto& g : model.group_ball(R)) {
    for (int i = 0; i < m; ++i) {
      const std::size_t nb = phi.grid.neighbor(i, 0, 1);
      Vec xn = phi.grid.node(nb);
      if (i + 1 >= m) xn = model.element(GroupIndex{1})(xn);
      const double y0 = g.map(phi.grid.node(i))[0];
      const double y1 = g.map(xn)[0];
      const double sigma = (u[nb] - u[i]) / (y1 - y0);
      const Vec q = Vec::Constant(1, p[0] - sigma);
      double y = y1;
      if (model.in_dual_domain(q)) y = std::clamp(model.reference_conjugate_gradient(q)[0], y0, y1);
      const Vec yv = Vec::Constant(1, y);
      const double v = p[0] * y - model.reference_potential(yv) - u[i] - sigma * (y - y0);
      if (v > best.value) {
        best.value = v;
        best.y = y;
        best.i0 = static_cast<std::size_t>(i);
        best.i1 = nb;
        best.s = (y - y0) / (y1 - y0);
        best.shell = g.on_shell;
        best.word = g.exponents;
      }
    }
  }
  return best;
}

}  // namespace

PairingResult pairing(const HessianModel& model, const Vec& x, const Vec& p, int radius) {
  const int R = resolve_radius(model, radius);
  const AffineSection q{p, 0.0};
  const double qx = q(x);
  PairingResult best{-std::numeric_limits<double>::infinity(), {}};
  bool shell = false;
  for (const auto& g : model.group_ball(R)) {
    const double v = model.act_by_exponents(g.exponents, q)(x) - qx;
    if (v > best.value) {
      best = {v, g.exponents};
      shell = g.on_shell;
    }
  }
  if (shell) throw TruncationSaturated("pairing", model.word_of(best.word));
  return best;
}

double cost_function(const HessianModel& model, const Vec& x, const Vec& p, int radius) {
  const double pr = pairing(model, x, p, radius).value;
  return -pr + model.reference_potential(x) - p.dot(x) + model.reference_conjugate(p);
}

double cost_direct(const HessianModel& model, const Vec& x, const Vec& p, int radius) {
  const int R = resolve_radius(model, radius);
  double best = std::numeric_limits<double>::infinity();
  bool shell = false;
  GroupIndex word;
  for (const auto& g : model.group_ball(R)) {
    const Vec y = g.map(x);
    const double v = model.reference_potential(y) - p.dot(y);
    if (v < best) {
      best = v;
      shell = g.on_shell;
      word = g.exponents;
    }
  }
  if (shell) throw TruncationSaturated("cost_direct", model.word_of(word));
  return best + model.reference_conjugate(p);
}

double legendre_at(const GridSection& phi, const Vec& p, int radius) {
  const int R = resolve_radius(phi.model, radius);
  const LiftTable t = lift_nodes(phi.model, grid_nodes(phi.grid), R);
  const ArgMax best = branch_max(t, phi.u, p);
  if (t.shell[best.entry]) throw TruncationSaturated("legendre_transform", phi.model.word_of(t.word[best.entry]));
  return best.value - phi.model.reference_conjugate(p);
}

DualGridSection legendre_transform(const GridSection& phi, const std::vector<int>& dual_shape, int radius) {
  const int R = resolve_radius(phi.model, radius);
  const DualModel dual = phi.model.dual();
  DualGridSection out{dual, dual_grid(dual, dual_shape), {}};
  out.w.assign(out.grid.size(), 0.0);
  const LiftTable t = lift_nodes(phi.model, grid_nodes(phi.grid), R);
  std::vector<char> saturated(out.grid.size(), 0);
  parallel_for(out.grid.size(), [&](std::size_t j) {
    const Vec p = out.slope(j);
    double best = -std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t k = 0; k < t.y.size(); ++k) {
      const double v = p.dot(t.y[k]) - t.phi0[k] - phi.u[t.node[k]];
      if (v > best) {
        best = v;
        arg = k;
      }
    }
    saturated[j] = t.shell[arg];
    out.w[j] = best - phi.model.reference_conjugate(p);
  });
  for (std::size_t j = 0; j < saturated.size(); ++j) {
    if (saturated[j]) throw TruncationSaturated("legendre_transform", {});
  }
  return out;
}

GridSection inverse_transform(const DualGridSection& w, const GridSection& like, int radius) {
  const HessianModel& model = like.model;
  const int R = resolve_radius(model, radius);
  const std::vector<Vec> nodes = grid_nodes(like.grid);
  const auto ball = model.group_ball(R);
  std::vector<Vec> p(w.grid.size());
  std::vector<double> a(w.grid.size());
  for (std::size_t j = 0; j < p.size(); ++j) {
    p[j] = w.slope(j);
    a[j] = model.reference_conjugate(p[j]) + w.w[j];
  }
  // u(x) = max_p -c(x, p) - w(p) with -c(x, p) = max_y <p, y> - Phi0(y) - Phi0*(p).
  GridSection out{model, like.grid, std::vector<double>(nodes.size(), 0.0)};
  std::vector<char> saturated(nodes.size(), 0);
  parallel_for(nodes.size(), [&](std::size_t i) {
    double best = -std::numeric_limits<double>::infinity();
    bool shell = false;
    for (const auto& g : ball) {
      const Vec y = g.map(nodes[i]);
      const double phi0 = model.reference_potential(y);
      for (std::size_t j = 0; j < p.size(); ++j) {
        const double v = p[j].dot(y) - phi0 - a[j];
        if (v > best) {
          best = v;
          shell = g.on_shell;
        }
      }
    }
    saturated[i] = shell;
    out.u[i] = best;
  });
  for (std::size_t i = 0; i < saturated.size(); ++i) {
    if (saturated[i]) throw TruncationSaturated("inverse_transform", {});
  }
  return out;
}

GridSection convexify(const GridSection& s, int radius) {
  return inverse_transform(legendre_transform(s, s.grid.shape, radius), s, radius);
}

GradientMapResult gradient_map(const GridSection& phi, const Vec& p, int radius) {
  const HessianModel& model = phi.model;
  const int R = resolve_radius(model, radius);
  const LiftTable t = lift_nodes(model, grid_nodes(phi.grid), R);
  const ArgMax best = branch_max(t, phi.u, p);
  if (t.shell[best.entry]) throw TruncationSaturated("gradient_map", model.word_of(t.word[best.entry]));

  GradientMapResult out;
  out.node = static_cast<std::size_t>(t.node[best.entry]);
  out.word = t.word[best.entry];
  out.tie = best.tie;
  Vec y = t.y[best.entry];
  const AffineMap lift = model.element(out.word);

  if (phi.grid.dim() == 1 && phi.grid.shape[0] >= 2) {
    const PlMax pl = pl_max_1d(phi, phi.u, p, R);
    if (pl.shell) throw TruncationSaturated("gradient_map", model.word_of(pl.word));
    out.x = model.reduce_exponents(Vec::Constant(1, pl.y)).first;
    return out;
  }

  // One parabola per axis through the neighbors in the same lift chart.
  for (int k = 0; k < phi.grid.dim(); ++k) {
    const int m = phi.grid.shape[k];
    if (m < 3) continue;
    const int ik = phi.grid.unravel(out.node)[k];
    double pos[3], val[3];
    for (int s = -1; s <= 1; ++s) {
      const std::size_t nb = phi.grid.neighbor(out.node, k, s);
      Vec xn = phi.grid.node(nb);
      GroupIndex wrapw(model.generators().size(), 0);
      if (ik + s < 0) wrapw[k] = -1;
      if (ik + s >= m) wrapw[k] = 1;
      xn = model.element(wrapw)(xn);
      const Vec yn = lift(xn);
      pos[s + 1] = yn[k];
      val[s + 1] = p.dot(yn) - model.reference_potential(yn) - phi.u[nb];
    }
    const double d1 = (val[1] - val[0]) / (pos[1] - pos[0]);
    const double d2 = (val[2] - val[1]) / (pos[2] - pos[1]);
    const double curv = (d2 - d1) / (pos[2] - pos[0]);
    if (!(curv < 0.0)) continue;
    // Vertex of the interpolating parabola.
    const double vertex = 0.5 * (pos[0] + pos[1]) - d1 / (2.0 * curv);
    const double lo = 0.5 * (pos[0] + pos[1]);
    const double hi = 0.5 * (pos[1] + pos[2]);
    y[k] = std::clamp(vertex, lo, hi);
  }
  out.x = model.reduce_exponents(y).first;
  return out;
}

VariationCheck legendre_variation_check(const GridSection& phi, const std::vector<double>& v, const Vec& p,
                                        double h, int radius) {
  if (v.size() != phi.u.size()) throw DomainError("legendre_variation_check: v must live on the grid of phi");
  if (phi.grid.dim() == 1 && phi.grid.shape[0] >= 2) {
    // Both sides on the interpolant, whose transform is smooth in h away from nodes.
    const int R = resolve_radius(phi.model, radius);
    const PlMax pl = pl_max_1d(phi, phi.u, p, R);
    std::vector<double> up(v.size()), um(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      up[i] = phi.u[i] + h * v[i];
      um[i] = phi.u[i] - h * v[i];
    }
    const double fp = pl_max_1d(phi, up, p, R).value;
    const double fm = pl_max_1d(phi, um, p, R).value;
    return {-((1.0 - pl.s) * v[pl.i0] + pl.s * v[pl.i1]), (fp - fm) / (2.0 * h)};
  }
  const auto t = gradient_map(phi, p, radius);
  GridSection plus = phi, minus = phi;
  for (std::size_t i = 0; i < v.size(); ++i) {
    plus.u[i] += h * v[i];
    minus.u[i] -= h * v[i];
  }
  return {-v[t.node], (legendre_at(plus, p, radius) - legendre_at(minus, p, radius)) / (2.0 * h)};
}

double interpolation_error_estimate(const GridSection& s) {
  const HessianModel& model = s.model;
  const DualModel dual = model.dual();
  double est = 0.0;
  for (int k = 0; k < s.grid.dim(); ++k) {
    double min_curv = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < s.u.size(); ++i) {
      const double t = s.grid.unravel(i)[k] + 0.5;
      const double hm = s.grid.coord(k, t) - s.grid.coord(k, t - 1.0);
      const double hp = s.grid.coord(k, t + 1.0) - s.grid.coord(k, t);
      const double d2 = 2.0 *
                        ((s.u[s.grid.neighbor(i, k, 1)] - s.u[i]) / hp - (s.u[i] - s.u[s.grid.neighbor(i, k, -1)]) / hm) /
                        (hm + hp);
      min_curv = std::min(min_curv, model.reference_hessian(s.grid.node(i))(k, k) + d2);
    }
    if (!(min_curv > 0.0)) return std::numeric_limits<double>::infinity();
    // Largest slope spacing of the dual grid along axis k.
    const double hs = dual.chart().extent()[k] / s.grid.shape[k];
    double hp;
    if (dual.linear_chart()) {
      hp = std::abs(model.reference_hessian(s.grid.node(0))(k, k)) * hs;
    } else {
      const double lo = dual.chart().lo[0], hi = dual.chart().hi[0];
      hp = std::max(std::abs(dual.to_slope(Vec::Constant(1, lo + hs))[0] - dual.to_slope(Vec::Constant(1, lo))[0]),
                    std::abs(dual.to_slope(Vec::Constant(1, hi))[0] - dual.to_slope(Vec::Constant(1, hi - hs))[0]));
    }
    est += hp * hp / (8.0 * min_curv);
  }
  return est;
}

}  // namespace hma
