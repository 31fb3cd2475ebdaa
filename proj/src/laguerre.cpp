// SPDX-License-Identifier: Apache-2.0
#include "hma/laguerre.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hma/errors.hpp"
#include "hma/parallel.hpp"

namespace hma {

namespace {

int floor_div(int a, int b) {
  const int q = a / b;
  return (a % b != 0 && ((a < 0) != (b < 0))) ? q - 1 : q;
}

int wrap(int i, int n) {
  const int r = i % n;
  return r < 0 ? r + n : r;
}

constexpr int kExtension = 2;  // chart periods added on each side in 1D

// ---------------------------------------------------------------- 1D ------

struct Line {
  long double slope;
  long double icpt;
  int site;
  int m;
};

long double meet(const Line& a, const Line& b) { return (b.icpt - a.icpt) / (a.slope - b.slope); }

LaguerreResult laguerre_1d(const HessianModel& model, const std::vector<Vec>& sites, const std::vector<double>& psi,
                           const GridDensity& nu, const LaguerreOptions& opts, int R) {
  const DualModel dual = model.dual();
  const Box& chart = dual.chart();
  const double period = dual.chart_periods()[0];
  const int n_cells = nu.grid.shape[0];
  const double hs = period / n_cells;
  const int reach = R + kExtension;

  std::vector<AffineMap> lifts;
  for (int m = -reach; m <= reach; ++m) lifts.push_back(model.element(GroupIndex{m}));

  std::vector<Line> lines;
  lines.reserve(sites.size() * lifts.size());
  for (std::size_t i = 0; i < sites.size(); ++i) {
    for (int m = -reach; m <= reach; ++m) {
      const Vec y = lifts[m + reach](sites[i]);
      lines.push_back({static_cast<long double>(y[0]),
                       -static_cast<long double>(model.reference_potential(y)) - psi[i], static_cast<int>(i), m});
    }
  }
  std::sort(lines.begin(), lines.end(), [](const Line& a, const Line& b) {
    if (a.slope != b.slope) return a.slope < b.slope;
    if (a.icpt != b.icpt) return a.icpt > b.icpt;
    return a.site < b.site;
  });
  std::vector<Line> hull;
  for (const Line& l : lines) {
    if (!hull.empty() && hull.back().slope == l.slope) continue;
    while (hull.size() >= 2 && meet(hull[hull.size() - 2], l) <= meet(hull[hull.size() - 2], hull.back())) {
      hull.pop_back();
    }
    hull.push_back(l);
  }

  const double p_a = dual.to_slope(Vec::Constant(1, chart.lo[0] - kExtension * period))[0];
  const double p_b = dual.to_slope(Vec::Constant(1, chart.hi[0] + kExtension * period))[0];
  const double p_lo = dual.to_slope(Vec::Constant(1, chart.lo[0]))[0];
  const double p_hi = dual.to_slope(Vec::Constant(1, chart.hi[0]))[0];

  // Chart cell boundaries in p and the density per unit p.
  std::vector<double> bound(n_cells + 1);
  for (int j = 0; j <= n_cells; ++j) bound[j] = dual.to_slope(Vec::Constant(1, chart.lo[0] + j * hs))[0];
  bound[n_cells] = p_hi;
  std::vector<double> rho(n_cells);
  for (int j = 0; j < n_cells; ++j) rho[j] = nu.mass[j] / (bound[j + 1] - bound[j]);
  auto density_at = [&](double p) {
    const auto it = std::upper_bound(bound.begin(), bound.end(), p);
    const int j = std::clamp(static_cast<int>(it - bound.begin()) - 1, 0, n_cells - 1);
    return rho[j];
  };

  LaguerreResult out;
  out.mass.assign(sites.size(), 0.0);
  const long double inf = std::numeric_limits<long double>::infinity();
  std::size_t cell = 0;
  for (std::size_t k = 0; k < hull.size(); ++k) {
    const Line& l = hull[k];
    const long double left = k == 0 ? -inf : meet(hull[k - 1], l);
    const long double right = k + 1 == hull.size() ? inf : meet(l, hull[k + 1]);
    const double from = static_cast<double>(std::max<long double>(left, p_a));
    const double to = static_cast<double>(std::min<long double>(right, p_b));
    if (!(to > from)) continue;
    const BranchLabel label{l.site, GroupIndex{l.m}};
    const bool in_core = to > p_lo && from < p_hi;
    if ((in_core && std::abs(l.m) >= R) || std::abs(l.m) >= reach) {
      throw TruncationSaturated("laguerre", model.word_of(label.word));
    }
    if (opts.cells) out.pieces.push_back({label, from, to});
    if (opts.vertices && k > 0 && left >= p_a && left <= p_b) {
      out.vertices.push_back({Vec::Constant(1, static_cast<double>(left)),
                              static_cast<double>(l.slope * left + l.icpt), l.site});
    }
    if (opts.couplings && k > 0 && left >= p_lo && left < p_hi && hull[k - 1].site != l.site) {
      const double c = density_at(static_cast<double>(left)) / static_cast<double>(l.slope - hull[k - 1].slope);
      out.couplings.emplace_back(l.site, hull[k - 1].site, c);
      out.couplings.emplace_back(hull[k - 1].site, l.site, c);
    }
    if (!in_core) continue;
    // Integrate the affine branch against nu over [from, to] inside D.
    const double a = std::max(from, p_lo);
    const double b = std::min(to, p_hi);
    while (cell + 1 < static_cast<std::size_t>(n_cells) && bound[cell + 1] <= a) ++cell;
    for (std::size_t j = cell; j < static_cast<std::size_t>(n_cells) && bound[j] < b; ++j) {
      const double lo = std::max(a, bound[j]);
      const double hi = std::min(b, bound[j + 1]);
      if (!(hi > lo)) continue;
      const double w = rho[j] * (hi - lo);
      out.mass[l.site] += w;
      out.integral += w * static_cast<double>(l.slope * 0.5L * ((long double)hi + lo) + l.icpt);
    }
  }
  return out;
}

// ---------------------------------------------------------------- 2D ------

using V2 = Eigen::Vector2d;

struct Poly {
  std::vector<V2> v;
  std::vector<int> label;  // index into the candidate table, -1 for the start box
};

// Keep n . d <= c.
void clip(Poly& poly, const V2& n, double c, int label) {
  const std::size_t k = poly.v.size();
  if (k == 0) return;
  Poly out;
  out.v.reserve(k + 1);
  out.label.reserve(k + 1);
  for (std::size_t i = 0; i < k; ++i) {
    const V2& cur = poly.v[i];
    const V2& nxt = poly.v[(i + 1) % k];
    const double fc = n.dot(cur) - c;
    const double fn = n.dot(nxt) - c;
    if (fc <= 0.0) {
      out.v.push_back(cur);
      out.label.push_back(poly.label[i]);
      if (fn > 0.0) {
        out.v.push_back(cur + (fc / (fc - fn)) * (nxt - cur));
        out.label.push_back(label);
      }
    } else if (fn <= 0.0) {
      out.v.push_back(cur + (fc / (fc - fn)) * (nxt - cur));
      out.label.push_back(poly.label[i]);
    }
  }
  // Drop zero-length edges; the surviving vertex inherits the later label.
  Poly clean;
  const std::size_t m = out.v.size();
  for (std::size_t i = 0; i < m; ++i) {
    const V2& nxt = out.v[(i + 1) % m];
    if ((out.v[i] - nxt).squaredNorm() <= 1e-28 && m > 1) continue;
    clean.v.push_back(out.v[i]);
    clean.label.push_back(out.label[i]);
  }
  if (clean.v.size() < 3) clean = Poly{};
  poly = std::move(clean);
}

void area_centroid(const std::vector<V2>& v, double& area, V2& centroid) {
  double a = 0.0;
  V2 c = V2::Zero();
  const std::size_t k = v.size();
  for (std::size_t i = 0; i < k; ++i) {
    const V2& p = v[i];
    const V2& q = v[(i + 1) % k];
    const double cr = p.x() * q.y() - q.x() * p.y();
    a += cr;
    c += cr * (p + q);
  }
  area = 0.5 * a;
  centroid = std::abs(a) > 0.0 ? V2(c / (3.0 * a)) : (k ? v[0] : V2::Zero());
}

struct Candidate {
  int site;
  int m0, m1;
  V2 e;        // y_B - y_A
  double rhs;  // e^T Q e / 2 + psi_B - psi_A
};

struct SiteOutput {
  double mass = 0.0;
  double integral = 0.0;
  std::vector<Eigen::Triplet<double>> couplings;
  std::vector<EnvelopeVertex> vertices;
  LaguerreCell cell;
};

LaguerreResult laguerre_2d(const HessianModel& model, const std::vector<Vec>& sites, const std::vector<double>& psi,
                           const GridDensity& nu, const LaguerreOptions& opts, int R) {
  const Mat Qm = 0.5 * (model.quadratic_form() + model.quadratic_form().transpose());
  Eigen::Matrix2d Q;
  Q << Qm(0, 0), Qm(0, 1), Qm(1, 0), Qm(1, 1);
  const Box& fund = model.fundamental_domain();
  const V2 lo(fund.lo[0], fund.lo[1]);
  const V2 P(fund.hi[0] - fund.lo[0], fund.hi[1] - fund.lo[1]);
  const int N = static_cast<int>(sites.size());
  const double lam_min = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(Q).eigenvalues().minCoeff();
  if (!(lam_min > 0.0)) throw DomainError("laguerre: Q is not positive definite");
  const double sqrt_lam = std::sqrt(lam_min);
  const double psi_min = *std::min_element(psi.begin(), psi.end());

  // Periodic bucket grid over the fundamental domain.
  const int B = std::max(1, static_cast<int>(std::ceil(std::sqrt(N / 2.0))));
  const V2 bw(P.x() / B, P.y() / B);
  const double bw_min = std::min(bw.x(), bw.y());
  std::vector<std::vector<int>> buckets(static_cast<std::size_t>(B) * B);
  std::vector<std::pair<int, int>> bucket_of(N);
  for (int i = 0; i < N; ++i) {
    const int b0 = std::clamp(static_cast<int>(std::floor((sites[i][0] - lo.x()) / bw.x())), 0, B - 1);
    const int b1 = std::clamp(static_cast<int>(std::floor((sites[i][1] - lo.y()) / bw.y())), 0, B - 1);
    buckets[static_cast<std::size_t>(b0) * B + b1].push_back(i);
    bucket_of[i] = {b0, b1};
  }

  // Density grid (uniform nu collapses to one cell over the chart).
  const bool uniform = nu.is_uniform();
  const int n0 = uniform ? 1 : nu.grid.shape[0];
  const int n1 = uniform ? 1 : nu.grid.shape[1];
  const V2 h(P.x() / n0, P.y() / n1);
  std::vector<double> rho(static_cast<std::size_t>(n0) * n1);
  for (std::size_t j = 0; j < rho.size(); ++j) {
    rho[j] = uniform ? nu.total() / (P.x() * P.y()) : nu.mass[j] / (h.x() * h.y());
  }
  auto density_at = [&](const V2& s) {
    const int j0 = wrap(static_cast<int>(std::floor((s.x() - lo.x()) / h.x())), n0);
    const int j1 = wrap(static_cast<int>(std::floor((s.y() - lo.y()) / h.y())), n1);
    return rho[static_cast<std::size_t>(j0) * n1 + j1];
  };

  std::vector<SiteOutput> per_site(N);
  parallel_for(static_cast<std::size_t>(N), [&](std::size_t ui) {
    const int i = static_cast<int>(ui);
    SiteOutput& res = per_site[i];
    const V2 yA(sites[i][0], sites[i][1]);
    const double W = (R + 1) * std::max(P.x(), P.y());
    Poly poly;
    poly.v = {V2(-W, -W), V2(W, -W), V2(W, W), V2(-W, W)};
    poly.label = {-1, -1, -1, -1};
    std::vector<Candidate> cands;

    auto cell_radius = [&]() {
      double r2 = 0.0;
      for (const V2& d : poly.v) r2 = std::max(r2, d.dot(Q * d));
      return std::sqrt(r2);
    };

    const auto [c0, c1] = bucket_of[i];
    for (int ring = 0;; ++ring) {
      if (poly.v.empty()) break;
      if (ring >= 1) {
        const double rc = cell_radius();
        const double bound = rc + std::sqrt(std::max(0.0, rc * rc + 2.0 * (psi[i] - psi_min)));
        if ((ring - 1) * bw_min * sqrt_lam >= bound) break;
      }
      for (int d0 = -ring; d0 <= ring; ++d0) {
        for (int d1 = -ring; d1 <= ring; ++d1) {
          if (std::max(std::abs(d0), std::abs(d1)) != ring) continue;
          const int v0 = c0 + d0, v1 = c1 + d1;
          const int m0 = floor_div(v0, B), m1 = floor_div(v1, B);
          if (std::abs(m0) > R || std::abs(m1) > R) {
            throw TruncationSaturated("laguerre", model.word_of(GroupIndex{m0, m1}));
          }
          for (int j : buckets[static_cast<std::size_t>(wrap(v0, B)) * B + wrap(v1, B)]) {
            if (j == i && m0 == 0 && m1 == 0) continue;
            const V2 yB(sites[j][0] + m0 * P.x(), sites[j][1] + m1 * P.y());
            const V2 e = yB - yA;
            const V2 n = Q * e;
            const double rhs = 0.5 * e.dot(n) + psi[j] - psi[i];
            cands.push_back({j, m0, m1, e, rhs});
            clip(poly, n, rhs, static_cast<int>(cands.size()) - 1);
            if (poly.v.empty()) break;
          }
          if (poly.v.empty()) break;
        }
        if (poly.v.empty()) break;
      }
    }
    if (poly.v.empty()) return;
    for (int lab : poly.label) {
      if (lab < 0) throw TruncationSaturated("laguerre: cell reaches the start box", model.word_of(GroupIndex{0, 0}));
      const Candidate& c = cands[lab];
      if (std::max(std::abs(c.m0), std::abs(c.m1)) >= R) {
        throw TruncationSaturated("laguerre", model.word_of(GroupIndex{c.m0, c.m1}));
      }
    }

    // Absolute chart coordinates.
    std::vector<V2> abs_poly(poly.v.size());
    for (std::size_t k = 0; k < poly.v.size(); ++k) abs_poly[k] = poly.v[k] + yA;

    V2 bmin = abs_poly[0], bmax = abs_poly[0];
    for (const V2& v : abs_poly) {
      bmin = bmin.cwiseMin(v);
      bmax = bmax.cwiseMax(v);
    }
    const int j0a = static_cast<int>(std::floor((bmin.x() - lo.x()) / h.x()));
    const int j0b = static_cast<int>(std::floor((bmax.x() - lo.x()) / h.x()));
    const int j1a = static_cast<int>(std::floor((bmin.y() - lo.y()) / h.y()));
    const int j1b = static_cast<int>(std::floor((bmax.y() - lo.y()) / h.y()));
    const double selfA = 0.5 * yA.dot(Q * yA);
    for (int j0 = j0a; j0 <= j0b; ++j0) {
      const double xl = lo.x() + j0 * h.x();
      Poly strip{abs_poly, std::vector<int>(abs_poly.size(), 0)};
      clip(strip, V2(-1.0, 0.0), -xl, 0);
      clip(strip, V2(1.0, 0.0), xl + h.x(), 0);
      if (strip.v.empty()) continue;
      for (int j1 = j1a; j1 <= j1b; ++j1) {
        const double yl = lo.y() + j1 * h.y();
        Poly piece = strip;
        clip(piece, V2(0.0, -1.0), -yl, 0);
        clip(piece, V2(0.0, 1.0), yl + h.y(), 0);
        if (piece.v.empty()) continue;
        double area;
        V2 cen;
        area_centroid(piece.v, area, cen);
        if (!(area > 0.0)) continue;
        const double r = rho[static_cast<std::size_t>(wrap(j0, n0)) * n1 + wrap(j1, n1)];
        // On the translate s' = s - m P the active branch is (i, -m):
        // l_{i,-m}(Q s') = l_{i,0}(Q s) - s^T Q (m P) + |m P|_Q^2 / 2.
        const V2 shift(floor_div(j0, n0) * P.x(), floor_div(j1, n1) * P.y());
        const double branch = cen.dot(Q * yA) - selfA - psi[i] - cen.dot(Q * shift) + 0.5 * shift.dot(Q * shift);
        res.mass += r * area;
        res.integral += r * area * branch;
      }
    }

    if (opts.couplings) {
      const std::size_t k = abs_poly.size();
      for (std::size_t e = 0; e < k; ++e) {
        const Candidate& c = cands[poly.label[e]];
        if (c.site == i) continue;
        const V2& a = abs_poly[e];
        const V2& b = abs_poly[(e + 1) % k];
        const double len = (b - a).norm();
        if (len <= 0.0) continue;
        double dens;
        if (uniform) {
          dens = rho[0];
        } else {
          // nu is constant per grid cell: split the edge at grid lines.
          std::vector<double> ts{0.0, 1.0};
          for (int ax = 0; ax < 2; ++ax) {
            const double d = b[ax] - a[ax];
            if (d == 0.0) continue;
            const double g0 = (std::min(a[ax], b[ax]) - lo[ax]) / h[ax];
            const double g1 = (std::max(a[ax], b[ax]) - lo[ax]) / h[ax];
            for (double g = std::floor(g0) + 1.0; g < g1; g += 1.0) ts.push_back((lo[ax] + g * h[ax] - a[ax]) / d);
          }
          std::sort(ts.begin(), ts.end());
          dens = 0.0;
          for (std::size_t q = 0; q + 1 < ts.size(); ++q) {
            if (ts[q + 1] > ts[q]) dens += (ts[q + 1] - ts[q]) * density_at(a + (0.5 * (ts[q] + ts[q + 1])) * (b - a));
          }
        }
        res.couplings.emplace_back(i, c.site, dens * len / (Q * c.e).norm());
      }
    }
    if (opts.vertices) {
      for (const V2& v : abs_poly) {
        const V2 p = Q * v;
        res.vertices.push_back({Vec(p), v.dot(Q * yA) - selfA - psi[i], i});
      }
    }
    if (opts.cells) {
      res.cell.site = i;
      for (std::size_t e = 0; e < abs_poly.size(); ++e) {
        res.cell.polygon.push_back(Vec(abs_poly[e]));
        const Candidate& c = cands[poly.label[e]];
        res.cell.edge_label.push_back({c.site, GroupIndex{c.m0, c.m1}});
      }
    }
  });

  LaguerreResult out;
  out.translate_vertices = true;
  out.mass.resize(N);
  for (int i = 0; i < N; ++i) {
    out.mass[i] = per_site[i].mass;
    out.integral += per_site[i].integral;
    out.couplings.insert(out.couplings.end(), per_site[i].couplings.begin(), per_site[i].couplings.end());
    out.vertices.insert(out.vertices.end(), per_site[i].vertices.begin(), per_site[i].vertices.end());
    if (opts.cells && !per_site[i].cell.polygon.empty()) out.cells.push_back(std::move(per_site[i].cell));
  }
  return out;
}

}  // namespace

std::vector<int> LaguerreResult::empty_sites() const {
  std::vector<int> e;
  for (std::size_t i = 0; i < mass.size(); ++i) {
    if (mass[i] <= 0.0) e.push_back(static_cast<int>(i));
  }
  return e;
}

LaguerreResult laguerre(const HessianModel& model, const std::vector<Vec>& sites, const std::vector<double>& psi,
                        const GridDensity& nu, const LaguerreOptions& opts) {
  if (sites.empty()) throw DomainError("laguerre: no sites");
  if (psi.size() != sites.size()) throw DomainError("laguerre: one potential per site required");
  if (nu.grid.dim() != model.dim()) throw DomainError("laguerre: dual density has the wrong dimension");
  for (double v : psi) {
    if (!std::isfinite(v)) throw DomainError("laguerre: non-finite potential");
  }
  const int R = opts.radius < 0 ? model.default_radius() : opts.radius;
  if (model.dim() == 1) return laguerre_1d(model, sites, psi, nu, opts, R);
  if (model.dim() == 2 && model.is_quadratic()) return laguerre_2d(model, sites, psi, nu, opts, R);
  throw UnsupportedDimension("laguerre: exact cells are implemented for n = 1 and for 2D tori");
}

double envelope_conjugate(const HessianModel& model, const LaguerreResult& r, const Vec& x) {
  if (r.vertices.empty()) throw DomainError("envelope_conjugate: result carries no vertices");
  double best = -std::numeric_limits<double>::infinity();
  if (!r.translate_vertices) {
    for (const auto& v : r.vertices) best = std::max(best, v.p.dot(x) - v.value);
    return best;
  }
  // E(Q(s + t)) = E(Q s) + s^T Q t + |t|_Q^2 / 2 for lattice translations t.
  const Mat Q = 0.5 * (model.quadratic_form() + model.quadratic_form().transpose());
  const Vec P = model.fundamental_domain().extent();
  for (int m0 = -1; m0 <= 1; ++m0) {
    for (int m1 = -1; m1 <= 1; ++m1) {
      Vec t(2);
      t << m0 * P[0], m1 * P[1];
      const Vec Qt = Q * t;
      const double tt = 0.5 * t.dot(Qt);
      for (const auto& v : r.vertices) {
        // v.p = Q s, so s^T Q t = v.p . t
        const Vec p = v.p + Qt;
        const double value = v.value + v.p.dot(t) + tt;
        best = std::max(best, p.dot(x) - value);
      }
    }
  }
  return best;
}

Eigen::SparseMatrix<double> mass_jacobian(const LaguerreResult& r, int n_sites) {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(2 * r.couplings.size());
  std::vector<double> diag(n_sites, 0.0);
  for (const auto& c : r.couplings) {
    t.emplace_back(c.row(), c.col(), -c.value());
    diag[c.row()] += c.value();
  }
  for (int i = 0; i < n_sites; ++i) t.emplace_back(i, i, diag[i]);
  Eigen::SparseMatrix<double> H(n_sites, n_sites);
  H.setFromTriplets(t.begin(), t.end());
  return H;
}

}  // namespace hma
