// SPDX-License-Identifier: Apache-2.0
#include "hma/tiling.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "hma/errors.hpp"
#include "hma/parallel.hpp"

namespace hma {

namespace {

constexpr double kClipTol = 1e-9;
constexpr double kDedupTol = 1e-8;
constexpr double kMinVolume = 1e-12;

int radius_of(const PiecewiseAffineSection& pa) {
  return pa.radius < 0 ? pa.model.default_radius() : pa.radius;
}

GroupIndex add(const GroupIndex& a, const GroupIndex& b) {
  GroupIndex r(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) r[k] = a[k] + b[k];
  return r;
}

struct Branch {
  int site;
  GroupIndex word;
  Vec y;
  double c;  // Phi0(y) + psi
  bool shell;
};

// Competitors of (atom, word): every (j, word + k) with |k| <= R other than itself.
std::vector<Branch> branches_around(const PiecewiseAffineSection& pa, const GroupIndex& center,
                                    const std::vector<GroupElement>& ball) {
  std::vector<Branch> out;
  out.reserve(ball.size() * pa.atoms.size());
  for (const auto& g : ball) {
    const GroupIndex w = add(center, g.exponents);
    const AffineMap m = pa.model.element(w);
    for (std::size_t j = 0; j < pa.atoms.size(); ++j) {
      Vec y = m(pa.atoms[j]);
      const double c = pa.model.reference_potential(y) + pa.potentials[j];
      out.push_back(Branch{static_cast<int>(j), w, std::move(y), c, g.on_shell});
    }
  }
  return out;
}

struct Edge {
  Vec v;      // start vertex
  int label;  // index into the competitor list, -1 - k for window side k
};

// Clips a convex polygon to a . x <= b, keeping per-edge labels.
std::vector<Edge> clip(const std::vector<Edge>& poly, const Vec& a, double b, int label) {
  std::vector<Edge> out;
  const std::size_t n = poly.size();
  for (std::size_t k = 0; k < n; ++k) {
    const Edge& cur = poly[k];
    const Vec& nxt = poly[(k + 1) % n].v;
    const double dc = a.dot(cur.v) - b;
    const double dn = a.dot(nxt) - b;
    const bool in_c = dc <= kClipTol;
    const bool in_n = dn <= kClipTol;
    if (in_c) out.push_back(cur);
    if (in_c != in_n) {
      const double t = dc / (dc - dn);
      const Vec I = cur.v + t * (nxt - cur.v);
      out.push_back(Edge{I, in_c ? label : cur.label});
    }
  }
  // Drop degenerate edges; the surviving edge keeps the label of the later vertex.
  std::vector<Edge> dedup;
  for (std::size_t k = 0; k < out.size(); ++k) {
    if ((out[k].v - out[(k + 1) % out.size()].v).norm() > kDedupTol) dedup.push_back(out[k]);
  }
  return dedup.size() >= 3 ? dedup : std::vector<Edge>{};
}

double polygon_area(const std::vector<Vec>& v) {
  double a = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    const Vec& p = v[k];
    const Vec& q = v[(k + 1) % v.size()];
    a += p[0] * q[1] - p[1] * q[0];
  }
  return 0.5 * a;
}

// Per-axis exponent range of words whose lifts may meet the window.
std::vector<GroupIndex> candidate_words(const HessianModel& model, const Box& window) {
  const int n = model.dim();
  const GroupIndex lo = model.reduce_exponents(window.lo).second;
  Vec hi_in = window.hi;
  for (int k = 0; k < n; ++k) hi_in[k] = std::nextafter(window.hi[k], window.lo[k]);
  const GroupIndex hi = model.reduce_exponents(hi_in).second;
  std::vector<GroupIndex> out;
  GroupIndex cur(n);
  for (int k = 0; k < n; ++k) cur[k] = std::min(lo[k], hi[k]) - 1;
  while (true) {
    out.push_back(cur);
    int k = 0;
    for (; k < n; ++k) {
      if (++cur[k] <= std::max(lo[k], hi[k]) + 1) break;
      cur[k] = std::min(lo[k], hi[k]) - 1;
    }
    if (k == n) break;
  }
  return out;
}

BranchLabel label_of(const std::vector<Branch>& comp, int label) {
  if (label < 0) return BranchLabel{-1, {}};
  return BranchLabel{comp[label].site, comp[label].word};
}

std::optional<TilingCell> cell_1d(const PiecewiseAffineSection& pa, int atom, const GroupIndex& word,
                                  const Box& window, const std::vector<GroupElement>& ball) {
  const auto& model = pa.model;
  const auto comp = branches_around(pa, word, ball);
  const Vec ya = model.element(word)(pa.atoms[atom]);
  const double ca = model.reference_potential(ya) + pa.potentials[atom];
  double plo = model.reference_gradient(window.lo)[0];
  double phi = model.reference_gradient(window.hi)[0];
  int llo = -1, lhi = -1;
  for (std::size_t b = 0; b < comp.size(); ++b) {
    if (comp[b].site == atom && comp[b].word == word) continue;
    const double dy = comp[b].y[0] - ya[0];
    const double r = comp[b].c - ca;
    if (dy > 0.0 && r / dy < phi) {
      phi = r / dy;
      lhi = static_cast<int>(b);
    } else if (dy < 0.0 && r / dy > plo) {
      plo = r / dy;
      llo = static_cast<int>(b);
    }
  }
  if (!(phi > plo)) return std::nullopt;
  const double xlo = llo < 0 ? window.lo[0] : model.reference_conjugate_gradient(Vec::Constant(1, plo))[0];
  const double xhi = lhi < 0 ? window.hi[0] : model.reference_conjugate_gradient(Vec::Constant(1, phi))[0];
  if (xhi - xlo < kMinVolume) return std::nullopt;
  for (int l : {llo, lhi}) {
    if (l >= 0 && comp[l].shell) throw TruncationSaturated("extract_tiling", comp[l].word);
  }
  TilingCell c;
  c.atom = atom;
  c.word = word;
  c.v = {Vec::Constant(1, xlo), Vec::Constant(1, xhi)};
  c.h = {HalfSpace{Vec::Constant(1, -1.0), -xlo, label_of(comp, llo)},
         HalfSpace{Vec::Constant(1, 1.0), xhi, label_of(comp, lhi)}};
  c.volume = xhi - xlo;
  return c;
}

std::optional<TilingCell> cell_2d(const PiecewiseAffineSection& pa, int atom, const GroupIndex& word,
                                  const Box& window, const std::vector<GroupElement>& ball) {
  const auto& model = pa.model;
  const Mat& Q = model.quadratic_form();
  const auto comp = branches_around(pa, word, ball);
  const Vec ya = model.element(word)(pa.atoms[atom]);
  const double ca = model.reference_potential(ya) + pa.potentials[atom];
  const Vec& lo = window.lo;
  const Vec& hi = window.hi;
  // Window sides: bottom, right, top, left as labels -1 .. -4.
  std::vector<Edge> poly = {{lo, -1}, {Vec((Vec(2) << hi[0], lo[1]).finished()), -2}, {hi, -3},
                            {Vec((Vec(2) << lo[0], hi[1]).finished()), -4}};
  // Nearest competitors first so the polygon shrinks early.
  std::vector<std::pair<double, int>> order;
  for (std::size_t b = 0; b < comp.size(); ++b) {
    if (comp[b].site == atom && comp[b].word == word) continue;
    order.emplace_back((comp[b].y - ya).squaredNorm(), static_cast<int>(b));
  }
  std::sort(order.begin(), order.end());
  for (const auto& [d, b] : order) {
    Vec a = Q * (comp[b].y - ya);
    double rhs = comp[b].c - ca;
    const double s = a.norm();
    a /= s;
    rhs /= s;
    poly = clip(poly, a, rhs, b);
    if (poly.empty()) return std::nullopt;
  }
  TilingCell c;
  c.atom = atom;
  c.word = word;
  for (const auto& e : poly) c.v.push_back(e.v);
  c.volume = polygon_area(c.v);
  if (c.volume < kMinVolume) return std::nullopt;
  const Vec wn[4] = {Vec((Vec(2) << 0, -1).finished()), Vec((Vec(2) << 1, 0).finished()),
                     Vec((Vec(2) << 0, 1).finished()), Vec((Vec(2) << -1, 0).finished())};
  const double wb[4] = {-lo[1], hi[0], hi[1], -lo[0]};
  for (const auto& e : poly) {
    if (e.label < 0) {
      const int k = -1 - e.label;
      c.h.push_back(HalfSpace{wn[k], wb[k], BranchLabel{-1, {}}});
      continue;
    }
    if (comp[e.label].shell) throw TruncationSaturated("extract_tiling", comp[e.label].word);
    Vec a = Q * (comp[e.label].y - ya);
    const double s = a.norm();
    c.h.push_back(HalfSpace{a / s, (comp[e.label].c - ca) / s, label_of(comp, e.label)});
  }
  return c;
}

}  // namespace

PaValue pa_evaluate(const PiecewiseAffineSection& pa, const Vec& x) {
  const auto& model = pa.model;
  if (!model.in_domain(x)) throw DomainError("pa_evaluate: x outside the domain");
  const GroupIndex e0 = model.reduce_exponents(x).second;
  const auto comp = branches_around(pa, e0, model.group_ball(radius_of(pa)));
  const double f = model.reference_potential(x);
  const Vec g = model.reference_gradient(x);
  double best = -std::numeric_limits<double>::infinity(), second = best;
  int arg = -1;
  for (std::size_t b = 0; b < comp.size(); ++b) {
    // -D(y, x) - psi = f + <g, y - x> - Phi0(y) - psi
    const double v = f + g.dot(comp[b].y - x) - comp[b].c;
    if (v > best) {
      second = best;
      best = v;
      arg = static_cast<int>(b);
    } else if (v > second) {
      second = v;
    }
  }
  if (comp[arg].shell) throw TruncationSaturated("pa_evaluate", comp[arg].word);
  PaValue r;
  r.relative = best;
  r.value = best + f;
  r.atom = comp[arg].site;
  r.word = comp[arg].word;
  r.tie = best - second <= 1e-12 * std::max(1.0, std::abs(best));
  return r;
}

double Tiling::total_volume() const {
  double s = 0.0;
  for (const auto& c : cells) s += c.volume;
  return s;
}

int Tiling::locate(const Vec& x, double tol) const {
  for (std::size_t k = 0; k < cells.size(); ++k) {
    bool in = true;
    for (const auto& h : cells[k].h) {
      if (h.a.dot(x) > h.b + tol) {
        in = false;
        break;
      }
    }
    if (in) return static_cast<int>(k);
  }
  return -1;
}

Tiling extract_tiling(const PiecewiseAffineSection& pa, const Box& window) {
  const int n = pa.model.dim();
  if (n >= 3) throw UnsupportedDimension("extract_tiling: no V-representation for n >= 3, use cell_halfspaces");
  if (n == 2 && !pa.model.is_quadratic()) throw UnsupportedDimension("extract_tiling: 2D needs a quadratic model");
  if (window.dim() != n || !(window.extent().array() > 0.0).all()) throw DomainError("extract_tiling: bad window");
  const auto ball = pa.model.group_ball(radius_of(pa));
  const auto words = candidate_words(pa.model, window);
  const std::size_t na = pa.atoms.size();
  std::vector<std::optional<TilingCell>> found(words.size() * na);
  parallel_for(found.size(), [&](std::size_t k) {
    const int atom = static_cast<int>(k % na);
    const GroupIndex& w = words[k / na];
    found[k] = n == 1 ? cell_1d(pa, atom, w, window, ball) : cell_2d(pa, atom, w, window, ball);
  });
  Tiling t;
  t.window = window;
  for (auto& c : found) {
    if (c) t.cells.push_back(std::move(*c));
  }
  return t;
}

std::vector<HalfSpace> cell_halfspaces(const PiecewiseAffineSection& pa, int atom, const GroupIndex& word) {
  const auto& model = pa.model;
  const Mat& Q = model.quadratic_form();
  const auto comp = branches_around(pa, word, model.group_ball(radius_of(pa)));
  const Vec ya = model.element(word)(pa.atoms[atom]);
  const double ca = model.reference_potential(ya) + pa.potentials[atom];
  std::vector<HalfSpace> out;
  for (std::size_t b = 0; b < comp.size(); ++b) {
    if (comp[b].site == atom && comp[b].word == word) continue;
    out.push_back(HalfSpace{Q * (comp[b].y - ya), comp[b].c - ca, label_of(comp, static_cast<int>(b))});
  }
  return out;
}

std::string tiling_json(const Tiling& t, const PiecewiseAffineSection& pa) {
  using nlohmann::json;
  auto vec = [](const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  json j;
  j["model"] = pa.model.name();
  j["window"] = {{"lo", vec(t.window.lo)}, {"hi", vec(t.window.hi)}};
  json atoms = json::array();
  for (std::size_t i = 0; i < pa.atoms.size(); ++i) {
    atoms.push_back({{"x", vec(pa.atoms[i])}, {"psi", pa.potentials[i]}});
  }
  j["atoms"] = atoms;
  json cells = json::array();
  for (const auto& c : t.cells) {
    json h = json::array();
    for (const auto& hs : c.h) {
      json row = {{"a", vec(hs.a)}, {"b", hs.b}};
      if (hs.other.site >= 0) row["other"] = {{"atom", hs.other.site}, {"word", hs.other.word}};
      h.push_back(row);
    }
    json v = json::array();
    for (const auto& p : c.v) v.push_back(vec(p));
    cells.push_back({{"atom", c.atom}, {"word", c.word}, {"area", c.volume}, {"H", h}, {"V", v}});
  }
  j["cells"] = cells;
  return j.dump(1);
}

std::string tiling_svg(const Tiling& t, const PiecewiseAffineSection& pa) {
  if (t.window.dim() != 2) throw UnsupportedDimension("tiling_svg: 2D only");
  const double size = 800.0;
  const Vec ext = t.window.extent();
  const double s = size / ext.maxCoeff();
  const double W = ext[0] * s, H = ext[1] * s;
  auto X = [&](double x) { return (x - t.window.lo[0]) * s; };
  auto Y = [&](double y) { return (t.window.hi[1] - y) * s; };
  std::ostringstream o;
  o << std::setprecision(6) << std::fixed;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
    << ' ' << H << "\">\n";
  const double n = static_cast<double>(std::max<std::size_t>(pa.atoms.size(), 1));
  for (const auto& c : t.cells) {
    const double hue = std::fmod(c.atom * 360.0 / n * 7.0 / 3.0 + c.atom * 17.0, 360.0);
    o << "<polygon fill=\"hsl(" << hue << ",55%,72%)\" stroke=\"none\" points=\"";
    for (const auto& v : c.v) o << X(v[0]) << ',' << Y(v[1]) << ' ';
    o << "\"/>\n";
  }
  // Singular locus: cell edges between two branches.
  o << "<g stroke=\"black\" stroke-width=\"1.2\" fill=\"none\">\n";
  for (const auto& c : t.cells) {
    for (std::size_t k = 0; k < c.v.size(); ++k) {
      if (c.h[k].other.site < 0) continue;
      const Vec& a = c.v[k];
      const Vec& b = c.v[(k + 1) % c.v.size()];
      o << "<line x1=\"" << X(a[0]) << "\" y1=\"" << Y(a[1]) << "\" x2=\"" << X(b[0]) << "\" y2=\"" << Y(b[1])
        << "\"/>\n";
    }
  }
  o << "</g>\n";
  const Box& fd = pa.model.fundamental_domain();
  o << "<rect x=\"" << X(fd.lo[0]) << "\" y=\"" << Y(fd.hi[1]) << "\" width=\"" << fd.extent()[0] * s
    << "\" height=\"" << fd.extent()[1] * s
    << "\" fill=\"none\" stroke=\"#444\" stroke-width=\"2\" stroke-dasharray=\"8 4\"/>\n";
  o << "<g fill=\"black\">\n";
  for (const auto& c : t.cells) {
    const Vec y = pa.model.element(c.word)(pa.atoms[c.atom]);
    if (!t.window.contains(y)) continue;
    o << "<circle cx=\"" << X(y[0]) << "\" cy=\"" << Y(y[1]) << "\" r=\"2.5\"/>\n";
  }
  o << "</g>\n</svg>\n";
  return o.str();
}

GridSection pa_to_grid(const PiecewiseAffineSection& pa, const std::vector<int>& shape, const GridDensity& nu) {
  LaguerreOptions lo;
  lo.radius = pa.radius;
  lo.vertices = true;
  const auto r = laguerre(pa.model, pa.atoms, pa.potentials, nu, lo);
  GridSection out = GridSection::zero(pa.model, shape);
  parallel_for(out.u.size(), [&](std::size_t i) {
    const Vec x = out.grid.node(i);
    out.u[i] = envelope_conjugate(pa.model, r, x) - pa.model.reference_potential(x);
  });
  return out;
}

AtomicMeasure quantize(const GridDensity& mu, const HessianModel& model, int n_atoms, std::uint64_t seed, int iters) {
  if (n_atoms < 1) throw DomainError("quantize: need at least one atom");
  const Grid& g = mu.grid;
  const int n = g.dim();
  // Nodes in unit-periodic chart coordinates tau = fractional index / m.
  std::vector<Vec> tau;
  std::vector<double> w;
  const double noise = 1e-12 * mu.total();
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (mu.mass[i] <= noise) continue;
    const auto idx = g.unravel(i);
    Vec t(n);
    for (int k = 0; k < n; ++k) t[k] = (idx[k] + 0.5) / g.shape[k];
    tau.push_back(t);
    w.push_back(mu.mass[i]);
  }
  auto wrap = [](double d) { return d - std::round(d); };
  auto dist2 = [&](const Vec& a, const Vec& b) {
    double s = 0.0;
    for (int k = 0; k < n; ++k) {
      const double d = wrap(a[k] - b[k]);
      s += d * d;
    }
    return s;
  };
  std::vector<Vec> centers;
  if (static_cast<std::size_t>(n_atoms) >= tau.size()) {
    centers = tau;
  } else {
    // Mass-weighted k-means++ seeding.
    std::mt19937_64 rng(seed);
    std::discrete_distribution<std::size_t> first(w.begin(), w.end());
    centers.push_back(tau[first(rng)]);
    std::vector<double> d2(tau.size(), std::numeric_limits<double>::infinity());
    while (static_cast<int>(centers.size()) < n_atoms) {
      std::vector<double> score(tau.size());
      for (std::size_t i = 0; i < tau.size(); ++i) {
        d2[i] = std::min(d2[i], dist2(tau[i], centers.back()));
        score[i] = w[i] * d2[i];
      }
      std::discrete_distribution<std::size_t> next(score.begin(), score.end());
      centers.push_back(tau[next(rng)]);
    }
    std::vector<int> assign(tau.size(), -1);
    for (int it = 0; it < iters; ++it) {
      bool changed = false;
      for (std::size_t i = 0; i < tau.size(); ++i) {
        int best = 0;
        double bd = dist2(tau[i], centers[0]);
        for (int c = 1; c < n_atoms; ++c) {
          const double d = dist2(tau[i], centers[c]);
          if (d < bd) {
            bd = d;
            best = c;
          }
        }
        if (assign[i] != best) {
          assign[i] = best;
          changed = true;
        }
      }
      if (!changed) break;
      std::vector<Vec> shift(n_atoms, Vec::Zero(n));
      std::vector<double> mass(n_atoms, 0.0);
      for (std::size_t i = 0; i < tau.size(); ++i) {
        const int c = assign[i];
        for (int k = 0; k < n; ++k) shift[c][k] += w[i] * wrap(tau[i][k] - centers[c][k]);
        mass[c] += w[i];
      }
      for (int c = 0; c < n_atoms; ++c) {
        if (mass[c] <= 0.0) continue;
        for (int k = 0; k < n; ++k) {
          const double t = centers[c][k] + shift[c][k] / mass[c];
          centers[c][k] = t - std::floor(t);
        }
      }
    }
  }
  // Cluster masses from the final assignment.
  std::vector<double> cm(centers.size(), 0.0);
  for (std::size_t i = 0; i < tau.size(); ++i) {
    std::size_t best = 0;
    double bd = dist2(tau[i], centers[0]);
    for (std::size_t c = 1; c < centers.size(); ++c) {
      const double d = dist2(tau[i], centers[c]);
      if (d < bd) {
        bd = d;
        best = c;
      }
    }
    cm[best] += w[i];
  }
  const double total = std::accumulate(cm.begin(), cm.end(), 0.0);
  std::vector<Vec> pts;
  std::vector<double> wts;
  for (std::size_t c = 0; c < centers.size(); ++c) {
    if (cm[c] <= 0.0) continue;
    Vec x(n);
    for (int k = 0; k < n; ++k) x[k] = g.coord(k, centers[c][k] * g.shape[k]);
    pts.push_back(x);
    wts.push_back(cm[c] / total);
  }
  return make_atomic(model, pts, wts);
}

PaApproximation pa_approximate(const GridSection& phi, int n_atoms, const PaApproxOptions& opts) {
  const auto& model = phi.model;
  const DualModel dual = model.dual();
  const GridDensity nu = opts.nu ? *opts.nu : slope_uniform_density(dual, dual_grid(dual, phi.grid.shape));
  const GridDensity mu = ma_measure(phi, nu, opts.semidiscrete.radius);
  PaApproximation out{PiecewiseAffineSection{model, {}, {}, opts.semidiscrete.radius}, {}, {}, 0.0};
  out.mu = quantize(mu, model, n_atoms, opts.seed, opts.kmeans_iters);
  out.pa = solve_semidiscrete(out.mu, nu, model, opts.semidiscrete).pa;
  out.u_pa = pa_to_grid(out.pa, phi.grid.shape, nu).u;
  std::vector<double> diff(phi.u.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = out.u_pa[i] - phi.u[i];
  out.error = 0.5 * oscillation(diff);
  return out;
}

}  // namespace hma
