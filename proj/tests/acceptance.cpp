// SPDX-License-Identifier: Apache-2.0
//
// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "hma/einstein.hpp"
#include "hma/errors.hpp"
#include "hma/legendre.hpp"
#include "hma/parallel.hpp"
#include "hma/tiling.hpp"

using namespace hma;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kEps = std::numeric_limits<double>::epsilon();

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string f(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

Vec v1(double a) { return Vec::Constant(1, a); }

// Solves shared between criteria.
struct Shared {
  std::vector<bool> estimates;  // estimates_ok of every grid solve
  int solves = 0;
  int iterates = 0;
  std::vector<double> flat_a, flat_b;
  std::vector<double> cos_a, cos_b;
  double flat_tol = 1e-5, cos_tol = 1e-5;

  void record(const KantorovichState& st) {
    estimates.push_back(st.estimates_ok);
    ++solves;
    iterates += static_cast<int>(st.log.size());
  }
};

Shared shared;

Verdict criterion1() {
  const auto model = HessianModel::unit_torus(2);
  const auto mu = uniform_density(primal_grid(model, {64, 64}));
  const auto nu = uniform_density(dual_grid(model.dual(), {64, 64}));
  set_thread_count(1);
  SolverOptions o;
  o.seed = 1;
  const auto t0 = std::chrono::steady_clock::now();
  const auto st = solve_grid(mu, nu, model, o);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  set_thread_count(0);
  shared.record(st);
  shared.flat_a = st.phi.u;
  shared.flat_tol = o.tol;
  o.seed = 2;
  const auto st2 = solve_grid(mu, nu, model, o);
  shared.record(st2);
  shared.flat_b = st2.phi.u;
  const double osc = st.phi.osc();
  return {st.converged && osc <= 1e-6 && secs <= 60.0,
          "osc(u)=" + f("%.2e", osc) + " time=" + f("%.2f", secs) + "s iterations=" + std::to_string(st.iteration)};
}

// u' = T - id with T the monotone rearrangement of mu onto uniform nu, integrated by Simpson.
std::vector<double> rearrangement_oracle(const Grid& g) {
  auto Fmu = [](double x) { return x + 0.5 * std::sin(2 * kPi * x) / (2 * kPi); };
  auto du = [&](double x) { return Fmu(x) - x; };  // F_nu^{-1} = id on [0, 1)
  std::vector<double> u(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double x = g.node(i)[0];
    const int m = 2000;
    const double h = x / m;
    double s = du(0.0) + du(x);
    for (int k = 1; k < m; ++k) s += (k % 2 ? 4.0 : 2.0) * du(k * h);
    u[i] = s * h / 3.0;
  }
  return u;
}

Verdict criterion2() {
  const auto model = HessianModel::unit_torus(1);
  const auto mu = cosine_density(primal_grid(model, {256}), 0.5);
  const auto nu = uniform_density(dual_grid(model.dual(), {256}));
  SolverOptions o;
  o.seed = 1;
  const auto a = solve_grid(mu, nu, model, o);
  o.seed = 2;
  const auto b = solve_grid(mu, nu, model, o);
  shared.record(a);
  shared.record(b);
  shared.cos_a = a.phi.u;
  shared.cos_b = b.phi.u;
  shared.cos_tol = o.tol;
  const double d = sup_distance_mod_constants(a.phi.u, rearrangement_oracle(a.phi.grid));
  return {a.converged && d <= 1e-4, "sup|u - oracle| mod constants=" + f("%.2e", d)};
}

Verdict criterion3() {
  const auto model = HessianModel::unit_torus(1);
  const auto nu = uniform_density(dual_grid(model.dual(), {1024}));
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  int configs = 0;
  for (int K = 2; K <= 5; ++K) {
    for (int rep = 0; rep < 25; ++rep, ++configs) {
      std::vector<double> x(K), w(K);
      double tot = 0.0;
      for (int k = 0; k < K; ++k) {
        x[k] = u(rng);
        w[k] = 0.2 + u(rng);
        tot += w[k];
      }
      for (double& v : w) v /= tot;
      std::vector<Vec> pts;
      for (double v : x) pts.push_back(v1(v));
      const auto res = solve_semidiscrete(make_atomic(model, pts, w), nu, model);
      // Boundaries from the tiling of one period.
      const auto t = extract_tiling(res.pa, Box{v1(0.0), v1(1.0)});
      // A cell crossing 0 appears as two pieces; keep only atom changes.
      auto cells = t.cells;
      std::sort(cells.begin(), cells.end(), [](const auto& p, const auto& q) { return p.v[0][0] < q.v[0][0]; });
      std::vector<double> b;
      for (std::size_t k = 0; k < cells.size(); ++k) {
        const auto& prev = cells[(k + cells.size() - 1) % cells.size()];
        if (prev.atom != cells[k].atom) b.push_back(cells[k].v[0][0]);
      }
      // Oracle: cells are consecutive arcs of lengths w in cyclic atom order;
      // the offset theta minimizes the quadratic cost over all rotations.
      std::vector<int> ord(K);
      for (int k = 0; k < K; ++k) ord[k] = k;
      std::sort(ord.begin(), ord.end(), [&](int i, int j) { return x[i] < x[j]; });
      double best = 1e300;
      std::vector<double> ob;
      for (int rot = 0; rot < K; ++rot) {
        std::vector<double> a(K), lam(K), C(K + 1, 0.0);
        for (int j = 0; j < K; ++j) {
          const int k = ord[(j + rot) % K];
          a[j] = x[k] + (j + rot >= K ? 1.0 : 0.0);
          lam[j] = w[k];
          C[j + 1] = C[j] + lam[j];
        }
        double theta = 0.0;
        for (int j = 0; j < K; ++j) theta += lam[j] * (a[j] - 0.5 * (C[j] + C[j + 1]));
        double cost = 0.0;
        for (int j = 0; j < K; ++j) {
          const double lo = theta + C[j] - a[j], hi = theta + C[j + 1] - a[j];
          cost += (hi * hi * hi - lo * lo * lo) / 6.0;
        }
        if (cost < best) {
          best = cost;
          ob.clear();
          for (int j = 0; j < K; ++j) {
            double y = theta + C[j] - std::floor(theta + C[j]);
            if (y > 1.0 - 1e-13) y = 0.0;
            ob.push_back(y);
          }
        }
      }
      std::sort(ob.begin(), ob.end());
      if (b.size() != ob.size()) return {false, "cell count mismatch at K=" + std::to_string(K)};
      for (int k = 0; k < K; ++k) worst = std::max(worst, std::abs(b[k] - ob[k]));
    }
  }
  return {worst <= 1e-8, std::to_string(configs) + " configurations, max boundary error=" + f("%.2e", worst)};
}

Verdict criterion4() {
  const auto model = HessianModel::unit_torus(2);
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Vec> pts;
  std::vector<double> w;
  double total = 0.0;
  for (int k = 0; k < 10; ++k) {
    Vec x(2);
    x << u(rng), u(rng);
    pts.push_back(x);
    w.push_back(0.5 + u(rng));
    total += w.back();
  }
  for (double& v : w) v /= total;
  const auto mu = make_atomic(model, pts, w);
  const auto nu = uniform_density(dual_grid(model.dual(), {512, 512}));
  const auto res = solve_semidiscrete(mu, nu, model);
  double mass_err = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) mass_err = std::max(mass_err, std::abs(res.mass[i] - mu.weights[i]));
  Vec lo = Vec::Zero(2), hi = Vec::Ones(2);
  const auto t = extract_tiling(res.pa, Box{lo, hi});
  const double area_err = std::abs(t.total_volume() - 1.0);
  const auto& pa = res.pa;
  const int P = 1024;
  long agree = 0;
  for (int a = 0; a < P; ++a) {
    for (int b = 0; b < P; ++b) {
      Vec x(2);
      x << (a + 0.5) / P, (b + 0.5) / P;
      double best = -1e300;
      int lab = -1;
      for (int m0 = -1; m0 <= 1; ++m0) {
        for (int m1 = -1; m1 <= 1; ++m1) {
          for (std::size_t i = 0; i < pa.atoms.size(); ++i) {
            Vec y = pa.atoms[i];
            y[0] += m0;
            y[1] += m1;
            const double v = -0.5 * (x - y).squaredNorm() - pa.potentials[i];
            if (v > best) {
              best = v;
              lab = static_cast<int>(i);
            }
          }
        }
      }
      const int k = t.locate(x);
      if (k >= 0 && t.cells[k].atom == lab) ++agree;
    }
  }
  const double agreement = static_cast<double>(agree) / (static_cast<double>(P) * P);
  return {mass_err <= 1e-4 && area_err <= 1e-6 && agreement >= 0.999,
          "max|mass - weight|=" + f("%.2e", mass_err) + " |area sum - 1|=" + f("%.2e", area_err) +
              " pixel agreement=" + f("%.5f", agreement)};
}

Verdict criterion5() {
  std::mt19937_64 rng(555);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double idem = 0.0, below = 0.0, invol = 0.0, contr = 0.0, fy = 0.0;
  bool ok = true;
  for (int s = 0; s < 100; ++s) {
    const int kind = s % 4;
    const HessianModel model = kind == 3 ? HessianModel::log_barrier() : HessianModel::unit_torus(kind == 2 ? 2 : 1);
    const std::vector<int> shape = kind == 2 ? std::vector<int>{16, 16} : std::vector<int>{kind == 3 ? 64 : 96};
    GridSection sec = GridSection::zero(model, shape);
    const double amp = 0.01 + 0.2 * unit(rng);
    sec.u = random_smooth(sec.grid, 1000 + s, amp);
    for (double& v : sec.u) v += 0.01 * amp * noise(rng);
    const double ulp = 4.0 * kEps * (1.0 + sup_norm(sec.u));

    const auto c1 = convexify(sec);
    const auto c2 = convexify(c1);
    for (std::size_t i = 0; i < sec.u.size(); ++i) {
      idem = std::max(idem, std::abs(c2.u[i] - c1.u[i]));
      below = std::max(below, c1.u[i] - sec.u[i]);
      ok = ok && c1.u[i] <= sec.u[i] + ulp;
    }

    GridSection convex = GridSection::zero(model, shape);
    convex.u = random_smooth(convex.grid, 2000 + s, 0.001);
    const auto cc = convexify(convex);
    const double tol = 2.0 * interpolation_error_estimate(convex);
    for (std::size_t i = 0; i < convex.u.size(); ++i) {
      const double e = std::abs(cc.u[i] - convex.u[i]);
      invol = std::max(invol, e / std::max(tol, 1e-300));
      ok = ok && e <= tol + ulp;
    }

    GridSection shifted = sec;
    const auto v = random_smooth(sec.grid, 3000 + s, 0.02);
    for (std::size_t i = 0; i < v.size(); ++i) shifted.u[i] += v[i];
    const auto wa = legendre_transform(sec, shape);
    const auto wb = legendre_transform(shifted, shape);
    const double sv = sup_norm(v);
    const double wulp = 4.0 * kEps * (1.0 + sup_norm(wa.w));
    for (std::size_t j = 0; j < wa.w.size(); ++j) {
      const double d = std::abs(wa.w[j] - wb.w[j]) - sv;
      contr = std::max(contr, d);
      ok = ok && d <= wulp;
    }
    const std::size_t stride = sec.grid.size() > 128 ? 3 : 1;
    for (std::size_t i = 0; i < sec.grid.size(); i += stride) {
      for (std::size_t j = 0; j < wa.w.size(); j += stride) {
        const double val = sec.u[i] + wa.w[j] + cost_function(model, sec.grid.node(i), wa.slope(j));
        fy = std::max(fy, -val);
      }
    }
  }
  ok = ok && idem <= 1e-9 && fy <= 1e-12;
  return {ok, "idempotence=" + f("%.1e", idem) + " max(s** - s)=" + f("%.1e", below) + " involution/(2 interp)=" +
                  f("%.2f", invol) + " contraction excess=" + f("%.1e", contr) + " FY deficit=" + f("%.1e", fy)};
}

Verdict criterion6() {
  const auto model = HessianModel::unit_torus(1);
  const int N = 128;
  const auto nu = cosine_density(dual_grid(model.dual(), {N}), 0.4);
  const auto mu = cosine_density(primal_grid(model, {N}), -0.3);
  GridSection phi = GridSection::zero(model, {N});
  phi.u = random_smooth(phi.grid, 11, 0.004);
  const EinsteinProblem ein{model, nu, cosine_density(primal_grid(model, {N}), 0.5), -1.0};
  const auto gF = kantorovich_gradient(phi, mu, nu);
  const auto gD = ding_gradient(phi, ein);
  const double h = 1e-4;
  double worstF = 0.0, worstD = 0.0, absF = 0.0, absD = 0.0, derivF = 0.0;
  int dirF = -1;
  for (int d = 0; d < 20; ++d) {
    const auto v = random_smooth(phi.grid, 700 + d, 1.0);
    GridSection p = phi, m = phi;
    for (int i = 0; i < N; ++i) {
      p.u[i] += h * v[i];
      m.u[i] -= h * v[i];
    }
    double aF = 0.0, aD = 0.0;
    for (int i = 0; i < N; ++i) {
      aF += v[i] * gF[i];
      aD += v[i] * gD[i];
    }
    const double nF = (kantorovich_value(p, mu, nu) - kantorovich_value(m, mu, nu)) / (2 * h);
    const double nD = (ding_value(p, ein) - ding_value(m, ein)) / (2 * h);
    const double rF = std::abs(aF - nF) / std::abs(nF), rD = std::abs(aD - nD) / std::abs(nD);
    if (rF > worstF) {
      worstF = rF;
      dirF = d;
      derivF = nF;
    }
    worstD = std::max(worstD, rD);
    absF = std::max(absF, std::abs(aF - nF));
    absD = std::max(absD, std::abs(aD - nD));
  }
  return {worstF <= 1e-4 && worstD <= 1e-4,
          "max relative error F=" + f("%.2e", worstF) + " (direction " + std::to_string(dirF) + ", derivative " +
              f("%.1e", derivF) + ") D=" + f("%.2e", worstD) + "; max absolute error F=" + f("%.1e", absF) +
              " D=" + f("%.1e", absD)};
}


EinsteinProblem einstein_problem() {
  const auto model = HessianModel::unit_torus(1);
  return EinsteinProblem{model, uniform_density(dual_grid(model.dual(), {128})),
                         cosine_density(primal_grid(model, {128}), 0.5), -1.0};
}

Verdict criterion8() {
  const auto p = einstein_problem();
  SolverOptions o;
  o.seed = 1;
  const auto einstein_a = solve_einstein(p, o);
  o.seed = 2;
  const auto einstein_b = solve_einstein(p, o);
  shared.record(einstein_a);
  shared.record(einstein_b);
  const double d1 = sup_distance_mod_constants(shared.flat_a, shared.flat_b);
  const double d2 = sup_distance_mod_constants(shared.cos_a, shared.cos_b);
  const double d3 = sup_distance_mod_constants(einstein_a.phi.u, einstein_b.phi.u);
  const auto h = holder_midpoint_check(einstein_a.phi.u, random_smooth(einstein_a.phi.grid, 77, 0.5), p.mu0, 1e-12);
  const bool ok = d1 <= 10 * shared.flat_tol && d2 <= 10 * shared.cos_tol && d3 <= 10 * o.tol && h.ok &&
                  einstein_a.converged && einstein_b.converged;
  return {ok, "seed gaps flat=" + f("%.1e", d1) + " cosine=" + f("%.1e", d2) + " einstein=" + f("%.1e", d3) +
                  " holder worst=" + f("%.1e", h.worst)};
}

Verdict criterion7() {
  // Runs the grid solves of criterion 10 as well before reporting.
  bool ok = true;
  for (bool b : shared.estimates) ok = ok && b;
  return {ok && shared.solves > 0, std::to_string(shared.solves) + " solves, " + std::to_string(shared.iterates) +
                                        " iterates checked"};
}

Verdict criterion9() {
  const auto model = HessianModel::unit_torus(1);
  const auto nu = uniform_density(dual_grid(model.dual(), {1024}));
  std::vector<std::vector<double>> sols;
  for (int N : {4, 16, 64, 256, 1024}) {
    // Atoms at cell centers carrying the mass of 1 + 0.5 cos(2 pi x) on their cell.
    std::vector<Vec> pts;
    std::vector<double> w;
    for (int k = 0; k < N; ++k) {
      const double a = static_cast<double>(k) / N, b = static_cast<double>(k + 1) / N;
      pts.push_back(v1((k + 0.5) / N));
      w.push_back((b - a) + 0.5 * (std::sin(2 * kPi * b) - std::sin(2 * kPi * a)) / (2 * kPi));
    }
    const auto res = solve_semidiscrete(make_atomic(model, pts, w), nu, model);
    sols.push_back(pa_to_grid(res.pa, {128}, nu).u);
  }
  std::vector<double> gaps;
  bool dec = true;
  std::string d = "gaps";
  for (std::size_t k = 1; k < sols.size(); ++k) {
    gaps.push_back(sup_distance_mod_constants(sols[k], sols[k - 1]));
    if (gaps.size() > 1) dec = dec && gaps.back() < gaps[gaps.size() - 2];
    d += " " + f("%.2e", gaps.back());
  }
  return {dec && gaps.back() <= 2e-3, d};
}

Verdict criterion10() {
  const auto model = HessianModel::log_barrier();
  const DualModel dual = model.dual();
  bool exact = true;
  for (int m = -6; m <= 6; ++m) {
    for (double a : {-1.0, -1.25, -1.5, -1.9, -1.0 / 3.0, -0.7}) {
      exact = exact && dual.element({m})(v1(a))[0] == std::pow(2.0, -m) * a;
    }
  }
  const auto nu = slope_uniform_density(dual, dual_grid(dual, {256}));
  const Grid g = primal_grid(model, {256});
  std::vector<double> vol(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) vol[i] = g.cell_volume(i);
  const auto mu = density_from_masses(g, vol);
  const auto st = solve_grid(mu, nu, model);
  shared.record(st);
  const double w1 = wasserstein1_grid(ma_measure(st.phi, nu), mu);

  std::mt19937_64 rng(1010);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_lb = 0.0, worst_t = 0.0;
  const auto torus = HessianModel::unit_torus(1);
  for (int s = 0; s < 1000; ++s) {
    const Vec y = v1(1.0 + u(rng));
    const Vec a = v1(-2.0 + u(rng));
    worst_lb = std::max(worst_lb, std::abs(cost_function(model, y, a) - cost_direct(model, y, a)));
    const double x = u(rng), p = u(rng);
    double d = std::abs(x - p);
    d = std::min(d, 1.0 - d);
    worst_t = std::max(worst_t, std::abs(cost_function(torus, v1(x), v1(p)) - 0.5 * d * d));
  }
  return {exact && st.converged && w1 <= 1e-3 && worst_lb <= 1e-12 && worst_t <= 1e-12,
          std::string("dual action ") + (exact ? "exact" : "MISMATCH") + " W1=" + f("%.2e", w1) +
              " cost vs direct=" + f("%.1e", worst_lb) + " torus cost vs d^2/2=" + f("%.1e", worst_t)};
}

Verdict criterion11() {
  const auto model = HessianModel::unit_torus(1);
  const auto phi =
      convexify(GridSection::sample(model, {1024}, [](const Vec& x) { return 0.1 * std::cos(2 * kPi * x[0]); }));
  std::string d = "errors";
  double prev = 1e300;
  bool dec = true;
  for (int N : {4, 16, 64, 256}) {
    const auto r = pa_approximate(phi, N);
    dec = dec && r.error < prev;
    prev = r.error;
    d += " " + f("%.2e", r.error);
  }
  d += " (0.01 osc(u)=" + f("%.2e", 0.01 * phi.osc()) + ")";
  return {dec, d};
}

}  // namespace

int main() {
  const std::vector<std::pair<int, std::function<Verdict()>>> order = {
      {1, criterion1}, {2, criterion2}, {3, criterion3},  {4, criterion4},  {5, criterion5}, {6, criterion6},
      {8, criterion8}, {9, criterion9}, {10, criterion10}, {11, criterion11}, {7, criterion7}};
  std::vector<std::pair<int, Verdict>> results;
  for (const auto& [id, fn] : order) {
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    results.emplace_back(id, v);
  }
  std::sort(results.begin(), results.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  int failed = 0;
  for (const auto& [id, v] : results) {
    std::printf("criterion %2d: %s  %s\n", id, v.pass ? "PASS" : "FAIL", v.detail.c_str());
    failed += v.pass ? 0 : 1;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(results.size()) - failed, results.size());
  return failed == 0 ? 0 : 1;
}
