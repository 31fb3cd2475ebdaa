// SPDX-License-Identifier: Apache-2.0
#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "arrays.hpp"
#include "hma/einstein.hpp"
#include "hma/errors.hpp"
#include "hma/legendre.hpp"
#include "hma/parallel.hpp"
#include "hma/tiling.hpp"

namespace hma::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::vector<double> to_std(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream o(p);
  if (!o) throw Error("cannot write " + p.string());
  o << s;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_convergence(const fs::path& p, const std::vector<ConvergenceRecord>& log) {
  std::ostringstream o;
  o << "iteration,value,residual,step,extra,osc,c0_ok,lipschitz_ok\n";
  for (const auto& r : log) {
    o << r.iteration << ',' << fmt(r.value) << ',' << fmt(r.residual) << ',' << fmt(r.step) << ',' << fmt(r.extra)
      << ',' << fmt(r.osc) << ',' << r.c0_ok << ',' << r.lipschitz_ok << '\n';
  }
  write_text(p, o.str());
}

Array grid_array(const Grid& g, const std::vector<double>& u) {
  Array a;
  for (int e : g.shape) a.shape.push_back(static_cast<std::uint64_t>(e));
  a.data = u;
  return a;
}

json model_json(const HessianModel& m) {
  json j{{"name", m.name()}, {"dimension", m.dim()}};
  if (m.is_quadratic()) {
    const Mat& Q = m.quadratic_form();
    std::vector<std::vector<double>> rows(Q.rows());
    for (int r = 0; r < Q.rows(); ++r) rows[r] = to_std(Q.row(r).transpose());
    j["Q"] = rows;
    j["periods"] = to_std(m.fundamental_domain().extent());
  } else {
    j["kind"] = "log_barrier";
    j["fundamental_domain"] = {m.fundamental_domain().lo[0], m.fundamental_domain().hi[0]};
  }
  return j;
}

void check_model(const RunConfig& c) {
  if (!c.model.is_quadratic()) return;
  for (const auto& r : c.model.check_invariants(8)) {
    if ((r.name == "model.Q_symmetric" || r.name == "model.Q_positive_definite") && !r.pass) {
      throw ConfigError("model.Q", "must be symmetric positive definite (" + r.name + " failed)");
    }
  }
}

SolverOptions grid_options(const RunConfig& c, std::vector<ConvergenceRecord>& log) {
  SolverOptions o;
  if (c.tol) o.tol = *c.tol;
  if (c.max_iters > 0) o.max_iters = c.max_iters;
  o.radius = c.radius;
  if (c.seeded_init) o.seed = c.seed;
  o.on_iterate = [&log](const ConvergenceRecord& r) { log.push_back(r); };
  return o;
}

SemidiscreteOptions semidiscrete_options(const RunConfig& c, std::vector<ConvergenceRecord>& log) {
  SemidiscreteOptions o;
  if (c.tol) o.tol = *c.tol;
  if (c.max_iters > 0) o.max_iters = c.max_iters;
  o.radius = c.radius;
  o.on_iterate = [&log](const ConvergenceRecord& r) { log.push_back(r); };
  return o;
}

json pa_json(const PiecewiseAffineSection& pa) {
  json atoms = json::array();
  for (std::size_t i = 0; i < pa.atoms.size(); ++i) atoms.push_back({{"x", to_std(pa.atoms[i])}, {"psi", pa.potentials[i]}});
  return atoms;
}

// Tiling files; returns a short record for the summary.
json emit_tiling(const RunConfig& c, const PiecewiseAffineSection& pa, const fs::path& dir, std::ostream& log) {
  if (c.model.dim() >= 3) {
    log << "tiling: no V-representation for n >= 3, skipped\n";
    return json{{"skipped", "dimension"}};
  }
  const Box window = c.window ? *c.window : c.model.fundamental_domain();
  const Tiling t = extract_tiling(pa, window);
  json rec{{"cells", t.cells.size()}, {"total_volume", t.total_volume()}};
  for (const auto& f : c.formats) {
    if (f == "json") {
      write_text(dir / "tiling.json", tiling_json(t, pa));
    } else if (f == "svg" && c.model.dim() == 2) {
      write_text(dir / "tiling.svg", tiling_svg(t, pa));
    }
  }
  return rec;
}

struct Outcome {
  json summary;
  std::vector<ConvergenceRecord> log;
  bool converged = false;
};

Outcome solve(const RunConfig& c, const fs::path& dir, bool tiling_only, std::ostream& log) {
  Outcome out;
  json& s = out.summary;
  switch (c.kind) {
    case ProblemKind::MongeAmpere: {
      const auto mu = primal_measure(c, "mu");
      const auto nu = dual_measure(c, "nu");
      const auto st = solve_grid(mu, nu, c.model, grid_options(c, out.log));
      s["value"] = st.F_value;
      s["gradient_norm"] = st.grad_norm;
      s["iterations"] = st.iteration;
      s["osc"] = st.phi.osc();
      s["estimates_ok"] = st.estimates_ok;
      write_array(dir / "u.bin", grid_array(st.phi.grid, st.phi.u));
      out.converged = st.converged;
      break;
    }
    case ProblemKind::Einstein: {
      const EinsteinProblem p{c.model, dual_measure(c, "nu"), primal_measure(c, "mu0"), c.lambda};
      const auto st = solve_einstein(p, grid_options(c, out.log));
      s["value"] = st.F_value;
      s["gradient_norm"] = st.grad_norm;
      s["iterations"] = st.iteration;
      s["osc"] = st.phi.osc();
      s["estimates_ok"] = st.estimates_ok;
      s["lambda"] = c.lambda;
      write_array(dir / "u.bin", grid_array(st.phi.grid, st.phi.u));
      out.converged = st.converged;
      break;
    }
    case ProblemKind::Semidiscrete: {
      const auto mu = atomic_measure(c, "mu");
      const auto nu = dual_measure(c, "nu");
      const auto r = solve_semidiscrete(mu, nu, c.model, semidiscrete_options(c, out.log));
      s["value"] = r.F_value;
      s["iterations"] = r.iterations;
      s["residual"] = r.residual;
      double g = 0.0;
      for (std::size_t i = 0; i < mu.size(); ++i) g = std::max(g, std::abs(r.mass[i] - mu.weights[i]));
      s["gradient_norm"] = g;
      s["atoms"] = pa_json(r.pa);
      s["weights"] = mu.weights;
      s["masses"] = r.mass;
      if (!tiling_only) write_array(dir / "psi.bin", Array{{mu.size()}, r.pa.potentials});
      s["tiling"] = emit_tiling(c, r.pa, dir, log);
      out.converged = true;
      break;
    }
    case ProblemKind::Approximate: {
      const GridSection phi = convexify(approximation_target(c), c.radius);
      PaApproxOptions o;
      o.nu = dual_measure(c, "nu");
      o.seed = c.seed;
      o.semidiscrete = semidiscrete_options(c, out.log);
      const auto r = pa_approximate(phi, c.approx_atoms, o);
      s["sup_error"] = r.error;
      s["osc_target"] = phi.osc();
      s["atoms"] = pa_json(r.pa);
      s["weights"] = r.mu.weights;
      s["iterations"] = out.log.empty() ? 0 : out.log.back().iteration;
      if (!tiling_only) write_array(dir / "u.bin", grid_array(phi.grid, r.u_pa));
      s["tiling"] = emit_tiling(c, r.pa, dir, log);
      out.converged = true;
      break;
    }
  }
  return out;
}

int run_impl(const RunConfig& c, std::ostream& log, bool tiling_only) {
  if (tiling_only && (c.kind == ProblemKind::MongeAmpere || c.kind == ProblemKind::Einstein)) {
    throw ConfigError("problem.kind", "export-tiling needs kind semidiscrete or approximate");
  }
  set_thread_count(c.threads);
  const fs::path dir = c.out_dir;
  fs::create_directories(dir);
  json summary{{"problem", to_string(c.kind)}, {"model", model_json(c.model)}, {"seed", c.seed}};
  Outcome res;
  int code = kOk;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    check_model(c);
    res = solve(c, dir, tiling_only, log);
    summary.update(res.summary);
    summary["converged"] = res.converged;
    summary["partial"] = false;
  } catch (const NotConverged& e) {
    summary["converged"] = false;
    summary["partial"] = true;
    summary["error"] = e.what();
    summary["iterations"] = e.iterations();
    summary["residual"] = e.residual();
    summary["value"] = e.value();
    if (!tiling_only) write_array(dir / "last_iterate.bin", Array{{e.last_iterate().size()}, e.last_iterate()});
    code = kNotConverged;
  } catch (const ConfigError& e) {
    summary["converged"] = false;
    summary["partial"] = true;
    summary["error"] = e.what();
    summary["field"] = e.field();
    code = kConfigError;
  } catch (const Error& e) {
    summary["converged"] = false;
    summary["partial"] = true;
    summary["error"] = e.what();
    code = kNotConverged;
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  summary["exit_code"] = code;
  if (!tiling_only) {
    write_convergence(dir / "convergence.csv", res.log);
    write_text(dir / "summary.json", summary.dump(1) + "\n");
    write_text(dir / "timing.json", json{{"wall_seconds", wall}, {"threads", thread_count()}}.dump(1) + "\n");
  }
  log << to_string(c.kind) << ": " << (code == kOk ? "converged" : code == kConfigError ? "config error" : "not converged");
  if (summary.contains("error") && code != kOk) log << " (" << summary["error"].get<std::string>() << ")";
  log << ", " << wall << " s, artifacts in " << dir.string() << "\n";
  return code;
}

struct Suite {
  std::vector<InvariantReport> reports;
  void add(std::string name, bool pass, double slack) { reports.push_back({std::move(name), pass, slack}); }
};

// Runs f, recording an exception as a failed check of that name.
template <class F>
void guarded(Suite& s, const std::string& name, F&& f) {
  try {
    f();
  } catch (const std::exception& e) {
    s.add(name + " (" + e.what() + ")", false, std::nan(""));
  }
}

}  // namespace

int run(const RunConfig& c, std::ostream& log) { return run_impl(c, log, false); }

int export_tiling(const RunConfig& c, std::ostream& log) { return run_impl(c, log, true); }

int verify(const RunConfig& c, std::ostream& out) {
  set_thread_count(c.threads);
  Suite s;
  bool model_ok = true;
  for (const auto& r : c.model.check_invariants()) {
    s.reports.push_back(r);
    model_ok = model_ok && r.pass;
  }
  const auto& model = c.model;
  if (!model.is_quadratic()) {
    // Generator m acts on slopes by a -> base^{-m} a, exactly.
    guarded(s, "model.dual_action_formula", [&] {
      const DualModel dual = model.dual();
      const double base = model.fundamental_domain().hi[0];
      bool exact = true;
      double worst = 0.0;
      for (int m = -4; m <= 4; ++m) {
        for (double a : {-1.0, -1.5, -1.75, -1.0 / 3.0, -2.0, -0.625}) {
          const double got = dual.element({m})(Vec::Constant(1, a))[0];
          const double want = std::pow(base, -m) * a;
          exact = exact && got == want;
          worst = std::max(worst, std::abs(got - want));
        }
      }
      s.add("model.dual_action_formula", exact, worst);
    });
  }
  const int n = model.dim();
  if (model_ok && n <= 2) {
    const std::vector<int> shape = c.grid.empty() ? std::vector<int>(n, n == 1 ? 128 : 32) : c.grid;
    const Grid g = primal_grid(model, shape);
    GridSection rough = GridSection::zero(model, shape);
    rough.u = random_smooth(g, c.seed + 1, 0.05);
    guarded(s, "legendre.fenchel_young", [&] {
      const auto w = legendre_transform(rough, shape, c.radius);
      double worst = 0.0;
      const std::size_t stride = std::max<std::size_t>(1, g.size() / 64);
      for (std::size_t i = 0; i < g.size(); i += stride) {
        for (std::size_t j = 0; j < w.w.size(); j += stride) {
          const double fy = rough.u[i] + w.w[j] + cost_function(model, g.node(i), w.slope(j), c.radius);
          worst = std::max(worst, -fy);
        }
      }
      s.add("legendre.fenchel_young", worst <= 1e-12, worst);
    });
    guarded(s, "legendre.involution", [&] {
      const auto c1 = convexify(rough, c.radius);
      const auto c2 = convexify(c1, c.radius);
      double below = 0.0, idem = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) {
        below = std::max(below, c1.u[i] - rough.u[i]);
        idem = std::max(idem, std::abs(c2.u[i] - c1.u[i]));
      }
      // Exact up to rounding of the O(1) cost terms.
      const double ulp = 4.0 * std::numeric_limits<double>::epsilon() * (1.0 + sup_norm(rough.u));
      s.add("legendre.convexify_below", below <= ulp, std::max(0.0, below));
      s.add("legendre.convexify_idempotent", idem <= 1e-9, idem);
    });
    guarded(s, "legendre.contraction", [&] {
      GridSection shifted = rough;
      const auto v = random_smooth(g, c.seed + 2, 0.01);
      for (std::size_t i = 0; i < g.size(); ++i) shifted.u[i] += v[i];
      const auto a = legendre_transform(rough, shape, c.radius);
      const auto b = legendre_transform(shifted, shape, c.radius);
      double worst = 0.0;
      for (std::size_t j = 0; j < a.w.size(); ++j) worst = std::max(worst, std::abs(a.w[j] - b.w[j]));
      const double sup_v = sup_norm(v);
      const double ulp = 4.0 * std::numeric_limits<double>::epsilon() * (1.0 + sup_norm(a.w));
      s.add("legendre.contraction", worst <= sup_v + ulp, std::max(0.0, worst - sup_v));
    });
    const GridDensity nu = dual_measure(RunConfig{c}, "nu");
    guarded(s, "measures.mass_conservation", [&] {
      const auto cv = convexify(rough, c.radius);
      const double tot = ma_measure(cv, nu, c.radius).total();
      s.add("measures.mass_conservation", std::abs(tot - 1.0) <= 1e-10, std::abs(tot - 1.0));
      const double osc = cv.osc(), bound = c0_bound(model);
      s.add("solver.c0_estimate", check_c0(cv), std::max(0.0, osc - bound));
      const auto lip = lipschitz_bound_check(cv);
      s.add("solver.lipschitz_estimate", lip.ok, std::max(0.0, lip.constant - lip.bound));
    });
    guarded(s, "solver.gradient_check", [&] {
      GridSection phi = GridSection::zero(model, shape);
      phi.u = random_smooth(g, c.seed + 3, 0.004);
      const auto mu = cosine_density(g, -0.3);
      const auto grad = kantorovich_gradient(phi, mu, nu, c.radius);
      double worst = 0.0;
      for (int dir = 0; dir < 4; ++dir) {
        const auto v = random_smooth(g, c.seed + 10 + dir, 1.0);
        double analytic = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) analytic += v[i] * grad[i];
        const double h = 1e-4;
        GridSection p = phi, m = phi;
        for (std::size_t i = 0; i < g.size(); ++i) {
          p.u[i] += h * v[i];
          m.u[i] -= h * v[i];
        }
        const double numeric = (kantorovich_value(p, mu, nu, c.radius) - kantorovich_value(m, mu, nu, c.radius)) / (2 * h);
        worst = std::max(worst, std::abs(analytic - numeric) / std::max(std::abs(numeric), 1e-12));
      }
      s.add("solver.gradient_check", worst <= 1e-4, worst);
    });
  }
  bool all = true;
  json rep = json::array();
  for (const auto& r : s.reports) {
    all = all && r.pass;
    out << (r.pass ? "PASS " : "FAIL ") << r.name << " slack=" << r.slack << "\n";
    rep.push_back({{"name", r.name}, {"pass", r.pass}, {"slack", std::isfinite(r.slack) ? json(r.slack) : json()}});
  }
  fs::create_directories(c.out_dir);
  write_text(c.out_dir / "verify.json", json{{"model", c.model.name()}, {"checks", rep}, {"pass", all}}.dump(1) + "\n");
  return all ? kOk : kInvariantFailed;
}

int report(const fs::path& dir, std::ostream& out) {
  std::ifstream in(dir / "summary.json");
  if (!in) throw ConfigError("--out", "no summary.json in " + dir.string());
  const json s = json::parse(in);
  out << "problem        " << s.value("problem", "?") << "\n";
  out << "model          " << s["model"].value("name", "?") << "\n";
  out << "converged      " << (s.value("converged", false) ? "yes" : "no") << (s.value("partial", false) ? " (partial)" : "")
      << "\n";
  for (const char* k : {"value", "gradient_norm", "residual", "osc", "sup_error", "iterations"}) {
    if (s.contains(k)) out << std::left << std::setw(15) << k << fmt(s[k].get<double>()) << "\n";
  }
  if (s.contains("error") && s["error"].is_string()) out << "error          " << s["error"].get<std::string>() << "\n";
  if (s.contains("tiling") && s["tiling"].contains("cells")) {
    out << "tiling         " << s["tiling"]["cells"].get<int>() << " cells\n";
  }
  std::ifstream t(dir / "timing.json");
  if (t) out << "wall           " << json::parse(t).value("wall_seconds", 0.0) << " s\n";
  std::ifstream csv(dir / "convergence.csv");
  std::string line, first, last;
  std::getline(csv, line);
  int rows = 0;
  while (std::getline(csv, line)) {
    if (rows++ == 0) first = line;
    last = line;
  }
  if (rows > 0) out << "log            " << rows << " rows\n  first " << first << "\n  last  " << last << "\n";
  return kOk;
}

}  // namespace hma::cli
