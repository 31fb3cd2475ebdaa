// SPDX-License-Identifier: Apache-2.0
#include "config.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>

#include "arrays.hpp"
#include "hma/errors.hpp"

namespace hma::cli {

using nlohmann::json;

namespace {

void allow_keys(const json& j, const std::string& where, const std::set<std::string>& keys) {
  if (!j.is_object()) throw ConfigError(where, "expected an object");
  for (const auto& [k, v] : j.items()) {
    if (!keys.count(k)) throw ConfigError(where.empty() ? k : where + "." + k, "unknown key");
  }
}

template <class T>
T get(const json& j, const std::string& key, const std::string& field) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(field, j.contains(key) ? "wrong type" : "missing");
  }
}

template <class T>
T get_or(const json& j, const std::string& key, const std::string& field, T fallback) {
  return j.contains(key) ? get<T>(j, key, field) : fallback;
}

Vec to_vec(const std::vector<double>& v) {
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

HessianModel parse_model(const json& j) {
  allow_keys(j, "model", {"kind", "dimension", "Q", "periods", "base"});
  const auto kind = get<std::string>(j, "kind", "model.kind");
  if (kind == "log_barrier") {
    const double base = get_or<double>(j, "base", "model.base", 2.0);
    if (!(base > 1.0)) throw ConfigError("model.base", "must exceed 1");
    if (j.contains("Q") || j.contains("periods")) throw ConfigError("model", "Q and periods belong to torus models");
    if (get_or<int>(j, "dimension", "model.dimension", 1) != 1) throw ConfigError("model.dimension", "log_barrier is 1D");
    return HessianModel::log_barrier(base);
  }
  if (kind != "torus") throw ConfigError("model.kind", "expected torus or log_barrier, got '" + kind + "'");
  int n = get_or<int>(j, "dimension", "model.dimension", 0);
  std::vector<double> periods;
  if (j.contains("periods")) {
    periods = get<std::vector<double>>(j, "periods", "model.periods");
    if (n == 0) n = static_cast<int>(periods.size());
  }
  if (n < 1) throw ConfigError("model.dimension", "missing or not positive");
  if (periods.empty()) periods.assign(n, 1.0);
  if (static_cast<int>(periods.size()) != n) throw ConfigError("model.periods", "length differs from dimension");
  for (double p : periods) {
    if (!(p > 0.0) || !std::isfinite(p)) throw ConfigError("model.periods", "must be positive");
  }
  Mat Q = Mat::Identity(n, n);
  if (j.contains("Q")) {
    const auto rows = get<std::vector<std::vector<double>>>(j, "Q", "model.Q");
    if (static_cast<int>(rows.size()) != n) throw ConfigError("model.Q", "must be n x n");
    for (int r = 0; r < n; ++r) {
      if (static_cast<int>(rows[r].size()) != n) throw ConfigError("model.Q", "must be n x n");
      for (int c = 0; c < n; ++c) Q(r, c) = rows[r][c];
    }
  }
  return HessianModel::torus(Q, to_vec(periods));
}

std::vector<int> parse_shape(const json& j, const std::string& key, const std::string& field, int n) {
  const auto s = get<std::vector<int>>(j, key, field);
  if (static_cast<int>(s.size()) != n) throw ConfigError(field, "needs one extent per dimension");
  for (int e : s) {
    if (e < 2) throw ConfigError(field, "extents must be at least 2");
  }
  return s;
}

const json& measure_json(const RunConfig& c, const std::string& key) {
  const json& m = c.raw.at("measures");
  if (!m.contains(key)) throw ConfigError("measures." + key, "missing");
  return m.at(key);
}

GridDensity grid_measure(const RunConfig& c, const std::string& key, const Grid& grid, bool dual) {
  const std::string f = "measures." + key;
  const json j = c.raw.contains("measures") && c.raw["measures"].contains(key) ? c.raw["measures"][key]
                                                                                : json{{"kind", "uniform"}};
  const auto kind = get<std::string>(j, "kind", f + ".kind");
  try {
    if (kind == "uniform") {
      allow_keys(j, f, {"kind"});
      return dual ? slope_uniform_density(c.model.dual(), grid) : uniform_density(grid);
    }
    if (kind == "cosine") {
      allow_keys(j, f, {"kind", "amplitude", "axis", "frequency"});
      const double a = get<double>(j, "amplitude", f + ".amplitude");
      const int axis = get_or<int>(j, "axis", f + ".axis", 0);
      const int freq = get_or<int>(j, "frequency", f + ".frequency", 1);
      if (!(std::abs(a) < 1.0)) throw ConfigError(f + ".amplitude", "|amplitude| must be below 1");
      if (axis < 0 || axis >= grid.dim()) throw ConfigError(f + ".axis", "out of range");
      if (freq < 1) throw ConfigError(f + ".frequency", "must be positive");
      return cosine_density(grid, a, axis, freq);
    }
    if (kind == "gaussian") {
      allow_keys(j, f, {"kind", "center", "sigma"});
      const auto center = get<std::vector<double>>(j, "center", f + ".center");
      const double sigma = get<double>(j, "sigma", f + ".sigma");
      if (static_cast<int>(center.size()) != grid.dim()) throw ConfigError(f + ".center", "wrong dimension");
      if (!(sigma > 0.0)) throw ConfigError(f + ".sigma", "must be positive");
      return gaussian_density(grid, to_vec(center), sigma);
    }
    if (kind == "array") {
      allow_keys(j, f, {"kind", "path"});
      const Array a = read_array(c.base_dir / get<std::string>(j, "path", f + ".path"), f + ".path");
      if (a.shape.size() != grid.shape.size()) throw ConfigError(f + ".path", "array rank differs from grid");
      for (std::size_t k = 0; k < a.shape.size(); ++k) {
        if (a.shape[k] != static_cast<std::uint64_t>(grid.shape[k])) {
          throw ConfigError(f + ".path", "array shape differs from grid");
        }
      }
      return density_from_masses(grid, a.data);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(f, e.what());
  }
  throw ConfigError(f + ".kind", "unknown measure kind '" + kind + "'");
}

}  // namespace

const char* to_string(ProblemKind k) {
  switch (k) {
    case ProblemKind::MongeAmpere:
      return "monge_ampere";
    case ProblemKind::Einstein:
      return "einstein";
    case ProblemKind::Semidiscrete:
      return "semidiscrete";
    case ProblemKind::Approximate:
      return "approximate";
  }
  return "?";
}

RunConfig load_config(const std::filesystem::path& path, const Overrides& ov) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", std::string("parse error: ") + e.what());
  }
  return parse_config(j, path.parent_path(), ov);
}

RunConfig parse_config(const json& j, const std::filesystem::path& base_dir, const Overrides& ov) {
  // "//" is a free-form comment (license line in the shipped configs).
  allow_keys(j, "", {"//", "model", "measures", "problem", "numeric", "outputs"});
  RunConfig c;
  c.base_dir = base_dir;
  c.raw = j;
  if (!j.contains("model")) throw ConfigError("model", "missing");
  c.model = parse_model(j["model"]);
  const int n = c.model.dim();

  const json problem = j.value("problem", json::object());
  allow_keys(problem, "problem", {"kind", "lambda", "atoms", "section"});
  const auto kind = get_or<std::string>(problem, "kind", "problem.kind", "monge_ampere");
  if (kind == "monge_ampere") {
    c.kind = ProblemKind::MongeAmpere;
  } else if (kind == "einstein") {
    c.kind = ProblemKind::Einstein;
  } else if (kind == "semidiscrete") {
    c.kind = ProblemKind::Semidiscrete;
  } else if (kind == "approximate") {
    c.kind = ProblemKind::Approximate;
  } else {
    throw ConfigError("problem.kind", "unknown problem kind '" + kind + "'");
  }
  if (problem.contains("lambda")) {
    if (c.kind != ProblemKind::Einstein) throw ConfigError("problem.lambda", "only valid with kind einstein");
    c.lambda = get<double>(problem, "lambda", "problem.lambda");
    if (!std::isfinite(c.lambda)) throw ConfigError("problem.lambda", "must be finite");
  }
  if (problem.contains("atoms")) {
    if (c.kind != ProblemKind::Approximate) throw ConfigError("problem.atoms", "only valid with kind approximate");
    c.approx_atoms = get<int>(problem, "atoms", "problem.atoms");
    if (c.approx_atoms < 1) throw ConfigError("problem.atoms", "must be positive");
  } else if (c.kind == ProblemKind::Approximate) {
    throw ConfigError("problem.atoms", "missing");
  }
  if (problem.contains("section") && c.kind != ProblemKind::Approximate) {
    throw ConfigError("problem.section", "only valid with kind approximate");
  }

  const json measures = j.value("measures", json::object());
  allow_keys(measures, "measures", {"mu", "nu", "mu0"});
  auto is_atomic = [&](const std::string& key) {
    if (!measures.contains(key)) return false;
    const auto k = get<std::string>(measures[key], "kind", "measures." + key + ".kind");
    return k == "atomic" || k == "random_atoms";
  };
  if (measures.contains("mu0") && c.kind != ProblemKind::Einstein) {
    throw ConfigError("measures.mu0", "only valid with kind einstein");
  }
  if (c.kind == ProblemKind::Einstein && measures.contains("mu")) {
    throw ConfigError("measures.mu", "einstein problems take mu0, not mu");
  }
  if (c.kind == ProblemKind::Semidiscrete && !is_atomic("mu")) {
    throw ConfigError("measures.mu", "semidiscrete problems need an atomic mu");
  }
  if (c.kind != ProblemKind::Semidiscrete && is_atomic("mu")) {
    throw ConfigError("measures.mu", "atoms are only valid with kind semidiscrete");
  }
  if (c.kind == ProblemKind::Approximate && measures.contains("mu")) {
    throw ConfigError("measures.mu", "approximate derives mu from problem.section");
  }
  if (is_atomic("nu") || is_atomic("mu0")) throw ConfigError(is_atomic("nu") ? "measures.nu" : "measures.mu0", "must be a density");

  const json numeric = j.value("numeric", json::object());
  allow_keys(numeric, "numeric", {"grid", "dual_grid", "radius", "tol", "max_iters", "seed", "random_init", "threads"});
  if (numeric.contains("grid")) {
    c.grid = parse_shape(numeric, "grid", "numeric.grid", n);
  } else if (c.kind != ProblemKind::Semidiscrete) {
    throw ConfigError("numeric.grid", "missing");
  }
  if (numeric.contains("dual_grid")) {
    c.dual_grid = parse_shape(numeric, "dual_grid", "numeric.dual_grid", n);
  } else {
    c.dual_grid = c.grid.empty() ? std::vector<int>(n, n == 1 ? 1024 : 256) : c.grid;
  }
  c.radius = get_or<int>(numeric, "radius", "numeric.radius", -1);
  if (numeric.contains("tol")) c.tol = get<double>(numeric, "tol", "numeric.tol");
  c.max_iters = get_or<int>(numeric, "max_iters", "numeric.max_iters", -1);
  c.seed = get_or<std::uint64_t>(numeric, "seed", "numeric.seed", 0);
  c.seeded_init = get_or<bool>(numeric, "random_init", "numeric.random_init", false);
  c.threads = get_or<int>(numeric, "threads", "numeric.threads", 0);

  const json outputs = j.value("outputs", json::object());
  allow_keys(outputs, "outputs", {"directory", "formats", "window"});
  if (outputs.contains("directory")) c.out_dir = c.base_dir / get<std::string>(outputs, "directory", "outputs.directory");
  if (outputs.contains("formats")) {
    c.formats = get<std::vector<std::string>>(outputs, "formats", "outputs.formats");
    for (const auto& f : c.formats) {
      if (f != "json" && f != "svg") throw ConfigError("outputs.formats", "unknown format '" + f + "'");
    }
  }
  if (outputs.contains("window")) {
    const json& w = outputs["window"];
    allow_keys(w, "outputs.window", {"lo", "hi"});
    const auto lo = get<std::vector<double>>(w, "lo", "outputs.window.lo");
    const auto hi = get<std::vector<double>>(w, "hi", "outputs.window.hi");
    if (static_cast<int>(lo.size()) != n || static_cast<int>(hi.size()) != n) {
      throw ConfigError("outputs.window", "wrong dimension");
    }
    Box b{to_vec(lo), to_vec(hi)};
    if (!(b.extent().array() > 0.0).all()) throw ConfigError("outputs.window", "lo must be below hi");
    if (!c.model.in_domain(b.lo)) throw ConfigError("outputs.window.lo", "outside the domain");
    c.window = b;
  }

  if (ov.out) c.out_dir = *ov.out;
  if (ov.seed) c.seed = *ov.seed;
  if (ov.threads) c.threads = *ov.threads;
  if (ov.radius) c.radius = *ov.radius;
  if (ov.tol) c.tol = *ov.tol;
  if (c.tol && !(*c.tol > 0.0)) throw ConfigError("numeric.tol", "must be positive");
  if (c.max_iters == 0 || c.max_iters < -1) throw ConfigError("numeric.max_iters", "must be positive");
  if (c.threads < 0) throw ConfigError("numeric.threads", "must be nonnegative");
  if (c.radius < -1) throw ConfigError("numeric.radius", "must be nonnegative");
  return c;
}

GridDensity primal_measure(const RunConfig& c, const std::string& key) {
  return grid_measure(c, key, primal_grid(c.model, c.grid), false);
}

GridDensity dual_measure(const RunConfig& c, const std::string& key) {
  const DualModel dual = c.model.dual();
  return grid_measure(c, key, hma::dual_grid(dual, c.dual_grid), true);
}

AtomicMeasure atomic_measure(const RunConfig& c, const std::string& key) {
  const std::string f = "measures." + key;
  const json& j = measure_json(c, key);
  const auto kind = get<std::string>(j, "kind", f + ".kind");
  const int n = c.model.dim();
  std::vector<Vec> pts;
  std::vector<double> w;
  if (kind == "atomic") {
    allow_keys(j, f, {"kind", "points", "weights"});
    const auto p = get<std::vector<std::vector<double>>>(j, "points", f + ".points");
    w = get<std::vector<double>>(j, "weights", f + ".weights");
    if (p.empty()) throw ConfigError(f + ".points", "empty");
    if (p.size() != w.size()) throw ConfigError(f + ".weights", "one weight per point");
    for (const auto& x : p) {
      if (static_cast<int>(x.size()) != n) throw ConfigError(f + ".points", "wrong dimension");
      pts.push_back(to_vec(x));
      if (!c.model.in_domain(pts.back())) throw ConfigError(f + ".points", "point outside the domain");
    }
  } else {
    allow_keys(j, f, {"kind", "count"});
    const int count = get<int>(j, "count", f + ".count");
    if (count < 1) throw ConfigError(f + ".count", "must be positive");
    std::mt19937_64 rng(c.seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const Box& fd = c.model.fundamental_domain();
    for (int k = 0; k < count; ++k) {
      Vec x(n);
      for (int a = 0; a < n; ++a) x[a] = fd.lo[a] + u(rng) * fd.extent()[a];
      pts.push_back(x);
      w.push_back(0.5 + u(rng));
    }
  }
  double total = 0.0;
  for (double v : w) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(f + ".weights", "must be positive");
    total += v;
  }
  for (double& v : w) v /= total;
  try {
    return make_atomic(c.model, pts, w);
  } catch (const Error& e) {
    throw ConfigError(f, e.what());
  }
}

GridSection approximation_target(const RunConfig& c) {
  const std::string f = "problem.section";
  const json j = c.raw.at("problem").value("section", json{{"kind", "zero"}});
  const auto kind = get<std::string>(j, "kind", f + ".kind");
  GridSection s = GridSection::zero(c.model, c.grid);
  if (kind == "zero") {
    allow_keys(j, f, {"kind"});
    return s;
  }
  if (kind == "cosine") {
    allow_keys(j, f, {"kind", "amplitude", "axis", "frequency"});
    const double a = get<double>(j, "amplitude", f + ".amplitude");
    const int axis = get_or<int>(j, "axis", f + ".axis", 0);
    const int freq = get_or<int>(j, "frequency", f + ".frequency", 1);
    if (axis < 0 || axis >= c.model.dim()) throw ConfigError(f + ".axis", "out of range");
    for (std::size_t i = 0; i < s.u.size(); ++i) {
      const double t = (s.grid.unravel(i)[axis] + 0.5) / s.grid.shape[axis];
      s.u[i] = a * std::cos(2.0 * std::numbers::pi * freq * t);
    }
    return s;
  }
  if (kind == "array") {
    allow_keys(j, f, {"kind", "path"});
    const Array a = read_array(c.base_dir / get<std::string>(j, "path", f + ".path"), f + ".path");
    if (a.data.size() != s.u.size()) throw ConfigError(f + ".path", "array size differs from grid");
    s.u = a.data;
    return s;
  }
  throw ConfigError(f + ".kind", "unknown section kind '" + kind + "'");
}

}  // namespace hma::cli
