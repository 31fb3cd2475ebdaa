// SPDX-License-Identifier: Apache-2.0
#include "hma/solver.hpp"

#include <Eigen/SparseCholesky>
#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <random>

#include "hma/errors.hpp"

namespace hma {

namespace {

std::vector<Vec> nodes_of(const Grid& g) {
  std::vector<Vec> x(g.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = g.node(i);
  return x;
}

LaguerreResult laguerre_of(const GridSection& phi, const GridDensity& nu, int radius, bool vertices,
                           bool couplings = false) {
  LaguerreOptions o;
  o.radius = radius;
  o.vertices = vertices;
  o.couplings = couplings;
  return laguerre(phi.model, nodes_of(phi.grid), phi.u, nu, o);
}

void require_same_grid(const GridSection& phi, const GridDensity& mu) {
  if (mu.grid.shape != phi.grid.shape) throw DomainError("mu must live on the grid of phi");
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Solves (sum_k w_k L_k + shift) d = g on a periodic grid, L_k the 1D second
// difference along axis k, with the constant mode of d set to zero.
class LaplacePreconditioner {
 public:
  LaplacePreconditioner(std::vector<int> shape, std::vector<double> w, double shift)
      : shape_(std::move(shape)), w_(std::move(w)), shift_(shift) {}

  std::vector<double> solve(const std::vector<double>& g) const {
    const int n = static_cast<int>(shape_.size());
    std::vector<std::complex<double>> data(g.begin(), g.end());
    transform(data, false);
    std::size_t total = data.size();
    for (std::size_t flat = 0; flat < total; ++flat) {
      double lambda = shift_;
      std::size_t rest = flat;
      bool zero = true;
      for (int k = n - 1; k >= 0; --k) {
        const int j = static_cast<int>(rest % shape_[k]);
        rest /= shape_[k];
        if (j != 0) zero = false;
        lambda += w_[k] * (2.0 - 2.0 * std::cos(2.0 * std::numbers::pi * j / shape_[k]));
      }
      data[flat] = zero ? 0.0 : data[flat] / lambda;
    }
    transform(data, true);
    std::vector<double> d(total);
    for (std::size_t i = 0; i < total; ++i) d[i] = data[i].real();
    return d;
  }

 private:
  // Row-major: axis k has stride prod of later extents.
  void transform(std::vector<std::complex<double>>& data, bool inverse) const {
    Eigen::FFT<double> fft;
    const int n = static_cast<int>(shape_.size());
    std::size_t stride = 1;
    for (int k = n - 1; k >= 0; --k) {
      const std::size_t m = static_cast<std::size_t>(shape_[k]);
      const std::size_t outer = data.size() / (m * stride);
      std::vector<std::complex<double>> line(m), out(m);
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t s = 0; s < stride; ++s) {
          const std::size_t base = o * m * stride + s;
          for (std::size_t j = 0; j < m; ++j) line[j] = data[base + j * stride];
          if (inverse) {
            fft.inv(out, line);
          } else {
            fft.fwd(out, line);
          }
          for (std::size_t j = 0; j < m; ++j) data[base + j * stride] = out[j];
        }
      }
      stride *= m;
    }
  }

  std::vector<int> shape_;
  std::vector<double> w_;
  double shift_;
};

// Laplacian weights approximating -d mass / d u: per axis, the coupling of two
// neighboring nodes for phi = phi0. 1D uses the mean of the actual couplings.
std::vector<double> laplacian_weights(const GridSection& phi, const GridDensity& nu, int radius) {
  const int n = phi.grid.dim();
  std::vector<double> w(n, 1.0);
  if (n == 1) {
    const GridSection flat{phi.model, phi.grid, std::vector<double>(phi.u.size(), 0.0)};
    const auto r = laguerre_of(flat, nu, radius, false, true);
    double s = 0.0;
    for (const auto& c : r.couplings) s += c.value();
    if (!r.couplings.empty()) w[0] = s / static_cast<double>(r.couplings.size());
    return w;
  }
  const Mat& Q = phi.model.quadratic_form();
  const Vec P = phi.model.fundamental_domain().extent();
  const double rho = 1.0 / P.prod();
  for (int k = 0; k < n; ++k) {
    double others = 1.0;
    for (int j = 0; j < n; ++j) {
      if (j != k) others *= phi.grid.spacing(j);
    }
    w[k] = rho * others / (0.5 * (Q(k, k) + Q(k, k)) * phi.grid.spacing(k));
  }
  return w;
}

// Lowers nodes with empty cells onto the envelope; returns whether anything changed.
bool lower_empty(GridSection& phi, const LaguerreResult& r) {
  const auto empty = r.empty_sites();
  for (int i : empty) {
    const Vec x = phi.grid.node(static_cast<std::size_t>(i));
    phi.u[i] = std::min(phi.u[i], envelope_conjugate(phi.model, r, x) - phi.model.reference_potential(x));
  }
  return !empty.empty();
}

ConvergenceRecord make_record(int it, double value, double resid, double step, double extra, const GridSection& phi) {
  ConvergenceRecord rec;
  rec.iteration = it;
  rec.value = value;
  rec.residual = resid;
  rec.step = step;
  rec.extra = extra;
  rec.osc = phi.osc();
  rec.c0_ok = check_c0(phi);
  rec.lipschitz_ok = lipschitz_bound_check(phi).ok;
  return rec;
}

}  // namespace

void check_nu_floor(const GridDensity& nu, double floor) {
  const double mean = nu.total() / static_cast<double>(nu.mass.size());
  for (std::size_t j = 0; j < nu.mass.size(); ++j) {
    if (!(nu.mass[j] > floor * mean)) throw NuDegenerate("nu must have full support on the dual grid");
  }
}

double kantorovich_value(const GridSection& phi, const GridDensity& mu, const GridDensity& nu, int radius) {
  require_same_grid(phi, mu);
  const auto r = laguerre_of(phi, nu, radius, false);
  const GridSection flat{phi.model, phi.grid, std::vector<double>(phi.u.size(), 0.0)};
  const auto r0 = laguerre_of(flat, nu, radius, false);
  return dot(mu.mass, phi.u) + r.integral - r0.integral;
}

std::vector<double> kantorovich_gradient(const GridSection& phi, const GridDensity& mu, const GridDensity& nu,
                                         int radius) {
  require_same_grid(phi, mu);
  const auto r = laguerre_of(phi, nu, radius, false);
  std::vector<double> g(mu.mass.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = mu.mass[i] - r.mass[i];
  return g;
}

double residual_density(const Grid& grid, const std::vector<double>& g) {
  double vol = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) vol += grid.cell_volume(i);
  double worst = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) worst = std::max(worst, std::abs(g[i]) * vol / grid.cell_volume(i));
  return worst;
}

std::vector<double> project_node_convex(const GridSection& phi, const GridDensity& nu, int radius) {
  GridSection out = phi;
  lower_empty(out, laguerre_of(out, nu, radius, true));
  return out.u;
}

std::vector<double> random_smooth(const Grid& grid, std::uint64_t seed, double amplitude) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int n = grid.dim();
  constexpr int kModes = 3;
  std::vector<double> a(static_cast<std::size_t>(n) * kModes), b(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double decay = 1.0 / std::pow(static_cast<double>(k % kModes + 1), 2);
    a[k] = normal(rng) * decay;
    b[k] = normal(rng) * decay;
  }
  std::vector<double> u(grid.size(), 0.0);
  for (std::size_t i = 0; i < u.size(); ++i) {
    const auto idx = grid.unravel(i);
    for (int k = 0; k < n; ++k) {
      const double t = (idx[k] + 0.5) / grid.shape[k];
      for (int j = 0; j < kModes; ++j) {
        const double arg = 2.0 * std::numbers::pi * (j + 1) * t;
        u[i] += a[k * kModes + j] * std::cos(arg) + b[k * kModes + j] * std::sin(arg);
      }
    }
  }
  const double s = sup_norm(u);
  if (s > 0.0) {
    for (double& v : u) v *= amplitude / s;
  }
  return u;
}

KantorovichState projected_descent(GridSection init, const DescentProblem& problem, const SolverOptions& opts) {
  KantorovichState st{std::move(init)};
  GridSection& phi = st.phi;

  auto settle = [&](GridSection& s, LaguerreResult& r) {
    r = laguerre_of(s, problem.nu, opts.radius, true);
    if (lower_empty(s, r)) {
      problem.normalize(s);
      r = laguerre_of(s, problem.nu, opts.radius, true);
    } else {
      // The normalization shift leaves every cell and mass unchanged.
      const std::vector<double> before = s.u;
      problem.normalize(s);
      if (s.u != before) r = laguerre_of(s, problem.nu, opts.radius, true);
    }
  };

  LaguerreResult r;
  settle(phi, r);
  std::vector<double> grad;
  double extra = 0.0;
  double value = problem.evaluate(phi, r, grad, extra);
  const LaplacePreconditioner pre(phi.grid.shape, laplacian_weights(phi, problem.nu, opts.radius), problem.shift);

  double step = 0.0;
  for (int it = 0;; ++it) {
    const double resid = residual_density(phi.grid, grad);
    ConvergenceRecord rec = make_record(it, value, resid, step, extra, phi);
    st.estimates_ok = st.estimates_ok && rec.c0_ok && rec.lipschitz_ok;
    st.log.push_back(rec);
    if (opts.on_iterate) opts.on_iterate(rec);
    st.iteration = it;
    st.F_value = value;
    st.grad_norm = resid;
    if (resid <= opts.tol) {
      st.converged = true;
      return st;
    }
    if (it >= opts.max_iters) {
      throw NotConverged(std::string(problem.name) + ": iteration limit reached", it, resid, value, phi.u);
    }

    std::vector<double> d = pre.solve(grad);
    for (double& v : d) v = -v;
    const double slope = dot(grad, d);
    double t = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < 40; ++bt, t *= 0.5) {
      GridSection trial = phi;
      for (std::size_t i = 0; i < d.size(); ++i) trial.u[i] += t * d[i];
      LaguerreResult rt;
      settle(trial, rt);
      std::vector<double> gt;
      double et = 0.0;
      const double vt = problem.evaluate(trial, rt, gt, et);
      if (vt <= value + 1e-4 * t * slope + 1e-13) {
        phi = std::move(trial);
        r = std::move(rt);
        grad = std::move(gt);
        value = vt;
        extra = et;
        accepted = true;
        break;
      }
    }
    if (!accepted) throw NotConverged(std::string(problem.name) + ": line search stalled", it, resid, value, phi.u);
    step = t;
  }
}

KantorovichState solve_grid(const GridDensity& mu, const GridDensity& nu, const HessianModel& model,
                            const SolverOptions& opts) {
  check_probability(mu, "mu");
  check_probability(nu, "nu");
  check_nu_floor(nu, opts.nu_floor);
  GridSection init = GridSection::zero(model, mu.grid.shape);
  if (opts.seed) init.u = random_smooth(init.grid, *opts.seed, opts.init_amplitude);

  const GridSection flat = GridSection::zero(model, mu.grid.shape);
  const double J0 = laguerre_of(flat, nu, opts.radius, false).integral;

  DescentProblem problem;
  problem.nu = nu;
  problem.evaluate = [&](const GridSection& phi, const LaguerreResult& r, std::vector<double>& grad, double&) {
    grad.resize(mu.mass.size());
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = mu.mass[i] - r.mass[i];
    return dot(mu.mass, phi.u) + r.integral - J0;
  };
  problem.normalize = [&](GridSection& phi) {
    const double c = dot(mu.mass, phi.u);
    for (double& v : phi.u) v -= c;
  };
  KantorovichState st = projected_descent(std::move(init), problem, opts);
  st.normalization = Normalization::MeanZeroAgainstMu;
  return st;
}

SemidiscreteResult solve_semidiscrete(const AtomicMeasure& mu, const GridDensity& nu, const HessianModel& model,
                                      const SemidiscreteOptions& opts) {
  check_probability(nu, "nu");
  check_nu_floor(nu, opts.nu_floor);
  const int N = static_cast<int>(mu.size());
  const double lmin = mu.min_weight();
  // Masses are differences of O(1) envelope quantities; below this they are roundoff.
  const double floor_abs = 64.0 * std::numeric_limits<double>::epsilon();
  const double tol_rel = std::max(opts.tol, floor_abs / lmin);
  LaguerreOptions lo;
  lo.radius = opts.radius;
  lo.couplings = true;

  std::vector<double> psi(N, 0.0);
  auto F_of = [&](const std::vector<double>& p, const LaguerreResult& r) { return dot(mu.weights, p) + r.integral; };
  LaguerreResult r = laguerre(model, mu.points, psi, nu, lo);
  double F = F_of(psi, r);
  double step = 0.0;

  SemidiscreteResult out{PiecewiseAffineSection{model, mu.points, psi, opts.radius}};
  for (int it = 0;; ++it) {
    Eigen::VectorXd g(N);
    double resid = 0.0;
    for (int i = 0; i < N; ++i) {
      g[i] = mu.weights[i] - r.mass[i];
      resid = std::max(resid, std::abs(g[i]) / lmin);
    }
    ConvergenceRecord rec;
    rec.iteration = it;
    rec.value = F;
    rec.residual = resid;
    rec.step = step;
    out.log.push_back(rec);
    if (opts.on_iterate) opts.on_iterate(rec);
    if (resid <= tol_rel) {
      out.iterations = it;
      out.residual = resid;
      break;
    }
    if (it >= opts.max_iters) throw NotConverged("solve_semidiscrete: iteration limit reached", it, resid, F, psi);

    Eigen::SparseMatrix<double> H = mass_jacobian(r, N);
    Eigen::SparseMatrix<double> I(N, N);
    I.setIdentity();
    H += (1e-8 * N) * I;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(H);
    if (ldlt.info() != Eigen::Success) throw NotConverged("solve_semidiscrete: Hessian factorization failed", it, resid, F, psi);
    const Eigen::VectorXd d = ldlt.solve(-g);
    const double slope = g.dot(d);

    const double cur_min = *std::min_element(r.mass.begin(), r.mass.end());
    const double floor = 0.5 * std::min(lmin, cur_min);
    double t = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt, t *= 0.5) {
      std::vector<double> trial(psi);
      for (int i = 0; i < N; ++i) trial[i] += t * d[i];
      LaguerreResult rt = laguerre(model, mu.points, trial, nu, lo);
      const double mt = *std::min_element(rt.mass.begin(), rt.mass.end());
      const double Ft = F_of(trial, rt);
      if (mt >= floor && Ft <= F + 1e-4 * t * slope + 1e-15) {
        psi = std::move(trial);
        r = std::move(rt);
        F = Ft;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      const auto empty = r.empty_sites();
      if (!empty.empty()) throw EmptyCell("solve_semidiscrete: cell vanished and damping failed", empty.front());
      throw NotConverged("solve_semidiscrete: line search stalled", it, resid, F, psi);
    }
    step = t;
  }

  // Mean zero against the weights; masses and cells are unchanged.
  const double c = dot(mu.weights, psi);
  for (double& v : psi) v -= c;
  out.F_value = F;
  out.mass = r.mass;
  out.pa = PiecewiseAffineSection{model, mu.points, psi, opts.radius};
  return out;
}

double c0_bound(const HessianModel& model) {
  const Box& fd = model.fundamental_domain();
  const int n = model.dim();
  GroupIndex all(model.generators().size(), 1);
  const Vec hi2 = model.element(all)(fd.hi);
  // Corners of K = [lo, hi2]; the segment functional is convex in the
  // endpoints for the catalog potentials, so corners attain the sup.
  std::vector<Vec> corners;
  for (int c = 0; c < (1 << n); ++c) {
    Vec x(n);
    for (int k = 0; k < n; ++k) x[k] = (c >> k) & 1 ? hi2[k] : fd.lo[k];
    corners.push_back(x);
  }
  double best = 0.0;
  for (const auto& a : corners) {
    for (const auto& b : corners) best = std::max(best, model.segment_hessian_integral(a, b));
  }
  return best;
}

bool check_c0(const GridSection& phi) { return phi.osc() <= c0_bound(phi.model); }

LipschitzCheck lipschitz_bound_check(const GridSection& phi) {
  const HessianModel& model = phi.model;
  const Box& fd = model.fundamental_domain();
  double r, second;
  if (model.is_quadratic()) {
    r = fd.extent().minCoeff();
    const Mat Q = 0.5 * (model.quadratic_form() + model.quadratic_form().transpose());
    second = r * r * Eigen::SelfAdjointEigenSolver<Mat>(Q).eigenvalues().maxCoeff();
  } else {
    // x - r must stay in (0, inf) for x >= lo.
    r = 0.5 * fd.lo[0];
    second = -std::log(1.0 - r * r / (fd.lo[0] * fd.lo[0]));
  }
  LipschitzCheck out;
  out.bound = (phi.osc() + second) / r;
  for (std::size_t i = 0; i < phi.u.size(); ++i) {
    const auto idx = phi.grid.unravel(i);
    for (int k = 0; k < phi.grid.dim(); ++k) {
      const double t = idx[k] + 0.5;
      const double h = phi.grid.coord(k, t + 1.0) - phi.grid.coord(k, t);
      out.constant = std::max(out.constant, std::abs(phi.u[phi.grid.neighbor(i, k, 1)] - phi.u[i]) / h);
    }
  }
  out.ok = out.constant <= out.bound;
  return out;
}

}  // namespace hma
