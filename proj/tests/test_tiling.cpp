// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <json.hpp>

#include "hma/errors.hpp"
#include "hma/legendre.hpp"
#include "hma/tiling.hpp"

using namespace hma;

namespace {

constexpr double kPi = std::numbers::pi;

Vec v1(double a) { return Vec::Constant(1, a); }
Vec v2(double a, double b) {
  Vec x(2);
  x << a, b;
  return x;
}

Box box1(double lo, double hi) { return Box{v1(lo), v1(hi)}; }

struct Random2d {
  AtomicMeasure mu;
  SemidiscreteResult res;
  GridDensity nu;
};

const Random2d& random_2d() {
  static const Random2d r = [] {
    const auto model = HessianModel::unit_torus(2);
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Vec> pts;
    std::vector<double> w;
    double total = 0.0;
    for (int k = 0; k < 10; ++k) {
      pts.push_back(v2(u(rng), u(rng)));
      w.push_back(0.5 + u(rng));
      total += w.back();
    }
    for (double& v : w) v /= total;
    auto mu = make_atomic(model, pts, w);
    auto nu = uniform_density(dual_grid(model.dual(), {512, 512}));
    auto res = solve_semidiscrete(mu, nu, model);
    return Random2d{std::move(mu), std::move(res), std::move(nu)};
  }();
  return r;
}

}  // namespace

TEST(PaEvaluate, SingleAtomMatchesEnumeration) {
  const PiecewiseAffineSection pa{HessianModel::unit_torus(1), {v1(0.0)}, {0.0}, -1};
  for (double x : {0.3, 0.7, 0.05}) {
    double best = -1e300;
    int arg = 0;
    for (int m = -8; m <= 8; ++m) {
      const double v = -0.5 * (x - m) * (x - m);
      if (v > best) {
        best = v;
        arg = m;
      }
    }
    const auto r = pa_evaluate(pa, v1(x));
    EXPECT_NEAR(r.relative, best, 1e-15);
    EXPECT_NEAR(r.value, best + 0.5 * x * x, 1e-15);
    EXPECT_EQ(r.word, GroupIndex{arg});
    EXPECT_FALSE(r.tie);
  }
  EXPECT_EQ(pa_evaluate(pa, v1(0.3)).word, GroupIndex{0});
}

TEST(PaEvaluate, SymmetricTieAndDominance) {
  const auto model = HessianModel::unit_torus(1);
  const PiecewiseAffineSection pa{model, {v1(0.25), v1(0.75)}, {0.0, 0.0}, -1};
  EXPECT_TRUE(pa_evaluate(pa, v1(0.5)).tie);
  EXPECT_FALSE(pa_evaluate(pa, v1(0.4)).tie);

  const auto t2 = HessianModel::unit_torus(2);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PiecewiseAffineSection p2{t2, {}, {}, -1};
  for (int k = 0; k < 6; ++k) {
    p2.atoms.push_back(v2(u(rng), u(rng)));
    p2.potentials.push_back(0.05 * u(rng));
  }
  for (int s = 0; s < 100; ++s) {
    const Vec x = v2(3 * u(rng) - 1, 3 * u(rng) - 1);
    const auto r = pa_evaluate(p2, x);
    for (int m0 = -3; m0 <= 3; ++m0) {
      for (int m1 = -3; m1 <= 3; ++m1) {
        for (std::size_t i = 0; i < p2.atoms.size(); ++i) {
          const Vec y = p2.atoms[i] + v2(m0, m1);
          EXPECT_GE(r.value, x.dot(y) - 0.5 * y.squaredNorm() - p2.potentials[i] - 1e-13);
        }
      }
    }
    // Midpoint convexity along a random segment.
    const Vec z = v2(3 * u(rng) - 1, 3 * u(rng) - 1);
    EXPECT_LE(pa_evaluate(p2, 0.5 * (x + z)).value,
              0.5 * (r.value + pa_evaluate(p2, z).value) + 1e-13);
  }
}

TEST(ExtractTiling, OneDimensionalExamples) {
  const auto model = HessianModel::unit_torus(1);
  const PiecewiseAffineSection one{model, {v1(0.5)}, {0.0}, -1};
  const auto t = extract_tiling(one, box1(0.0, 2.0));
  ASSERT_EQ(t.cells.size(), 2u);
  EXPECT_NEAR(t.cells[0].volume, 1.0, 1e-15);
  EXPECT_NEAR(t.cells[1].volume, 1.0, 1e-15);
  EXPECT_NE(t.cells[0].word, t.cells[1].word);

  const auto nu = uniform_density(dual_grid(model.dual(), {256}));
  const auto res = solve_semidiscrete(make_atomic(model, {v1(0.25), v1(0.75)}, {0.5, 0.5}), nu, model);
  const auto t2 = extract_tiling(res.pa, box1(0.0, 1.0));
  ASSERT_EQ(t2.cells.size(), 2u);
  std::vector<double> ends;
  for (const auto& c : t2.cells) ends.push_back(c.v[0][0]);
  std::sort(ends.begin(), ends.end());
  EXPECT_NEAR(ends[0], 0.0, 1e-12);
  EXPECT_NEAR(ends[1], 0.5, 1e-12);
  EXPECT_NEAR(t2.total_volume(), 1.0, 1e-12);
}

TEST(ExtractTiling, LogBarrierQuasiPeriodic) {
  const auto model = HessianModel::log_barrier();
  const DualModel dual = model.dual();
  const auto nu = slope_uniform_density(dual, dual_grid(dual, {256}));
  const auto res = solve_semidiscrete(make_atomic(model, {v1(1.2), v1(1.7)}, {0.3, 0.7}), nu, model);
  const auto masses = cell_masses(res.pa, nu);
  EXPECT_NEAR(masses[0], 0.3, 1e-9);
  const auto t = extract_tiling(res.pa, box1(1.0, 16.0));
  EXPECT_NEAR(t.total_volume(), 15.0, 1e-9);
  // cell(i, k) = 2^k cell(i, 0) for cells away from the window ends.
  for (const auto& c : t.cells) {
    if (c.h[0].other.site < 0 || c.h[1].other.site < 0) continue;
    for (const auto& d : t.cells) {
      if (d.atom != c.atom || d.word[0] != c.word[0] + 1) continue;
      if (d.h[0].other.site < 0 || d.h[1].other.site < 0) continue;
      EXPECT_NEAR(d.v[0][0], 2.0 * c.v[0][0], 1e-9);
      EXPECT_NEAR(d.v[1][0], 2.0 * c.v[1][0], 1e-9);
    }
  }
}

TEST(ExtractTiling, RandomAtomsPowerDiagram) {
  const auto& r = random_2d();
  const auto& pa = r.res.pa;
  const Box unit{v2(0, 0), v2(1, 1)};
  const auto t = extract_tiling(pa, unit);
  EXPECT_NEAR(t.total_volume(), 1.0, 1e-6);
  std::vector<double> area(pa.atoms.size(), 0.0);
  for (const auto& c : t.cells) {
    area[c.atom] += c.volume;
    for (const auto& v : c.v) {
      for (const auto& h : c.h) EXPECT_LE(h.a.dot(v), h.b + 1e-9);
    }
  }
  const auto masses = cell_masses(pa, r.nu);
  for (std::size_t i = 0; i < area.size(); ++i) {
    EXPECT_NEAR(area[i], r.mu.weights[i], 1e-3);
    EXPECT_NEAR(area[i], masses[i], 2.0 / 512);
  }
  // Brute-force weighted nearest-site labels on a 1024^2 pixel grid.
  const int P = 1024;
  long agree = 0;
  for (int a = 0; a < P; ++a) {
    for (int b = 0; b < P; ++b) {
      const Vec x = v2((a + 0.5) / P, (b + 0.5) / P);
      double best = -1e300;
      int lab = -1;
      for (int m0 = -1; m0 <= 1; ++m0) {
        for (int m1 = -1; m1 <= 1; ++m1) {
          for (std::size_t i = 0; i < pa.atoms.size(); ++i) {
            const Vec y = pa.atoms[i] + v2(m0, m1);
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
  EXPECT_GE(static_cast<double>(agree) / (P * P), 0.999);
}

TEST(ExtractTiling, QuasiPeriodicity2d) {
  const auto& pa = random_2d().res.pa;
  const auto t = extract_tiling(pa, Box{v2(-1, -1), v2(2, 2)});
  auto interior = [](const TilingCell& c) {
    return std::all_of(c.h.begin(), c.h.end(), [](const HalfSpace& h) { return h.other.site >= 0; });
  };
  int compared = 0;
  for (const auto& c : t.cells) {
    if (c.word != GroupIndex{0, 0} || !interior(c)) continue;
    for (const auto& d : t.cells) {
      if (d.atom != c.atom || d.word != GroupIndex{1, 0} || !interior(d)) continue;
      ASSERT_EQ(c.v.size(), d.v.size());
      for (const auto& v : c.v) {
        double nearest = 1e300;
        for (const auto& w : d.v) nearest = std::min(nearest, (w - v - v2(1, 0)).norm());
        EXPECT_LE(nearest, 1e-9);
      }
      ++compared;
    }
  }
  EXPECT_GT(compared, 0);
}

TEST(ExtractTiling, HigherDimensionAndExports) {
  const auto t3 = HessianModel::unit_torus(3);
  const PiecewiseAffineSection p3{t3, {Vec::Constant(3, 0.5)}, {0.0}, 1};
  EXPECT_THROW(extract_tiling(p3, Box{Vec::Zero(3), Vec::Ones(3)}), UnsupportedDimension);
  const auto h = cell_halfspaces(p3, 0, {0, 0, 0});
  EXPECT_EQ(h.size(), 26u);
  for (const auto& hs : h) EXPECT_LE(hs.a.dot(Vec::Constant(3, 0.5)), hs.b);

  const auto& pa = random_2d().res.pa;
  const auto t = extract_tiling(pa, Box{v2(0, 0), v2(1, 1)});
  const auto j = nlohmann::json::parse(tiling_json(t, pa));
  EXPECT_EQ(j["cells"].size(), t.cells.size());
  EXPECT_DOUBLE_EQ(j["cells"][0]["area"].get<double>(), t.cells[0].volume);
  const auto svg = tiling_svg(t, pa);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  std::size_t polys = 0;
  for (auto p = svg.find("<polygon"); p != std::string::npos; p = svg.find("<polygon", p + 1)) ++polys;
  EXPECT_EQ(polys, t.cells.size());
}

TEST(ExtractTiling, TruncationShell) {
  // One atom and radius 1: its cell in a wide window is bounded by the lifts on the shell.
  const PiecewiseAffineSection pa{HessianModel::unit_torus(1), {v1(0.5)}, {0.0}, 1};
  EXPECT_THROW(extract_tiling(pa, box1(-1.0, 2.0)), TruncationSaturated);
  EXPECT_THROW(pa_evaluate(PiecewiseAffineSection{pa.model, {v1(0.9)}, {0.0}, 1}, v1(0.05)), TruncationSaturated);
}

TEST(PaApproximate, ReferenceSingleAtom) {
  double prev = 0.0;
  for (int m : {64, 256}) {
    const auto phi = GridSection::zero(HessianModel::unit_torus(1), {m});
    const auto r = pa_approximate(phi, 1);
    ASSERT_EQ(r.pa.atoms.size(), 1u);
    EXPECT_NEAR(r.error, 1.0 / 16, 1.0 / (4.0 * m));
    EXPECT_GT(r.error, prev);
    prev = r.error;
  }
}

TEST(PaApproximate, CosineErrorDecreases) {
  const auto model = HessianModel::unit_torus(1);
  const auto phi = convexify(GridSection::sample(model, {1024}, [](const Vec& x) { return 0.1 * std::cos(2 * kPi * x[0]); }));
  double prev = 1e300;
  for (int N : {4, 16, 64, 256}) {
    const auto r = pa_approximate(phi, N);
    EXPECT_LT(r.error, prev) << "N=" << N;
    prev = r.error;
  }
  EXPECT_LE(prev, 0.01 * oscillation(phi.u));
}

TEST(PaApproximate, PushforwardIsAtomic) {
  const auto model = HessianModel::unit_torus(1);
  const auto nu = uniform_density(dual_grid(model.dual(), {512}));
  const auto res = solve_semidiscrete(make_atomic(model, {v1(0.1), v1(0.45), v1(0.8)}, {0.2, 0.5, 0.3}), nu, model);
  const auto phi = pa_to_grid(res.pa, {512}, nu);
  const auto ma = ma_measure_binned(phi, nu);
  double near = 0.0;
  for (std::size_t i = 0; i < ma.mass.size(); ++i) {
    const double x = phi.grid.node(i)[0];
    for (const auto& a : res.pa.atoms) {
      double d = std::abs(x - a[0]);
      d = std::min(d, 1.0 - d);
      if (d <= 1.5 / 512) {
        near += ma.mass[i];
        break;
      }
    }
  }
  EXPECT_GE(near, 1.0 - 1e-6);
}
