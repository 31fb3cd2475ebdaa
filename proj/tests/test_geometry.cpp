// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hma/errors.hpp"
#include "hma/geometry.hpp"

using namespace hma;

namespace {

Vec v1(double a) { return Vec::Constant(1, a); }
Vec v2(double a, double b) {
  Vec x(2);
  x << a, b;
  return x;
}

}  // namespace

TEST(Geometry, ActOnPointTorus) {
  const auto m = HessianModel::unit_torus(1);
  EXPECT_DOUBLE_EQ(m.act_on_point({+1}, v1(0.3))[0], 1.3);
  EXPECT_DOUBLE_EQ(m.act_on_point({}, v1(0.3))[0], 0.3);
  EXPECT_DOUBLE_EQ(m.act_on_point({-1, -1}, v1(0.3))[0], -1.7);
}

TEST(Geometry, ActOnPointLogBarrier) {
  const auto m = HessianModel::log_barrier();
  EXPECT_DOUBLE_EQ(m.act_on_point({+1, +1}, v1(1.0))[0], 4.0);
  EXPECT_DOUBLE_EQ(m.act_on_point({-1}, v1(1.0))[0], 0.5);
  EXPECT_THROW(m.act_on_point({+1}, v1(-1.0)), DomainError);
  EXPECT_THROW(m.act_on_point({+2}, v1(1.0)), DomainError);
}

TEST(Geometry, ActOnSectionTorus) {
  const auto m = HessianModel::unit_torus(1);
  const auto q = m.act_on_section(Word{+1}, AffineSection{v1(0.0), 0.0});
  EXPECT_DOUBLE_EQ(q.slope[0], 1.0);
  EXPECT_DOUBLE_EQ(q.intercept, -0.5);
  // slope a + m, intercept b - m^2/2 - m a
  const auto r = m.act_on_section(Word{+1, +1, +1}, AffineSection{v1(0.25), 0.1});
  EXPECT_NEAR(r.slope[0], 3.25, 1e-14);
  EXPECT_NEAR(r.intercept, 0.1 - 4.5 - 0.75, 1e-14);
  const auto id = m.act_on_section(Word{}, AffineSection{v1(0.7), -2.0});
  EXPECT_EQ(id.slope[0], 0.7);
  EXPECT_EQ(id.intercept, -2.0);
}

TEST(Geometry, ActOnSectionLogBarrier) {
  const auto m = HessianModel::log_barrier();
  const auto q = m.act_on_section(Word{+1}, AffineSection{v1(-1.0), 0.0});
  EXPECT_DOUBLE_EQ(q.slope[0], -0.5);
  EXPECT_NEAR(q.intercept, -0.693147180559945, 1e-14);
  for (int k = -5; k <= 5; ++k) {
    const auto r = m.act_by_exponents(GroupIndex{k}, AffineSection{v1(-1.3), 0.2});
    EXPECT_EQ(r.slope[0], std::ldexp(-1.3, -k));
    EXPECT_EQ(r.intercept, 0.2 - k * std::log(2.0));
  }
}

TEST(Geometry, SectionEquivariance) {
  // Phi_{gamma.q}(gamma x) = Phi_q(x) with Phi_q = Phi0 - q.
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (const auto& model : {HessianModel::unit_torus(2), HessianModel::log_barrier()}) {
    for (int s = 0; s < 50; ++s) {
      Vec x(model.dim()), a(model.dim());
      for (int k = 0; k < model.dim(); ++k) {
        x[k] = model.is_quadratic() ? 2.0 * u(rng) : std::exp(u(rng));
        a[k] = model.is_quadratic() ? u(rng) : -std::exp(u(rng));
      }
      const AffineSection q{a, u(rng)};
      Word w;
      for (int l = 0; l < 3; ++l) w.push_back((s + l) % 2 ? 1 : -static_cast<int>(model.dim()));
      const Vec gx = model.act_on_point(w, x);
      const AffineSection gq = model.act_on_section(w, q);
      const double lhs = model.reference_potential(gx) - gq(gx);
      const double rhs = model.reference_potential(x) - q(x);
      EXPECT_NEAR(lhs, rhs, 1e-10);
    }
  }
}

TEST(Geometry, ReduceToFundamental) {
  const auto t = HessianModel::unit_torus(2);
  auto [rep, w] = t.reduce_exponents(v2(1.7, -0.2));
  EXPECT_NEAR(rep[0], 0.7, 1e-15);
  EXPECT_NEAR(rep[1], 0.8, 1e-15);
  EXPECT_EQ(w, (GroupIndex{1, -1}));
  auto [rep2, word2] = t.reduce_to_fundamental(v2(0.25, 0.5));
  EXPECT_EQ(rep2[0], 0.25);
  EXPECT_TRUE(word2.empty());
  // Half-open convention: the upper face maps to the lower one.
  auto [rep3, m3] = t.reduce_exponents(v2(1.0, 0.0));
  EXPECT_EQ(rep3[0], 0.0);
  EXPECT_EQ(m3, (GroupIndex{1, 0}));

  const auto lb = HessianModel::log_barrier();
  auto [r, word] = lb.reduce_to_fundamental(v1(5.0));
  EXPECT_DOUBLE_EQ(r[0], 1.25);
  EXPECT_EQ(word, (Word{1, 1}));
  auto [r2, m2] = lb.reduce_exponents(v1(2.0));
  EXPECT_EQ(r2[0], 1.0);
  EXPECT_EQ(m2, GroupIndex{1});
}

TEST(Geometry, ReduceIsLeftInverse) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-6.0, 6.0);
  const auto t = HessianModel::torus((Mat(2, 2) << 2.0, 0.3, 0.3, 1.0).finished(), v2(1.5, 0.5));
  const auto lb = HessianModel::log_barrier();
  for (int s = 0; s < 200; ++s) {
    const Vec x = v2(u(rng), u(rng));
    auto [rep, w] = t.reduce_to_fundamental(x);
    EXPECT_TRUE(t.fundamental_domain().contains(rep));
    EXPECT_LE((t.act_on_point(w, rep) - x).cwiseAbs().maxCoeff(), 1e-12);
    const Vec y = v1(std::exp(u(rng)));
    auto [ry, wy] = lb.reduce_to_fundamental(y);
    EXPECT_TRUE(lb.fundamental_domain().contains(ry));
    EXPECT_LE(std::abs(lb.act_on_point(wy, ry)[0] - y[0]), 1e-12 * y[0]);
  }
}

TEST(Geometry, ReferenceFunctions) {
  const auto t1 = HessianModel::unit_torus(1);
  EXPECT_DOUBLE_EQ(t1.reference_potential(v1(2.0)), 2.0);
  EXPECT_DOUBLE_EQ(t1.reference_gradient(v1(2.0))[0], 2.0);
  EXPECT_DOUBLE_EQ(t1.reference_conjugate(v1(2.0)), 2.0);

  const auto lb = HessianModel::log_barrier();
  EXPECT_DOUBLE_EQ(lb.reference_potential(v1(1.0)), 0.0);
  EXPECT_DOUBLE_EQ(lb.reference_gradient(v1(1.0))[0], -1.0);
  EXPECT_DOUBLE_EQ(lb.reference_conjugate(v1(-1.0)), -1.0);
  EXPECT_THROW(lb.reference_conjugate(v1(0.5)), DomainError);
  // Grid maximization of p y + log y at p = -1 (the oracle for the closed form).
  double best = -1e300;
  for (int i = 1; i <= 200000; ++i) {
    const double y = 1e-5 * i;
    best = std::max(best, -y + std::log(y));
  }
  EXPECT_NEAR(best, -1.0, 1e-9);

  const auto t2 = HessianModel::torus(2.0 * Mat::Identity(2, 2), Vec::Ones(2));
  EXPECT_DOUBLE_EQ(t2.reference_potential(v2(1.0, 0.0)), 1.0);
  EXPECT_EQ(t2.reference_gradient(v2(1.0, 0.0)), v2(2.0, 0.0));
  EXPECT_DOUBLE_EQ(t2.reference_conjugate(v2(2.0, 0.0)), 1.0);
}

TEST(Geometry, FenchelYoung) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  const auto lb = HessianModel::log_barrier();
  const auto t = HessianModel::torus((Mat(2, 2) << 2.0, 0.3, 0.3, 1.0).finished(), Vec::Ones(2));
  for (int s = 0; s < 100; ++s) {
    const Vec y = v1(u(rng));
    const Vec p = lb.reference_gradient(y);
    EXPECT_NEAR(lb.reference_potential(y) + lb.reference_conjugate(p), p.dot(y), 1e-12);
    EXPECT_NEAR(lb.reference_conjugate_gradient(p)[0], y[0], 1e-12);
    const Vec x = v2(u(rng), -u(rng));
    const Vec q = t.reference_gradient(x);
    EXPECT_NEAR(t.reference_potential(x) + t.reference_conjugate(q), q.dot(x), 1e-12);
  }
}

TEST(Geometry, DualModel) {
  const auto t = HessianModel::unit_torus(2);
  const DualModel dt = t.dual();
  const Vec p = v2(0.3, 0.6);
  const AffineSection q{p, 0.0};
  for (int k = 0; k < 2; ++k) {
    GroupIndex m{0, 0};
    m[k] = 1;
    EXPECT_LE((dt.element(m)(p) - t.act_by_exponents(m, q).slope).cwiseAbs().maxCoeff(), 1e-15);
  }
  const auto lb = HessianModel::log_barrier();
  const DualModel dl = lb.dual();
  EXPECT_EQ(dl.element(GroupIndex{1})(v1(-1.0))[0], -0.5);
  EXPECT_EQ(dl.to_slope(v1(0.0))[0], -2.0);
  EXPECT_NEAR(dl.to_slope(v1(1.0))[0], -1.0, 1e-15);
  auto [s, m] = dl.reduce_to_fundamental(v1(-5.0));
  EXPECT_NEAR(dl.to_slope(s)[0] * std::pow(2.0, -m[0]), -5.0, 1e-12);
  EXPECT_GE(s[0], 0.0);
  EXPECT_LT(s[0], 1.0);
  EXPECT_NEAR(dl.chart_jacobian(v1(0.5)), std::abs(dl.to_slope(v1(0.5))[0]) * std::log(2.0), 1e-14);
}

TEST(Geometry, GroupBall) {
  const auto t = HessianModel::unit_torus(2);
  const auto ball = t.group_ball(2);
  EXPECT_EQ(ball.size(), 25u);
  int shell = 0;
  for (const auto& g : ball) shell += g.on_shell;
  EXPECT_EQ(shell, 16);
}

TEST(Geometry, Invariants) {
  for (const auto& model : {HessianModel::unit_torus(1), HessianModel::unit_torus(2), HessianModel::log_barrier(),
                            HessianModel::torus((Mat(2, 2) << 2.0, 0.3, 0.3, 1.0).finished(), v2(1.5, 0.5))}) {
    for (const auto& r : model.check_invariants()) EXPECT_TRUE(r.pass) << model.name() << " " << r.name;
  }
  Mat bad(2, 2);
  bad << 1.0, 0.5, 0.0, 1.0;
  const HessianModel corrupt(2, Domain{}, HessianModel::unit_torus(2).generators(), Box{Vec::Zero(2), Vec::Ones(2)},
                             QuadraticPotential{bad});
  bool named = false;
  for (const auto& r : corrupt.check_invariants()) {
    if (r.name == "model.Q_symmetric") named = !r.pass && r.slack == 0.5;
  }
  EXPECT_TRUE(named);
}

TEST(Geometry, SegmentIntegral) {
  const auto lb = HessianModel::log_barrier();
  // int_0^1 int_0^s (x1-x0)^2 / x_l^2 dl ds, checked by quadrature.
  const double x0 = 1.0, x1 = 3.0;
  const int n = 4000;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double s = (i + 0.5) / n;
    const double y = x0 + s * (x1 - x0);
    acc += (1.0 - s) * (x1 - x0) * (x1 - x0) / (y * y) / n;
  }
  EXPECT_NEAR(lb.segment_hessian_integral(v1(x0), v1(x1)), acc, 1e-6);
  EXPECT_NEAR(lb.segment_hessian_integral(v1(x0), v1(x1)), 2.0 - std::log(3.0), 1e-15);
}
