// SPDX-License-Identifier: Apache-2.0
//
// Compact Hessian manifolds M = Omega / Pi presented on their universal cover.
//
// Everything is computed in one fixed trivialization of the affine R-bundle:
// a section q is an affine function on Omega (slope, intercept) measured
// against the reference section q0, a convex section phi is the convex
// function Phi = Phi0 + u on Omega with u Pi-invariant, and a dual point p is
// a slope in (R^n)*. The catalog is closed: flat tori R^n / (periods Z^n) with
// Phi0 = x^T Q x / 2 for SPD Q, and the log-barrier line R_+ / base^Z with
// Phi0 = -log y. Both deck groups are free abelian, so group elements are
// stored as exponent vectors over the generators.
#pragma once

#include <Eigen/Dense>

#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace hma {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Signed 1-based generator indices: +k is generator k, -k its inverse.
/// The word [w1, w2, ..., wm] denotes g_{w1} o g_{w2} o ... o g_{wm}.
using Word = std::vector<int>;

/// Exponent vector of a deck transformation over the generators.
using GroupIndex = std::vector<int>;

struct AffineMap {
  Mat linear;
  Vec translation;

  static AffineMap identity(int n);
  static AffineMap translation_by(const Vec& t);
  static AffineMap uniform_scaling(int n, double factor);

  int dim() const { return static_cast<int>(translation.size()); }
  Vec operator()(const Vec& x) const { return linear * x + translation; }
  /// this o inner
  AffineMap compose(const AffineMap& inner) const;
  AffineMap inverse() const;
};

/// Affine section q = q0 + <slope, x> + intercept.
struct AffineSection {
  Vec slope;
  double intercept = 0.0;

  double operator()(const Vec& x) const { return slope.dot(x) + intercept; }
};

struct Box {
  Vec lo;
  Vec hi;

  int dim() const { return static_cast<int>(lo.size()); }
  Vec extent() const { return hi - lo; }
  double volume() const { return extent().prod(); }
  /// Half-open membership lo <= x < hi, widened by tol on both ends.
  bool contains(const Vec& x, double tol = 0.0) const;
};

enum class DomainKind { FullSpace, PositiveHalfLine, OpenBox };

struct Domain {
  DomainKind kind = DomainKind::FullSpace;
  Box box;  // only meaningful for OpenBox

  bool contains(const Vec& x) const;
};

struct QuadraticPotential {
  Mat Q;
};

struct LogBarrierPotential {
  double base = 2.0;
};

using Potential = std::variant<QuadraticPotential, LogBarrierPotential>;

struct GroupElement {
  GroupIndex exponents;
  AffineMap map;
  bool on_shell = false;  // max |exponent| equals the truncation radius
};

/// Result of one named invariant check.
struct InvariantReport {
  std::string name;
  bool pass = false;
  double slack = 0.0;  // measured violation (0 when exact)
};

class DualModel;

class HessianModel {
 public:
  /// Flat torus R^n / (diag(periods) Z^n) with Phi0 = x^T Q x / 2. The
  /// fundamental domain is [0, periods).
  static HessianModel torus(const Mat& Q, const Vec& periods);
  static HessianModel unit_torus(int n) { return torus(Mat::Identity(n, n), Vec::Ones(n)); }
  /// R_+ / base^Z with Phi0 = -log y and fundamental domain [1, base).
  static HessianModel log_barrier(double base = 2.0);

  int dim() const { return dim_; }
  const Domain& domain() const { return domain_; }
  const std::vector<AffineMap>& generators() const { return generators_; }
  const Box& fundamental_domain() const { return fundamental_; }
  const Potential& potential_kind() const { return potential_; }
  bool is_quadratic() const { return std::holds_alternative<QuadraticPotential>(potential_); }
  /// Q for quadratic models; throws for the log barrier.
  const Mat& quadratic_form() const;
  std::string name() const;
  /// Default truncation radius: 2 lattice steps on tori, 8 on the log barrier.
  int default_radius() const;

  bool in_domain(const Vec& x) const { return domain_.contains(x); }

  GroupIndex exponents_of(const Word& word) const;
  Word word_of(const GroupIndex& exponents) const;
  AffineMap element(const GroupIndex& exponents) const;
  AffineMap element_of_word(const Word& word) const { return element(exponents_of(word)); }

  Vec act_on_point(const Word& word, const Vec& x) const;
  AffineSection act_on_section(const Word& word, const AffineSection& q) const;
  AffineSection act_by_exponents(const GroupIndex& exponents, const AffineSection& q) const;

  /// Unique representative in the half-open fundamental domain together with
  /// the word w such that act_on_point(w, representative) == x.
  std::pair<Vec, Word> reduce_to_fundamental(const Vec& x) const;
  std::pair<Vec, GroupIndex> reduce_exponents(const Vec& x) const;

  /// All deck transformations with max |exponent| <= radius.
  std::vector<GroupElement> group_ball(int radius) const;

  double reference_potential(const Vec& x) const;
  Vec reference_gradient(const Vec& x) const;
  Mat reference_hessian(const Vec& x) const;
  /// Legendre conjugate Phi0*(p); throws DomainError outside the dual domain.
  double reference_conjugate(const Vec& p) const;
  /// Gradient of Phi0*, i.e. the inverse of the reference gradient map.
  Vec reference_conjugate_gradient(const Vec& p) const;
  bool in_dual_domain(const Vec& p) const;

  /// Closed-form integral of the second derivative of Phi0 along the segment
  /// x0 -> x1: int_0^1 int_0^s <x', D^2 Phi0(x_l) x'> dl ds.
  double segment_hessian_integral(const Vec& x0, const Vec& x1) const;

  DualModel dual() const;

  /// Model invariants: generator maps preserve the domain, the Hessian of
  /// Phi0 is generator-invariant, the fundamental domain tiles, Q is SPD.
  std::vector<InvariantReport> check_invariants(int samples = 64, unsigned seed = 7) const;

  /// Unchecked constructor; prefer the factories. Used by config parsing so a
  /// corrupt model can still be inspected by check_invariants.
  HessianModel(int dim, Domain domain, std::vector<AffineMap> generators, Box fundamental,
               Potential potential);

 private:
  AffineSection act_element(const GroupIndex& m, const AffineSection& q) const;

  int dim_;
  Domain domain_;
  std::vector<AffineMap> generators_;
  Box fundamental_;
  Potential potential_;
  Mat q_inverse_;  // quadratic models only
};

/// The dual manifold M* = Omega* / Pi in chart coordinates s. On tori the
/// chart is p = Q s over the primal fundamental box; on the log barrier it is
/// a = -base * base^{-s} over s in [0, 1). In both cases the dual deck action
/// is a unit lattice translation of the chart, which is what makes periodic
/// grids on the dual side structural.
class DualModel {
 public:
  DualModel(const HessianModel& primal);

  int dim() const { return dim_; }
  const Box& chart() const { return chart_; }
  /// Dual generators acting on slopes p.
  const std::vector<AffineMap>& generators() const { return generators_; }
  AffineMap element(const GroupIndex& exponents) const;
  /// Chart translation per generator (the chart-space period).
  const Vec& chart_periods() const { return chart_periods_; }

  Vec to_slope(const Vec& s) const;
  Vec to_chart(const Vec& p) const;
  /// |det d(slope)/d(chart)| at s.
  double chart_jacobian(const Vec& s) const;
  bool linear_chart() const { return linear_; }
  std::pair<Vec, GroupIndex> reduce_to_fundamental(const Vec& p) const;

 private:
  int dim_;
  bool linear_;
  Mat chart_matrix_;  // linear charts: p = chart_matrix_ * s
  double base_ = 2.0;
  Box chart_;
  Vec chart_periods_;
  std::vector<AffineMap> generators_;
};

/// max_k |exponents_k|
int word_length(const GroupIndex& exponents);

}  // namespace hma
