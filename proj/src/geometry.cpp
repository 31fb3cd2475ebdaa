// SPDX-License-Identifier: Apache-2.0
#include "hma/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "hma/errors.hpp"

namespace hma {

AffineMap AffineMap::identity(int n) { return {Mat::Identity(n, n), Vec::Zero(n)}; }

AffineMap AffineMap::translation_by(const Vec& t) {
  const int n = static_cast<int>(t.size());
  return {Mat::Identity(n, n), t};
}

AffineMap AffineMap::uniform_scaling(int n, double factor) {
  return {factor * Mat::Identity(n, n), Vec::Zero(n)};
}

AffineMap AffineMap::compose(const AffineMap& inner) const {
  return {linear * inner.linear, linear * inner.translation + translation};
}

AffineMap AffineMap::inverse() const {
  const double det = linear.determinant();
  if (std::abs(det) <= 1e-12) throw DomainError("AffineMap::inverse: singular linear part");
  Mat inv = linear.inverse();
  return {inv, -inv * translation};
}

bool Box::contains(const Vec& x, double tol) const {
  for (int k = 0; k < dim(); ++k) {
    if (x[k] < lo[k] - tol || x[k] >= hi[k] + tol) return false;
  }
  return true;
}

bool Domain::contains(const Vec& x) const {
  if (!x.allFinite()) return false;
  switch (kind) {
    case DomainKind::FullSpace:
      return true;
    case DomainKind::PositiveHalfLine:
      return x.size() == 1 && x[0] > 0.0;
    case DomainKind::OpenBox:
      for (int k = 0; k < x.size(); ++k) {
        if (x[k] <= box.lo[k] || x[k] >= box.hi[k]) return false;
      }
      return true;
  }
  return false;
}

int word_length(const GroupIndex& exponents) {
  int len = 0;
  for (int e : exponents) len = std::max(len, std::abs(e));
  return len;
}

namespace {

Mat symmetric_part(const Mat& Q) { return 0.5 * (Q + Q.transpose()); }

}  // namespace

HessianModel::HessianModel(int dim, Domain domain, std::vector<AffineMap> generators, Box fundamental,
                           Potential potential)
    : dim_(dim),
      domain_(std::move(domain)),
      generators_(std::move(generators)),
      fundamental_(std::move(fundamental)),
      potential_(std::move(potential)) {
  if (const auto* quad = std::get_if<QuadraticPotential>(&potential_)) {
    q_inverse_ = symmetric_part(quad->Q).inverse();
  }
}

HessianModel HessianModel::torus(const Mat& Q, const Vec& periods) {
  const int n = static_cast<int>(periods.size());
  if (n < 1 || Q.rows() != n || Q.cols() != n) {
    throw DomainError("torus: Q must be n x n with n = number of periods");
  }
  std::vector<AffineMap> gens;
  for (int k = 0; k < n; ++k) {
    if (!(periods[k] > 0.0)) throw DomainError("torus: periods must be positive");
    Vec t = Vec::Zero(n);
    t[k] = periods[k];
    gens.push_back(AffineMap::translation_by(t));
  }
  return HessianModel(n, Domain{DomainKind::FullSpace, {}}, std::move(gens), Box{Vec::Zero(n), periods},
                      QuadraticPotential{Q});
}

HessianModel HessianModel::log_barrier(double base) {
  if (!(base > 1.0)) throw DomainError("log_barrier: base must exceed 1");
  Box fund{Vec::Constant(1, 1.0), Vec::Constant(1, base)};
  return HessianModel(1, Domain{DomainKind::PositiveHalfLine, {}}, {AffineMap::uniform_scaling(1, base)},
                      fund, LogBarrierPotential{base});
}

const Mat& HessianModel::quadratic_form() const {
  if (const auto* quad = std::get_if<QuadraticPotential>(&potential_)) return quad->Q;
  throw DomainError("quadratic_form: model is not quadratic");
}

std::string HessianModel::name() const {
  std::ostringstream os;
  if (is_quadratic()) {
    os << "torus(n=" << dim_ << ")";
  } else {
    os << "log_barrier(base=" << std::get<LogBarrierPotential>(potential_).base << ")";
  }
  return os.str();
}

int HessianModel::default_radius() const { return is_quadratic() ? 2 : 8; }

GroupIndex HessianModel::exponents_of(const Word& word) const {
  GroupIndex m(generators_.size(), 0);
  for (int letter : word) {
    const int k = std::abs(letter) - 1;
    if (letter == 0 || k >= static_cast<int>(generators_.size())) {
      throw DomainError("word letter out of range: " + std::to_string(letter));
    }
    m[k] += letter > 0 ? 1 : -1;
  }
  return m;
}

Word HessianModel::word_of(const GroupIndex& exponents) const {
  Word w;
  for (std::size_t k = 0; k < exponents.size(); ++k) {
    const int letter = static_cast<int>(k) + 1;
    for (int r = 0; r < std::abs(exponents[k]); ++r) w.push_back(exponents[k] > 0 ? letter : -letter);
  }
  return w;
}

AffineMap HessianModel::element(const GroupIndex& exponents) const {
  if (exponents.size() != generators_.size()) throw DomainError("element: exponent vector has wrong size");
  AffineMap g = AffineMap::identity(dim_);
  for (std::size_t k = 0; k < exponents.size(); ++k) {
    if (exponents[k] == 0) continue;
    const AffineMap step = exponents[k] > 0 ? generators_[k] : generators_[k].inverse();
    for (int r = 0; r < std::abs(exponents[k]); ++r) g = step.compose(g);
  }
  return g;
}

Vec HessianModel::act_on_point(const Word& word, const Vec& x) const {
  if (!in_domain(x)) throw DomainError("act_on_point: x outside the domain");
  Vec y = x;
  for (auto it = word.rbegin(); it != word.rend(); ++it) {
    const int k = std::abs(*it) - 1;
    if (*it == 0 || k >= static_cast<int>(generators_.size())) {
      throw DomainError("word letter out of range: " + std::to_string(*it));
    }
    y = *it > 0 ? generators_[k](y) : generators_[k].inverse()(y);
    if (!in_domain(y)) throw DomainError("act_on_point: image left the domain (corrupt model)");
  }
  return y;
}

AffineSection HessianModel::act_element(const GroupIndex& m, const AffineSection& q) const {
  AffineSection out;
  if (const auto* quad = std::get_if<QuadraticPotential>(&potential_)) {
    // gamma.q = q + Phi_q - Phi_q o gamma^{-1}; with gamma^{-1} x = B x + c and
    // B^T Q B = Q the quadratic parts cancel.
    const Mat Q = symmetric_part(quad->Q);
    const AffineMap inv = element(m).inverse();
    const Mat& B = inv.linear;
    const Vec& c = inv.translation;
    out.slope = B.transpose() * q.slope - B.transpose() * (Q * c);
    out.intercept = q.intercept + q.slope.dot(c) - 0.5 * c.dot(Q * c);
  } else {
    // y -> base^m y: gamma.q = base^{-m} a y + b - m log(base).
    const double base = std::get<LogBarrierPotential>(potential_).base;
    out.slope = q.slope * std::pow(base, -m[0]);
    if (base == 2.0) out.slope[0] = std::ldexp(q.slope[0], -m[0]);
    out.intercept = q.intercept - m[0] * std::log(base);
  }
  if (!out.slope.allFinite() || !std::isfinite(out.intercept)) {
    throw DomainError("act_on_section: numeric overflow");
  }
  return out;
}

AffineSection HessianModel::act_on_section(const Word& word, const AffineSection& q) const {
  return act_element(exponents_of(word), q);
}

AffineSection HessianModel::act_by_exponents(const GroupIndex& exponents, const AffineSection& q) const {
  if (exponents.size() != generators_.size()) throw DomainError("act_on_section: exponent vector has wrong size");
  return act_element(exponents, q);
}

std::pair<Vec, GroupIndex> HessianModel::reduce_exponents(const Vec& x) const {
  if (!in_domain(x)) throw DomainError("reduce_to_fundamental: x outside the domain");
  GroupIndex m(generators_.size(), 0);
  Vec rep = x;
  if (is_quadratic()) {
    const Vec ext = fundamental_.extent();
    for (int k = 0; k < dim_; ++k) {
      double t = (x[k] - fundamental_.lo[k]) / ext[k];
      int mk = static_cast<int>(std::floor(t));
      double r = x[k] - mk * ext[k];
      if (r >= fundamental_.hi[k]) {
        ++mk;
        r = x[k] - mk * ext[k];
      }
      if (r < fundamental_.lo[k]) {
        --mk;
        r = x[k] - mk * ext[k];
        if (r >= fundamental_.hi[k]) r = fundamental_.lo[k];
      }
      m[k] = mk;
      rep[k] = r;
    }
  } else {
    const double base = std::get<LogBarrierPotential>(potential_).base;
    const double lo = fundamental_.lo[0];
    int k = static_cast<int>(std::floor(std::log(x[0] / lo) / std::log(base)));
    double r = x[0] / std::pow(base, k);
    if (r >= fundamental_.hi[0]) {
      ++k;
      r = x[0] / std::pow(base, k);
    }
    if (r < lo) {
      --k;
      r = x[0] / std::pow(base, k);
      if (r >= fundamental_.hi[0]) r = lo;
    }
    m[0] = k;
    rep[0] = r;
  }
  return {rep, m};
}

std::pair<Vec, Word> HessianModel::reduce_to_fundamental(const Vec& x) const {
  auto [rep, m] = reduce_exponents(x);
  return {rep, word_of(m)};
}

std::vector<GroupElement> HessianModel::group_ball(int radius) const {
  if (radius < 0) throw DomainError("group_ball: negative radius");
  const std::size_t r = generators_.size();
  std::vector<GroupElement> out;
  GroupIndex m(r, -radius);
  while (true) {
    GroupElement g;
    g.exponents = m;
    g.map = element(m);
    g.on_shell = radius > 0 && word_length(m) == radius;
    out.push_back(std::move(g));
    std::size_t k = 0;
    while (k < r && m[k] == radius) {
      m[k] = -radius;
      ++k;
    }
    if (k == r) break;
    ++m[k];
  }
  return out;
}

double HessianModel::reference_potential(const Vec& x) const {
  if (const auto* quad = std::get_if<QuadraticPotential>(&potential_)) return 0.5 * x.dot(quad->Q * x);
  if (!(x[0] > 0.0)) throw DomainError("reference_potential: y must be positive");
  return -std::log(x[0]);
}

Vec HessianModel::reference_gradient(const Vec& x) const {
  if (const auto* quad = std::get_if<QuadraticPotential>(&potential_)) return symmetric_part(quad->Q) * x;
  if (!(x[0] > 0.0)) throw DomainError("reference_gradient: y must be positive");
  return Vec::Constant(1, -1.0 / x[0]);
}

Mat HessianModel::reference_hessian(const Vec& x) const {
  if (const auto* quad = std::get_if<QuadraticPotential>(&potential_)) return symmetric_part(quad->Q);
  return Mat::Constant(1, 1, 1.0 / (x[0] * x[0]));
}

bool HessianModel::in_dual_domain(const Vec& p) const {
  if (!p.allFinite() || p.size() != dim_) return false;
  return is_quadratic() || p[0] < 0.0;
}

double HessianModel::reference_conjugate(const Vec& p) const {
  if (!in_dual_domain(p)) throw DomainError("reference_conjugate: p outside the dual domain");
  if (is_quadratic()) return 0.5 * p.dot(q_inverse_ * p);
  return -1.0 - std::log(-p[0]);
}

Vec HessianModel::reference_conjugate_gradient(const Vec& p) const {
  if (!in_dual_domain(p)) throw DomainError("reference_conjugate_gradient: p outside the dual domain");
  if (is_quadratic()) return q_inverse_ * p;
  return Vec::Constant(1, -1.0 / p[0]);
}

double HessianModel::segment_hessian_integral(const Vec& x0, const Vec& x1) const {
  const Vec d = x1 - x0;
  if (const auto* quad = std::get_if<QuadraticPotential>(&potential_)) return 0.5 * d.dot(quad->Q * d);
  const double a = x0[0];
  const double delta = d[0];
  if (std::abs(delta) < 1e-14 * a) return 0.0;
  return delta / a - std::log(x1[0] / a);
}

DualModel HessianModel::dual() const { return DualModel(*this); }

std::vector<InvariantReport> HessianModel::check_invariants(int samples, unsigned seed) const {
  std::vector<InvariantReport> out;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Vec ext = fundamental_.extent();

  auto sample_near_fundamental = [&]() {
    Vec x(dim_);
    for (int k = 0; k < dim_; ++k) {
      if (is_quadratic()) {
        x[k] = fundamental_.lo[k] + (3.0 * unit(rng) - 1.0) * ext[k];
      } else {
        const double base = std::get<LogBarrierPotential>(potential_).base;
        x[k] = fundamental_.lo[k] * std::pow(base, 3.0 * unit(rng) - 1.0);
      }
    }
    return x;
  };

  if (const auto* quad = std::get_if<QuadraticPotential>(&potential_)) {
    const double asym = (quad->Q - quad->Q.transpose()).cwiseAbs().maxCoeff();
    Eigen::SelfAdjointEigenSolver<Mat> eig(symmetric_part(quad->Q));
    const double min_eig = eig.eigenvalues().minCoeff();
    out.push_back({"model.Q_symmetric", asym <= 1e-12, asym});
    out.push_back({"model.Q_positive_definite", min_eig > 0.0, std::max(0.0, -min_eig)});
  }

  {
    double worst_det = 1e300;
    bool ok = true;
    for (const auto& g : generators_) {
      worst_det = std::min(worst_det, std::abs(g.linear.determinant()));
      for (int s = 0; s < samples; ++s) {
        Vec x = sample_near_fundamental();
        if (!in_domain(g(x)) || !in_domain(g.inverse()(x))) ok = false;
      }
    }
    out.push_back({"model.generators_preserve_domain", ok && worst_det > 1e-12, ok ? 0.0 : 1.0});
  }

  {
    double worst = 0.0;
    for (const auto& g : generators_) {
      for (int s = 0; s < samples; ++s) {
        Vec x = sample_near_fundamental();
        const Mat pulled = g.linear.transpose() * reference_hessian(g(x)) * g.linear;
        worst = std::max(worst, (pulled - reference_hessian(x)).cwiseAbs().maxCoeff());
      }
    }
    out.push_back({"model.hessian_invariance", worst <= 1e-10, worst});
  }

  {
    double worst = 0.0;
    bool ok = true;
    const auto ball = group_ball(1);
    for (int s = 0; s < samples; ++s) {
      Vec x = sample_near_fundamental();
      auto [rep, m] = reduce_exponents(x);
      if (!fundamental_.contains(rep, 1e-9)) ok = false;
      worst = std::max(worst, (element(m)(rep) - x).cwiseAbs().maxCoeff());
      for (const auto& g : ball) {
        if (word_length(g.exponents) == 0) continue;
        Vec other = g.map(rep);
        // A second representative strictly inside would break the tiling.
        bool inside = true;
        for (int k = 0; k < dim_; ++k) {
          if (other[k] < fundamental_.lo[k] + 1e-9 || other[k] >= fundamental_.hi[k] - 1e-9) inside = false;
        }
        if (inside) ok = false;
      }
    }
    out.push_back({"model.fundamental_domain_tiles", ok && worst <= 1e-9, worst});
  }

  {
    // Group law for the action on sections, random words of length <= 4.
    std::uniform_int_distribution<int> len(0, 4);
    std::uniform_int_distribution<int> gen(1, static_cast<int>(generators_.size()));
    std::uniform_int_distribution<int> sign(0, 1);
    std::normal_distribution<double> normal(0.0, 1.0);
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
      auto random_word = [&]() {
        Word w;
        const int l = len(rng);
        for (int i = 0; i < l; ++i) w.push_back(sign(rng) ? gen(rng) : -gen(rng));
        return w;
      };
      Word w1 = random_word(), w2 = random_word();
      AffineSection q{Vec(dim_), normal(rng)};
      for (int k = 0; k < dim_; ++k) q.slope[k] = is_quadratic() ? normal(rng) : -std::exp(normal(rng));
      Word w12 = w1;
      w12.insert(w12.end(), w2.begin(), w2.end());
      const AffineSection a = act_on_section(w1, act_on_section(w2, q));
      const AffineSection b = act_on_section(w12, q);
      worst = std::max({worst, (a.slope - b.slope).cwiseAbs().maxCoeff(), std::abs(a.intercept - b.intercept)});
    }
    out.push_back({"model.section_action_group_law", worst <= 1e-10, worst});
  }
  return out;
}

DualModel::DualModel(const HessianModel& primal) : dim_(primal.dim()) {
  if (primal.is_quadratic()) {
    linear_ = true;
    chart_matrix_ = 0.5 * (primal.quadratic_form() + primal.quadratic_form().transpose());
    chart_ = primal.fundamental_domain();
    chart_periods_ = chart_.extent();
    for (int k = 0; k < dim_; ++k) {
      Vec t = Vec::Zero(dim_);
      t[k] = chart_periods_[k];
      generators_.push_back(AffineMap::translation_by(chart_matrix_ * t));
    }
  } else {
    linear_ = false;
    base_ = std::get<LogBarrierPotential>(primal.potential_kind()).base;
    chart_ = Box{Vec::Zero(1), Vec::Ones(1)};
    chart_periods_ = Vec::Ones(1);
    generators_.push_back(AffineMap::uniform_scaling(1, 1.0 / base_));
  }
}

AffineMap DualModel::element(const GroupIndex& exponents) const {
  AffineMap g = AffineMap::identity(dim_);
  for (std::size_t k = 0; k < exponents.size(); ++k) {
    if (exponents[k] == 0) continue;
    const AffineMap step = exponents[k] > 0 ? generators_[k] : generators_[k].inverse();
    for (int r = 0; r < std::abs(exponents[k]); ++r) g = step.compose(g);
  }
  return g;
}

Vec DualModel::to_slope(const Vec& s) const {
  if (linear_) return chart_matrix_ * s;
  return Vec::Constant(1, -base_ * std::pow(base_, -s[0]));
}

Vec DualModel::to_chart(const Vec& p) const {
  if (linear_) return chart_matrix_.ldlt().solve(p);
  if (!(p[0] < 0.0)) throw DomainError("DualModel::to_chart: slope outside the dual domain");
  return Vec::Constant(1, 1.0 - std::log(-p[0]) / std::log(base_));
}

double DualModel::chart_jacobian(const Vec& s) const {
  if (linear_) return std::abs(chart_matrix_.determinant());
  return base_ * std::log(base_) * std::pow(base_, -s[0]);
}

std::pair<Vec, GroupIndex> DualModel::reduce_to_fundamental(const Vec& p) const {
  Vec s = to_chart(p);
  GroupIndex m(dim_, 0);
  for (int k = 0; k < dim_; ++k) {
    int mk = static_cast<int>(std::floor((s[k] - chart_.lo[k]) / chart_periods_[k]));
    double r = s[k] - mk * chart_periods_[k];
    if (r >= chart_.hi[k]) {
      ++mk;
      r = s[k] - mk * chart_periods_[k];
    }
    if (r < chart_.lo[k]) r = chart_.lo[k];
    m[k] = mk;
    s[k] = r;
  }
  return {s, m};
}

}  // namespace hma
