#ifndef RLM_TESTS_TOY_PROBLEMS_HPP_
#define RLM_TESTS_TOY_PROBLEMS_HPP_

#include "rlm/rlm.hpp"

namespace rlm::testing {

/// F(x) = A x - b on R^n.
class LinearProblem final : public ResidualProblem {
 public:
  LinearProblem(Mat A, Vec b) : A_(std::move(A)), b_(std::move(b)), space_(A_.cols()) {}

  const Manifold& manifold() const override { return space_; }
  const EuclideanSpace& space() const { return space_; }
  Eigen::Index residual_dim() const override { return A_.rows(); }
  std::string name() const override { return "linear"; }
  Vec eval_residual(const Point& x) const override { return A_ * x.block(0) - b_; }
  Vec eval_jacobian(const Point&, const Tangent& v) const override { return A_ * v.block(0); }
  Tangent eval_adjoint(const Point& x, const Vec& u) const override { return Tangent(x, {A_.transpose() * u}); }

 private:
  Mat A_;
  Vec b_;
  EuclideanSpace space_;
};

inline std::shared_ptr<LinearProblem> identity_problem(Eigen::Index n) {
  return std::make_shared<LinearProblem>(Mat::Identity(n, n), Vec::Zero(n));
}

/// Rosenbrock residual F(x) = (10 (x_2 - x_1^2), 1 - x_1).
class RosenbrockProblem final : public ResidualProblem {
 public:
  RosenbrockProblem() : space_(2) {}
  const Manifold& manifold() const override { return space_; }
  Eigen::Index residual_dim() const override { return 2; }
  std::string name() const override { return "rosenbrock"; }
  Vec eval_residual(const Point& x) const override {
    const Vec& v = x.block(0);
    Vec F(2);
    F << 10.0 * (v(1) - v(0) * v(0)), 1.0 - v(0);
    return F;
  }
  Vec eval_jacobian(const Point& x, const Tangent& t) const override { return jac(x) * t.block(0); }
  Tangent eval_adjoint(const Point& x, const Vec& u) const override { return Tangent(x, {Mat(jac(x).transpose() * u)}); }

 private:
  static Mat jac(const Point& x) {
    Mat J(2, 2);
    J << -20.0 * x.block(0)(0), 10.0, -1.0, 0.0;
    return J;
  }
  EuclideanSpace space_;
};

/// Residual that turns NaN once the first coordinate leaves (-limit, limit).
class FragileProblem final : public ResidualProblem {
 public:
  FragileProblem(Eigen::Index n, double limit) : space_(n), limit_(limit) {}
  const Manifold& manifold() const override { return space_; }
  Eigen::Index residual_dim() const override { return space_.rows(); }
  std::string name() const override { return "fragile"; }
  Vec eval_residual(const Point& x) const override {
    Vec F = x.block(0) - Vec::Constant(space_.rows(), 10.0);
    if (std::abs(x.block(0)(0)) >= limit_) F(0) = std::numeric_limits<double>::quiet_NaN();
    return F;
  }
  Vec eval_jacobian(const Point&, const Tangent& v) const override { return v.block(0); }
  Tangent eval_adjoint(const Point& x, const Vec& u) const override { return Tangent(x, {u}); }

 private:
  EuclideanSpace space_;
  double limit_;
};

inline bool traces_finite(const RunSummary& s) {
  for (const auto& r : s.trace)
    if (!std::isfinite(r.f) || !std::isfinite(r.grad_norm) || !std::isfinite(r.step_norm)) return false;
  return true;
}

/// Orthonormal frame of T_xM from a random rotation of tangent_basis(x).
inline TangentBasis rotated_basis(const Manifold& M, const Point& x, Rng& rng) {
  const TangentBasis base = M.tangent_basis(x);
  const auto n = static_cast<Eigen::Index>(base.size());
  Eigen::HouseholderQR<Mat> qr(rng.normal_matrix(n, n));
  const Mat Q = qr.householderQ();
  TangentBasis out;
  out.base = base.base;
  for (Eigen::Index j = 0; j < n; ++j) out.vectors.push_back(base.combine(Q.col(j)));
  return out;
}

/// Minimizer of theta over frame coordinates by successive grid refinement:
/// 21 points per axis, the box shrinks around the incumbent until the spacing
/// drops below `resolution`.  Independent of every subproblem solver.
inline Vec grid_minimize_theta(const ResidualProblem& p, const Point& x, const TangentBasis& basis, double lambda,
                               double radius, double resolution = 1e-6) {
  const auto d = static_cast<Eigen::Index>(basis.size());
  if (d < 1 || d > 3) throw ContractViolation("grid_minimize_theta: need 1 <= dim <= 3");
  const int per_axis = 21;
  Vec center = Vec::Zero(d);
  double half = radius;
  while (true) {
    const double h = 2.0 * half / (per_axis - 1);
    Vec best = center;
    double best_val = theta(p, x, basis.combine(center), lambda);
    long total = 1;
    for (Eigen::Index i = 0; i < d; ++i) total *= per_axis;
    for (long idx = 0; idx < total; ++idx) {
      Vec c(d);
      long rest = idx;
      for (Eigen::Index i = 0; i < d; ++i) {
        c(i) = center(i) - half + h * static_cast<double>(rest % per_axis);
        rest /= per_axis;
      }
      const double val = theta(p, x, basis.combine(c), lambda);
      if (val < best_val) {
        best_val = val;
        best = c;
      }
    }
    center = best;
    if (h <= resolution) return center;
    half = 2.0 * h;
  }
}

}  // namespace rlm::testing

#endif  // RLM_TESTS_TOY_PROBLEMS_HPP_
