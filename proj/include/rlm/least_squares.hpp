#ifndef RLM_LEAST_SQUARES_HPP_
#define RLM_LEAST_SQUARES_HPP_

// Residual problems F: M -> R^m with matrix-free Jacobian J(x): T_xM -> R^m
// and its metric adjoint J(x)*: R^m -> T_xM.

#include "rlm/core.hpp"

#include <string>

namespace rlm {

class ResidualProblem {
 public:
  virtual ~ResidualProblem() = default;

  virtual const Manifold& manifold() const = 0;
  virtual Eigen::Index residual_dim() const = 0;
  virtual std::string name() const = 0;

  virtual Vec eval_residual(const Point& x) const = 0;
  virtual Vec eval_jacobian(const Point& x, const Tangent& v) const = 0;
  virtual Tangent eval_adjoint(const Point& x, const Vec& u) const = 0;
};

namespace detail {

inline void require_finite(const Vec& v, const char* what) {
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (!std::isfinite(v(i))) throw EvaluationError(std::string(what) + " produced a non-finite value", i);
}

inline void require_finite(const Tangent& t, const char* what) {
  if (t.all_finite()) return;
  const Vec flat = t.flatten();
  require_finite(flat, what);
}

}  // namespace detail

/// F(x).  Throws EvaluationError on non-finite entries.
inline Vec residual(const ResidualProblem& p, const Point& x) {
  Vec F = p.eval_residual(x);
  if (F.size() != p.residual_dim()) throw ContractViolation("residual: wrong output length");
  detail::require_finite(F, "residual");
  return F;
}

/// J(x)[v]
inline Vec apply_jacobian(const ResidualProblem& p, const Point& x, const Tangent& v) {
  require_same_base(x, v.base(), "apply_jacobian");
  Vec out = p.eval_jacobian(x, v);
  if (out.size() != p.residual_dim()) throw ContractViolation("apply_jacobian: wrong output length");
  detail::require_finite(out, "apply_jacobian");
  return out;
}

/// J(x)*[u], tangent at x.
inline Tangent apply_adjoint(const ResidualProblem& p, const Point& x, const Vec& u) {
  if (u.size() != p.residual_dim()) throw ContractViolation("apply_adjoint: u has the wrong length");
  Tangent out = p.eval_adjoint(x, u);
  require_same_base(x, out.base(), "apply_adjoint");
  detail::require_finite(out, "apply_adjoint");
  return out;
}

/// f(x) = 1/2 ||F(x)||^2
inline double objective(const ResidualProblem& p, const Point& x) { return 0.5 * residual(p, x).squaredNorm(); }

/// grad f(x) = J(x)* F(x)
inline Tangent gradient(const ResidualProblem& p, const Point& x) { return apply_adjoint(p, x, residual(p, x)); }

/// Operator norm ||J(x)|| estimated by power iteration on J*J.  The estimate
/// is the Rayleigh quotient ||J v|| / ||v||, which never decreases along the
/// iteration and is a lower bound for the true norm.  Seeding with grad f
/// makes the estimate at least ||J g|| / ||g||.
inline double jacobian_norm_estimate(const ResidualProblem& p, const Point& x, const Tangent& start, int steps = 20) {
  const Manifold& M = p.manifold();
  Tangent v = start;
  double nv = M.norm(v);
  if (nv == 0.0) {
    Rng rng(0x5eed);
    v = M.random_tangent(x, rng);
    nv = M.norm(v);
    if (nv == 0.0) return 0.0;
  }
  v *= 1.0 / nv;
  double est = apply_jacobian(p, x, v).norm();
  for (int i = 0; i < steps; ++i) {
    Tangent w = apply_adjoint(p, x, apply_jacobian(p, x, v));
    const double nw = M.norm(w);
    if (nw == 0.0) break;
    v = (1.0 / nw) * w;
    est = std::max(est, apply_jacobian(p, x, v).norm());
  }
  return est;
}

/// Dense m x n matrix of J(x) in the orthonormal frame `basis`.
inline Mat dense_jacobian(const ResidualProblem& p, const Point& x, const TangentBasis& basis) {
  Mat J(p.residual_dim(), static_cast<Eigen::Index>(basis.size()));
  for (std::size_t i = 0; i < basis.size(); ++i) J.col(static_cast<Eigen::Index>(i)) = apply_jacobian(p, x, basis.vectors[i]);
  return J;
}

// ---------------------------------------------------------------------------
// Numerical self-checks

struct FdReport {
  double max_grad_rel_error = 0.0;  ///< |<grad f, v> - central difference| / max(|fd|, ||grad f||)
  double max_adjoint_defect = 0.0;  ///< |<J*u, v> - <u, J v>| / (1 + ||u|| ||v||)
  double max_linearity_defect = 0.0;
  int trials = 0;
};

/// Compares the gradient against central differences of f along retraction
/// curves, and J* against J through the adjoint identity, on random unit
/// directions.
inline FdReport fd_check(const ResidualProblem& p, const Point& x, int trials, Rng& rng, double h = 1e-6) {
  const Manifold& M = p.manifold();
  FdReport rep;
  rep.trials = trials;
  const Tangent g = gradient(p, x);
  const double gnorm = M.norm(g);
  for (int t = 0; t < trials; ++t) {
    const Tangent v = M.random_tangent(x, rng);
    const double nv = M.norm(v);

    const double fp = objective(p, M.retract(x, h * v));
    const double fm = objective(p, M.retract(x, -h * v));
    const double fd = (fp - fm) / (2.0 * h);
    const double an = M.inner(g, v);
    const double scale = std::max({std::abs(fd), gnorm * nv, std::numeric_limits<double>::min()});
    rep.max_grad_rel_error = std::max(rep.max_grad_rel_error, std::abs(an - fd) / scale);

    Vec u = rng.normal_vector(p.residual_dim());
    u /= u.norm();
    const Vec Jv = apply_jacobian(p, x, v);
    const double lhs = M.inner(apply_adjoint(p, x, u), v);
    const double rhs = u.dot(Jv);
    rep.max_adjoint_defect = std::max(rep.max_adjoint_defect, std::abs(lhs - rhs) / (1.0 + u.norm() * nv));

    const Tangent w = M.random_tangent(x, rng);
    const double a = rng.normal(), b = rng.normal();
    const Vec combo = apply_jacobian(p, x, a * v + b * w);
    const Vec sep = a * Jv + b * apply_jacobian(p, x, w);
    rep.max_linearity_defect =
        std::max(rep.max_linearity_defect, (combo - sep).norm() / std::max(1.0, sep.norm()));
  }
  return rep;
}

}  // namespace rlm

#endif  // RLM_LEAST_SQUARES_HPP_
