#ifndef RLM_BASELINES_HPP_
#define RLM_BASELINES_HPP_

// Comparison solvers: Riemannian Gauss-Newton with a truncated
// pseudo-inverse, and Riemannian steepest descent with Armijo backtracking.
// Both report through the same RunSummary / IterRecord types as rlm_run.

#include "rlm/solver.hpp"

namespace rlm {

struct GnConfig {
  double pinv_tol = 1e-12;  // relative singular-value cutoff
  int max_iter = 1000;
  double grad_tol = 1e-8;
  double f_tol = 0.0;
  double time_budget = std::numeric_limits<double>::infinity();
  int max_dim = 64;

  void validate() const {
    if (!(pinv_tol > 0.0 && pinv_tol < 1.0)) throw ContractViolation("GnConfig: pinv_tol must lie in (0, 1)");
    if (max_iter < 0) throw ContractViolation("GnConfig: max_iter must be >= 0");
  }
};

struct SdConfig {
  double armijo_c = 1e-4;
  double backtrack_factor = 0.5;
  double initial_step = 1.0;
  int max_backtracks = 60;
  int max_iter = 1000;
  double grad_tol = 1e-8;
  double f_tol = 0.0;
  double time_budget = std::numeric_limits<double>::infinity();

  void validate() const {
    if (!(armijo_c > 0.0 && armijo_c < 1.0)) throw ContractViolation("SdConfig: armijo_c must lie in (0, 1)");
    if (!(backtrack_factor > 0.0 && backtrack_factor < 1.0))
      throw ContractViolation("SdConfig: backtrack_factor must lie in (0, 1)");
    if (!(initial_step > 0.0)) throw ContractViolation("SdConfig: initial_step must be > 0");
    if (max_iter < 0) throw ContractViolation("SdConfig: max_iter must be >= 0");
  }
};

/// Gauss-Newton step -pinv(J) F(x) in the frame `basis`; singular values
/// below pinv_tol * sigma_1 are dropped.
inline Tangent gn_step(const ResidualProblem& p, const Point& x, const TangentBasis& basis, double pinv_tol) {
  const Mat J = dense_jacobian(p, x, basis);
  const Vec F = residual(p, x);
  Eigen::JacobiSVD<Mat> svd(J, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec& sv = svd.singularValues();
  Vec c = Vec::Zero(J.cols());
  if (sv.size() > 0 && sv(0) > 0.0) {
    const double cut = pinv_tol * sv(0);
    const Vec uf = svd.matrixU().transpose() * F;
    Vec w = Vec::Zero(sv.size());
    for (Eigen::Index i = 0; i < sv.size(); ++i)
      if (sv(i) > cut) w(i) = uf(i) / sv(i);
    c = -(svd.matrixV() * w);
  }
  return basis.combine(c);
}

namespace detail {

/// Shared stopping rules, checked at the top of each iteration.
inline std::optional<Status> check_stop(double gnorm, double grad_tol, double f, double f_tol, int k, int max_iter,
                                        Clock::time_point t0, double budget_s) {
  if (gnorm <= grad_tol) return Status::GradTol;
  if (f <= f_tol) return Status::FTol;
  if (k >= max_iter) return Status::MaxIter;
  if (ms_since(t0) >= 1e3 * budget_s) return Status::TimeBudget;
  return std::nullopt;
}

}  // namespace detail

inline RunSummary rgn_run(const ResidualProblem& p, const Point& x0, const GnConfig& cfg) {
  cfg.validate();
  const Manifold& M = p.manifold();
  if (M.dim() > cfg.max_dim) throw ContractViolation("rgn_run: intrinsic dimension too large for the dense frame");
  if (!M.contains(x0)) throw ContractViolation("rgn_run: x0 is not on the manifold");

  RunSummary out;
  const auto t0 = detail::Clock::now();
  Point x = x0;
  double f = 0.0, gnorm = 0.0;
  try {
    const Vec F = residual(p, x);
    f = 0.5 * F.squaredNorm();
    gnorm = M.norm(apply_adjoint(p, x, F));
    for (int k = 0;; ++k) {
      if (auto st = detail::check_stop(gnorm, cfg.grad_tol, f, cfg.f_tol, k, cfg.max_iter, t0, cfg.time_budget)) {
        out.status = *st;
        break;
      }
      IterRecord rec;
      rec.k = k;
      rec.f = f;
      rec.grad_norm = gnorm;
      rec.rho = std::numeric_limits<double>::quiet_NaN();
      rec.sub_iters = 1;
      const Tangent s = gn_step(p, x, M.tangent_basis(x), cfg.pinv_tol);
      rec.step_norm = M.norm(s);
      if (!s.all_finite() || !std::isfinite(rec.step_norm)) {
        rec.step_failure = true;
        rec.wall_ms = detail::ms_since(t0);
        out.trace.push_back(rec);
        out.status = Status::StepFailure;
        out.message = "non-finite Gauss-Newton step";
        break;
      }
      try {
        x = M.retract(x, s);
      } catch (const RankDropError& e) {
        rec.step_failure = true;
        rec.wall_ms = detail::ms_since(t0);
        out.trace.push_back(rec);
        out.status = Status::StepFailure;
        out.message = e.what();
        break;
      }
      rec.successful = true;
      ++out.successful_iters;
      const Vec Fn = residual(p, x);
      f = 0.5 * Fn.squaredNorm();
      gnorm = M.norm(apply_adjoint(p, x, Fn));
      rec.wall_ms = detail::ms_since(t0);
      out.trace.push_back(rec);
    }
  } catch (const EvaluationError& e) {
    out.status = Status::StepFailure;
    out.message = e.what();
  }
  out.iters = static_cast<int>(out.trace.size());
  out.final_f = f;
  out.final_grad_norm = gnorm;
  out.wall_ms = detail::ms_since(t0);
  out.x = x;
  return out;
}

/// Steepest descent along -grad f.  The first trial step has length
/// initial_step; later trials start at twice the last accepted multiplier.
/// Each trial is shrunk by backtrack_factor until the Armijo condition holds.
inline RunSummary rsd_run(const ResidualProblem& p, const Point& x0, const SdConfig& cfg) {
  cfg.validate();
  const Manifold& M = p.manifold();
  if (!M.contains(x0)) throw ContractViolation("rsd_run: x0 is not on the manifold");

  RunSummary out;
  const auto t0 = detail::Clock::now();
  Point x = x0;
  double f = 0.0, gnorm = 0.0;
  double t_next = 0.0;
  try {
    Vec F = residual(p, x);
    f = 0.5 * F.squaredNorm();
    Tangent g = apply_adjoint(p, x, F);
    gnorm = M.norm(g);
    for (int k = 0;; ++k) {
      if (auto st = detail::check_stop(gnorm, cfg.grad_tol, f, cfg.f_tol, k, cfg.max_iter, t0, cfg.time_budget)) {
        out.status = *st;
        break;
      }
      IterRecord rec;
      rec.k = k;
      rec.f = f;
      rec.grad_norm = gnorm;
      rec.rho = std::numeric_limits<double>::quiet_NaN();

      const Tangent d = -g;
      const double slope = -gnorm * gnorm;  // <grad f, d>
      double t = k == 0 ? cfg.initial_step / gnorm : t_next;
      bool accepted = false;
      for (int bt = 0; bt <= cfg.max_backtracks; ++bt) {
        std::optional<Point> trial;
        try {
          trial = M.retract(x, t * d);
        } catch (const RankDropError&) {
        }
        if (trial) {
          const Vec Ft = residual(p, *trial);
          const double ft = 0.5 * Ft.squaredNorm();
          if (ft <= f + cfg.armijo_c * t * slope) {
            x = std::move(*trial);
            F = Ft;
            f = ft;
            accepted = true;
            break;
          }
        }
        rec.sub_iters = bt + 1;
        t *= cfg.backtrack_factor;
      }
      if (!accepted) {
        rec.step_failure = true;
        rec.wall_ms = detail::ms_since(t0);
        out.trace.push_back(rec);
        out.status = Status::StepFailure;
        out.message = "Armijo backtracking exhausted";
        break;
      }
      rec.successful = true;
      rec.step_norm = t * gnorm;
      ++out.successful_iters;
      t_next = 2.0 * t;
      g = apply_adjoint(p, x, F);
      gnorm = M.norm(g);
      rec.wall_ms = detail::ms_since(t0);
      out.trace.push_back(rec);
    }
  } catch (const EvaluationError& e) {
    out.status = Status::StepFailure;
    out.message = e.what();
  }
  out.iters = static_cast<int>(out.trace.size());
  out.final_f = f;
  out.final_grad_norm = gnorm;
  out.wall_ms = detail::ms_since(t0);
  out.x = x;
  return out;
}

}  // namespace rlm

#endif  // RLM_BASELINES_HPP_
