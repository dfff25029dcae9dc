#ifndef RLM_SOLVER_HPP_
#define RLM_SOLVER_HPP_

// Riemannian Levenberg-Marquardt.
//
// Each iteration solves (J*J + lambda I) s = -grad f on T_xM with
// lambda = mu ||F(x)||^2, evaluates the actual-vs-model decrease ratio rho,
// accepts the step iff rho >= eta and updates mu:
//   accepted, flag_nz:   mu_bar <- mu, mu <- mu_bar
//   accepted, !flag_nz:  mu_bar <- mu, mu <- max(mu_min, mu_bar / beta)
//   rejected:            mu <- beta mu, x unchanged

#include "rlm/least_squares.hpp"

#include <chrono>
#include <optional>
#include <sstream>

namespace rlm {

enum class SubproblemMethod { Auto, Dense, Cg };

struct RlmConfig {
  double eta = 0.2;
  double mu_min = 0.1;
  double beta = 5.0;
  bool flag_nz = false;

  double grad_tol = 1e-8;
  double f_tol = 0.0;  // 0 disables the rule
  int max_iter = 1000;
  double time_budget = std::numeric_limits<double>::infinity();  // seconds

  SubproblemMethod subproblem = SubproblemMethod::Auto;
  int dense_max_dim = 64;       // Auto picks the dense frame solve up to this intrinsic dim
  double cg_tol_factor = 1e-2;  // CG stops at ||r|| <= factor * min(1, ||g||) * ||g||
  int cg_max_iter = 0;          // 0: 10 * intrinsic dim

  double mu_overflow = 1e30;
  bool audit = false;          // run audit_iteration on every iteration
  bool record_points = false;  // keep x_k in the summary

  void validate() const {
    if (!(eta > 0.0 && eta < 1.0)) throw ContractViolation("RlmConfig: eta must lie in (0, 1)");
    if (!(mu_min > 0.0)) throw ContractViolation("RlmConfig: mu_min must be > 0");
    if (!(beta > 1.0)) throw ContractViolation("RlmConfig: beta must be > 1");
    if (grad_tol < 0.0 || f_tol < 0.0) throw ContractViolation("RlmConfig: tolerances must be >= 0");
    if (max_iter < 0) throw ContractViolation("RlmConfig: max_iter must be >= 0");
    if (!(cg_tol_factor > 0.0)) throw ContractViolation("RlmConfig: cg_tol_factor must be > 0");
  }
};

enum class Status { GradTol, FTol, MaxIter, TimeBudget, StepFailure };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::GradTol: return "GradTol";
    case Status::FTol: return "FTol";
    case Status::MaxIter: return "MaxIter";
    case Status::TimeBudget: return "TimeBudget";
    case Status::StepFailure: return "StepFailure";
  }
  return "?";
}

inline Status status_from_string(const std::string& s) {
  for (Status st : {Status::GradTol, Status::FTol, Status::MaxIter, Status::TimeBudget, Status::StepFailure})
    if (s == to_string(st)) return st;
  throw ContractViolation("unknown status '" + s + "'");
}

struct IterRecord {
  int k = 0;
  double f = 0.0;
  double grad_norm = 0.0;
  double lambda = 0.0;
  double mu = 0.0;
  double rho = 0.0;
  double step_norm = 0.0;
  bool successful = false;
  int sub_iters = 0;
  double wall_ms = 0.0;
  bool cg_breakdown = false;
  bool step_failure = false;  // retraction rank drop or degenerate model decrease
};

struct RunSummary {
  Status status = Status::MaxIter;
  int iters = 0;
  int successful_iters = 0;
  double final_f = 0.0;
  double final_grad_norm = 0.0;
  double wall_ms = 0.0;
  std::vector<IterRecord> trace;
  Point x;
  std::vector<Point> points;           // x_k per iteration when requested
  std::vector<std::string> violations;  // audit findings when requested
  std::string message;                  // diagnostics for StepFailure
};

/// Success in the sense of the benchmark tables: terminated by a tolerance.
inline bool succeeded(const RunSummary& s) { return s.status == Status::GradTol || s.status == Status::FTol; }

// ---------------------------------------------------------------------------
// Subproblem

/// theta(s) = ||F(x) + J(x)s||^2 + lambda ||s||_x^2
inline double theta(const ResidualProblem& p, const Point& x, const Tangent& s, double lambda) {
  const Manifold& M = p.manifold();
  const Vec F = residual(p, x);
  return (F + apply_jacobian(p, x, s)).squaredNorm() + lambda * M.inner(s, s);
}

/// theta(0) - theta(s) in the expanded form -2<g,s> - ||Js||^2 - lambda ||s||^2,
/// which avoids cancelling ||F||^2 against itself.
inline double model_decrease(const Manifold& M, const Tangent& grad, const Tangent& s, const Vec& Js, double lambda) {
  return -2.0 * M.inner(grad, s) - Js.squaredNorm() - lambda * M.inner(s, s);
}

struct SubproblemResult {
  Tangent step;
  int iterations = 0;
  bool breakdown = false;
};

/// ||(J*J + lambda I)s + g||_x
inline double normal_equation_residual(const ResidualProblem& p, const Point& x, const Tangent& s, double lambda,
                                       const Tangent& grad) {
  const Manifold& M = p.manifold();
  Tangent r = apply_adjoint(p, x, apply_jacobian(p, x, s));
  r.axpy(lambda, s);
  r += grad;
  return M.norm(r);
}

/// Solve in the orthonormal frame `basis`: (Jb^T Jb + lambda I) c = -Jb^T F,
/// with one step of iterative refinement.
inline SubproblemResult solve_subproblem_dense(const ResidualProblem& p, const Point& x, const Tangent& grad,
                                               double lambda, const TangentBasis& basis) {
  if (!(lambda > 0.0)) throw ContractViolation("solve_subproblem: lambda must be > 0");
  const Mat J = dense_jacobian(p, x, basis);
  const Vec g = basis.coordinates(grad);
  Mat A = J.transpose() * J;
  A.diagonal().array() += lambda;
  Eigen::LLT<Mat> llt(A);
  Vec c;
  if (llt.info() == Eigen::Success) {
    c = llt.solve(-g);
    c += llt.solve(-g - A * c);
  } else {
    Eigen::LDLT<Mat> ldlt(A);
    c = ldlt.solve(-g);
  }
  return {basis.combine(c), 1, false};
}

/// Matrix-free conjugate gradients on T_xM, started from 0.  The first
/// iterate is the Cauchy step, so Krylov iterates keep every model-decrease
/// guarantee of the exact step.
inline SubproblemResult solve_subproblem_cg(const ResidualProblem& p, const Point& x, const Tangent& grad, double lambda,
                                            double tol, int max_iter) {
  if (!(lambda > 0.0)) throw ContractViolation("solve_subproblem: lambda must be > 0");
  const Manifold& M = p.manifold();
  SubproblemResult res{M.zero(x), 0, false};
  Tangent r = -grad;
  double rr = M.inner(r, r);
  if (rr == 0.0) return res;
  Tangent d = r;
  for (int it = 0; it < max_iter; ++it) {
    Tangent Ad = apply_adjoint(p, x, apply_jacobian(p, x, d));
    Ad.axpy(lambda, d);
    const double dAd = M.inner(d, Ad);
    if (!(dAd > 0.0)) {
      res.breakdown = true;
      break;
    }
    const double alpha = rr / dAd;
    res.step.axpy(alpha, d);
    r.axpy(-alpha, Ad);
    ++res.iterations;
    const double rr_new = M.inner(r, r);
    if (std::sqrt(rr_new) <= tol) break;
    d *= rr_new / rr;
    d += r;
    rr = rr_new;
  }
  return res;
}

inline bool use_dense_path(const Manifold& M, const RlmConfig& cfg) {
  switch (cfg.subproblem) {
    case SubproblemMethod::Dense: return true;
    case SubproblemMethod::Cg: return false;
    case SubproblemMethod::Auto: return M.dim() <= cfg.dense_max_dim;
  }
  return false;
}

inline SubproblemResult solve_subproblem(const ResidualProblem& p, const Point& x, const Tangent& grad, double lambda,
                                         const RlmConfig& cfg) {
  const Manifold& M = p.manifold();
  if (grad.is_zero()) return {M.zero(x), 0, false};
  if (use_dense_path(M, cfg)) return solve_subproblem_dense(p, x, grad, lambda, M.tangent_basis(x));
  const double gnorm = M.norm(grad);
  const double tol = cfg.cg_tol_factor * std::min(1.0, gnorm) * gnorm;
  const int cap = cfg.cg_max_iter > 0 ? cfg.cg_max_iter : 10 * M.dim();
  return solve_subproblem_cg(p, x, grad, lambda, tol, cap);
}

inline SubproblemResult solve_subproblem(const ResidualProblem& p, const Point& x, double lambda, const RlmConfig& cfg) {
  return solve_subproblem(p, x, gradient(p, x), lambda, cfg);
}

// ---------------------------------------------------------------------------
// Acceptance test and damping update

class DegenerateModelDecrease : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kMinModelDecrease = 1e-300;

/// rho = (f(x) - f(R_x(s))) / (1/2 (theta(0) - theta(s))).  Throws
/// DegenerateModelDecrease when the denominator is <= 1e-300, RankDropError
/// when the retraction leaves the manifold.
inline double rho(const ResidualProblem& p, const Point& x, const Tangent& s, double lambda) {
  const Manifold& M = p.manifold();
  const Vec F = residual(p, x);
  const Tangent g = apply_adjoint(p, x, F);
  const double pred = model_decrease(M, g, s, apply_jacobian(p, x, s), lambda);
  if (!(pred > kMinModelDecrease)) throw DegenerateModelDecrease("rho: model decrease is not positive");
  const double f0 = 0.5 * F.squaredNorm();
  const double f1 = objective(p, M.retract(x, s));
  return (f0 - f1) / (0.5 * pred);
}

struct MuUpdate {
  double mu;
  double mu_bar;
};

inline MuUpdate update_mu(double mu, double mu_bar, bool successful, const RlmConfig& cfg) {
  if (!successful) return {cfg.beta * mu, mu_bar};
  const double new_bar = mu;
  if (cfg.flag_nz) return {new_bar, new_bar};
  return {std::max(cfg.mu_min, new_bar / cfg.beta), new_bar};
}

// ---------------------------------------------------------------------------
// Invariant audit

struct AuditContext {
  int k = 0;
  double grad_norm = 0.0;
  double jac_norm = 0.0;  // estimate of ||J(x_k)||
  double lambda = 0.0;
  double step_norm = 0.0;
  double model_decrease = 0.0;  // theta(0) - theta(s_k)
  double grad_dot_step = 0.0;   // <grad f, s_k>
};

/// Checks the Cauchy-decrease bound and both step bounds with slack
/// 1e-9 * scale.  Returns one message per violated inequality.
inline std::vector<std::string> audit_iteration(const AuditContext& c) {
  std::vector<std::string> out;
  const double g2 = c.grad_norm * c.grad_norm;
  const double denom = c.jac_norm * c.jac_norm + c.lambda;
  const double cauchy = denom > 0.0 ? g2 / denom : 0.0;
  auto slack = [](double a, double b) { return 1e-9 * std::max({1.0, std::abs(a), std::abs(b)}); };
  auto fail = [&](const char* tag, double lhs, double rhs) {
    std::ostringstream os;
    os.precision(17);
    os << "iter " << c.k << ": " << tag << " lhs=" << lhs << " rhs=" << rhs;
    out.push_back(os.str());
  };
  if (c.model_decrease < cauchy - slack(c.model_decrease, cauchy)) fail("cauchy-decrease", c.model_decrease, cauchy);
  if (c.lambda > 0.0) {
    const double bound = c.grad_norm / c.lambda;
    if (c.step_norm > bound + slack(c.step_norm, bound)) fail("step-bound", c.step_norm, bound);
  }
  if (-c.grad_dot_step < cauchy - slack(c.grad_dot_step, cauchy)) fail("descent-bound", -c.grad_dot_step, cauchy);
  return out;
}

// ---------------------------------------------------------------------------
// Convergence order

class InsufficientData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OrderEstimate {
  double q = 0.0;  // order
  double c = 0.0;  // rate constant
};

/// Fits log e_{k+1} = q log e_k + log c by least squares over the last
/// `window` usable values.  Non-positive or non-finite entries are dropped,
/// as are exact repeats (rejected iterations leave the error unchanged).
inline OrderEstimate estimate_order(const std::vector<double>& errors, std::size_t window = 4) {
  std::vector<double> e;
  for (double v : errors) {
    if (!(v > 0.0) || !std::isfinite(v)) continue;
    if (!e.empty() && v == e.back()) continue;
    e.push_back(v);
  }
  if (window < 4) window = 4;
  if (e.size() < 4) throw InsufficientData("estimate_order: fewer than 4 usable error values");
  const std::size_t start = e.size() > window ? e.size() - window : 0;
  std::vector<double> xs, ys;
  for (std::size_t i = start; i + 1 < e.size(); ++i) {
    xs.push_back(std::log(e[i]));
    ys.push_back(std::log(e[i + 1]));
  }
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (!(sxx > 0.0)) throw InsufficientData("estimate_order: error values do not vary");
  const double q = sxy / sxx;
  return {q, std::exp(my - q * mx)};
}

// ---------------------------------------------------------------------------
// Main loop

namespace detail {

using Clock = std::chrono::steady_clock;

inline double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

}  // namespace detail

inline RunSummary rlm_run(const ResidualProblem& p, const Point& x0, const RlmConfig& cfg) {
  cfg.validate();
  const Manifold& M = p.manifold();
  if (!M.contains(x0)) throw ContractViolation("rlm_run: x0 is not on the manifold");

  RunSummary out;
  const auto t0 = detail::Clock::now();

  double mu = cfg.mu_min;
  double mu_bar = mu;
  Point x = x0;
  Vec F;
  Tangent g = M.zero(x);
  try {
    F = residual(p, x);
    g = apply_adjoint(p, x, F);
  } catch (const EvaluationError& e) {
    out.status = Status::StepFailure;
    out.message = e.what();
    out.x = x;
    return out;
  }
  double f = 0.5 * F.squaredNorm();
  double gnorm = M.norm(g);

  for (int k = 0;; ++k) {
    if (gnorm <= cfg.grad_tol) {
      out.status = Status::GradTol;
      break;
    }
    if (f <= cfg.f_tol) {
      out.status = Status::FTol;
      break;
    }
    if (k >= cfg.max_iter) {
      out.status = Status::MaxIter;
      break;
    }
    if (detail::ms_since(t0) >= 1e3 * cfg.time_budget) {
      out.status = Status::TimeBudget;
      break;
    }

    IterRecord rec;
    rec.k = k;
    rec.f = f;
    rec.grad_norm = gnorm;
    rec.mu = mu;
    rec.lambda = mu * F.squaredNorm();
    if (cfg.record_points) out.points.push_back(x);

    try {
      SubproblemResult sub = solve_subproblem(p, x, g, rec.lambda, cfg);
      rec.sub_iters = sub.iterations;
      rec.cg_breakdown = sub.breakdown;
      const Tangent& s = sub.step;
      rec.step_norm = M.norm(s);
      const Vec Js = apply_jacobian(p, x, s);
      const double pred = model_decrease(M, g, s, Js, rec.lambda);

      if (cfg.audit) {
        AuditContext ctx;
        ctx.k = k;
        ctx.grad_norm = gnorm;
        ctx.jac_norm = jacobian_norm_estimate(p, x, g);
        ctx.lambda = rec.lambda;
        ctx.step_norm = rec.step_norm;
        ctx.model_decrease = pred;
        ctx.grad_dot_step = M.inner(g, s);
        for (auto& v : audit_iteration(ctx)) out.violations.push_back(std::move(v));
      }

      std::optional<Point> trial;
      Vec F_trial;
      double f_trial = f;
      if (!(pred > kMinModelDecrease)) {
        rec.step_failure = true;
        rec.rho = 0.0;
      } else {
        try {
          trial = M.retract(x, s);
        } catch (const RankDropError&) {
          rec.step_failure = true;
        }
        if (trial) {
          F_trial = residual(p, *trial);
          f_trial = 0.5 * F_trial.squaredNorm();
          rec.rho = (f - f_trial) / (0.5 * pred);
        }
      }
      rec.successful = trial.has_value() && rec.rho >= cfg.eta;

      const MuUpdate upd = update_mu(mu, mu_bar, rec.successful, cfg);
      mu = upd.mu;
      mu_bar = upd.mu_bar;
      if (rec.successful) {
        x = std::move(*trial);
        F = std::move(F_trial);
        f = f_trial;
        g = apply_adjoint(p, x, F);
        gnorm = M.norm(g);
        ++out.successful_iters;
      }
    } catch (const EvaluationError& e) {
      rec.wall_ms = detail::ms_since(t0);
      out.trace.push_back(rec);
      out.status = Status::StepFailure;
      out.message = e.what();
      break;
    }
    rec.wall_ms = detail::ms_since(t0);
    out.trace.push_back(rec);

    if (mu > cfg.mu_overflow) {
      out.status = Status::StepFailure;
      out.message = "mu exceeded overflow guard";
      break;
    }
  }

  out.iters = static_cast<int>(out.trace.size());
  out.final_f = f;
  out.final_grad_norm = gnorm;
  out.wall_ms = detail::ms_since(t0);
  out.x = x;
  return out;
}

}  // namespace rlm

#endif  // RLM_SOLVER_HPP_
