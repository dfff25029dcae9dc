#ifndef RLM_PROBLEMS_HPP_
#define RLM_PROBLEMS_HPP_

// Benchmark generators with known ground truth:
//  - low-rank matrix completion on FixedRank(m, n, k)
//  - rank-r CP decomposition of a 3-way tensor over Euclidean factor matrices
//  - linear least squares on the unit sphere

#include "rlm/baselines.hpp"
#include "rlm/manifolds.hpp"

#include <array>
#include <set>

namespace rlm {

/// Move x along a random unit tangent by `radius` (via the retraction).
inline Point perturb(const Manifold& M, const Point& x, double radius, Rng& rng) {
  return M.retract(x, radius * M.random_tangent(x, rng));
}

// ---------------------------------------------------------------------------
// Matrix completion

struct CompletionInstance {
  Eigen::Index m = 0, n = 0, k = 0;
  double rs = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> omega;  // row-major sorted
  Vec values;                                                 // a_ij on omega
  Mat left, right;                                            // ground truth = left * right^T

  Mat ground_truth() const { return left * right.transpose(); }
};

/// round(rs * k (m + n - k))
inline std::size_t completion_sample_count(Eigen::Index m, Eigen::Index n, Eigen::Index k, double rs) {
  return static_cast<std::size_t>(std::llround(rs * static_cast<double>(k * (m + n - k))));
}

inline CompletionInstance make_completion_instance(Eigen::Index m, Eigen::Index n, Eigen::Index k, double rs,
                                                   std::uint64_t seed) {
  if (k < 1 || k > std::min(m, n)) throw ContractViolation("gen_completion: need 1 <= k <= min(m, n)");
  if (!(rs > 0.0)) throw ContractViolation("gen_completion: r_s must be > 0");
  const std::size_t target = completion_sample_count(m, n, k, rs);
  if (target > static_cast<std::size_t>(m * n))
    throw InfeasibleError("gen_completion: |Omega| = " + std::to_string(target) + " exceeds m*n");

  CompletionInstance inst;
  inst.m = m;
  inst.n = n;
  inst.k = k;
  inst.rs = rs;
  inst.seed = seed;
  Rng base(seed);
  Rng factors = base.split(0);
  inst.left = factors.normal_matrix(m, k);
  inst.right = factors.normal_matrix(n, k);

  Rng sampler = base.split(1);
  std::set<std::pair<Eigen::Index, Eigen::Index>> picked;
  while (picked.size() < target) {
    const auto i = static_cast<Eigen::Index>(sampler.below(static_cast<std::uint64_t>(m)));
    const auto j = static_cast<Eigen::Index>(sampler.below(static_cast<std::uint64_t>(n)));
    picked.emplace(i, j);
  }
  inst.omega.assign(picked.begin(), picked.end());
  inst.values.resize(static_cast<Eigen::Index>(inst.omega.size()));
  for (std::size_t l = 0; l < inst.omega.size(); ++l) {
    const auto [i, j] = inst.omega[l];
    inst.values(static_cast<Eigen::Index>(l)) = inst.left.row(i).dot(inst.right.row(j));
  }
  return inst;
}

/// F(X) = (X_ij - a_ij) over Omega in row-major order.
class CompletionProblem final : public ResidualProblem {
 public:
  explicit CompletionProblem(CompletionInstance inst)
      : inst_(std::move(inst)), manifold_(inst_.m, inst_.n, inst_.k) {}

  const Manifold& manifold() const override { return manifold_; }
  const FixedRankManifold& fixed_rank() const { return manifold_; }
  const CompletionInstance& instance() const { return inst_; }
  Eigen::Index residual_dim() const override { return static_cast<Eigen::Index>(inst_.omega.size()); }
  std::string name() const override {
    return "completion(" + std::to_string(inst_.m) + "," + std::to_string(inst_.n) + "," + std::to_string(inst_.k) + ")";
  }

  Vec eval_residual(const Point& x) const override {
    const Mat us = FixedRankManifold::U(x) * FixedRankManifold::S(x);
    const Mat& v = FixedRankManifold::V(x);
    Vec F(residual_dim());
    for (std::size_t l = 0; l < inst_.omega.size(); ++l) {
      const auto [i, j] = inst_.omega[l];
      const auto idx = static_cast<Eigen::Index>(l);
      F(idx) = us.row(i).dot(v.row(j)) - inst_.values(idx);
    }
    return F;
  }

  /// Entries of U M V^T + Up V^T + U Vp^T on Omega.
  Vec eval_jacobian(const Point& x, const Tangent& t) const override {
    const Mat& u = FixedRankManifold::U(x);
    const Mat& v = FixedRankManifold::V(x);
    const Mat lhs = u * t.block(0) + t.block(1);
    const Mat& vp = t.block(2);
    Vec out(residual_dim());
    for (std::size_t l = 0; l < inst_.omega.size(); ++l) {
      const auto [i, j] = inst_.omega[l];
      out(static_cast<Eigen::Index>(l)) = lhs.row(i).dot(v.row(j)) + u.row(i).dot(vp.row(j));
    }
    return out;
  }

  /// Tangent projection of the sparse matrix carrying u on Omega.
  Tangent eval_adjoint(const Point& x, const Vec& w) const override {
    const Mat& u = FixedRankManifold::U(x);
    const Mat& v = FixedRankManifold::V(x);
    Mat wv = Mat::Zero(inst_.m, inst_.k);
    Mat wtu = Mat::Zero(inst_.n, inst_.k);
    for (std::size_t l = 0; l < inst_.omega.size(); ++l) {
      const auto [i, j] = inst_.omega[l];
      const double a = w(static_cast<Eigen::Index>(l));
      wv.row(i) += a * v.row(j);
      wtu.row(j) += a * u.row(i);
    }
    return manifold_.from_products(x, wv, wtu);
  }

  /// The ground truth as a rank-k point.
  Point truth_point() const { return manifold_.from_factors(inst_.left, inst_.right); }

  /// Initial point: rank-k point of an independent A_L A_R^T, refined by
  /// steepest descent until ||grad f|| <= refine_grad_tol.
  Point initial_point(std::uint64_t stream = 0, double refine_grad_tol = 1e-3, int refine_max_iter = 20000) const {
    Rng rng = Rng(inst_.seed).split(2 + stream);
    const Mat l = rng.normal_matrix(inst_.m, inst_.k);
    const Mat r = rng.normal_matrix(inst_.n, inst_.k);
    Point x = manifold_.from_factors(l, r);
    if (refine_grad_tol > 0.0) {
      SdConfig sd;
      sd.grad_tol = refine_grad_tol;
      sd.max_iter = refine_max_iter;
      x = rsd_run(*this, x, sd).x;
    }
    return x;
  }

  /// ||X - A_L A_R^T||_F
  double error_to_truth(const Point& x) const { return (manifold_.to_matrix(x) - inst_.ground_truth()).norm(); }

 private:
  CompletionInstance inst_;
  FixedRankManifold manifold_;
};

struct Completion {
  CompletionInstance instance;
  std::shared_ptr<const CompletionProblem> problem;
};

inline Completion gen_completion(Eigen::Index m, Eigen::Index n, Eigen::Index k, double rs, std::uint64_t seed) {
  auto problem = std::make_shared<const CompletionProblem>(make_completion_instance(m, n, k, rs, seed));
  return {problem->instance(), problem};
}

// ---------------------------------------------------------------------------
// CP decomposition

/// Tensor entries are stored column-major: (i1, i2, i3) -> i1 + n1 (i2 + n2 i3).
struct CpInstance {
  std::array<Eigen::Index, 3> dims{};
  Eigen::Index rank = 0;
  double noise_exponent = 0.0;  // p; infinity disables the noise term
  std::uint64_t seed = 0;
  Vec tensor;                   // B
  std::array<Mat, 3> truth;     // factors with Phi(truth) = A / ||A||_F

  Eigen::Index size() const { return dims[0] * dims[1] * dims[2]; }
};

inline constexpr Eigen::Index kMaxDenseTensor = 1000000;

/// Phi(A1, A2, A3) = sum_i a1_i (x) a2_i (x) a3_i, vectorized.
inline Vec cp_reconstruct(const Mat& a1, const Mat& a2, const Mat& a3) {
  const Eigen::Index n1 = a1.rows(), n2 = a2.rows(), n3 = a3.rows();
  Vec out(n1 * n2 * n3);
  Eigen::Index idx = 0;
  for (Eigen::Index i3 = 0; i3 < n3; ++i3)
    for (Eigen::Index i2 = 0; i2 < n2; ++i2) {
      const Eigen::RowVectorXd w = a2.row(i2).cwiseProduct(a3.row(i3));
      for (Eigen::Index i1 = 0; i1 < n1; ++i1) out(idx++) = a1.row(i1).dot(w);
    }
  return out;
}

inline CpInstance make_cp_instance(std::array<Eigen::Index, 3> dims, Eigen::Index rank, double p, std::uint64_t seed) {
  if (rank < 1) throw ContractViolation("gen_cp: rank must be >= 1");
  if (!(p >= 0.0)) throw ContractViolation("gen_cp: noise exponent must be >= 0");
  for (auto d : dims)
    if (d < 1) throw ContractViolation("gen_cp: dimensions must be >= 1");
  if (dims[0] * dims[1] * dims[2] > kMaxDenseTensor) throw InfeasibleError("gen_cp: tensor too large to store densely");

  CpInstance inst;
  inst.dims = dims;
  inst.rank = rank;
  inst.noise_exponent = p;
  inst.seed = seed;
  Rng base(seed);
  Rng factors = base.split(0);
  for (int m = 0; m < 3; ++m) inst.truth[m] = factors.normal_matrix(dims[m], rank);
  const Vec A = cp_reconstruct(inst.truth[0], inst.truth[1], inst.truth[2]);
  const double scale = std::cbrt(1.0 / A.norm());
  for (auto& f : inst.truth) f *= scale;
  inst.tensor = A / A.norm();
  if (std::isfinite(p)) {
    Rng noise = base.split(1);
    const Vec E = noise.normal_vector(A.size());
    inst.tensor += std::pow(10.0, -p) * E / E.norm();
  }
  return inst;
}

/// F(A1, A2, A3) = vec(Phi(A1, A2, A3) - B) on the product of three
/// Euclidean factor-matrix spaces.  The parameterization has the scaling
/// indeterminacy a1_i -> c a1_i, a2_i -> a2_i / c, so J is rank deficient.
class CpProblem final : public ResidualProblem {
 public:
  explicit CpProblem(CpInstance inst) : inst_(std::move(inst)) {
    std::vector<ManifoldPtr> parts;
    for (auto d : inst_.dims) parts.push_back(std::make_shared<const EuclideanSpace>(d, inst_.rank));
    manifold_ = std::make_shared<const ProductManifold>(std::move(parts));
  }

  const Manifold& manifold() const override { return *manifold_; }
  const CpInstance& instance() const { return inst_; }
  Eigen::Index residual_dim() const override { return inst_.size(); }
  std::string name() const override {
    return "cp(" + std::to_string(inst_.dims[0]) + "x" + std::to_string(inst_.dims[1]) + "x" +
           std::to_string(inst_.dims[2]) + ",r=" + std::to_string(inst_.rank) + ")";
  }

  Vec reconstruct(const Point& x) const { return cp_reconstruct(x.block(0), x.block(1), x.block(2)); }

  Vec eval_residual(const Point& x) const override { return reconstruct(x) - inst_.tensor; }

  Vec eval_jacobian(const Point& x, const Tangent& t) const override {
    const Mat &a1 = x.block(0), &a2 = x.block(1), &a3 = x.block(2);
    const Mat &d1 = t.block(0), &d2 = t.block(1), &d3 = t.block(2);
    const auto [n1, n2, n3] = inst_.dims;
    Vec out(inst_.size());
    Eigen::Index idx = 0;
    for (Eigen::Index i3 = 0; i3 < n3; ++i3)
      for (Eigen::Index i2 = 0; i2 < n2; ++i2) {
        const Eigen::RowVectorXd w23 = a2.row(i2).cwiseProduct(a3.row(i3));
        const Eigen::RowVectorXd w_d = d2.row(i2).cwiseProduct(a3.row(i3)) + a2.row(i2).cwiseProduct(d3.row(i3));
        for (Eigen::Index i1 = 0; i1 < n1; ++i1) out(idx++) = d1.row(i1).dot(w23) + a1.row(i1).dot(w_d);
      }
    return out;
  }

  /// Matricized-tensor times Khatri-Rao product for each mode.
  Tangent eval_adjoint(const Point& x, const Vec& u) const override {
    const Mat &a1 = x.block(0), &a2 = x.block(1), &a3 = x.block(2);
    const auto [n1, n2, n3] = inst_.dims;
    Mat g1 = Mat::Zero(n1, inst_.rank), g2 = Mat::Zero(n2, inst_.rank), g3 = Mat::Zero(n3, inst_.rank);
    Eigen::Index idx = 0;
    for (Eigen::Index i3 = 0; i3 < n3; ++i3)
      for (Eigen::Index i2 = 0; i2 < n2; ++i2) {
        const Eigen::RowVectorXd w23 = a2.row(i2).cwiseProduct(a3.row(i3));
        Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(inst_.rank);
        for (Eigen::Index i1 = 0; i1 < n1; ++i1) {
          const double val = u(idx++);
          g1.row(i1) += val * w23;
          acc += val * a1.row(i1);
        }
        g2.row(i2) += acc.cwiseProduct(a3.row(i3));
        g3.row(i3) += acc.cwiseProduct(a2.row(i2));
      }
    return Tangent(x, {std::move(g1), std::move(g2), std::move(g3)});
  }

  Point truth_point() const { return Point({inst_.truth[0], inst_.truth[1], inst_.truth[2]}); }

  /// Gaussian factors scaled so that ||Phi(x0)|| is about ||B||.
  Point initial_point(std::uint64_t stream = 0) const {
    Rng rng = Rng(inst_.seed).split(2 + stream);
    const double sigma =
        std::cbrt(inst_.tensor.norm() / std::sqrt(static_cast<double>(inst_.rank * inst_.size())));
    std::vector<Mat> blocks;
    for (auto d : inst_.dims) blocks.push_back(sigma * rng.normal_matrix(d, inst_.rank));
    return Point(std::move(blocks));
  }

  /// ||Phi(x) - Phi(truth)||_F
  double error_to_truth(const Point& x) const { return (reconstruct(x) - reconstruct(truth_point())).norm(); }

 private:
  CpInstance inst_;
  std::shared_ptr<const ProductManifold> manifold_;
};

struct Cp {
  CpInstance instance;
  std::shared_ptr<const CpProblem> problem;
};

inline Cp gen_cp(std::array<Eigen::Index, 3> dims, Eigen::Index rank, double p, std::uint64_t seed) {
  auto problem = std::make_shared<const CpProblem>(make_cp_instance(dims, rank, p, seed));
  return {problem->instance(), problem};
}

// ---------------------------------------------------------------------------
// Sphere least squares

struct SphereLsInstance {
  Eigen::Index d = 0, m = 0;
  Mat A;  // m x d, rows a_i
  Vec b;
  bool zero_residual = true;
  double noise_exponent = 3.0;
  Vec planted;
  std::uint64_t seed = 0;
};

/// F_i(x) = <a_i, x> - b_i on S^{d-1}.
class SphereLsProblem final : public ResidualProblem {
 public:
  explicit SphereLsProblem(SphereLsInstance inst) : inst_(std::move(inst)), manifold_(inst_.d) {
    if (inst_.A.rows() != inst_.m || inst_.A.cols() != inst_.d || inst_.b.size() != inst_.m)
      throw ContractViolation("SphereLsProblem: shape mismatch");
  }

  const Manifold& manifold() const override { return manifold_; }
  const SphereManifold& sphere() const { return manifold_; }
  const SphereLsInstance& instance() const { return inst_; }
  Eigen::Index residual_dim() const override { return inst_.m; }
  std::string name() const override {
    return "sphere_ls(" + std::to_string(inst_.d) + "," + std::to_string(inst_.m) + ")";
  }

  Vec eval_residual(const Point& x) const override { return inst_.A * x.block(0) - inst_.b; }
  Vec eval_jacobian(const Point&, const Tangent& v) const override { return inst_.A * v.block(0); }
  Tangent eval_adjoint(const Point& x, const Vec& u) const override {
    return manifold_.project(x, inst_.A.transpose() * u);
  }

  Point truth_point() const { return manifold_.make_point(inst_.planted); }

  /// Point at geodesic distance `radius` from the planted solution.
  Point initial_point(double radius, std::uint64_t stream = 0) const {
    Rng rng = Rng(inst_.seed).split(2 + stream);
    return perturb(manifold_, truth_point(), radius, rng);
  }

  /// ||x - x*||
  double error_to_truth(const Point& x) const { return (x.block(0) - inst_.planted).norm(); }

 private:
  SphereLsInstance inst_;
  SphereManifold manifold_;
};

struct SphereLs {
  SphereLsInstance instance;
  std::shared_ptr<const SphereLsProblem> problem;
};

/// Rows a_i ~ N(0, I); planted x* uniform on the sphere; b = A x*, plus an
/// offset of norm 10^{-p} in the nonzero-residual case.
inline SphereLs gen_sphere_ls(Eigen::Index d, Eigen::Index m, bool zero_residual, std::uint64_t seed,
                              double noise_exponent = 3.0) {
  if (d < 2) throw ContractViolation("gen_sphere_ls: d must be >= 2");
  if (m < d) throw ContractViolation("gen_sphere_ls: need m >= d");
  SphereLsInstance inst;
  inst.d = d;
  inst.m = m;
  inst.zero_residual = zero_residual;
  inst.noise_exponent = noise_exponent;
  inst.seed = seed;
  Rng base(seed);
  Rng data = base.split(0);
  inst.A = data.normal_matrix(m, d);
  const Vec z = data.normal_vector(d);
  inst.planted = z / z.norm();
  inst.b = inst.A * inst.planted;
  if (!zero_residual) {
    Rng noise = base.split(1);
    const Vec e = noise.normal_vector(m);
    inst.b += std::pow(10.0, -noise_exponent) * e / e.norm();
  }
  auto problem = std::make_shared<const SphereLsProblem>(inst);
  return {inst, problem};
}

/// Sphere problem from explicit data; `planted` may be empty.
inline SphereLs make_sphere_ls(const Mat& A, const Vec& b, const Vec& planted = Vec()) {
  SphereLsInstance inst;
  inst.d = A.cols();
  inst.m = A.rows();
  inst.A = A;
  inst.b = b;
  inst.planted = planted.size() ? Vec(planted / planted.norm()) : Vec(Vec::Unit(A.cols(), 0));
  inst.zero_residual = (A * inst.planted - b).norm() == 0.0;
  auto problem = std::make_shared<const SphereLsProblem>(inst);
  return {inst, problem};
}

// ---------------------------------------------------------------------------

inline double error_to_truth(const CompletionProblem& p, const Point& x) { return p.error_to_truth(x); }
inline double error_to_truth(const CpProblem& p, const Point& x) { return p.error_to_truth(x); }
inline double error_to_truth(const SphereLsProblem& p, const Point& x) { return p.error_to_truth(x); }

}  // namespace rlm

#endif  // RLM_PROBLEMS_HPP_
