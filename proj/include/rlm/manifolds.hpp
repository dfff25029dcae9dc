#ifndef RLM_MANIFOLDS_HPP_
#define RLM_MANIFOLDS_HPP_

#include "rlm/core.hpp"

#include <algorithm>
#include <numeric>

namespace rlm {

// ---------------------------------------------------------------------------

/// R^{rows x cols} with the Frobenius metric.  Retraction is addition.
class EuclideanSpace final : public Manifold {
 public:
  explicit EuclideanSpace(Eigen::Index rows, Eigen::Index cols = 1) : rows_(rows), cols_(cols) {
    if (rows < 1 || cols < 1) throw ContractViolation("EuclideanSpace: dimension must be >= 1");
  }

  int dim() const override { return static_cast<int>(rows_ * cols_); }
  std::string descriptor() const override {
    return cols_ == 1 ? "euclidean(" + std::to_string(rows_) + ")"
                      : "euclidean(" + std::to_string(rows_) + "x" + std::to_string(cols_) + ")";
  }
  Eigen::Index rows() const { return rows_; }
  Eigen::Index cols() const { return cols_; }

  Eigen::Index ambient_size() const override { return rows_ * cols_; }
  Vec point_to_ambient(const Point& x) const override { return x.block(0).reshaped(); }
  Vec tangent_to_ambient(const Tangent& v) const override { return v.block(0).reshaped(); }
  Tangent project(const Point& x, const Vec& w) const override {
    if (w.size() != ambient_size()) throw ContractViolation("EuclideanSpace::project: shape mismatch");
    return Tangent(x, {w.reshaped(rows_, cols_)});
  }

  Point retract(const Point& x, const Tangent& v) const override {
    require_same_base(x, v.base(), "EuclideanSpace::retract");
    if (v.is_zero()) return x;
    return Point({x.block(0) + v.block(0)});
  }

  double membership_defect(const Point& x) const override {
    if (x.num_blocks() != 1 || x.block(0).rows() != rows_ || x.block(0).cols() != cols_)
      return std::numeric_limits<double>::infinity();
    return x.block(0).allFinite() ? 0.0 : std::numeric_limits<double>::infinity();
  }
  double tangency_defect(const Tangent& v) const override {
    if (v.num_blocks() != 1 || v.block(0).rows() != rows_ || v.block(0).cols() != cols_)
      return std::numeric_limits<double>::infinity();
    return 0.0;
  }

  Tangent zero(const Point& x) const override { return Tangent(x, {Mat::Zero(rows_, cols_)}); }
  Point random_point(Rng& rng) const override { return Point({rng.normal_matrix(rows_, cols_)}); }

  Point make_point(const Mat& value) const {
    if (value.rows() != rows_ || value.cols() != cols_) throw ContractViolation("EuclideanSpace::make_point: shape mismatch");
    return Point({value});
  }
  Tangent make_tangent(const Point& x, const Mat& value) const {
    if (value.rows() != rows_ || value.cols() != cols_) throw ContractViolation("EuclideanSpace::make_tangent: shape mismatch");
    return Tangent(x, {value});
  }

 private:
  Eigen::Index rows_, cols_;
};

// ---------------------------------------------------------------------------

/// Unit sphere S^{d-1} in R^d with the embedded metric and the exponential
/// map as retraction.
class SphereManifold final : public Manifold {
 public:
  explicit SphereManifold(Eigen::Index ambient_dim) : d_(ambient_dim) {
    if (ambient_dim < 2) throw ContractViolation("SphereManifold: ambient dimension must be >= 2");
  }

  int dim() const override { return static_cast<int>(d_ - 1); }
  std::string descriptor() const override { return "sphere(" + std::to_string(d_) + ")"; }

  Eigen::Index ambient_size() const override { return d_; }
  Vec point_to_ambient(const Point& x) const override { return x.block(0); }
  Vec tangent_to_ambient(const Tangent& v) const override { return v.block(0); }
  Tangent project(const Point& x, const Vec& w) const override {
    if (w.size() != d_) throw ContractViolation("SphereManifold::project: shape mismatch");
    const Vec& p = x.block(0);
    return Tangent(x, {w - p.dot(w) * p});
  }

  /// cos(|v|) x + sin(|v|) v/|v|, renormalized.
  Point retract(const Point& x, const Tangent& v) const override {
    require_same_base(x, v.base(), "SphereManifold::retract");
    const double nv = v.block(0).norm();
    if (nv == 0.0) return x;
    Vec y = std::cos(nv) * x.block(0) + (std::sin(nv) / nv) * v.block(0);
    y /= y.norm();
    return Point({std::move(y)});
  }

  double membership_defect(const Point& x) const override {
    if (x.num_blocks() != 1 || x.block(0).size() != d_ || x.block(0).cols() != 1)
      return std::numeric_limits<double>::infinity();
    return std::abs(x.block(0).norm() - 1.0);
  }
  double tangency_defect(const Tangent& v) const override {
    if (v.num_blocks() != 1 || v.block(0).size() != d_) return std::numeric_limits<double>::infinity();
    return std::abs(v.base().block(0).col(0).dot(v.block(0).col(0)));
  }

  Tangent zero(const Point& x) const override { return Tangent(x, {Vec::Zero(d_)}); }
  Point random_point(Rng& rng) const override {
    Vec y = rng.normal_vector(d_);
    return Point({Vec(y / y.norm())});
  }

  Point make_point(const Vec& value) const {
    if (value.size() != d_) throw ContractViolation("SphereManifold::make_point: shape mismatch");
    return Point({Vec(value / value.norm())});
  }

 private:
  Eigen::Index d_;
};

// ---------------------------------------------------------------------------

/// m x n matrices of rank exactly k, embedded in R^{m x n}.
///
/// Point  = (U, S, V): X = U S V^T with U^T U = I, V^T V = I, S k x k invertible.
/// Tangent = (M, Up, Vp): xi = U M V^T + Up V^T + U Vp^T with U^T Up = 0, V^T Vp = 0.
/// The Frobenius metric of the ambient representation reduces to the sum of
/// the three block Frobenius products.
class FixedRankManifold final : public Manifold {
 public:
  FixedRankManifold(Eigen::Index m, Eigen::Index n, Eigen::Index k) : m_(m), n_(n), k_(k) {
    if (k < 1 || k > std::min(m, n)) throw ContractViolation("FixedRankManifold: need 1 <= k <= min(m, n)");
  }

  Eigen::Index rows() const { return m_; }
  Eigen::Index cols() const { return n_; }
  Eigen::Index rank() const { return k_; }

  int dim() const override { return static_cast<int>(k_ * (m_ + n_ - k_)); }
  std::string descriptor() const override {
    return "fixedrank(" + std::to_string(m_) + "," + std::to_string(n_) + "," + std::to_string(k_) + ")";
  }
  std::size_t point_blocks() const override { return 3; }
  std::size_t tangent_blocks() const override { return 3; }

  static const Mat& U(const Point& x) { return x.block(0); }
  static const Mat& S(const Point& x) { return x.block(1); }
  static const Mat& V(const Point& x) { return x.block(2); }

  Mat to_matrix(const Point& x) const { return U(x) * S(x) * V(x).transpose(); }
  Mat tangent_matrix(const Tangent& v) const {
    const Point& x = v.base();
    return U(x) * v.block(0) * V(x).transpose() + v.block(1) * V(x).transpose() + U(x) * v.block(2).transpose();
  }

  Eigen::Index ambient_size() const override { return m_ * n_; }
  Vec point_to_ambient(const Point& x) const override { return to_matrix(x).reshaped(); }
  Vec tangent_to_ambient(const Tangent& v) const override { return tangent_matrix(v).reshaped(); }

  Tangent project(const Point& x, const Vec& w) const override {
    if (w.size() != m_ * n_) throw ContractViolation("FixedRankManifold::project: shape mismatch");
    return project_matrix(x, w.reshaped(m_, n_));
  }

  /// P_U W P_V + P_U^perp W P_V + P_U W P_V^perp in factored form.
  Tangent project_matrix(const Point& x, const Mat& W) const {
    return from_products(x, W * V(x), W.transpose() * U(x));
  }

  /// Tangent projection given only W V (m x k) and W^T U (n x k).  Lets
  /// callers with sparse W avoid forming the dense matrix.
  Tangent from_products(const Point& x, const Mat& WV, const Mat& WtU) const {
    Mat M = U(x).transpose() * WV;
    Mat Up = WV - U(x) * M;
    Mat Vp = WtU - V(x) * M.transpose();
    return Tangent(x, {std::move(M), std::move(Up), std::move(Vp)});
  }

  /// Metric projection: rank-k truncated SVD of X + xi, computed from QR of
  /// [U Up] and [V Vp] and a 2k x 2k core SVD.  Never forms an m x n matrix.
  Point retract(const Point& x, const Tangent& v) const override {
    require_same_base(x, v.base(), "FixedRankManifold::retract");
    if (v.is_zero()) return x;
    const Eigen::Index k = k_;
    Mat left(m_, 2 * k), right(n_, 2 * k);
    left << U(x), v.block(1);
    right << V(x), v.block(2);
    Eigen::HouseholderQR<Mat> qr_left(left), qr_right(right);
    const Mat q_left = qr_left.householderQ() * Mat::Identity(m_, 2 * k);
    const Mat q_right = qr_right.householderQ() * Mat::Identity(n_, 2 * k);
    const Mat r_left = qr_left.matrixQR().topRows(2 * k).triangularView<Eigen::Upper>();
    const Mat r_right = qr_right.matrixQR().topRows(2 * k).triangularView<Eigen::Upper>();

    Mat middle = Mat::Zero(2 * k, 2 * k);
    middle.topLeftCorner(k, k) = S(x) + v.block(0);
    middle.topRightCorner(k, k).setIdentity();
    middle.bottomLeftCorner(k, k).setIdentity();
    const Mat core = r_left * middle * r_right.transpose();

    Eigen::JacobiSVD<Mat> svd(core, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec& sigma = svd.singularValues();
    if (!(sigma(k - 1) > 1e-12 * sigma(0)))
      throw RankDropError("fixed-rank retraction: sigma_k / sigma_1 = " + std::to_string(sigma(k - 1) / sigma(0)));

    Mat new_u = q_left * svd.matrixU().leftCols(k);
    Mat new_v = q_right * svd.matrixV().leftCols(k);
    Mat new_s = sigma.head(k).asDiagonal();
    return Point({std::move(new_u), std::move(new_s), std::move(new_v)});
  }

  double membership_defect(const Point& x) const override {
    if (x.num_blocks() != 3) return std::numeric_limits<double>::infinity();
    const Mat& u = U(x);
    const Mat& s = S(x);
    const Mat& v = V(x);
    if (u.rows() != m_ || u.cols() != k_ || s.rows() != k_ || s.cols() != k_ || v.rows() != n_ || v.cols() != k_)
      return std::numeric_limits<double>::infinity();
    const Vec sv = s.jacobiSvd().singularValues();
    if (!(sv(k_ - 1) > 1e-12 * sv(0))) return std::numeric_limits<double>::infinity();
    const Mat I = Mat::Identity(k_, k_);
    return std::max((u.transpose() * u - I).cwiseAbs().maxCoeff(), (v.transpose() * v - I).cwiseAbs().maxCoeff());
  }

  double tangency_defect(const Tangent& t) const override {
    if (t.num_blocks() != 3) return std::numeric_limits<double>::infinity();
    const Point& x = t.base();
    if (t.block(0).rows() != k_ || t.block(0).cols() != k_ || t.block(1).rows() != m_ || t.block(1).cols() != k_ ||
        t.block(2).rows() != n_ || t.block(2).cols() != k_)
      return std::numeric_limits<double>::infinity();
    return std::max((U(x).transpose() * t.block(1)).cwiseAbs().maxCoeff(),
                    (V(x).transpose() * t.block(2)).cwiseAbs().maxCoeff());
  }

  Tangent zero(const Point& x) const override {
    return Tangent(x, {Mat::Zero(k_, k_), Mat::Zero(m_, k_), Mat::Zero(n_, k_)});
  }

  Point random_point(Rng& rng) const override {
    return from_factors(rng.normal_matrix(m_, k_), rng.normal_matrix(n_, k_));
  }

  Tangent random_tangent(const Point& x, Rng& rng) const override {
    Mat M = rng.normal_matrix(k_, k_);
    Mat Up = rng.normal_matrix(m_, k_);
    Mat Vp = rng.normal_matrix(n_, k_);
    Up -= U(x) * (U(x).transpose() * Up);
    Vp -= V(x) * (V(x).transpose() * Vp);
    Tangent t(x, {std::move(M), std::move(Up), std::move(Vp)});
    return (1.0 / norm(t)) * t;
  }

  /// Rank-k point for L R^T (L: m x k, R: n x k) via QR of both factors and a
  /// k x k SVD.
  Point from_factors(const Mat& L, const Mat& R) const {
    if (L.rows() != m_ || R.rows() != n_ || L.cols() != k_ || R.cols() != k_)
      throw ContractViolation("FixedRankManifold::from_factors: shape mismatch");
    Eigen::HouseholderQR<Mat> ql(L), qr(R);
    const Mat q_l = ql.householderQ() * Mat::Identity(m_, k_);
    const Mat q_r = qr.householderQ() * Mat::Identity(n_, k_);
    const Mat r_l = ql.matrixQR().topRows(k_).triangularView<Eigen::Upper>();
    const Mat r_r = qr.matrixQR().topRows(k_).triangularView<Eigen::Upper>();
    Eigen::JacobiSVD<Mat> svd(r_l * r_r.transpose(), Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec& sigma = svd.singularValues();
    if (!(sigma(k_ - 1) > 1e-12 * sigma(0))) throw RankDropError("from_factors: product has rank < k");
    return Point({Mat(q_l * svd.matrixU()), Mat(sigma.asDiagonal()), Mat(q_r * svd.matrixV())});
  }

  /// Best rank-k approximation of a dense matrix.
  Point from_matrix(const Mat& X) const {
    if (X.rows() != m_ || X.cols() != n_) throw ContractViolation("FixedRankManifold::from_matrix: shape mismatch");
    Eigen::JacobiSVD<Mat> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vec& sigma = svd.singularValues();
    if (!(sigma(k_ - 1) > 1e-12 * sigma(0))) throw RankDropError("from_matrix: matrix has rank < k");
    return Point({Mat(svd.matrixU().leftCols(k_)), Mat(sigma.head(k_).asDiagonal()), Mat(svd.matrixV().leftCols(k_))});
  }

 private:
  Eigen::Index m_, n_, k_;
};

// ---------------------------------------------------------------------------

/// M_1 x ... x M_c.  Points and tangents concatenate the component blocks;
/// the metric is the sum of the component metrics.
class ProductManifold final : public Manifold {
 public:
  explicit ProductManifold(std::vector<ManifoldPtr> components) : parts_(std::move(components)) {
    if (parts_.empty()) throw ContractViolation("ProductManifold: need at least one component");
  }

  std::size_t size() const { return parts_.size(); }
  const Manifold& component(std::size_t i) const { return *parts_.at(i); }

  int dim() const override {
    int d = 0;
    for (const auto& p : parts_) d += p->dim();
    return d;
  }
  std::string descriptor() const override {
    std::string s = "product(";
    for (std::size_t i = 0; i < parts_.size(); ++i) s += (i ? "," : "") + parts_[i]->descriptor();
    return s + ")";
  }
  std::size_t point_blocks() const override {
    std::size_t n = 0;
    for (const auto& p : parts_) n += p->point_blocks();
    return n;
  }
  std::size_t tangent_blocks() const override {
    std::size_t n = 0;
    for (const auto& p : parts_) n += p->tangent_blocks();
    return n;
  }
  Eigen::Index ambient_size() const override {
    Eigen::Index n = 0;
    for (const auto& p : parts_) n += p->ambient_size();
    return n;
  }

  std::vector<Point> split(const Point& x) const {
    check_point_blocks(x);
    std::vector<Point> out;
    std::size_t off = 0;
    for (const auto& p : parts_) {
      const std::size_t nb = p->point_blocks();
      out.emplace_back(std::vector<Mat>(x.blocks().begin() + off, x.blocks().begin() + off + nb));
      off += nb;
    }
    return out;
  }

  /// Component tangents, each based at the matching entry of `points`.
  std::vector<Tangent> split(const Tangent& v, const std::vector<Point>& points) const {
    if (v.num_blocks() != tangent_blocks() || points.size() != parts_.size())
      throw ContractViolation("ProductManifold: component count mismatch");
    std::vector<Tangent> out;
    std::size_t off = 0;
    for (std::size_t i = 0; i < parts_.size(); ++i) {
      const std::size_t nb = parts_[i]->tangent_blocks();
      out.emplace_back(points[i], std::vector<Mat>(v.coords().begin() + off, v.coords().begin() + off + nb));
      off += nb;
    }
    return out;
  }

  Point join(const std::vector<Point>& points) const {
    if (points.size() != parts_.size()) throw ContractViolation("ProductManifold::join: component count mismatch");
    std::vector<Mat> blocks;
    for (const auto& p : points) blocks.insert(blocks.end(), p.blocks().begin(), p.blocks().end());
    return Point(std::move(blocks));
  }

  Tangent join(const Point& x, const std::vector<Tangent>& parts) const {
    if (parts.size() != parts_.size()) throw ContractViolation("ProductManifold::join: component count mismatch");
    std::vector<Mat> blocks;
    for (const auto& t : parts) blocks.insert(blocks.end(), t.coords().begin(), t.coords().end());
    return Tangent(x, std::move(blocks));
  }

  Vec point_to_ambient(const Point& x) const override {
    Vec out(ambient_size());
    Eigen::Index off = 0;
    const auto xs = split(x);
    for (std::size_t i = 0; i < parts_.size(); ++i) {
      const Eigen::Index n = parts_[i]->ambient_size();
      out.segment(off, n) = parts_[i]->point_to_ambient(xs[i]);
      off += n;
    }
    return out;
  }

  Vec tangent_to_ambient(const Tangent& v) const override {
    Vec out(ambient_size());
    Eigen::Index off = 0;
    const auto xs = split(v.base());
    const auto vs = split(v, xs);
    for (std::size_t i = 0; i < parts_.size(); ++i) {
      const Eigen::Index n = parts_[i]->ambient_size();
      out.segment(off, n) = parts_[i]->tangent_to_ambient(vs[i]);
      off += n;
    }
    return out;
  }

  Tangent project(const Point& x, const Vec& w) const override {
    if (w.size() != ambient_size()) throw ContractViolation("ProductManifold::project: shape mismatch");
    const auto xs = split(x);
    std::vector<Tangent> ts;
    Eigen::Index off = 0;
    for (std::size_t i = 0; i < parts_.size(); ++i) {
      const Eigen::Index n = parts_[i]->ambient_size();
      ts.push_back(parts_[i]->project(xs[i], w.segment(off, n)));
      off += n;
    }
    return join(x, ts);
  }

  Point retract(const Point& x, const Tangent& v) const override {
    require_same_base(x, v.base(), "ProductManifold::retract");
    if (v.is_zero()) return x;
    const auto xs = split(x);
    const auto vs = split(v, xs);
    std::vector<Point> ys;
    for (std::size_t i = 0; i < parts_.size(); ++i) ys.push_back(parts_[i]->retract(xs[i], vs[i]));
    return join(ys);
  }

  double inner(const Tangent& u, const Tangent& v) const override {
    require_same_base(u.base(), v.base(), "ProductManifold::inner");
    const auto xs = split(u.base());
    const auto us = split(u, xs);
    const auto vs = split(v, xs);
    double s = 0.0;
    for (std::size_t i = 0; i < parts_.size(); ++i) s += parts_[i]->inner(us[i], vs[i]);
    return s;
  }

  double membership_defect(const Point& x) const override {
    if (x.num_blocks() != point_blocks()) return std::numeric_limits<double>::infinity();
    double d = 0.0;
    const auto xs = split(x);
    for (std::size_t i = 0; i < parts_.size(); ++i) d = std::max(d, parts_[i]->membership_defect(xs[i]));
    return d;
  }

  double tangency_defect(const Tangent& v) const override {
    if (v.num_blocks() != tangent_blocks()) return std::numeric_limits<double>::infinity();
    const auto xs = split(v.base());
    const auto vs = split(v, xs);
    double d = 0.0;
    for (std::size_t i = 0; i < parts_.size(); ++i) d = std::max(d, parts_[i]->tangency_defect(vs[i]));
    return d;
  }

  Tangent zero(const Point& x) const override {
    const auto xs = split(x);
    std::vector<Tangent> ts;
    for (std::size_t i = 0; i < parts_.size(); ++i) ts.push_back(parts_[i]->zero(xs[i]));
    return join(x, ts);
  }

  Point random_point(Rng& rng) const override {
    std::vector<Point> ps;
    for (const auto& p : parts_) ps.push_back(p->random_point(rng));
    return join(ps);
  }

  /// Block-diagonal union of the component frames.
  TangentBasis tangent_basis(const Point& x) const override {
    const auto xs = split(x);
    std::vector<TangentBasis> frames;
    for (std::size_t i = 0; i < parts_.size(); ++i) frames.push_back(parts_[i]->tangent_basis(xs[i]));
    TangentBasis out{x, {}};
    for (std::size_t i = 0; i < parts_.size(); ++i) {
      for (const auto& b : frames[i].vectors) {
        std::vector<Tangent> ts;
        for (std::size_t j = 0; j < parts_.size(); ++j) ts.push_back(j == i ? b : parts_[j]->zero(xs[j]));
        out.vectors.push_back(join(x, ts));
      }
    }
    return out;
  }

 private:
  void check_point_blocks(const Point& x) const {
    if (x.num_blocks() != point_blocks()) throw ContractViolation("ProductManifold: component count mismatch");
  }

  std::vector<ManifoldPtr> parts_;
};

}  // namespace rlm

#endif  // RLM_MANIFOLDS_HPP_
