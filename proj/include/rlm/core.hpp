#ifndef RLM_CORE_HPP_
#define RLM_CORE_HPP_

// Manifold interface shared by every concrete manifold, the least-squares
// layer and the solvers.
//
// Points and tangent vectors are stored as ordered lists of dense blocks.
// The block layout is manifold specific (one vector for the sphere, the
// (U, S, V) triple for fixed rank, concatenated component blocks for
// products).  Every concrete metric used here is the Frobenius product of
// the tangent blocks, which the default inner() implements.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rlm {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Tolerance on the defining residuals of membership and tangency tests.
inline constexpr double kMembershipTol = 1e-10;

// ---------------------------------------------------------------------------
// Errors

/// Misuse of an interface: base-point mismatch, shape mismatch, bad config.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Fixed-rank retraction produced a matrix whose numerical rank dropped.
class RankDropError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite residual / Jacobian output.  `index` is the offending entry.
class EvaluationError : public std::runtime_error {
 public:
  EvaluationError(const std::string& what, std::ptrdiff_t index)
      : std::runtime_error(what + " (index " + std::to_string(index) + ")"), index_(index) {}
  std::ptrdiff_t index() const { return index_; }

 private:
  std::ptrdiff_t index_;
};

/// A generator was asked for something it cannot build.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Random numbers

/// SplitMix64: 64-bit generator with cheap, well-mixed stream splitting.
/// Satisfies UniformRandomBitGenerator so it plugs into <random>.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed = 0) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Independent child generator for `stream`; does not advance this one.
  SplitMix64 split(std::uint64_t stream) const {
    SplitMix64 mixer(state_ ^ (0xD1B54A32D192ED03ULL * (stream + 1)));
    return SplitMix64(mixer());
  }

 private:
  std::uint64_t state_;
};

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  explicit Rng(SplitMix64 gen) : gen_(gen) {}

  double normal() { return normal_(gen_); }
  double uniform() { return uniform_(gen_); }
  std::uint64_t bits() { return gen_(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(gen_); }

  Mat normal_matrix(Eigen::Index rows, Eigen::Index cols) {
    Mat out(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = normal();
    return out;
  }
  Vec normal_vector(Eigen::Index n) { return normal_matrix(n, 1); }

  Rng split(std::uint64_t stream) const { return Rng(gen_.split(stream)); }

 private:
  SplitMix64 gen_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

// ---------------------------------------------------------------------------
// Points and tangent vectors

/// Immutable manifold element.  Copies share storage, so identity checks
/// between a tangent's base and a point are usually a pointer compare.
class Point {
 public:
  Point() : data_(std::make_shared<const std::vector<Mat>>()) {}
  explicit Point(std::vector<Mat> blocks)
      : data_(std::make_shared<const std::vector<Mat>>(std::move(blocks))) {}

  const std::vector<Mat>& blocks() const { return *data_; }
  const Mat& block(std::size_t i) const { return data_->at(i); }
  std::size_t num_blocks() const { return data_->size(); }

  /// Same storage, or bitwise-equal blocks.
  bool same_as(const Point& other) const {
    if (data_ == other.data_) return true;
    const auto& a = *data_;
    const auto& b = *other.data_;
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i].rows() != b[i].rows() || a[i].cols() != b[i].cols()) return false;
      if (!(a[i].array() == b[i].array()).all()) return false;
    }
    return true;
  }

 private:
  std::shared_ptr<const std::vector<Mat>> data_;
};

inline void require_same_base(const Point& a, const Point& b, const char* where) {
  if (!a.same_as(b)) throw ContractViolation(std::string(where) + ": tangent vectors live at different base points");
}

/// Element of T_xM.  Carries its base point; binary operations check it.
class Tangent {
 public:
  Tangent(Point base, std::vector<Mat> coords) : base_(std::move(base)), coords_(std::move(coords)) {}

  const Point& base() const { return base_; }
  const std::vector<Mat>& coords() const { return coords_; }
  std::vector<Mat>& coords() { return coords_; }
  const Mat& block(std::size_t i) const { return coords_.at(i); }
  std::size_t num_blocks() const { return coords_.size(); }

  Eigen::Index size() const {
    Eigen::Index n = 0;
    for (const auto& b : coords_) n += b.size();
    return n;
  }

  /// Blocks stacked column-major into one vector.
  Vec flatten() const {
    Vec out(size());
    Eigen::Index off = 0;
    for (const auto& b : coords_) {
      out.segment(off, b.size()) = b.reshaped();
      off += b.size();
    }
    return out;
  }

  /// Inverse of flatten(), reusing this vector's block shapes.
  Tangent with_flat(const Vec& flat) const {
    if (flat.size() != size()) throw ContractViolation("Tangent::with_flat: size mismatch");
    std::vector<Mat> out;
    out.reserve(coords_.size());
    Eigen::Index off = 0;
    for (const auto& b : coords_) {
      out.emplace_back(flat.segment(off, b.size()).reshaped(b.rows(), b.cols()));
      off += b.size();
    }
    return Tangent(base_, std::move(out));
  }

  Tangent& operator+=(const Tangent& o) { return axpy(1.0, o); }
  Tangent& operator-=(const Tangent& o) { return axpy(-1.0, o); }
  Tangent& operator*=(double a) {
    for (auto& b : coords_) b *= a;
    return *this;
  }
  /// this += a * o
  Tangent& axpy(double a, const Tangent& o) {
    require_same_base(base_, o.base_, "Tangent::axpy");
    check_shapes(o);
    for (std::size_t i = 0; i < coords_.size(); ++i) coords_[i] += a * o.coords_[i];
    return *this;
  }

  friend Tangent operator+(Tangent a, const Tangent& b) { return a += b; }
  friend Tangent operator-(Tangent a, const Tangent& b) { return a -= b; }
  friend Tangent operator*(double s, Tangent a) { return a *= s; }
  friend Tangent operator-(Tangent a) { return a *= -1.0; }

  bool is_zero() const {
    for (const auto& b : coords_)
      if (!(b.array() == 0.0).all()) return false;
    return true;
  }
  bool all_finite() const {
    for (const auto& b : coords_)
      if (!b.allFinite()) return false;
    return true;
  }

 private:
  void check_shapes(const Tangent& o) const {
    if (o.coords_.size() != coords_.size()) throw ContractViolation("Tangent: block count mismatch");
    for (std::size_t i = 0; i < coords_.size(); ++i)
      if (o.coords_[i].rows() != coords_[i].rows() || o.coords_[i].cols() != coords_[i].cols())
        throw ContractViolation("Tangent: block shape mismatch");
  }

  Point base_;
  std::vector<Mat> coords_;
};

/// Ordered orthonormal frame of T_xM.
struct TangentBasis {
  Point base;
  std::vector<Tangent> vectors;

  std::size_t size() const { return vectors.size(); }

  /// Coordinates of v in this frame (valid because the frame is orthonormal
  /// and every metric here is the block Frobenius product).
  Vec coordinates(const Tangent& v) const {
    require_same_base(base, v.base(), "TangentBasis::coordinates");
    const Vec flat = v.flatten();
    Vec c(static_cast<Eigen::Index>(vectors.size()));
    for (std::size_t i = 0; i < vectors.size(); ++i) c(static_cast<Eigen::Index>(i)) = vectors[i].flatten().dot(flat);
    return c;
  }

  Tangent combine(const Vec& c) const {
    if (vectors.empty()) throw ContractViolation("TangentBasis::combine: empty frame");
    if (c.size() != static_cast<Eigen::Index>(vectors.size())) throw ContractViolation("TangentBasis::combine: size mismatch");
    Tangent out = 0.0 * vectors.front();
    for (std::size_t i = 0; i < vectors.size(); ++i) out.axpy(c(static_cast<Eigen::Index>(i)), vectors[i]);
    return out;
  }
};

// ---------------------------------------------------------------------------
// Manifold interface

/// Riemannian manifold embedded in a flat ambient space R^N.  Descriptors are
/// immutable after construction and may be shared between threads.
class Manifold {
 public:
  virtual ~Manifold() = default;

  /// Intrinsic dimension n.
  virtual int dim() const = 0;
  /// Kind tag plus shape parameters, e.g. "fixedrank(30,30,3)".
  virtual std::string descriptor() const = 0;

  /// Number of dense blocks in a point / tangent representation.
  virtual std::size_t point_blocks() const { return 1; }
  virtual std::size_t tangent_blocks() const { return 1; }

  /// Size N of the flat ambient representation.
  virtual Eigen::Index ambient_size() const = 0;
  virtual Vec point_to_ambient(const Point& x) const = 0;
  virtual Vec tangent_to_ambient(const Tangent& v) const = 0;
  /// Metric-orthogonal projection of an ambient vector onto T_xM.
  virtual Tangent project(const Point& x, const Vec& ambient) const = 0;

  /// R_x(v).  Implementations return x itself for v = 0.
  virtual Point retract(const Point& x, const Tangent& v) const = 0;

  /// Largest absolute defect of the membership equations at x.
  virtual double membership_defect(const Point& x) const = 0;
  /// Largest absolute defect of the tangency equations for v at its base.
  virtual double tangency_defect(const Tangent& v) const = 0;

  virtual Tangent zero(const Point& x) const = 0;
  virtual Point random_point(Rng& rng) const = 0;

  virtual double inner(const Tangent& u, const Tangent& v) const {
    require_same_base(u.base(), v.base(), "Manifold::inner");
    if (u.num_blocks() != v.num_blocks()) throw ContractViolation("Manifold::inner: block count mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < u.num_blocks(); ++i) s += u.block(i).cwiseProduct(v.block(i)).sum();
    return s;
  }

  double inner(const Point& x, const Tangent& u, const Tangent& v) const {
    require_same_base(x, u.base(), "Manifold::inner");
    return inner(u, v);
  }
  double norm(const Tangent& v) const { return std::sqrt(std::max(0.0, inner(v, v))); }

  bool contains(const Point& x, double tol = kMembershipTol) const { return membership_defect(x) <= tol; }
  bool is_tangent(const Tangent& v, double tol = kMembershipTol) const { return tangency_defect(v) <= tol; }

  /// Random tangent direction with unit norm.
  virtual Tangent random_tangent(const Point& x, Rng& rng) const {
    Tangent v = project(x, rng.normal_vector(ambient_size()));
    const double nv = norm(v);
    return nv > 0.0 ? (1.0 / nv) * v : v;
  }

  /// Orthonormal frame of T_xM by Gram-Schmidt (two passes) over the
  /// projected canonical ambient basis e_1, ..., e_N.  Deterministic in x.
  virtual TangentBasis tangent_basis(const Point& x) const {
    const int n = dim();
    TangentBasis basis{x, {}};
    std::vector<Vec> flats;
    flats.reserve(static_cast<std::size_t>(n));
    const Eigen::Index N = ambient_size();
    Vec e = Vec::Zero(N);
    for (Eigen::Index i = 0; i < N && static_cast<int>(flats.size()) < n; ++i) {
      e.setZero();
      e(i) = 1.0;
      Tangent cand = project(x, e);
      Vec w = cand.flatten();
      for (int pass = 0; pass < 2; ++pass)
        for (const auto& q : flats) w -= q.dot(w) * q;
      const double nw = w.norm();
      if (nw < 1e-8) continue;
      w /= nw;
      flats.push_back(w);
      basis.vectors.push_back(cand.with_flat(w));
    }
    if (static_cast<int>(basis.vectors.size()) != n)
      throw ContractViolation("tangent_basis: candidate set did not span the tangent space");
    return basis;
  }
};

using ManifoldPtr = std::shared_ptr<const Manifold>;

// ---------------------------------------------------------------------------
// Retraction diagnostics

struct RetractionDiagnostics {
  std::vector<double> steps;             ///< t values
  std::vector<double> defect;            ///< ||R_x(tv) - x - tv||
  std::vector<double> first_order;       ///< defect / t
  std::vector<double> acceleration;      ///< ||R_x(tv) - 2x + R_x(-tv)|| / t^2
  std::vector<double> tangent_acceleration;  ///< same, projected onto T_xM
  double defect_slope = 0.0;             ///< log-log slope of defect vs t
  double first_order_slope = 0.0;        ///< log-log slope of first_order vs t
};

namespace detail {

/// Least-squares slope of log(y) against log(x).  Nonpositive y are clamped
/// to the smallest normal double, which yields a large positive slope for an
/// exactly vanishing defect.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double mx = 0, my = 0;
  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    lx[i] = std::log(x[i]);
    ly[i] = std::log(std::max(y[i], std::numeric_limits<double>::min()));
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  return sxx > 0 ? sxy / sxx : 0.0;
}

}  // namespace detail

/// Finite-difference probes of the retraction axioms along a unit tangent v:
/// first-order agreement with x + tv and zero initial acceleration.
inline RetractionDiagnostics check_retraction(const Manifold& m, const Point& x, const Tangent& v,
                                              std::vector<double> steps = {1e-2, 1e-3, 1e-4}) {
  require_same_base(x, v.base(), "check_retraction");
  RetractionDiagnostics d;
  d.steps = steps;
  const Vec x_amb = m.point_to_ambient(x);
  const Vec v_amb = m.tangent_to_ambient(v);
  for (double t : steps) {
    const Vec plus = m.point_to_ambient(m.retract(x, t * v));
    const Vec minus = m.point_to_ambient(m.retract(x, -t * v));
    const double defect = (plus - x_amb - t * v_amb).norm();
    const Vec accel = (plus - 2.0 * x_amb + minus) / (t * t);
    d.defect.push_back(defect);
    d.first_order.push_back(defect / t);
    d.acceleration.push_back(accel.norm());
    d.tangent_acceleration.push_back(m.norm(m.project(x, accel)));
  }
  d.defect_slope = detail::loglog_slope(d.steps, d.defect);
  d.first_order_slope = detail::loglog_slope(d.steps, d.first_order);
  return d;
}

}  // namespace rlm

#endif  // RLM_CORE_HPP_
