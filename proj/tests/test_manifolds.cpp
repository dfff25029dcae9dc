#include "rlm/rlm.hpp"

#include <gtest/gtest.h>

#include <numbers>

namespace rlm {
namespace {

constexpr double kPi = std::numbers::pi;

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

std::vector<ManifoldPtr> sample_manifolds() {
  return {std::make_shared<const EuclideanSpace>(3, 2), std::make_shared<const SphereManifold>(4),
          std::make_shared<const FixedRankManifold>(5, 4, 2),
          std::make_shared<const ProductManifold>(std::vector<ManifoldPtr>{
              std::make_shared<const SphereManifold>(3), std::make_shared<const EuclideanSpace>(2)})};
}

TEST(Inner, EuclideanAxesAreOrthogonal) {
  EuclideanSpace E(2);
  const Point x = E.make_point(vec({0, 0}));
  EXPECT_EQ(E.inner(x, E.make_tangent(x, vec({1, 0})), E.make_tangent(x, vec({0, 1}))), 0.0);
}

TEST(Inner, SphereUnitTangent) {
  SphereManifold S(3);
  const Point x = S.make_point(vec({1, 0, 0}));
  const Tangent u(x, {vec({0, 1, 0})});
  EXPECT_DOUBLE_EQ(S.inner(x, u, u), 1.0);
}

TEST(Inner, FixedRankIsBlockFrobeniusSum) {
  FixedRankManifold M(3, 3, 1);
  Rng rng(3);
  const Point x = M.random_point(rng);
  const Tangent t = M.project_matrix(x, rng.normal_matrix(3, 3));
  const double expected = t.block(0).squaredNorm() + t.block(1).squaredNorm() + t.block(2).squaredNorm();
  EXPECT_NEAR(M.inner(x, t, t), expected, 1e-12 * expected);
  EXPECT_NEAR(M.inner(t, t), M.tangent_matrix(t).squaredNorm(), 1e-12 * expected);
}

TEST(Inner, SymmetricAndCauchySchwarz) {
  Rng rng(11);
  for (const auto& M : sample_manifolds()) {
    for (int trial = 0; trial < 20; ++trial) {
      const Point x = M->random_point(rng);
      const Tangent u = 3.0 * M->random_tangent(x, rng);
      const Tangent v = 0.5 * M->random_tangent(x, rng);
      const double uv = M->inner(u, v), vu = M->inner(v, u);
      EXPECT_NEAR(uv, vu, 1e-12 * std::max(1.0, std::abs(uv))) << M->descriptor();
      EXPECT_LE(std::abs(uv), M->norm(u) * M->norm(v) * (1 + 1e-12)) << M->descriptor();
    }
  }
}

TEST(Inner, RejectsForeignBase) {
  SphereManifold S(3);
  Rng rng(1);
  const Point x = S.random_point(rng), y = S.random_point(rng);
  EXPECT_THROW(S.inner(S.random_tangent(x, rng), S.random_tangent(y, rng)), ContractViolation);
  EXPECT_THROW(S.random_tangent(x, rng) + S.random_tangent(y, rng), ContractViolation);
}

TEST(Retract, EuclideanIsAddition) {
  EuclideanSpace E(2);
  const Point x = E.make_point(vec({1, 2}));
  const Point y = E.retract(x, E.make_tangent(x, vec({3, 4})));
  EXPECT_EQ(y.block(0), Mat(vec({4, 6})));
}

TEST(Retract, SphereQuarterAndHalfCircle) {
  SphereManifold S(2);
  const Point x = S.make_point(vec({1, 0}));
  const Point q = S.retract(x, Tangent(x, {vec({0, kPi / 2})}));
  EXPECT_NEAR((q.block(0) - Mat(vec({0, 1}))).norm(), 0.0, 1e-15);
  const Point h = S.retract(x, Tangent(x, {vec({0, kPi})}));
  EXPECT_NEAR((h.block(0) - Mat(vec({-1, 0}))).norm(), 0.0, 1e-15);
}

TEST(Retract, ZeroTangentGivesSamePoint) {
  Rng rng(5);
  for (const auto& M : sample_manifolds()) {
    const Point x = M->random_point(rng);
    const Point y = M->retract(x, M->zero(x));
    EXPECT_TRUE(y.same_as(x)) << M->descriptor();
  }
}

TEST(Retract, FixedRankRankOneScaling) {
  FixedRankManifold M(3, 3, 1);
  Mat U = Mat::Zero(3, 1), S = Mat::Ones(1, 1), V = Mat::Zero(3, 1);
  U(0, 0) = V(0, 0) = 1;
  const Point x({U, S, V});
  const Tangent v(x, {Mat::Constant(1, 1, 0.5), Mat::Zero(3, 1), Mat::Zero(3, 1)});
  Mat expected = Mat::Zero(3, 3);
  expected(0, 0) = 1.5;
  EXPECT_NEAR((M.to_matrix(M.retract(x, v)) - expected).norm(), 0.0, 1e-14);
}

TEST(Retract, FixedRankMatchesTruncatedSvd) {
  FixedRankManifold M(7, 5, 2);
  Rng rng(8);
  const Point x = M.random_point(rng);
  const Tangent v = 0.3 * M.random_tangent(x, rng);
  Eigen::JacobiSVD<Mat> svd(M.to_matrix(x) + M.tangent_matrix(v), Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Mat best = svd.matrixU().leftCols(2) * svd.singularValues().head(2).asDiagonal() *
                   svd.matrixV().leftCols(2).transpose();
  EXPECT_NEAR((M.to_matrix(M.retract(x, v)) - best).norm(), 0.0, 1e-12);
}

TEST(Retract, FixedRankSecondOrderDefect) {
  FixedRankManifold M(6, 5, 2);
  Rng rng(21);
  const Point x = M.random_point(rng);
  const auto d = check_retraction(M, x, M.random_tangent(x, rng));
  EXPECT_GE(d.defect_slope, 1.9);
  EXPECT_GE(d.first_order_slope, 0.9);
}

TEST(Retract, FixedRankRankDropThrows) {
  FixedRankManifold M(3, 3, 1);
  Mat U = Mat::Zero(3, 1), S = Mat::Ones(1, 1), V = Mat::Zero(3, 1);
  U(0, 0) = V(0, 0) = 1;
  const Point x({U, S, V});
  const Tangent v(x, {Mat::Constant(1, 1, -1.0), Mat::Zero(3, 1), Mat::Zero(3, 1)});
  EXPECT_THROW(M.retract(x, v), RankDropError);
}

TEST(Retract, SpherePreservesNorm) {
  SphereManifold S(6);
  Rng rng(4);
  Point x = S.random_point(rng);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    x = S.retract(x, (0.1 + 3.0 * rng.uniform()) * S.random_tangent(x, rng));
    worst = std::max(worst, std::abs(x.block(0).norm() - 1.0));
  }
  EXPECT_LE(worst, 1e-12);
}

TEST(Retract, ResultsStayOnManifold) {
  Rng rng(17);
  for (const auto& M : sample_manifolds()) {
    for (int i = 0; i < 10; ++i) {
      const Point x = M->random_point(rng);
      EXPECT_TRUE(M->contains(M->retract(x, 0.7 * M->random_tangent(x, rng)))) << M->descriptor();
    }
  }
}

TEST(Project, SphereRemovesRadialPart) {
  SphereManifold S(3);
  const Point x = S.make_point(vec({1, 0, 0}));
  EXPECT_EQ(S.project(x, vec({1, 1, 0})).block(0), Mat(vec({0, 1, 0})));
}

TEST(Project, EuclideanIsIdentity) {
  EuclideanSpace E(2);
  const Point x = E.make_point(vec({0, 0}));
  EXPECT_EQ(E.project(x, vec({5, 6})).block(0), Mat(vec({5, 6})));
}

TEST(Project, FixedRankNormalDirectionVanishes) {
  FixedRankManifold M(2, 2, 1);
  Mat U = Mat::Zero(2, 1), V = Mat::Zero(2, 1);
  U(0, 0) = V(0, 0) = 1;
  const Point x({U, Mat::Ones(1, 1), V});
  Mat W = Mat::Zero(2, 2);
  W(1, 1) = 1;
  const Tangent t = M.project_matrix(x, W);
  EXPECT_EQ(M.tangent_matrix(t).norm(), 0.0);
}

TEST(Project, Idempotent) {
  Rng rng(2);
  for (const auto& M : sample_manifolds()) {
    const Point x = M->random_point(rng);
    const Tangent p1 = M->project(x, rng.normal_vector(M->ambient_size()));
    const Tangent p2 = M->project(x, M->tangent_to_ambient(p1));
    EXPECT_LE(M->norm(p2 - p1), 1e-12 * std::max(1.0, M->norm(p1))) << M->descriptor();
    EXPECT_TRUE(M->is_tangent(p1)) << M->descriptor();
  }
}

TEST(Project, FixedRankAgreesWithBruteForce) {
  FixedRankManifold M(4, 3, 2);
  Rng rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const Point x = M.random_point(rng);
    const TangentBasis basis = M.tangent_basis(x);
    Mat B(12, static_cast<Eigen::Index>(basis.size()));
    for (std::size_t j = 0; j < basis.size(); ++j) B.col(static_cast<Eigen::Index>(j)) = M.tangent_to_ambient(basis.vectors[j]);
    const Vec w = rng.normal_vector(12);
    const Vec brute = B * B.colPivHouseholderQr().solve(w);
    EXPECT_LE((M.tangent_to_ambient(M.project(x, w)) - brute).norm(), 1e-8);
  }
}

TEST(TangentBasisTest, EuclideanCanonical) {
  EuclideanSpace E(2);
  const auto b = E.tangent_basis(E.make_point(vec({3, -1})));
  ASSERT_EQ(b.size(), 2u);
  EXPECT_EQ(b.vectors[0].block(0), Mat(vec({1, 0})));
  EXPECT_EQ(b.vectors[1].block(0), Mat(vec({0, 1})));
}

TEST(TangentBasisTest, SphereAtFirstAxis) {
  SphereManifold S(3);
  const auto b = S.tangent_basis(S.make_point(vec({1, 0, 0})));
  ASSERT_EQ(b.size(), 2u);
  EXPECT_NEAR((b.vectors[0].block(0) - Mat(vec({0, 1, 0}))).norm(), 0.0, 1e-15);
  EXPECT_NEAR((b.vectors[1].block(0) - Mat(vec({0, 0, 1}))).norm(), 0.0, 1e-15);
}

TEST(TangentBasisTest, FixedRankCardinality) {
  FixedRankManifold M(30, 30, 3);
  Rng rng(1);
  EXPECT_EQ(M.dim(), 171);
  EXPECT_EQ(M.tangent_basis(M.random_point(rng)).size(), 171u);
}

TEST(TangentBasisTest, GramIsIdentity) {
  Rng rng(9);
  for (const auto& M : sample_manifolds()) {
    const Point x = M->random_point(rng);
    const auto b = M->tangent_basis(x);
    ASSERT_EQ(static_cast<int>(b.size()), M->dim()) << M->descriptor();
    double worst = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i)
      for (std::size_t j = 0; j < b.size(); ++j)
        worst = std::max(worst, std::abs(M->inner(b.vectors[i], b.vectors[j]) - (i == j ? 1.0 : 0.0)));
    EXPECT_LE(worst, 1e-10) << M->descriptor();
  }
}

TEST(CheckRetraction, EuclideanHasNoAcceleration) {
  EuclideanSpace E(4);
  Rng rng(3);
  const Point x = E.random_point(rng);
  const auto d = check_retraction(E, x, E.random_tangent(x, rng));
  for (double a : d.acceleration) EXPECT_LE(a, 1e-8);
}

TEST(CheckRetraction, SphereGeodesicAndSecondOrder) {
  SphereManifold S(5);
  Rng rng(6);
  const Point x = S.random_point(rng);
  const auto d = check_retraction(S, x, S.random_tangent(x, rng));
  for (double a : d.tangent_acceleration) EXPECT_LE(a, 1e-6);
  EXPECT_GE(d.defect_slope, 1.9);
}

TEST(Product, ComponentwiseAddition) {
  ProductManifold P({std::make_shared<const EuclideanSpace>(1), std::make_shared<const EuclideanSpace>(1)});
  const Point x({Mat::Constant(1, 1, 1.0), Mat::Constant(1, 1, 2.0)});
  const Tangent v(x, {Mat::Constant(1, 1, 3.0), Mat::Constant(1, 1, 4.0)});
  const Point y = P.retract(x, v);
  EXPECT_EQ(y.block(0)(0, 0), 4.0);
  EXPECT_EQ(y.block(1)(0, 0), 6.0);
}

TEST(Product, InnerIsSumOfComponents) {
  ProductManifold P({std::make_shared<const EuclideanSpace>(1), std::make_shared<const EuclideanSpace>(1)});
  const Point x({Mat::Zero(1, 1), Mat::Zero(1, 1)});
  const Tangent u(x, {Mat::Constant(1, 1, 1.0), Mat::Constant(1, 1, 1.0)});
  const Tangent v(x, {Mat::Constant(1, 1, 1.0), Mat::Constant(1, 1, 2.0)});
  EXPECT_EQ(P.inner(u, v), 3.0);
}

TEST(Product, DimensionAdds) {
  ProductManifold P({std::make_shared<const SphereManifold>(3), std::make_shared<const EuclideanSpace>(2)});
  EXPECT_EQ(P.dim(), 4);
}

TEST(Product, MetricAdditivityWithCurvedParts) {
  auto S = std::make_shared<const SphereManifold>(4);
  auto F = std::make_shared<const FixedRankManifold>(4, 3, 1);
  ProductManifold P({S, F});
  Rng rng(30);
  const Point x = P.random_point(rng);
  const Tangent u = P.random_tangent(x, rng), v = P.random_tangent(x, rng);
  const auto xs = P.split(x);
  const auto us = P.split(u, xs), vs = P.split(v, xs);
  const double sum = S->inner(us[0], vs[0]) + F->inner(us[1], vs[1]);
  EXPECT_NEAR(P.inner(u, v), sum, 1e-14 * std::max(1.0, std::abs(sum)));
}

TEST(Membership, DetectsOffManifoldPoints) {
  SphereManifold S(3);
  EXPECT_FALSE(S.contains(Point({vec({1, 1, 0})})));
  FixedRankManifold M(3, 3, 1);
  EXPECT_FALSE(M.contains(Point({Mat::Ones(3, 1), Mat::Ones(1, 1), Mat::Ones(3, 1)})));
}

}  // namespace
}  // namespace rlm
