#include "toy_problems.hpp"

#include <gtest/gtest.h>

namespace rlm {
namespace {

using testing::LinearProblem;

TEST(Rgn, LinearFullRankConvergesInOneStep) {
  Rng rng(3);
  const Mat A = rng.normal_matrix(6, 4);
  const Vec xs = rng.normal_vector(4);
  LinearProblem p(A, A * xs);
  GnConfig cfg;
  cfg.grad_tol = 1e-10;
  const auto s = rgn_run(p, Point({Vec::Zero(4)}), cfg);
  EXPECT_EQ(s.status, Status::GradTol);
  EXPECT_EQ(s.iters, 1);
  EXPECT_LE((s.x.block(0) - Mat(xs)).norm(), 1e-10);
}

TEST(Rgn, FiniteStepsOnRankDeficientCp) {
  auto cp = gen_cp({5, 4, 3}, 2, 5.0, 2);
  Rng rng(5);
  const Manifold& M = cp.problem->manifold();
  for (int trial = 0; trial < 5; ++trial) {
    const Point x = M.random_point(rng);
    const Tangent s = gn_step(*cp.problem, x, M.tangent_basis(x), 1e-12);
    EXPECT_TRUE(s.all_finite());
  }
  GnConfig cfg;
  cfg.max_iter = 20;
  const auto s = rgn_run(*cp.problem, perturb(M, cp.problem->truth_point(), 0.1, rng), cfg);
  EXPECT_NE(s.status, Status::StepFailure) << s.message;
  EXPECT_TRUE(testing::traces_finite(s));
}

TEST(Rgn, QuadraticRateOnZeroResidualSphere) {
  auto sp = gen_sphere_ls(5, 8, true, 4);
  GnConfig cfg;
  cfg.max_iter = 50;
  const auto s = rgn_run(*sp.problem, sp.problem->initial_point(1e-2), cfg);
  std::vector<double> g;
  for (const auto& r : s.trace) g.push_back(r.grad_norm);
  g.push_back(s.final_grad_norm);
  EXPECT_GE(estimate_order(g, 4).q, 1.7);
}

TEST(Rgn, MatchesRlmStepAsLambdaVanishes) {
  auto sp = gen_sphere_ls(5, 8, false, 6, 1.0);
  const Manifold& M = sp.problem->manifold();
  Rng rng(8);
  const Point x = M.random_point(rng);
  const TangentBasis basis = M.tangent_basis(x);
  const Tangent gn = gn_step(*sp.problem, x, basis, 1e-12);
  const Tangent lm = solve_subproblem_dense(*sp.problem, x, gradient(*sp.problem, x), 1e-12, basis).step;
  EXPECT_LE(M.norm(gn - lm), 1e-6);
}

TEST(Rgn, RefusesLargeDimension) {
  auto c = gen_completion(20, 20, 2, 2.0, 1);
  EXPECT_THROW(rgn_run(*c.problem, c.problem->initial_point(), GnConfig{}), ContractViolation);
}

void expect_monotone(const RunSummary& s) {
  for (std::size_t k = 1; k < s.trace.size(); ++k) EXPECT_LE(s.trace[k].f, s.trace[k - 1].f);
  if (!s.trace.empty()) EXPECT_LE(s.final_f, s.trace.back().f);
}

TEST(Rsd, MonotoneOnQuadraticBowl) {
  Mat A = Mat::Zero(3, 3);
  A.diagonal() << 1.0, 3.0, 10.0;
  LinearProblem p(A, Vec::Ones(3));
  SdConfig cfg;
  cfg.max_iter = 5000;
  const auto s = rsd_run(p, Point({Vec::Zero(3)}), cfg);
  expect_monotone(s);
  EXPECT_EQ(s.status, Status::GradTol);
}

TEST(Rsd, MonotoneOnSphere) {
  auto sp = gen_sphere_ls(6, 10, false, 2, 1.0);
  SdConfig cfg;
  cfg.max_iter = 300;
  const auto s = rsd_run(*sp.problem, sp.problem->initial_point(1.0), cfg);
  EXPECT_GT(s.iters, 0);
  expect_monotone(s);
}

TEST(Rsd, ReachesLooseToleranceOnCompletion) {
  auto c = gen_completion(15, 15, 2, 2.0, 8);
  SdConfig cfg;
  cfg.grad_tol = 1e-3;
  cfg.max_iter = 100000;
  Rng rng(1);
  const auto s = rsd_run(*c.problem, c.problem->manifold().random_point(rng), cfg);
  EXPECT_EQ(s.status, Status::GradTol);
  expect_monotone(s);
}

TEST(Rsd, RejectsBadConfig) {
  auto p = testing::identity_problem(2);
  SdConfig cfg;
  cfg.backtrack_factor = 1.0;
  EXPECT_THROW(rsd_run(*p, Point({Vec::Ones(2)}), cfg), ContractViolation);
}

}  // namespace
}  // namespace rlm
