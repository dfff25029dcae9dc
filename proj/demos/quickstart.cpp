// Solves a small matrix completion instance with RLM and the two baselines.

#include "rlm/rlm.hpp"

#include <cstdio>

using namespace rlm;

static void print_summary(const char* solver, const RunSummary& s, double err) {
  std::printf("%-4s %-10s iters=%-5d f=%-12.3e grad=%-12.3e error=%.3e  %.1f ms\n", solver, to_string(s.status), s.iters,
              s.final_f, s.final_grad_norm, err, s.wall_ms);
}

int main() {
  auto gen = gen_completion(40, 40, 3, 2.5, 7);
  const CompletionProblem& p = *gen.problem;
  std::printf("completion 40x40 rank 3, %zu observed entries, manifold dim %ld\n", gen.instance.omega.size(),
              static_cast<long>(p.manifold().dim()));

  const Point x0 = p.initial_point();
  std::printf("warm start: f=%.3e grad=%.3e\n\n", objective(p, x0), p.manifold().norm(gradient(p, x0)));

  RlmConfig cfg;
  cfg.time_budget = 30.0;
  const RunSummary s = rlm_run(p, x0, cfg);
  print_summary("rlm", s, p.error_to_truth(s.x));

  SdConfig sd;
  sd.max_iter = 5000;
  const RunSummary t = rsd_run(p, x0, sd);
  print_summary("rsd", t, p.error_to_truth(t.x));

  std::printf("\n  k  f            grad         lambda       rho\n");
  for (const auto& r : s.trace)
    std::printf("%3d  %-11.4e  %-11.4e  %-11.4e  %+.3f%s\n", r.k, r.f, r.grad_norm, r.lambda, r.rho,
                r.successful ? "" : "  rejected");

  // Gauss-Newton needs the dense frame, so use the small sphere problem.
  auto sp = gen_sphere_ls(6, 10, true, 3);
  const RunSummary g = rgn_run(*sp.problem, sp.problem->initial_point(0.3), GnConfig{});
  std::printf("\nsphere 6/10: ");
  print_summary("rgn", g, sp.problem->error_to_truth(g.x));
  return 0;
}
