#ifndef RLM_CLI_HPP_
#define RLM_CLI_HPP_

// rlm_bench command line: solve | sweep | check | order.
// Exit codes: 0 success, 1 solver StepFailure (or failed check / unusable
// trace), 2 usage error.

#include "rlm/bench.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace rlm {

namespace detail {

struct ProblemFlags {
  std::string kind;
  long m = 0, n = 0, k = 0, d = 0, rank = 0;
  double rs = 0.0, radius = 0.5;
  std::vector<long> dims;
  std::string noise;
  bool nonzero = false;
  std::uint64_t seed = 0;
  std::map<std::string, CLI::Option*> opts;

  void add(CLI::App* app) {
    opts["problem"] = app->add_option("--problem", kind, "completion | cp | sphere")->required();
    opts["m"] = app->add_option("--m", m, "rows (completion) or residual count (sphere)");
    opts["n"] = app->add_option("--n", n, "columns (completion)");
    opts["k"] = app->add_option("--k", k, "rank (completion)");
    opts["rs"] = app->add_option("--rs", rs, "oversampling factor (completion)");
    opts["dims"] = app->add_option("--dims", dims, "tensor shape n1,n2,n3 (cp)")->delimiter(',');
    opts["rank"] = app->add_option("--rank", rank, "CP rank");
    opts["noise"] = app->add_option("--noise", noise, "noise exponent p, or inf");
    opts["d"] = app->add_option("--d", d, "ambient dimension (sphere)");
    opts["nonzero"] = app->add_flag("--nonzero", nonzero, "plant a nonzero residual (sphere)");
    opts["radius"] = app->add_option("--radius", radius, "start distance from the planted point (sphere)");
    opts["seed"] = app->add_option("--seed", seed, "instance seed");
  }

  json descriptor() const {
    json j{{"kind", kind}, {"seed", seed}};
    auto need = [&](const char* key) {
      if (opts.at(key)->count() == 0) throw ContractViolation(std::string("--") + key + " is required for --problem " + kind);
    };
    if (kind == "completion") {
      for (const char* key : {"m", "n", "k", "rs"}) need(key);
      j["m"] = m;
      j["n"] = n;
      j["k"] = k;
      j["rs"] = rs;
    } else if (kind == "cp") {
      for (const char* key : {"dims", "rank"}) need(key);
      j["dims"] = dims;
      j["rank"] = rank;
      if (!noise.empty()) j["noise"] = noise == "inf" ? json("inf") : json(parse_double(noise));
    } else if (kind == "sphere") {
      for (const char* key : {"d", "m"}) need(key);
      j["d"] = d;
      j["m"] = m;
      j["zero_residual"] = !nonzero;
      j["radius"] = radius;
      if (!noise.empty()) j["noise"] = parse_double(noise);
    } else {
      throw ContractViolation("unknown problem kind '" + kind + "'");
    }
    return j;
  }
};

struct SolverFlags {
  std::string kind = "rlm", preset, subproblem;
  double eta = 0, mu_min = 0, beta = 0, grad_tol = 0, f_tol = 0, time_budget = 0, cg_tol = 0, pinv_tol = 0,
         armijo_c = 0, initial_step = 0;
  int max_iter = 0;
  bool flag_nz = false, audit = false;
  std::vector<std::pair<std::string, CLI::Option*>> numeric;

  void add(CLI::App* app) {
    app->add_option("--solver", kind, "rlm | rgn | rsd");
    app->add_option("--preset", preset, "default | completion | cp");
    app->add_option("--subproblem", subproblem, "auto | dense | cg");
    numeric = {{"eta", app->add_option("--eta", eta)},
               {"mu_min", app->add_option("--mu-min", mu_min)},
               {"beta", app->add_option("--beta", beta)},
               {"grad_tol", app->add_option("--grad-tol", grad_tol)},
               {"f_tol", app->add_option("--f-tol", f_tol)},
               {"time_budget", app->add_option("--time-budget", time_budget, "seconds")},
               {"cg_tol_factor", app->add_option("--cg-tol", cg_tol)},
               {"pinv_tol", app->add_option("--pinv-tol", pinv_tol)},
               {"armijo_c", app->add_option("--armijo-c", armijo_c)},
               {"initial_step", app->add_option("--initial-step", initial_step)},
               {"max_iter", app->add_option("--max-iter", max_iter)}};
    app->add_flag("--flag-nz", flag_nz, "keep mu at its last successful value (nonzero-residual mode)");
    app->add_flag("--audit", audit, "check the step lemmas on every iteration");
  }

  json spec() const {
    json j{{"kind", kind}};
    if (!preset.empty()) j["preset"] = preset;
    if (!subproblem.empty()) j["subproblem"] = subproblem;
    for (const auto& [key, opt] : numeric) {
      if (opt->count() == 0) continue;
      if (key == "max_iter") j[key] = max_iter;
      else j[key] = std::stod(opt->as<std::string>());
    }
    if (flag_nz) j["flag_nz"] = true;
    if (audit) j["audit"] = true;
    return resolve_solver(j);
  }
};

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << content;
}

}  // namespace detail

inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  namespace fs = std::filesystem;
  CLI::App app{"Riemannian Levenberg-Marquardt benchmark harness", "rlm_bench"};
  app.require_subcommand(1);

  detail::ProblemFlags solve_problem, check_problem;
  detail::SolverFlags solve_solver;
  std::string solve_out = ".", plot_column;
  auto* solve = app.add_subcommand("solve", "run one solver on one generated instance");
  solve_problem.add(solve);
  solve_solver.add(solve);
  solve->add_option("--out", solve_out, "output directory");
  solve->add_option("--plot", plot_column, "also write an SVG of this trace column");

  std::string spec_path, sweep_out;
  int sweep_threads_flag = 0;
  auto* sweep = app.add_subcommand("sweep", "run an experiment spec");
  sweep->add_option("--spec", spec_path, "experiment JSON")->required();
  sweep->add_option("--out", sweep_out, "output directory (overrides the spec)");
  sweep->add_option("--threads", sweep_threads_flag, "parallel runs (default: RLM_THREADS or all cores)");

  int check_trials = 20, check_points = 5;
  auto* check = app.add_subcommand("check", "gradient, adjoint and retraction diagnostics");
  check_problem.add(check);
  check->add_option("--trials", check_trials, "random directions per point");
  check->add_option("--points", check_points, "random points");

  std::string trace_path, column = "grad_norm";
  std::size_t window = 4;
  auto* order = app.add_subcommand("order", "fit the convergence order of a trace column");
  order->add_option("--trace", trace_path, "trace CSV")->required();
  order->add_option("--column", column, "column name");
  order->add_option("--window", window, "number of final values to fit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "rlm_bench: " << e.what() << "\n" << "run with --help for usage\n";
    return 2;
  }

  try {
    if (*solve) {
      const json desc = solve_problem.descriptor();
      const json solver = solve_solver.spec();
      const Benchmark b = make_benchmark(desc);
      const RunSummary s = run_solver(solver, *b.problem, b.x0);
      fs::create_directories(solve_out);
      {
        std::ofstream os(fs::path(solve_out) / "trace.csv");
        write_trace_csv(os, s.trace);
      }
      json j = summary_to_json(s);
      j["problem"] = desc;
      j["solver"] = solver;
      j["error_to_truth"] = json_number(b.error_to_truth(s.x));
      if (solver.value("audit", false)) j["audit_violations"] = s.violations;
      detail::write_file(fs::path(solve_out) / "summary.json", j.dump(2) + "\n");
      if (!plot_column.empty()) {
        if (s.trace.empty()) err << "rlm_bench: empty trace, no plot written\n";
        else emit_svg(s.trace, plot_column, (fs::path(solve_out) / ("trace_" + plot_column + ".svg")).string());
      }
      out << b.label << ' ' << solver.at("kind").get<std::string>() << ' ' << to_string(s.status)
          << " iters=" << s.iters << " f=" << format_double(s.final_f) << " grad=" << format_double(s.final_grad_norm)
          << "\n";
      if (s.status == Status::StepFailure) {
        err << "rlm_bench: step failure: " << s.message << "\n";
        return 1;
      }
      return 0;
    }

    if (*sweep) {
      std::ifstream is(spec_path);
      if (!is) throw ContractViolation("cannot read spec file " + spec_path);
      ExperimentSpec spec = parse_experiment(json::parse(is));
      if (!sweep_out.empty()) spec.output = sweep_out;
      if (spec.output.empty()) spec.output = ".";
      fs::create_directories(spec.output);
      const SweepReport rep = run_sweep(spec, sweep_threads_flag > 0 ? sweep_threads_flag : sweep_threads());
      {
        std::ofstream os(fs::path(spec.output) / "report.csv");
        write_report_csv(os, rep);
      }
      const json agg = aggregate_to_json(rep);
      detail::write_file(fs::path(spec.output) / "aggregate.json", agg.dump(2) + "\n");
      for (const auto& a : agg)
        out << a.at("problem").get<std::string>() << ' ' << a.at("solver").get<std::string>() << " success "
            << a.at("successes").get<int>() << '/' << a.at("runs").get<int>() << "\n";
      return 0;
    }

    if (*check) {
      const Benchmark b = make_benchmark(check_problem.descriptor());
      const ResidualProblem& p = *b.problem;
      const Manifold& M = p.manifold();
      Rng rng = Rng(check_problem.seed).split(99);
      FdReport worst;
      double min_slope = std::numeric_limits<double>::infinity();
      for (int i = 0; i < check_points; ++i) {
        const Point x = i == 0 ? b.x0 : M.random_point(rng);
        const FdReport r = fd_check(p, x, check_trials, rng);
        worst.max_grad_rel_error = std::max(worst.max_grad_rel_error, r.max_grad_rel_error);
        worst.max_adjoint_defect = std::max(worst.max_adjoint_defect, r.max_adjoint_defect);
        worst.max_linearity_defect = std::max(worst.max_linearity_defect, r.max_linearity_defect);
        const RetractionDiagnostics d = check_retraction(M, x, M.random_tangent(x, rng));
        min_slope = std::min(min_slope, d.first_order_slope);
      }
      const bool ok = worst.max_grad_rel_error <= 1e-5 && worst.max_adjoint_defect <= 1e-10;
      json j{{"problem", b.label},
             {"manifold", M.descriptor()},
             {"max_grad_rel_error", worst.max_grad_rel_error},
             {"max_adjoint_defect", worst.max_adjoint_defect},
             {"max_linearity_defect", worst.max_linearity_defect},
             {"min_retraction_first_order_slope", json_number(min_slope)},
             {"pass", ok}};
      out << j.dump(2) << "\n";
      return ok ? 0 : 1;
    }

    if (*order) {
      std::ifstream is(trace_path);
      if (!is) throw ContractViolation("cannot read trace file " + trace_path);
      const std::vector<double> values = read_csv_column(is, column);
      try {
        const OrderEstimate est = estimate_order(values, window);
        out << "q=" << format_double(est.q) << " c=" << format_double(est.c) << "\n";
      } catch (const InsufficientData& e) {
        err << "rlm_bench: " << e.what() << "\n";
        return 1;
      }
      return 0;
    }
  } catch (const ContractViolation& e) {
    err << "rlm_bench: " << e.what() << "\n";
    return 2;
  } catch (const json::exception& e) {
    err << "rlm_bench: bad JSON: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "rlm_bench: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "rlm_bench: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace rlm

#endif  // RLM_CLI_HPP_
