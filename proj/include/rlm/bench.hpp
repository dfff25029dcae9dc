#ifndef RLM_BENCH_HPP_
#define RLM_BENCH_HPP_

// Benchmark plumbing: JSON descriptors -> (problem, start point), solver
// dispatch, parameter sweeps and their CSV reports.

#include "rlm/io.hpp"
#include "rlm/problems.hpp"

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <mutex>
#include <thread>

namespace rlm {

using json = nlohmann::json;

struct Benchmark {
  std::shared_ptr<const ResidualProblem> problem;
  Point x0;
  std::function<double(const Point&)> error_to_truth;
  json descriptor;    // params + seed; regenerates the instance exactly
  std::string label;  // CSV-safe identifier
};

namespace detail {

inline std::string label_number(double v) {
  std::string s = format_double(v);
  for (char& c : s)
    if (c == ',') c = '_';
  return s;
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

/// Accepts a number or the strings "inf"/"infinity".
inline double get_double_or(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (v.is_string()) return parse_double(v.get<std::string>() == "infinity" ? "inf" : v.get<std::string>());
  return v.get<double>();
}

}  // namespace detail

/// Descriptor keys:
///   completion: m, n, k, rs, seed
///   cp:         dims [n1, n2, n3], rank, noise (p, "inf" for none), seed
///   sphere:     d, m, zero_residual, noise, radius (start distance), seed
inline Benchmark make_benchmark(const json& desc) {
  const std::string kind = desc.at("kind").get<std::string>();
  const auto seed = desc.at("seed").get<std::uint64_t>();
  Benchmark b;
  b.descriptor = desc;
  if (kind == "completion") {
    const auto m = desc.at("m").get<Eigen::Index>();
    const auto n = desc.at("n").get<Eigen::Index>();
    const auto k = desc.at("k").get<Eigen::Index>();
    const double rs = desc.at("rs").get<double>();
    auto gen = gen_completion(m, n, k, rs, seed);
    const double refine = detail::get_double_or(desc, "refine_grad_tol", 1e-3);
    b.x0 = gen.problem->initial_point(0, refine);
    b.error_to_truth = [p = gen.problem](const Point& x) { return p->error_to_truth(x); };
    b.problem = gen.problem;
    b.label = "completion_m" + std::to_string(m) + "_n" + std::to_string(n) + "_k" + std::to_string(k) + "_rs" +
              detail::label_number(rs);
  } else if (kind == "cp") {
    const auto dims = desc.at("dims").get<std::vector<Eigen::Index>>();
    if (dims.size() != 3) throw ContractViolation("cp descriptor: dims must have three entries");
    const auto rank = desc.at("rank").get<Eigen::Index>();
    const double p = detail::get_double_or(desc, "noise", 5.0);
    auto gen = gen_cp({dims[0], dims[1], dims[2]}, rank, p, seed);
    b.x0 = gen.problem->initial_point();
    b.error_to_truth = [p = gen.problem](const Point& x) { return p->error_to_truth(x); };
    b.problem = gen.problem;
    b.label = "cp_" + std::to_string(dims[0]) + "x" + std::to_string(dims[1]) + "x" + std::to_string(dims[2]) + "_r" +
              std::to_string(rank) + "_p" + detail::label_number(p);
  } else if (kind == "sphere") {
    const auto d = desc.at("d").get<Eigen::Index>();
    const auto m = desc.at("m").get<Eigen::Index>();
    const bool zero = detail::get_or<bool>(desc, "zero_residual", true);
    const double p = detail::get_double_or(desc, "noise", 3.0);
    const double radius = detail::get_double_or(desc, "radius", 0.5);
    auto gen = gen_sphere_ls(d, m, zero, seed, p);
    b.x0 = gen.problem->initial_point(radius);
    b.error_to_truth = [p = gen.problem](const Point& x) { return p->error_to_truth(x); };
    b.problem = gen.problem;
    b.label = "sphere_d" + std::to_string(d) + "_m" + std::to_string(m) + (zero ? "_zero" : "_nz");
  } else {
    throw ContractViolation("unknown problem kind '" + kind + "'");
  }
  return b;
}

// ---------------------------------------------------------------------------
// Solvers

/// Named configuration presets.  "completion" and "cp" carry the
/// hyperparameters and stopping rules of the respective benchmark studies.
inline json solver_preset(const std::string& name) {
  if (name == "default") return json::object();
  if (name == "completion")
    return {{"eta", 0.2}, {"mu_min", 0.1}, {"beta", 5.0}, {"grad_tol", 1e-8}, {"time_budget", 300.0},
            {"max_iter", std::numeric_limits<int>::max()}};
  if (name == "cp")
    return {{"eta", 0.2}, {"mu_min", 0.1}, {"beta", 5.0}, {"grad_tol", 1e-6}, {"f_tol", 1e-10}, {"max_iter", 1000}};
  throw ContractViolation("unknown solver preset '" + name + "'");
}

/// Solver object with preset expanded; explicit keys override the preset.
inline json resolve_solver(const json& spec) {
  json out = spec.contains("preset") ? solver_preset(spec.at("preset").get<std::string>()) : json::object();
  for (auto it = spec.begin(); it != spec.end(); ++it)
    if (it.key() != "preset") out[it.key()] = it.value();
  if (!out.contains("kind")) out["kind"] = "rlm";
  const std::string kind = out.at("kind").get<std::string>();
  if (kind != "rlm" && kind != "rgn" && kind != "rsd") throw ContractViolation("unknown solver kind '" + kind + "'");
  return out;
}

inline RlmConfig rlm_config_from_json(const json& j) {
  RlmConfig c;
  c.eta = detail::get_double_or(j, "eta", c.eta);
  c.mu_min = detail::get_double_or(j, "mu_min", c.mu_min);
  c.beta = detail::get_double_or(j, "beta", c.beta);
  c.flag_nz = detail::get_or<bool>(j, "flag_nz", c.flag_nz);
  c.grad_tol = detail::get_double_or(j, "grad_tol", c.grad_tol);
  c.f_tol = detail::get_double_or(j, "f_tol", c.f_tol);
  c.max_iter = detail::get_or<int>(j, "max_iter", c.max_iter);
  c.time_budget = detail::get_double_or(j, "time_budget", c.time_budget);
  const std::string sub = detail::get_or<std::string>(j, "subproblem", "auto");
  if (sub == "auto") c.subproblem = SubproblemMethod::Auto;
  else if (sub == "dense") c.subproblem = SubproblemMethod::Dense;
  else if (sub == "cg") c.subproblem = SubproblemMethod::Cg;
  else throw ContractViolation("unknown subproblem method '" + sub + "'");
  c.cg_tol_factor = detail::get_double_or(j, "cg_tol_factor", c.cg_tol_factor);
  c.cg_max_iter = detail::get_or<int>(j, "cg_max_iter", c.cg_max_iter);
  c.audit = detail::get_or<bool>(j, "audit", c.audit);
  c.validate();
  return c;
}

inline GnConfig gn_config_from_json(const json& j) {
  GnConfig c;
  c.pinv_tol = detail::get_double_or(j, "pinv_tol", c.pinv_tol);
  c.max_iter = detail::get_or<int>(j, "max_iter", c.max_iter);
  c.grad_tol = detail::get_double_or(j, "grad_tol", c.grad_tol);
  c.f_tol = detail::get_double_or(j, "f_tol", c.f_tol);
  c.time_budget = detail::get_double_or(j, "time_budget", c.time_budget);
  c.validate();
  return c;
}

inline SdConfig sd_config_from_json(const json& j) {
  SdConfig c;
  c.armijo_c = detail::get_double_or(j, "armijo_c", c.armijo_c);
  c.backtrack_factor = detail::get_double_or(j, "backtrack_factor", c.backtrack_factor);
  c.initial_step = detail::get_double_or(j, "initial_step", c.initial_step);
  c.max_iter = detail::get_or<int>(j, "max_iter", c.max_iter);
  c.grad_tol = detail::get_double_or(j, "grad_tol", c.grad_tol);
  c.f_tol = detail::get_double_or(j, "f_tol", c.f_tol);
  c.time_budget = detail::get_double_or(j, "time_budget", c.time_budget);
  c.validate();
  return c;
}

inline RunSummary run_solver(const json& solver, const ResidualProblem& p, const Point& x0) {
  const json s = resolve_solver(solver);
  const std::string kind = s.at("kind").get<std::string>();
  if (kind == "rlm") return rlm_run(p, x0, rlm_config_from_json(s));
  if (kind == "rgn") return rgn_run(p, x0, gn_config_from_json(s));
  return rsd_run(p, x0, sd_config_from_json(s));
}

// ---------------------------------------------------------------------------
// Sweeps

struct ExperimentSpec {
  std::vector<json> problems;  // fully expanded descriptors without seed
  std::vector<json> solvers;   // resolved
  std::vector<std::uint64_t> seeds;
  std::string output;
  bool write_traces = true;
  bool timing = true;  // false zeroes wall-clock columns for byte-stable output
};

namespace detail {

/// Cartesian expansion of array-valued scalar fields ("dims" is a shape, not
/// a sweep axis).
inline std::vector<json> expand_grid(const json& problem) {
  std::vector<json> out{json::object()};
  for (auto it = problem.begin(); it != problem.end(); ++it) {
    const bool sweep_axis = it.value().is_array() && it.key() != "dims";
    std::vector<json> next;
    for (const auto& partial : out) {
      if (sweep_axis) {
        for (const auto& v : it.value()) {
          json p = partial;
          p[it.key()] = v;
          next.push_back(std::move(p));
        }
      } else {
        json p = partial;
        p[it.key()] = it.value();
        next.push_back(std::move(p));
      }
    }
    out = std::move(next);
  }
  return out;
}

}  // namespace detail

inline ExperimentSpec parse_experiment(const json& j) {
  ExperimentSpec spec;
  std::vector<json> raw;
  if (j.contains("problems"))
    for (const auto& p : j.at("problems")) raw.push_back(p);
  if (j.contains("problem")) raw.push_back(j.at("problem"));
  if (raw.empty()) throw ContractViolation("experiment: no problem given");
  for (const auto& p : raw) {
    if (!p.contains("kind")) throw ContractViolation("experiment: problem without kind");
    for (auto& e : detail::expand_grid(p)) spec.problems.push_back(std::move(e));
  }
  std::vector<json> solvers;
  if (j.contains("solvers"))
    for (const auto& s : j.at("solvers")) solvers.push_back(s);
  if (j.contains("solver")) solvers.push_back(j.at("solver"));
  if (solvers.empty()) solvers.push_back(json{{"kind", "rlm"}});
  for (const auto& s : solvers) spec.solvers.push_back(resolve_solver(s));

  spec.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  if (spec.seeds.empty()) throw ContractViolation("experiment: seed list is empty");
  std::vector<std::uint64_t> sorted = spec.seeds;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw ContractViolation("experiment: seeds must be unique");
  spec.output = detail::get_or<std::string>(j, "output", "");
  spec.write_traces = detail::get_or<bool>(j, "write_traces", true);
  spec.timing = detail::get_or<bool>(j, "timing", true);
  return spec;
}

struct ReportRow {
  std::string problem;
  std::uint64_t seed = 0;
  std::string solver;
  RunSummary summary;
  double error_to_truth = 0.0;
};

struct SolverAggregate {
  std::string problem;
  std::string solver;
  int runs = 0;
  int successes = 0;
  double mean_iters_success = 0.0;
  double mean_wall_ms_success = 0.0;
};

struct SweepReport {
  std::vector<ReportRow> rows;

  /// Success = termination by GradTol or FTol; means only over successes.
  std::vector<SolverAggregate> aggregate() const {
    std::vector<SolverAggregate> out;
    for (const auto& r : rows) {
      auto it = std::find_if(out.begin(), out.end(),
                             [&](const SolverAggregate& a) { return a.problem == r.problem && a.solver == r.solver; });
      if (it == out.end()) {
        out.push_back({r.problem, r.solver});
        it = std::prev(out.end());
      }
      ++it->runs;
      if (succeeded(r.summary)) {
        ++it->successes;
        it->mean_iters_success += r.summary.iters;
        it->mean_wall_ms_success += r.summary.wall_ms;
      }
    }
    for (auto& a : out) {
      if (a.successes > 0) {
        a.mean_iters_success /= a.successes;
        a.mean_wall_ms_success /= a.successes;
      } else {
        a.mean_iters_success = std::numeric_limits<double>::quiet_NaN();
        a.mean_wall_ms_success = std::numeric_limits<double>::quiet_NaN();
      }
    }
    return out;
  }
};

inline constexpr const char* kReportHeader = "problem,seed,solver,status,iters,succ_iters,final_f,final_grad,wall_ms";

inline void write_report_csv(std::ostream& os, const SweepReport& rep) {
  os << kReportHeader << '\n';
  for (const auto& r : rep.rows)
    os << r.problem << ',' << r.seed << ',' << r.solver << ',' << to_string(r.summary.status) << ',' << r.summary.iters
       << ',' << r.summary.successful_iters << ',' << format_double(r.summary.final_f) << ','
       << format_double(r.summary.final_grad_norm) << ',' << format_double(r.summary.wall_ms) << '\n';
}

inline int sweep_threads() {
  int n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("RLM_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) n = std::min(n, cap);
  }
  return n;
}

/// Runs every (problem, seed, solver) combination, independently and in
/// parallel.  Row order is fixed by the spec, not by completion order.
inline SweepReport run_sweep(const ExperimentSpec& spec, int threads = sweep_threads()) {
  struct Job {
    std::size_t problem, seed;
  };
  std::vector<Job> jobs;
  for (std::size_t p = 0; p < spec.problems.size(); ++p)
    for (std::size_t s = 0; s < spec.seeds.size(); ++s) jobs.push_back({p, s});

  const std::size_t per_job = spec.solvers.size();
  SweepReport rep;
  rep.rows.resize(jobs.size() * per_job);
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;

  namespace fs = std::filesystem;
  if (spec.write_traces && !spec.output.empty()) fs::create_directories(fs::path(spec.output) / "runs");

  auto worker = [&]() {
    for (;;) {
      const std::size_t j = next.fetch_add(1);
      if (j >= jobs.size()) return;
      try {
        json desc = spec.problems[jobs[j].problem];
        desc["seed"] = spec.seeds[jobs[j].seed];
        const Benchmark b = make_benchmark(desc);
        for (std::size_t s = 0; s < per_job; ++s) {
          ReportRow& row = rep.rows[j * per_job + s];
          row.problem = b.label;
          row.seed = spec.seeds[jobs[j].seed];
          row.solver = spec.solvers[s].at("kind").get<std::string>();
          try {
            row.summary = run_solver(spec.solvers[s], *b.problem, b.x0);
          } catch (const ContractViolation&) {
            throw;
          } catch (const std::exception& e) {
            row.summary.status = Status::StepFailure;
            row.summary.message = e.what();
            row.summary.x = b.x0;
          }
          if (!spec.timing) {
            row.summary.wall_ms = 0.0;
            for (auto& r : row.summary.trace) r.wall_ms = 0.0;
          }
          row.error_to_truth = b.error_to_truth(row.summary.x);
          if (spec.write_traces && !spec.output.empty()) {
            std::ofstream os(fs::path(spec.output) / "runs" /
                             (row.problem + "_seed" + std::to_string(row.seed) + "_" + row.solver + "_" +
                              std::to_string(s) + ".csv"));
            write_trace_csv(os, row.summary.trace);
          }
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!first_error) first_error = std::current_exception();
        next.store(jobs.size());
        return;
      }
    }
  };

  threads = std::max(1, std::min<int>(threads, static_cast<int>(jobs.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return rep;
}

inline json aggregate_to_json(const SweepReport& rep) {
  json out = json::array();
  for (const auto& a : rep.aggregate())
    out.push_back({{"problem", a.problem},
                   {"solver", a.solver},
                   {"runs", a.runs},
                   {"successes", a.successes},
                   {"mean_iters_success", json_number(a.mean_iters_success)},
                   {"mean_wall_ms_success", json_number(a.mean_wall_ms_success)}});
  return out;
}

}  // namespace rlm

#endif  // RLM_BENCH_HPP_
