#include <chrono>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "assign/admm.hpp"
#include "assign/engine.hpp"
#include "assign/errors.hpp"
#include "assign/eval.hpp"
#include "assign/io_util.hpp"
#include "assign/log.hpp"
#include "assign/problem.hpp"
#include "assign/rng.hpp"
#include "assign/rounding.hpp"
#include "assign/subsolver.hpp"

namespace {

using assign::fail;

// Every artifact gets <path>.meta.json carrying the resolved configuration,
// so a run can be reproduced from its outputs alone.
void write_sidecar(const std::filesystem::path& artifact,
                   const nlohmann::json& config) {
  nlohmann::json meta;
  meta["artifact"] = artifact.filename().string();
  meta["config"] = config;
  meta["format_version"] = 1;
  assign::write_text_file(artifact.string() + ".meta.json",
                          meta.dump(2) + "\n");
}

std::vector<std::size_t> parse_size_list(const std::string& text) {
  std::vector<std::size_t> out;
  for (const auto& cell : assign::split_csv_line(text))
    out.push_back(static_cast<std::size_t>(assign::parse_double(cell)));
  if (out.empty()) fail("invalid-config", "empty list");
  return out;
}

struct GenArgs {
  std::size_t items = 0, owners = 0, m = 0, n = 0;
  std::string objective = "quadratic";
  std::uint64_t seed = 0;
  std::size_t partitions = 0;
  bool uneven = false;
  std::string out;
};

int run_gen(const GenArgs& a) {
  assign::ProblemSpec spec =
      a.uneven ? assign::generate_uneven(a.items, a.owners, a.m, a.n,
                                         assign::objective_kind_from_name(a.objective),
                                         a.seed)
               : assign::generate_synthetic(a.items, a.owners, a.m, a.n,
                                            assign::objective_kind_from_name(a.objective),
                                            a.seed);
  if (a.partitions > 0) spec.partitions = a.partitions;
  assign::save_problem(spec, a.out);
  nlohmann::json config{{"command", "gen"},       {"items", a.items},
                        {"owners", a.owners},     {"m", a.m},
                        {"n", a.n},               {"objective", a.objective},
                        {"seed", a.seed},         {"uneven", a.uneven},
                        {"partitions", spec.partitions}};
  write_sidecar(std::filesystem::path(a.out) / "manifest.json", config);
  std::printf("generated %s items=%zu owners=%zu m=%zu n=%zu\n", a.out.c_str(),
              a.items, a.owners, a.m, a.n);
  return 0;
}

struct SolveArgs {
  std::string problem;
  std::size_t iters = 1000;
  double ineq_tol = 1e-3, eq_tol = 1e-3, dual_tol = 1e-6;
  std::size_t trace_every = 0;
  std::string trace, out, checkpoint_dir;
  std::size_t checkpoint_every = 25;
  std::optional<std::size_t> resume;
  std::size_t workers = 1;
  std::size_t partitions = 0;
  double inject_failure = 0.0;
  std::uint64_t failure_seed = 0;
  std::optional<double> rho, beta;
  bool allow_low_beta = false;
  double dominance = 0.0;
};

int run_solve(const SolveArgs& a) {
  assign::ProblemSpec spec = assign::load_problem(a.problem);
  if (a.rho.has_value()) spec.rho = *a.rho;
  if (a.beta.has_value()) spec.beta = *a.beta;
  spec.allow_low_beta = a.allow_low_beta || spec.allow_low_beta;

  assign::SolverConfig config;
  config.max_iters = a.iters;
  config.ineq_tol = a.ineq_tol;
  config.eq_tol = a.eq_tol;
  config.dual_tol = a.dual_tol;
  config.trace_every = a.trace_every;
  config.checkpoint_every = a.checkpoint_every;
  config.dominance = a.dominance;
  if (!a.checkpoint_dir.empty()) config.checkpoint_dir = a.checkpoint_dir;

  assign::EngineConfig ec;
  ec.workers = a.workers;
  ec.partitions = a.partitions;
  ec.inject_failure = a.inject_failure;
  ec.failure_seed = a.failure_seed;
  assign::Engine engine(spec, ec);

  auto result = assign::solve(spec, config, engine, a.resume);
  auto sw = assign::constraint_lhs(spec, result.X);
  double ineq = assign::ineq_mapd_from_lhs(spec, sw);
  double eq = assign::eq_mapd_from_lhs(spec, sw);
  double objective = 0.0;
  {
    auto report = assign::evaluate(spec, result.X);
    objective = report.objective;
  }

  nlohmann::json config_json{{"command", "solve"},
                             {"problem", a.problem},
                             {"iters", a.iters},
                             {"workers", a.workers},
                             {"partitions", spec.partitions},
                             {"inject_failure", a.inject_failure},
                             {"failure_seed", a.failure_seed},
                             {"ineq_tol", a.ineq_tol},
                             {"eq_tol", a.eq_tol},
                             {"dual_tol", a.dual_tol},
                             {"rho", spec.rho},
                             {"beta", spec.beta},
                             {"seed", spec.seed}};
  if (!a.trace.empty()) {
    assign::write_text_file(a.trace, assign::trace_to_csv(result.trace));
    write_sidecar(a.trace, config_json);
  }
  if (!a.out.empty()) {
    assign::write_text_file(a.out, assign::solution_to_csv(result.X));
    write_sidecar(a.out, config_json);
  }
  std::printf(
      "converged=%d iterations=%zu objective=%s ineq_mapd=%s eq_mapd=%s\n",
      result.converged ? 1 : 0, result.iterations,
      assign::format_double(objective).c_str(),
      assign::format_double(ineq).c_str(), assign::format_double(eq).c_str());
  return 0;
}

struct RoundArgs {
  std::string problem, solution, out;
  std::uint64_t seed = 0;
  std::size_t repeats = 1;
};

int run_round(const RoundArgs& a) {
  assign::ProblemSpec spec = assign::load_problem(a.problem);
  assign::MatrixD X =
      assign::solution_from_csv(assign::read_text_file(a.solution));
  auto pick = assign::round_best(spec, X, a.seed, a.repeats);
  assign::write_text_file(a.out, assign::assignment_to_csv(pick.assignment));
  write_sidecar(a.out, nlohmann::json{{"command", "round"},
                                      {"problem", a.problem},
                                      {"solution", a.solution},
                                      {"seed", a.seed},
                                      {"repeats", a.repeats},
                                      {"picked_repeat", pick.repeat}});
  std::printf("rounded repeats=%zu picked=%llu ineq_mapd=%s eq_mapd=%s\n",
              a.repeats, static_cast<unsigned long long>(pick.repeat),
              assign::format_double(pick.ineq_mapd).c_str(),
              assign::format_double(pick.eq_mapd).c_str());
  return 0;
}

struct EvalArgs {
  std::string problem, solution, assignment, out;
  std::optional<double> reference;
  bool use_oracle = false;
};

int run_eval(const EvalArgs& a) {
  assign::ProblemSpec spec = assign::load_problem(a.problem);
  std::optional<double> reference = a.reference;
  if (a.use_oracle) reference = assign::oracle_solve(spec).objective;
  assign::SolutionReport report;
  if (!a.solution.empty()) {
    assign::MatrixD X =
        assign::solution_from_csv(assign::read_text_file(a.solution));
    report = assign::evaluate(spec, X, reference);
  } else {
    auto asg =
        assign::assignment_from_csv(assign::read_text_file(a.assignment));
    report = assign::evaluate_binary(spec, asg, reference);
  }
  std::string json = assign::report_to_json(report);
  if (!a.out.empty()) {
    assign::write_text_file(a.out, json);
    write_sidecar(a.out, nlohmann::json{{"command", "eval"},
                                        {"problem", a.problem},
                                        {"solution", a.solution},
                                        {"assignment", a.assignment},
                                        {"oracle", a.use_oracle}});
  } else {
    std::fputs(json.c_str(), stdout);
  }
  return 0;
}

struct OracleArgs {
  std::string problem, out, solution_out;
  double kkt_tol = 1e-6;
};

int run_oracle(const OracleArgs& a) {
  assign::ProblemSpec spec = assign::load_problem(a.problem);
  auto result = assign::oracle_solve(spec, a.kkt_tol);
  nlohmann::json j{{"objective", result.objective},
                   {"kkt_residual", result.kkt_residual},
                   {"barrier_t", result.barrier_t},
                   {"newton_steps", result.newton_steps}};
  nlohmann::json config{{"command", "oracle"},
                        {"problem", a.problem},
                        {"kkt_tol", a.kkt_tol}};
  if (!a.out.empty()) {
    assign::write_text_file(a.out, j.dump(2) + "\n");
    write_sidecar(a.out, config);
  } else {
    std::fputs((j.dump(2) + "\n").c_str(), stdout);
  }
  if (!a.solution_out.empty()) {
    assign::write_text_file(a.solution_out,
                            assign::solution_to_csv(result.X));
    write_sidecar(a.solution_out, config);
  }
  return 0;
}

struct BenchArgs {
  std::string items_list = "10000", workers_list = "1";
  std::size_t owners = 10, m = 3, n = 2;
  std::string objective = "quadratic";
  std::uint64_t seed = 1;
  std::size_t iters = 10;
  std::string out;
};

struct SubsolverBenchArgs {
  std::size_t j = 10;
  std::size_t count = 100000;
};

int run_bench_subsolver(const SubsolverBenchArgs& a) {
  std::vector<double> gamma(a.count * a.j), eta(a.count * a.j), x(a.j);
  for (std::size_t k = 0; k < a.count * a.j; ++k) {
    gamma[k] = 0.1 + assign::rng_uniform01(1, assign::RngStream::test, 2 * k);
    eta[k] = assign::rng_uniform(1, assign::RngStream::test, 2 * k + 1, -2.0, 1.0);
  }
  assign::SimplexQpWorkspace ws;
  double sink = 0.0;
  auto start = std::chrono::steady_clock::now();
  for (std::size_t k = 0; k < a.count; ++k) {
    std::span<const double> g(gamma.data() + k * a.j, a.j);
    std::span<const double> e(eta.data() + k * a.j, a.j);
    sink += assign::solve_simplex_qp_into(g, e, x, ws);
  }
  auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                std::chrono::steady_clock::now() - start)
                .count();
  if (!std::isfinite(sink)) return 1;
  std::printf("subsolver j=%zu count=%zu ns_per_solve=%.1f\n", a.j, a.count,
              static_cast<double>(ns) / static_cast<double>(a.count));
  return 0;
}

int run_bench(const BenchArgs& a) {
  std::string csv = "items,workers,iterations,total_ms,per_iter_ms\n";
  for (std::size_t items : parse_size_list(a.items_list)) {
    assign::ProblemSpec spec = assign::generate_synthetic(
        items, a.owners, a.m, a.n,
        assign::objective_kind_from_name(a.objective), a.seed);
    for (std::size_t workers : parse_size_list(a.workers_list)) {
      assign::EngineConfig ec;
      ec.workers = workers;
      assign::Engine engine(spec, ec);
      assign::SolverConfig config;
      config.max_iters = a.iters;
      config.ineq_tol = -1.0;
      config.eq_tol = -1.0;
      config.dual_tol = -1.0;
      config.trace_every = a.iters;
      auto start = std::chrono::steady_clock::now();
      auto result = assign::solve(spec, config, engine);
      double total_ms = std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - start)
                            .count();
      csv += std::to_string(items) + ',' + std::to_string(workers) + ',' +
             std::to_string(result.iterations) + ',' +
             assign::format_double(total_ms) + ',' +
             assign::format_double(total_ms /
                                   static_cast<double>(result.iterations)) +
             '\n';
      std::printf("bench items=%zu workers=%zu per_iter_ms=%s\n", items,
                  workers,
                  assign::format_double(total_ms / static_cast<double>(
                                                       result.iterations))
                      .c_str());
    }
  }
  if (!a.out.empty()) {
    assign::write_text_file(a.out, csv);
    write_sidecar(a.out, nlohmann::json{{"command", "bench"},
                                        {"items", a.items_list},
                                        {"workers", a.workers_list},
                                        {"owners", a.owners},
                                        {"m", a.m},
                                        {"n", a.n},
                                        {"objective", a.objective},
                                        {"seed", a.seed},
                                        {"iters", a.iters}});
  } else {
    std::fputs(csv.c_str(), stdout);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed BADMM solver for generalized assignment problems"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic problem");
  gen_cmd->add_option("--items", gen.items, "Item count")->required();
  gen_cmd->add_option("--owners", gen.owners, "Owner count")->required();
  gen_cmd->add_option("--m", gen.m, "Inequality constraint count")->required();
  gen_cmd->add_option("--n", gen.n, "Equality constraint count")->required();
  gen_cmd->add_option("--objective", gen.objective,
                      "quadratic|logarithmic|linear");
  gen_cmd->add_option("--seed", gen.seed, "Instance seed");
  gen_cmd->add_option("--partitions", gen.partitions, "Partition count");
  gen_cmd->add_flag("--uneven", gen.uneven, "Scale second half of items by 10");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();

  SolveArgs solve;
  auto* solve_cmd = app.add_subcommand("solve", "Run the BADMM solver");
  solve_cmd->add_option("--problem", solve.problem, "Problem directory")
      ->required();
  solve_cmd->add_option("--iters", solve.iters, "Maximum iterations");
  solve_cmd->add_option("--ineq-tol", solve.ineq_tol,
                        "Inequality MAPD tolerance (negative disables)");
  solve_cmd->add_option("--eq-tol", solve.eq_tol,
                        "Equality MAPD tolerance (negative disables)");
  solve_cmd->add_option("--dual-tol", solve.dual_tol,
                        "Dual residual tolerance (negative disables)");
  solve_cmd->add_option("--trace", solve.trace, "Trace CSV path");
  solve_cmd->add_option("--trace-every", solve.trace_every,
                        "Trace cadence (0 = auto)");
  solve_cmd->add_option("--out", solve.out, "Solution CSV path");
  solve_cmd->add_option("--checkpoint-dir", solve.checkpoint_dir,
                        "Checkpoint directory");
  solve_cmd->add_option("--checkpoint-every", solve.checkpoint_every,
                        "Checkpoint cadence");
  std::int64_t resume_at = -1;
  solve_cmd->add_option("--resume", resume_at, "Resume from checkpoint iteration");
  solve_cmd->add_option("--workers", solve.workers, "Worker thread count");
  solve_cmd->add_option("--partitions", solve.partitions,
                        "Partition count override");
  solve_cmd->add_option("--inject-failure", solve.inject_failure,
                        "Per-assignment crash probability");
  solve_cmd->add_option("--failure-seed", solve.failure_seed,
                        "Failure injection seed");
  double rho_override = 0.0, beta_override = 0.0;
  auto* rho_opt = solve_cmd->add_option("--rho", rho_override, "Penalty rho override");
  auto* beta_opt =
      solve_cmd->add_option("--beta", beta_override, "Bregman beta override");
  solve_cmd->add_flag("--allow-low-beta", solve.allow_low_beta,
                      "Accept beta below the sufficient bound");
  solve_cmd->add_option("--dominance", solve.dominance,
                        "Dominance dimension D (0 = item count)");

  RoundArgs round;
  auto* round_cmd =
      app.add_subcommand("round", "Sample a binary assignment from a solution");
  round_cmd->add_option("--problem", round.problem, "Problem directory")
      ->required();
  round_cmd->add_option("--solution", round.solution, "Solution CSV")
      ->required();
  round_cmd->add_option("--seed", round.seed, "Rounding seed");
  round_cmd->add_option("--repeats", round.repeats,
                        "Samples to draw; keeps the lowest-MAPD one");
  round_cmd->add_option("--out", round.out, "Assignment CSV path")->required();

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Score a solution or assignment");
  eval_cmd->add_option("--problem", eval.problem, "Problem directory")
      ->required();
  auto* sol_opt = eval_cmd->add_option("--solution", eval.solution,
                                       "Continuous solution CSV");
  auto* asg_opt = eval_cmd->add_option("--assignment", eval.assignment,
                                       "Binary assignment CSV");
  sol_opt->excludes(asg_opt);
  double ref_value = 0.0;
  auto* ref_opt = eval_cmd->add_option("--reference", ref_value,
                                       "Reference objective for APD");
  eval_cmd->add_flag("--oracle", eval.use_oracle,
                     "Compute the reference with the internal oracle");
  eval_cmd->add_option("--out", eval.out, "Report JSON path");

  OracleArgs oracle;
  auto* oracle_cmd =
      app.add_subcommand("oracle", "Reference continuous solve");
  oracle_cmd->add_option("--problem", oracle.problem, "Problem directory")
      ->required();
  oracle_cmd->add_option("--kkt-tol", oracle.kkt_tol, "KKT residual target");
  oracle_cmd->add_option("--out", oracle.out, "Result JSON path");
  oracle_cmd->add_option("--solution-out", oracle.solution_out,
                         "Reference solution CSV path");

  BenchArgs bench;
  auto* bench_cmd =
      app.add_subcommand("bench", "Per-iteration timing across sizes");
  bench_cmd->add_option("--items-list", bench.items_list,
                        "Comma-separated item counts");
  bench_cmd->add_option("--workers-list", bench.workers_list,
                        "Comma-separated worker counts");
  bench_cmd->add_option("--owners", bench.owners, "Owner count");
  bench_cmd->add_option("--m", bench.m, "Inequality constraint count");
  bench_cmd->add_option("--n", bench.n, "Equality constraint count");
  bench_cmd->add_option("--objective", bench.objective,
                        "quadratic|logarithmic|linear");
  bench_cmd->add_option("--seed", bench.seed, "Instance seed");
  bench_cmd->add_option("--iters", bench.iters, "Iterations per run");
  bench_cmd->add_option("--out", bench.out, "Bench CSV path");

  SubsolverBenchArgs sub_bench;
  auto* sub_bench_cmd = bench_cmd->add_subcommand(
      "subsolver", "Micro-bench the simplex QP subsolver");
  sub_bench_cmd->add_option("--j", sub_bench.j, "Owner count per instance");
  sub_bench_cmd->add_option("--count", sub_bench.count, "Instances to solve");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    std::fputs(app.help().c_str(), stderr);
    return 2;
  }

  try {
    if (gen_cmd->parsed()) return run_gen(gen);
    if (solve_cmd->parsed()) {
      if (resume_at >= 0) solve.resume = static_cast<std::size_t>(resume_at);
      if (rho_opt->count() > 0) solve.rho = rho_override;
      if (beta_opt->count() > 0) solve.beta = beta_override;
      return run_solve(solve);
    }
    if (round_cmd->parsed()) return run_round(round);
    if (eval_cmd->parsed()) {
      if (ref_opt->count() > 0) eval.reference = ref_value;
      if (eval.solution.empty() && eval.assignment.empty())
        fail("invalid-config", "eval needs --solution or --assignment");
      return run_eval(eval);
    }
    if (oracle_cmd->parsed()) return run_oracle(oracle);
    if (bench_cmd->parsed()) {
      if (sub_bench_cmd->parsed()) return run_bench_subsolver(sub_bench);
      return run_bench(bench);
    }
  } catch (const assign::Error& e) {
    std::fprintf(stderr, "error: %s: %s\n", e.code().c_str(),
                 e.what() + e.code().size() + 2);
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: internal: %s\n", e.what());
    return 1;
  }
  return 2;
}
