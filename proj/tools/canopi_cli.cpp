#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "canopi/bundle.hpp"
#include "canopi/correction.hpp"
#include "canopi/errors.hpp"
#include "canopi/io.hpp"
#include "canopi/kernels.hpp"

namespace fs = std::filesystem;
using namespace canopi;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitSolver = 3;
constexpr int kExitIterationCap = 4;

struct CommonArgs {
  std::string network = "network.json";
  std::string manifest = "manifest.json";
  std::string config;
};

void add_instance_flags(CLI::App* app, CommonArgs* args) {
  app->add_option("--network", args->network, "network JSON file");
  app->add_option("--manifest", args->manifest, "scenario manifest");
  app->add_option("--config", args->config, "config JSON (solver.* keys)");
}

Instance load_with_config(const CommonArgs& args, RunConfig* cfg) {
  if (!args.config.empty() && cfg != nullptr)
    cfg->apply_config_file(args.config);
  return load_instance(args.network, args.manifest);
}

int run_solve(const CommonArgs& args, RunConfig cfg,
              const std::string& out_dir) {
  Instance inst = load_with_config(args, &cfg);
  ModelOptions opt = ModelOptions::for_mode(cfg.mode);
  opt.minimal_basis = cfg.minimal_basis;
  auto t0 = std::chrono::steady_clock::now();
  SubproblemContext ctx = make_context(
      inst.net, inst.tech, Eigen::VectorXd::Zero(inst.net.num_branches()), opt,
      cfg.solver);
  PortfolioSpace space = PortfolioSpace::build(inst.net, inst.tech,
                                               inst.scenarios,
                                               cfg.battery_duration);
  BundleResult res = run_bund(ctx, inst.scenarios, space, cfg.bundle_params());
  RunReport report = make_report(res, space, inst.scenarios, cfg.mode,
                                 inst.tech.violation_cost);
  report.solve_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  std::cout << emit_report(report, out_dir);

  SavedSolution sol;
  sol.mode = to_string(cfg.mode);
  sol.lower = res.lower;
  sol.upper = res.upper;
  sol.portfolio = res.x_star;
  sol.injections = injections_from_solutions(res.incumbent_oracles);
  save_solution(sol, (fs::path(out_dir) / "solution.json").string());
  std::cout << "solution written to " << (fs::path(out_dir) / "solution.json")
            << "\n";
  return res.converged ? kExitOk : kExitIterationCap;
}

int run_evaluate(const CommonArgs& args, RunConfig cfg,
                 const std::string& solution_path) {
  Instance inst = load_with_config(args, &cfg);
  SavedSolution sol = load_solution(solution_path, inst);
  Evaluation ev = evaluate_portfolio(inst, sol.portfolio, cfg.solver,
                                     cfg.minimal_basis);
  std::printf("total cost: %.6g\n", ev.total);
  std::printf("  invest %.6g | operating %.6g | shed %.6g | violation %.6g\n",
              ev.invest, ev.operating, ev.shed_penalty, ev.violation_penalty);
  std::printf("  Shed GWh %.6g | Viol. GWh %.6g\n", ev.shed_gwh,
              ev.violation_gwh);
  return kExitOk;
}

int run_corr(const CommonArgs& args, RunConfig cfg,
             const std::string& solution_path, const std::string& out_path) {
  Instance inst = load_with_config(args, &cfg);
  SavedSolution sol = load_solution(solution_path, inst);
  if (sol.injections.size() != inst.scenarios.size())
    throw ValidationError(
        "solution file lacks per-scenario injections; re-run solve");

  ModelOptions opt = ModelOptions::for_mode(GridMode::scdc);
  opt.minimal_basis = cfg.minimal_basis;
  Graph g = inst.net.graph();
  UndirectedCycleBasis fund = fundamental_basis(g, inst.net.slack_bus);
  UndirectedCycleBasis cycles = fund;
  if (opt.minimal_basis && fund.num_cycles() > 0)
    cycles = minimal_cycle_basis(fund, g, cfg.solver).first;
  std::vector<int> non_islanding = non_islanding_set(cycles);

  CorrResult res = corr_fixed_point(sol.portfolio.branch, sol.injections,
                                    inst.net, inst.tech, non_islanding);
  for (size_t i = 0; i < res.residuals.size(); ++i)
    std::printf("iter %3zu  residual %.3e MW\n", i + 1, res.residuals[i]);
  std::printf("%s after %d iterations (%d restarts)\n",
              res.converged ? "converged" : "NOT converged", res.iterations,
              res.restarts);
  std::printf("branch expansion (MW):\n");
  for (int j = 0; j < res.x_br.size(); ++j)
    std::printf("  branch %2d: %.4f\n", j, res.x_br[j]);
  if (!out_path.empty()) {
    SavedSolution out = sol;
    out.portfolio.branch = res.x_br;
    save_solution(out, out_path);
    std::printf("corrected solution written to %s\n", out_path.c_str());
  }
  if (!res.warning.empty()) std::printf("warning: %s\n", res.warning.c_str());
  return res.converged ? kExitOk : kExitIterationCap;
}

int run_mcb(const CommonArgs& args, RunConfig cfg, const std::string& report) {
  Instance inst = load_with_config(args, &cfg);
  Graph g = inst.net.graph();
  UndirectedCycleBasis fund = fundamental_basis(g, inst.net.slack_bus);
  auto [c, d] = fund.num_cycles() > 0
                    ? minimal_cycle_basis(fund, g, cfg.solver)
                    : std::pair<UndirectedCycleBasis, DirectedCycleBasis>{
                          fund, DirectedCycleBasis{}};
  std::printf("cycles: %d | total length: %d | longest: %d\n", c.num_cycles(),
              c.total_length(), c.longest_cycle());
  std::FILE* out = report.empty() ? stdout : std::fopen(report.c_str(), "w");
  if (out == nullptr) throw ValidationError("cannot write " + report);
  std::fprintf(out, "{\"cycles\":%d,\"total_length\":%d,\"longest\":%d,",
               c.num_cycles(), c.total_length(), c.longest_cycle());
  std::fprintf(out, "\"edges_per_cycle\":[");
  for (int k = 0; k < c.num_cycles(); ++k) {
    std::fprintf(out, k ? ",[" : "[");
    bool first = true;
    for (int e = 0; e < c.num_edges; ++e)
      if (c.rows[k][e]) {
        std::fprintf(out, first ? "%d" : ",%d", e);
        first = false;
      }
    std::fprintf(out, "]");
  }
  std::fprintf(out, "]}\n");
  if (out != stdout) std::fclose(out);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"canopi: contingency-aware generation/storage/transmission "
               "expansion at desk scale"};
  app.require_subcommand(1);

  CommonArgs common;
  RunConfig cfg;
  std::string mode_str = "scdc";
  std::string out_dir = "out";
  std::string solution_path = "out/solution.json";
  std::string corr_out, mcb_report;
  GenSpec gen;
  std::string gen_dir = "instance";

  auto* solve = app.add_subcommand("solve", "run the bundle method");
  add_instance_flags(solve, &common);
  solve->add_option("--mode", mode_str, "nf|dc|dc07|scdc");
  solve->add_option("--epsilon", cfg.epsilon, "relative gap target");
  solve->add_option("--alpha", cfg.alpha, "level parameter in (0,1)");
  solve->add_option("--max-iters", cfg.max_iterations, "iteration cap");
  solve->add_option("--threads", cfg.threads, "oracle threads (0=auto)");
  solve->add_option("--battery-duration", cfg.battery_duration,
                    "couple storage energy = duration * power (0=off)");
  solve->add_option("--out", out_dir, "output directory");
  solve->add_flag("--fundamental-basis", [&](std::int64_t) {
    cfg.minimal_basis = false;
  }, "skip the minimal cycle basis pass");

  auto* eval = app.add_subcommand("evaluate",
                                  "full-physics total cost of a solution");
  add_instance_flags(eval, &common);
  eval->add_option("--solution", solution_path, "solution JSON from solve");

  auto* corr = app.add_subcommand("corr", "impedance-feedback fixed point");
  add_instance_flags(corr, &common);
  corr->add_option("--solution", solution_path, "solution JSON from solve");
  corr->add_option("--out", corr_out, "write corrected solution here");

  auto* mcb = app.add_subcommand("mcb", "minimal cycle basis report");
  add_instance_flags(mcb, &common);
  mcb->add_option("--report", mcb_report, "write JSON report here");

  auto* geni = app.add_subcommand("gen-instance", "write a random instance");
  geni->add_option("--buses", gen.buses);
  geni->add_option("--branches", gen.branches);
  geni->add_option("--hours", gen.hours);
  geni->add_option("--scenarios", gen.scenarios);
  geni->add_option("--seed", gen.seed);
  geni->add_option("--out", gen_dir, "output directory");

  auto* val = app.add_subcommand("validate", "load and check an instance");
  add_instance_flags(val, &common);

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve->parsed()) {
      cfg.mode = mode_from_string(mode_str);
      return run_solve(common, cfg, out_dir);
    }
    if (eval->parsed()) return run_evaluate(common, cfg, solution_path);
    if (corr->parsed()) return run_corr(common, cfg, solution_path, corr_out);
    if (mcb->parsed()) return run_mcb(common, cfg, mcb_report);
    if (geni->parsed()) {
      Instance inst = generate_test_instance(gen);
      write_instance(inst, gen_dir);
      std::printf("instance written to %s (%d buses, %d branches, %zu "
                  "scenarios, T=%d)\n",
                  gen_dir.c_str(), inst.net.num_buses(),
                  inst.net.num_branches(), inst.scenarios.size(),
                  inst.scenarios.front().hours);
      return kExitOk;
    }
    if (val->parsed()) {
      Instance inst = load_with_config(common, &cfg);
      std::printf("ok: %d buses, %d branches, %d generators, %d storage, %d "
                  "loads, %zu scenarios\n",
                  inst.net.num_buses(), inst.net.num_branches(),
                  inst.net.num_generators(), inst.net.num_storage(),
                  inst.net.num_loads(), inst.scenarios.size());
      return kExitOk;
    }
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const StructuralError& e) {
    std::cerr << "structural error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const SolverError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return kExitSolver;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSolver;
  }
  return kExitOk;
}
