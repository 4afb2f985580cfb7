#pragma once

#include <string>
#include <vector>

#include "canopi/bundle.hpp"
#include "canopi/correction.hpp"
#include "canopi/scenario.hpp"
#include "canopi/subproblem.hpp"

namespace canopi {

struct Instance {
  Network net;
  TechParams tech;
  std::vector<Scenario> scenarios;

  void validate() const;
};

// Network file (JSON) plus a scenario manifest referencing per-scenario CSVs.
// Branch fields are contractual: id, from, to, x0, w_br, x_br_max, c_br.
Instance load_instance(const std::string& network_path,
                       const std::string& manifest_path);

void write_instance(const Instance& inst, const std::string& directory);

struct GenSpec {
  int buses = 6;
  int branches = 8;
  int hours = 6;
  int scenarios = 2;
  unsigned long seed = 7;
};

// Deterministic random instance with realistic ranges: impedances
// 0.01-0.3 p.u., branch capacities sized against the load so that branch
// limits and n-1 transfers genuinely bind.
Instance generate_test_instance(const GenSpec& spec);

struct RunConfig {
  GridMode mode = GridMode::scdc;
  double epsilon = 1e-3;
  double alpha = 0.3;
  int max_iterations = 500;
  int threads = 0;
  SolverConfig solver;
  unsigned long seed = 0;
  double battery_duration = 0.0;  // hours; 0 disables the coupling
  bool minimal_basis = true;
  std::string network_path, manifest_path, output_dir;

  void apply_config_file(const std::string& path);  // solver.* keys etc.
  BundleParams bundle_params() const;
};

struct RunReport {
  std::string mode;
  bool kvl_enabled = true;
  bool contingencies_enabled = true;
  bool converged = false;
  bool hit_iteration_cap = false;
  int iterations = 0;
  double lower = 0.0, upper = 0.0;
  // decomposition of the upper bound
  double invest_cost = 0.0, operating_cost = 0.0, shed_penalty = 0.0,
         violation_penalty = 0.0;
  double shed_gwh = 0.0, violation_gwh = 0.0;
  double storage_gw = 0.0, branch_gw = 0.0;
  double solve_seconds = 0.0;
  std::vector<IterationRecord> trajectory;
  std::string warning;
};

RunReport make_report(const BundleResult& res, const PortfolioSpace& space,
                      const std::vector<Scenario>& scenarios, GridMode mode,
                      double violation_cost);

// report.json + trajectory.jsonl + a terse human summary; returns the
// summary text.
std::string emit_report(const RunReport& report, const std::string& out_dir);

// Saved BUND solution: the portfolio plus per-scenario net injections, so
// the corr stage can rebuild flows without re-solving.
struct SavedSolution {
  std::string mode;
  double lower = 0.0, upper = 0.0;
  InvestmentPortfolio portfolio;
  std::vector<Eigen::MatrixXd> injections;  // per scenario, T x n
};

void save_solution(const SavedSolution& sol, const std::string& path);
SavedSolution load_solution(const std::string& path, const Instance& inst);

struct Evaluation {
  double total = 0.0;
  double invest = 0.0;
  double operating = 0.0, shed_penalty = 0.0, violation_penalty = 0.0;
  double shed_gwh = 0.0, violation_gwh = 0.0;
};

// Original objective under full grid physics: impedances, LODFs, and the
// complete contingency set are taken at the portfolio's own branch build.
Evaluation evaluate_portfolio(const Instance& inst,
                              const InvestmentPortfolio& x,
                              const SolverConfig& cfg = {},
                              bool minimal_basis = true);

}  // namespace canopi
