#pragma once

#include <Eigen/Dense>
#include <string>
#include <tuple>
#include <vector>

#include "canopi/lp.hpp"
#include "canopi/network.hpp"
#include "canopi/scenario.hpp"

namespace canopi {

struct ContingencyIndex {
  int hour = 0;       // t
  int monitored = 0;  // i
  int outaged = 0;    // j
  friend bool operator==(const ContingencyIndex&, const ContingencyIndex&) = default;
  friend auto operator<=>(const ContingencyIndex&, const ContingencyIndex&) = default;
};

using ContingencySet = std::vector<ContingencyIndex>;

enum class GridMode { network_flow, dc, dc_derated, scdc };
GridMode mode_from_string(const std::string& s);
std::string to_string(GridMode m);

struct ModelOptions {
  bool kvl = true;
  bool contingencies = true;
  double derate = 1.0;       // multiplies existing branch capacity in limits
  bool angle_formulation = false;  // voltage-angle KVL instead of cycle rows
  bool minimal_basis = true;       // run the basis-improvement pass
  static ModelOptions for_mode(GridMode m);
};

// Shared, immutable inputs for one sweep of scenario subproblems: cycle
// structure and sensitivities frozen at the impedance-defining capacity.
struct SubproblemContext {
  const Network* net = nullptr;
  const TechParams* tech = nullptr;
  ModelOptions options;
  Eigen::VectorXd x_hat;           // impedance-defining branch expansion
  Eigen::VectorXd chi;             // impedance per branch at x_hat
  UndirectedCycleBasis cycles;     // C
  DirectedCycleBasis basis;        // D
  std::vector<int> non_islanding;  // B
  SensitivityMatrices sens;        // PTDF + LODF at x_hat

  ContingencySet full_contingency_set(int hours) const;
};

SubproblemContext make_context(const Network& net, const TechParams& tech,
                               const Eigen::VectorXd& x_hat,
                               const ModelOptions& options,
                               const SolverConfig& cfg = {});

struct OperationalDecision {
  Eigen::MatrixXd gen_power, gen_reserve;                       // T x G
  Eigen::MatrixXd es_charge, es_discharge, es_reserve, es_soc;  // T x S
  Eigen::MatrixXd shed;                                         // T x D
  Eigen::MatrixXd dc_flow;                                      // T x beta
  Eigen::MatrixXd branch_flow;                                  // T x b
  Eigen::MatrixXd net_injection;                                // T x n
  std::vector<std::pair<ContingencyIndex, double>> contingency_slack;
};

struct CostBreakdown {
  double generation = 0.0;
  double shed_penalty = 0.0;
  double violation_penalty = 0.0;  // in-LP slacks only
  double shed_mwh = 0.0;
  double violation_mwh = 0.0;
};

struct BuiltSubproblem {
  LinearProgram lp;
  int hours = 0;
  int off_pg = 0, off_rg = 0, off_chg = 0, off_dis = 0, off_rdis = 0,
      off_q = 0, off_sh = 0, off_dc = 0, off_br = 0, off_theta = -1,
      off_sc = 0;
  ContingencySet j_set;
  // (row, flat portfolio component, dRhs/dComponent) for subgradients
  std::vector<std::tuple<int, int, double>> rhs_sensitivity;

  OperationalDecision extract(const SubproblemContext& ctx,
                              const Scenario& sc,
                              const std::vector<double>& x) const;
};

// Scenario LP over Y^r: impedances and LODFs frozen at ctx.x_hat, the
// portfolio entering only through tagged right-hand sides.
BuiltSubproblem build_subproblem(const SubproblemContext& ctx,
                                 const InvestmentPortfolio& x,
                                 const Scenario& scenario, int scenario_pos,
                                 const ContingencySet& active);

struct ScreenResult {
  std::vector<std::pair<ContingencyIndex, double>> implied_slacks;
  double sigma_c = 0.0;
  ContingencySet new_violations;
};

// Full T x b x |B| sweep minus `exclude`, as per-hour LODF column products.
// Entries enter new_violations only above `threshold` (MW).
ScreenResult screen_contingencies(const Eigen::MatrixXd& flows,
                                  const SubproblemContext& ctx,
                                  const InvestmentPortfolio& x,
                                  const ContingencySet& exclude,
                                  double threshold = 1e-6);

struct OracleResult {
  OperationalDecision y;
  double theta = 0.0;
  Eigen::VectorXd subgradient;  // flat portfolio coordinates
  double sigma_c = 0.0;
  ContingencySet new_violations;
  CostBreakdown costs;
};

// The constraint-generation oracle: solve, take duals, screen the skipped
// contingencies. Throws SolverError when the LP is not solved to optimality.
OracleResult oracle(const SubproblemContext& ctx, const InvestmentPortfolio& x,
                    const Scenario& scenario, int scenario_pos,
                    const ContingencySet& active, const SolverConfig& cfg = {});

// Monolithic model over all scenarios with the portfolio as columns;
// fix_x pins the portfolio (full-physics evaluation of a given plan).
struct ExtensiveModel {
  LinearProgram lp;
  int off_x = 0;
  std::vector<BuiltSubproblem> per_scenario;  // offsets shifted into lp
  int num_scenarios() const { return static_cast<int>(per_scenario.size()); }
};

ExtensiveModel build_extensive_form(const SubproblemContext& ctx,
                                    const std::vector<Scenario>& scenarios,
                                    const PortfolioSpace& space,
                                    const std::vector<ContingencySet>& j_sets,
                                    const InvestmentPortfolio* fix_x = nullptr);

}  // namespace canopi
