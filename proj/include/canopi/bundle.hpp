#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "canopi/scenario.hpp"
#include "canopi/subproblem.hpp"

namespace canopi {

// Affine minorant of one scenario's value function, anchored at the iterate
// it was generated from.
struct Cut {
  int scenario = 0;
  double theta = 0.0;
  Eigen::VectorXd slope;   // full portfolio coordinates
  Eigen::VectorXd anchor;  // x_k

  double value(const Eigen::VectorXd& x) const {
    return theta + slope.dot(x - anchor);
  }
};

struct BundleParams {
  double epsilon = 1e-3;
  double alpha = 0.3;
  int max_iterations = 500;
  int threads = 0;  // 0 = hardware concurrency
  SolverConfig solver;
};

struct IterationRecord {
  int k = 0;
  double lower = 0.0, upper = 0.0, f_k = 0.0, theta_lev = 0.0, gap = 0.0;
  bool type2 = false;
  bool incumbent_updated = false;
  std::vector<int> j_sizes;
  // f_hat_k(x_{k+1}) - theta_lev; <= 0 (mod 1e-7) when the center is valid
  double level_residual = 0.0;
  double oracle_seconds = 0.0, master_seconds = 0.0, center_seconds = 0.0;
};

struct BundleState {
  int iteration = 0;
  std::vector<std::vector<Cut>> cuts;  // per scenario
  std::vector<ContingencySet> active;  // J_k per scenario
  double lower = 0.0;
  double upper = kInf;
  double theta_lev = kInf;
  Eigen::VectorXd iterate;    // x_k, full coordinates
  Eigen::VectorXd incumbent;  // x*
  std::vector<OracleResult> incumbent_oracles;
};

struct BundleResult {
  bool converged = false;
  bool hit_iteration_cap = false;
  int iterations = 0;
  double lower = 0.0, upper = 0.0;
  InvestmentPortfolio x_star;
  std::vector<OracleResult> incumbent_oracles;
  std::vector<IterationRecord> trajectory;
  std::string warning;
};

// c'x plus the weighted cutting-plane models, the zero model included.
double model_value(const std::vector<std::vector<Cut>>& cuts,
                   const PortfolioSpace& space,
                   const std::vector<double>& weights,
                   const Eigen::VectorXd& x);

// min over X of the cutting-plane model; returns (L_k, argmin).
std::pair<double, Eigen::VectorXd> lower_bound(
    const std::vector<std::vector<Cut>>& cuts, const PortfolioSpace& space,
    const std::vector<double>& weights, const SolverConfig& cfg = {});

// Analytic center of the level set {x in X : f_hat(x) <= theta_lev},
// via damped Newton on the log barrier over box sides, the emission budget
// row, every cut's epigraph row, and the level row. x_lb/x_k feed the
// interior initializer and the last-resort fallback 0.9*x_lb + 0.1*x_k.
Eigen::VectorXd analytic_center(const std::vector<std::vector<Cut>>& cuts,
                                const PortfolioSpace& space,
                                const std::vector<double>& weights,
                                double theta_lev, const Eigen::VectorXd& x_lb,
                                const Eigen::VectorXd& x_k);

// The interleaved level-bundle loop over the given context.
BundleResult run_bund(const SubproblemContext& ctx,
                      const std::vector<Scenario>& scenarios,
                      const PortfolioSpace& space, const BundleParams& params);

}  // namespace canopi
