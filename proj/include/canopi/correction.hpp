#pragma once

#include <Eigen/Dense>
#include <vector>

#include "canopi/scenario.hpp"
#include "canopi/subproblem.hpp"

namespace canopi {

// r-th largest order statistic (r >= 1, duplicates counted separately);
// r beyond the array length means the step count can never be reached, so
// the unconstrained optimum is no expansion: returns 0.
double rth_largest(std::vector<double> v, int r);

// Restricted transmission expansion: one algebraic pass per branch over
// PTDF/LODF flows frozen at x_hat. Injections must balance per hour.
Eigen::VectorXd restricted_expansion(
    const Eigen::VectorXd& x_hat,
    const std::vector<Eigen::MatrixXd>& injections,  // per scenario, T x n
    const Network& net, const TechParams& tech,
    const std::vector<int>& non_islanding);

struct CorrParams {
  double tolerance = 1e-6;  // MW, on the sup-norm residual
  int max_iterations = 200;
  double damping = 1.0;  // lambda; halved on each restart
  int max_restarts = 3;
};

struct CorrState {
  Eigen::VectorXd x_hat;
  double residual = kInf;
  int iterations = 0;
  double damping = 1.0;
};

struct CorrResult {
  Eigen::VectorXd x_br;             // final consistent expansion
  std::vector<double> residuals;    // sup-norm per iteration
  bool converged = false;
  int iterations = 0;
  int restarts = 0;
  std::string warning;
};

// Fixed-point iteration x_hat <- (1-lambda) x_hat + lambda E(x_hat),
// started from the bundle's branch solution.
CorrResult corr_fixed_point(
    const Eigen::VectorXd& x_br_start,
    const std::vector<Eigen::MatrixXd>& injections, const Network& net,
    const TechParams& tech, const std::vector<int>& non_islanding,
    const CorrParams& params = {});

// Net injections of a stored operational solution, per scenario.
std::vector<Eigen::MatrixXd> injections_from_solutions(
    const std::vector<OracleResult>& oracles);

}  // namespace canopi
