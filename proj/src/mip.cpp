#include <algorithm>
#include <chrono>
#include <cmath>
#include <vector>

#include "canopi/lp.hpp"

namespace canopi {

namespace {

struct Node {
  std::vector<double> lower, upper;
};

bool fractional(const LinearProgram& lp, const std::vector<double>& x,
                int* var, double* frac) {
  int best = -1;
  double best_dist = 1e-6;
  for (int j = 0; j < lp.num_vars(); ++j) {
    if (lp.is_integer.empty() || !lp.is_integer[j]) continue;
    double f = x[j] - std::floor(x[j]);
    double dist = std::min(f, 1.0 - f);
    if (dist > best_dist) {
      best_dist = dist;
      best = j;
      *frac = f;
    }
  }
  *var = best;
  return best >= 0;
}

}  // namespace

LpSolution solve_ip(const LinearProgram& lp, const SolverConfig& cfg) {
  if (!lp.has_integers()) return solve_lp(lp, cfg);

  auto deadline = std::chrono::steady_clock::now() +
                  std::chrono::duration<double>(cfg.time_limit_s);

  LinearProgram work = lp;
  LpSolution incumbent;
  incumbent.status = SolveStatus::infeasible;
  double best_obj = kInf;

  std::vector<Node> stack;
  stack.push_back({lp.lower, lp.upper});
  long nodes = 0;

  while (!stack.empty()) {
    if (std::chrono::steady_clock::now() > deadline || nodes > cfg.max_nodes) {
      LpSolution out = incumbent;
      out.status = SolveStatus::failed;
      out.message = "branch-and-bound hit the node/time limit";
      return out;
    }
    Node node = std::move(stack.back());
    stack.pop_back();
    ++nodes;

    work.lower = node.lower;
    work.upper = node.upper;
    LpSolution rel = solve_lp(work, cfg);
    if (rel.status == SolveStatus::infeasible) continue;
    if (rel.status == SolveStatus::unbounded) {
      LpSolution out;
      out.status = SolveStatus::unbounded;
      out.message = "LP relaxation unbounded";
      return out;
    }
    if (rel.status == SolveStatus::failed) {
      LpSolution out = rel;
      out.message = "node LP failed: " + rel.message;
      return out;
    }
    if (rel.objective >= best_obj - 1e-9 * (1.0 + std::fabs(best_obj)))
      continue;

    int var = -1;
    double frac = 0.0;
    if (!fractional(lp, rel.x, &var, &frac)) {
      // integral: snap and accept
      for (int j = 0; j < lp.num_vars(); ++j)
        if (!lp.is_integer.empty() && lp.is_integer[j])
          rel.x[j] = std::round(rel.x[j]);
      double obj = 0.0;
      for (int j = 0; j < lp.num_vars(); ++j) obj += lp.objective[j] * rel.x[j];
      rel.objective = obj;
      if (obj < best_obj) {
        best_obj = obj;
        incumbent = rel;
        incumbent.row_duals.clear();  // primal-only contract
        incumbent.reduced_costs.clear();
      }
      continue;
    }

    double v = rel.x[var];
    Node down = node, up = node;
    down.upper[var] = std::floor(v);
    up.lower[var] = std::ceil(v);
    // dive toward the nearer integer first (pushed last = popped first)
    if (frac <= 0.5) {
      stack.push_back(std::move(up));
      stack.push_back(std::move(down));
    } else {
      stack.push_back(std::move(down));
      stack.push_back(std::move(up));
    }
  }

  if (incumbent.status != SolveStatus::optimal &&
      incumbent.status != SolveStatus::infeasible) {
    incumbent.status = SolveStatus::infeasible;
  }
  if (best_obj < kInf) incumbent.status = SolveStatus::optimal;
  incumbent.iterations = nodes;
  return incumbent;
}

}  // namespace canopi
