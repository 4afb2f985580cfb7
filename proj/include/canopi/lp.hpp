#pragma once

#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace canopi {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class SolveStatus { optimal, infeasible, unbounded, failed };

std::string to_string(SolveStatus s);

// Minimize objective'x subject to linear rows and variable bounds.
// Rows carry a tag so callers can pull duals back out by name.
struct LinearProgram {
  enum class Sense : char { le = 'L', eq = 'E', ge = 'G' };

  struct Row {
    std::vector<std::pair<int, double>> terms;  // (column, coefficient)
    Sense sense = Sense::le;
    double rhs = 0.0;
    std::string tag;
  };

  std::vector<double> objective;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<Row> rows;
  std::vector<char> is_integer;  // empty means all-continuous

  int add_var(double lo, double hi, double cost, bool integral = false);
  int add_row(Sense sense, double rhs,
              std::vector<std::pair<int, double>> terms, std::string tag = {});
  int num_vars() const { return static_cast<int>(objective.size()); }
  int num_rows() const { return static_cast<int>(rows.size()); }
  bool has_integers() const;
};

struct LpSolution {
  SolveStatus status = SolveStatus::failed;
  std::vector<double> x;
  // dObjective/dRhs per row: <= rows carry nonpositive duals, >= rows
  // nonnegative, equalities free.
  std::vector<double> row_duals;
  std::vector<double> reduced_costs;
  double objective = 0.0;
  long iterations = 0;
  std::string message;

  bool optimal() const { return status == SolveStatus::optimal; }
};

struct SolverConfig {
  double feas_tol = 1e-7;
  double opt_tol = 1e-7;
  double time_limit_s = 600.0;
  long max_nodes = 4'000'000;
};

// Two-phase bounded-variable revised simplex. Always returns duals for
// optimal solves; a strong-duality self-check runs before reporting optimal.
LpSolution solve_lp(const LinearProgram& lp, const SolverConfig& cfg = {});

// Branch-and-bound over solve_lp. Returns a proven-optimal integer solution
// (primal only; row_duals left empty).
LpSolution solve_ip(const LinearProgram& lp, const SolverConfig& cfg = {});

}  // namespace canopi
