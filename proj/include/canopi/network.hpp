#pragma once

#include <Eigen/Dense>
#include <vector>

#include "canopi/cycle_basis.hpp"

namespace canopi {

struct Bus {
  int id = 0;
  bool is_slack = false;
};

struct Branch {
  int id = 0;
  int from_bus = 0;
  int to_bus = 0;
  double base_impedance = 0.0;   // chi0, p.u., > 0
  double base_capacity = 0.0;    // w_br, MW
  double expansion_limit = 0.0;  // x_br_max, MW
  double expansion_cost = 0.0;   // c_br, $/MW-yr
};

struct HvdcLine {
  int id = 0;
  int from_bus = 0;
  int to_bus = 0;
  double capacity = 0.0;  // w_dc, MW
};

struct Network {
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<HvdcLine> hvdc;
  // device -> bus incidence maps
  std::vector<int> generator_bus;
  std::vector<int> storage_bus;
  std::vector<int> load_bus;
  int slack_bus = 0;

  int num_buses() const { return static_cast<int>(buses.size()); }
  int num_branches() const { return static_cast<int>(branches.size()); }
  int num_generators() const { return static_cast<int>(generator_bus.size()); }
  int num_storage() const { return static_cast<int>(storage_bus.size()); }
  int num_loads() const { return static_cast<int>(load_bus.size()); }
  int num_hvdc() const { return static_cast<int>(hvdc.size()); }

  Graph graph() const;
  // Throws ValidationError naming the offending element.
  void validate() const;
};

// Parallel-circuit impedance of a branch expanded by x_br MW.
double impedance(const Branch& branch, double x_br);

struct BranchIncidence {
  Eigen::MatrixXd full;     // b x n, -1 at from, +1 at to
  Eigen::MatrixXd reduced;  // b x (n-1), slack column removed
};

BranchIncidence incidence_matrix(const Network& net);

// PTDF at expansion level x_br: flows = ptdf * injections[non-slack].
Eigen::MatrixXd ptdf(const Network& net, const Eigen::VectorXd& x_br);

struct SensitivityMatrices {
  Eigen::MatrixXd ptdf;             // b x (n-1)
  Eigen::MatrixXd lodf;             // b x b; columns valid only per mask
  std::vector<char> outage_valid;   // non-islanding outage columns
  Eigen::VectorXd evaluated_at;     // the x_br these were built for
};

// LODF columns for the requested outages. Diagonal entries are -1 so the
// outaged branch's own post-contingency flow cancels; requesting a column
// whose self-PTDF is within 1e-9 of 1 raises StructuralError (islanding).
SensitivityMatrices lodf(const Network& net, const Eigen::VectorXd& x_br,
                         const std::vector<int>& non_islanding);

// Branches covered by at least one basis cycle == the non-bridge set.
std::vector<int> non_islanding_set(const UndirectedCycleBasis& basis);

}  // namespace canopi
