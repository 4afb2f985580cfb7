#include "canopi/network.hpp"

#include <cmath>
#include <limits>
#include <set>
#include <string>

#include "canopi/errors.hpp"

namespace canopi {

Graph Network::graph() const {
  Graph g;
  g.num_vertices = num_buses();
  g.edges.reserve(branches.size());
  for (const auto& br : branches) g.edges.push_back({br.from_bus, br.to_bus});
  return g;
}

void Network::validate() const {
  const int n = num_buses();
  if (n == 0) throw ValidationError("network has no buses");
  std::set<int> ids;
  int slack_count = 0;
  for (const auto& bus : buses) {
    if (!ids.insert(bus.id).second)
      throw ValidationError("duplicate bus id " + std::to_string(bus.id));
    if (bus.id < 0 || bus.id >= n)
      throw ValidationError("bus ids must be contiguous 0..n-1, got " +
                            std::to_string(bus.id));
    if (bus.is_slack) ++slack_count;
  }
  if (slack_count != 1)
    throw ValidationError("expected exactly one slack bus, found " +
                          std::to_string(slack_count));
  if (slack_bus < 0 || slack_bus >= n || !buses[slack_bus].is_slack)
    throw ValidationError("slack_bus field disagrees with bus flags");

  std::set<int> branch_ids;
  for (const auto& br : branches) {
    auto name = "branch " + std::to_string(br.id);
    if (!branch_ids.insert(br.id).second)
      throw ValidationError("duplicate " + name);
    if (br.from_bus < 0 || br.from_bus >= n || br.to_bus < 0 || br.to_bus >= n)
      throw ValidationError(name + " references an unknown bus");
    if (br.from_bus == br.to_bus)
      throw ValidationError(name + " is a self-loop");
    if (!(br.base_impedance > 0.0))
      throw ValidationError(name + " needs base impedance > 0");
    if (!(br.base_capacity > 0.0))
      throw ValidationError(name +
                            " has zero base capacity; the parallel-circuit "
                            "impedance is undefined there");
    if (br.expansion_limit < 0.0 || br.expansion_cost < 0.0)
      throw ValidationError(name + " has negative expansion data");
  }
  for (const auto& line : hvdc) {
    auto name = "hvdc line " + std::to_string(line.id);
    if (line.from_bus < 0 || line.from_bus >= n || line.to_bus < 0 ||
        line.to_bus >= n)
      throw ValidationError(name + " references an unknown bus");
    if (line.capacity < 0.0) throw ValidationError(name + " capacity < 0");
  }
  auto check_device = [&](const std::vector<int>& map, const char* kind) {
    for (size_t i = 0; i < map.size(); ++i)
      if (map[i] < 0 || map[i] >= n)
        throw ValidationError(std::string(kind) + " " + std::to_string(i) +
                              " references an unknown bus");
  };
  check_device(generator_bus, "generator");
  check_device(storage_bus, "storage");
  check_device(load_bus, "load");

  if (!is_connected(graph()))
    throw StructuralError("network graph is disconnected");
}

double impedance(const Branch& branch, double x_br) {
  if (x_br < 0.0)
    throw ContractViolation("impedance: expansion must be nonnegative");
  if (!(branch.base_capacity > 0.0))
    throw ValidationError(
        "impedance: branch " + std::to_string(branch.id) +
        " has no base capacity; parallel-circuit impedance undefined");
  // grouped so that zero expansion divides w/w and returns chi0 exactly
  return branch.base_impedance *
         (branch.base_capacity / (branch.base_capacity + x_br));
}

BranchIncidence incidence_matrix(const Network& net) {
  const int n = net.num_buses();
  const int b = net.num_branches();
  if (!is_connected(net.graph()))
    throw StructuralError("incidence_matrix: graph is disconnected");

  BranchIncidence inc;
  inc.full = Eigen::MatrixXd::Zero(b, n);
  for (int j = 0; j < b; ++j) {
    inc.full(j, net.branches[j].from_bus) = -1.0;
    inc.full(j, net.branches[j].to_bus) = 1.0;
  }
  inc.reduced.resize(b, n - 1);
  int col = 0;
  for (int i = 0; i < n; ++i) {
    if (i == net.slack_bus) continue;
    inc.reduced.col(col++) = inc.full.col(i);
  }
  return inc;
}

namespace {

Eigen::VectorXd susceptances(const Network& net, const Eigen::VectorXd& x_br) {
  const int b = net.num_branches();
  if (x_br.size() != b)
    throw ContractViolation("expansion vector length mismatch");
  Eigen::VectorXd s(b);
  for (int j = 0; j < b; ++j) s[j] = 1.0 / impedance(net.branches[j], x_br[j]);
  return s;
}

}  // namespace

Eigen::MatrixXd ptdf(const Network& net, const Eigen::VectorXd& x_br) {
  BranchIncidence inc = incidence_matrix(net);
  Eigen::VectorXd s = susceptances(net, x_br);
  Eigen::MatrixXd ba = s.asDiagonal() * inc.reduced;          // B A
  Eigen::MatrixXd lap = inc.reduced.transpose() * ba;         // A' B A
  Eigen::LLT<Eigen::MatrixXd> llt(lap);
  if (llt.info() != Eigen::Success)
    throw StructuralError("ptdf: reduced Laplacian is not positive definite");
  // Phi = B A (A' B A)^{-1}; solve on the transpose since the factor is SPD
  return llt.solve(ba.transpose()).transpose();
}

SensitivityMatrices lodf(const Network& net, const Eigen::VectorXd& x_br,
                         const std::vector<int>& non_islanding) {
  const int b = net.num_branches();
  SensitivityMatrices sm;
  sm.ptdf = ptdf(net, x_br);
  sm.evaluated_at = x_br;
  sm.outage_valid.assign(b, 0);
  sm.lodf = Eigen::MatrixXd::Constant(
      b, b, std::numeric_limits<double>::quiet_NaN());

  BranchIncidence inc = incidence_matrix(net);
  Eigen::MatrixXd m = sm.ptdf * inc.reduced.transpose();  // Phi A'

  for (int j : non_islanding) {
    if (j < 0 || j >= b)
      throw ContractViolation("lodf: outage index out of range");
    double self = m(j, j);
    if (std::fabs(1.0 - self) < 1e-9)
      throw StructuralError("lodf: branch " + std::to_string(j) +
                            " would island the network (self-PTDF ~ 1)");
    sm.lodf.col(j) = m.col(j) / (1.0 - self);
    sm.lodf(j, j) = -1.0;  // self-outage cancels the branch's own flow
    sm.outage_valid[j] = 1;
  }
  return sm;
}

std::vector<int> non_islanding_set(const UndirectedCycleBasis& basis) {
  std::vector<char> hit(basis.num_edges, 0);
  for (const auto& row : basis.rows)
    for (int e = 0; e < basis.num_edges; ++e)
      if (row[e]) hit[e] = 1;
  std::vector<int> out;
  for (int e = 0; e < basis.num_edges; ++e)
    if (hit[e]) out.push_back(e);
  return out;
}

}  // namespace canopi
