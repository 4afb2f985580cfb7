#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "canopi/lp.hpp"
#include "canopi/network.hpp"

namespace canopi {

// Stochastic data for one operational scenario: hour-by-device matrices.
struct Scenario {
  int id = 0;
  double weight = 1.0;
  int hours = 0;                // T
  Eigen::MatrixXd gen_cost;     // T x G, $/MWh
  Eigen::MatrixXd gen_avail;    // T x G, in [0,1]
  Eigen::MatrixXd load;         // T x D, MW

  void validate(const Network& net) const;
};

// Technology data shared by every scenario. Vector entries line up with the
// network's device lists.
struct TechParams {
  // generators
  std::vector<double> gen_existing;     // w_g, MW
  std::vector<double> gen_max_new;      // x_g upper bound, MW
  std::vector<double> gen_invest_cost;  // $/MW-yr
  std::vector<double> gen_ramp;         // R, fraction of capacity per hour
  std::vector<double> gen_emission;     // e, MWh-fossil weight per MWh

  // storage
  std::vector<double> es_power_existing;     // w_es-p, MW
  std::vector<double> es_energy_existing;    // w_es-e, MWh
  std::vector<double> es_power_max_new;      // MW
  std::vector<double> es_energy_max_new;     // MWh
  std::vector<double> es_power_invest_cost;  // $/MW-yr
  std::vector<double> es_energy_invest_cost; // $/MWh-yr

  double storage_efficiency = 0.95;  // eta in (0,1]
  double soc_boundary_ratio = 0.5;   // gamma_es in [0,1]
  double reserve_margin = 0.03;      // gamma_d >= 0
  double contingency_rating = 1.2;   // eta_c >= 1
  double shed_cost = 10000.0;        // c_sh, $/MWh
  double violation_cost = 2000.0;    // c_vio, $/MWh

  double emission_budget = kInf;             // total over scenarios, MWh
  std::vector<double> emission_max_per_scenario;  // per-component cap on x_em

  void validate(const Network& net, int num_scenarios) const;
};

// First-stage decision x = (x_g, x_es-p, x_es-e, x_br, x_em).
struct InvestmentPortfolio {
  Eigen::VectorXd gen;        // MW per generator
  Eigen::VectorXd es_power;   // MW per storage
  Eigen::VectorXd es_energy;  // MWh per storage
  Eigen::VectorXd branch;     // MW per branch
  Eigen::VectorXd emission;   // MWh budget slice per scenario

  Eigen::VectorXd flat() const;
  static InvestmentPortfolio from_flat(const Eigen::VectorXd& v, int G, int S,
                                       int b, int num_scenarios);
};

// The polytope X: componentwise box [0, xbar] plus the emission budget row,
// flattened in portfolio order. Handles the optional battery-duration
// coupling (es_energy = duration * es_power) by eliminating the energy
// block from the reduced coordinates.
struct PortfolioSpace {
  int G = 0, S = 0, b = 0, W = 0;     // W = number of scenarios
  Eigen::VectorXd upper;              // xbar, full coordinates
  Eigen::VectorXd invest_cost;        // c, full coordinates
  double emission_budget = kInf;
  double storage_duration = 0.0;      // 0 = uncoupled

  // With no emission budget, x_em components are capped at the largest
  // fossil-weighted energy each scenario could physically produce, which
  // keeps the box bounded without ever binding.
  static PortfolioSpace build(const Network& net, const TechParams& tech,
                              const std::vector<Scenario>& scenarios,
                              double coupling_duration = 0.0);

  int full_dim() const { return G + 2 * S + b + W; }
  int reduced_dim() const { return coupled() ? full_dim() - S : full_dim(); }
  bool coupled() const { return storage_duration > 0.0; }

  // offsets in full coordinates
  int off_gen() const { return 0; }
  int off_es_power() const { return G; }
  int off_es_energy() const { return G + S; }
  int off_branch() const { return G + 2 * S; }
  int off_emission() const { return G + 2 * S + b; }

  Eigen::VectorXd reduce(const Eigen::VectorXd& full) const;   // drop coupled block
  Eigen::VectorXd expand(const Eigen::VectorXd& red) const;    // re-derive it
  Eigen::VectorXd reduce_gradient(const Eigen::VectorXd& g) const;
  Eigen::VectorXd reduced_upper() const;
  Eigen::VectorXd reduced_cost() const;
  // emission component index range in reduced coordinates
  int reduced_off_emission() const;

  // strictly-interior point of X (box midpoint, emission block scaled
  // inside the budget); respects fixed components
  Eigen::VectorXd interior_point() const;
  bool contains(const Eigen::VectorXd& full, double tol = 1e-7) const;
};

}  // namespace canopi
