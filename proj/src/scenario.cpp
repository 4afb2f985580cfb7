#include "canopi/scenario.hpp"

#include <cmath>
#include <string>

#include "canopi/errors.hpp"

namespace canopi {

void Scenario::validate(const Network& net) const {
  auto fail = [&](const std::string& what) {
    throw ValidationError("scenario " + std::to_string(id) + ": " + what);
  };
  if (hours <= 0) fail("needs at least one hour");
  if (weight <= 0.0) fail("weight must be positive");
  const int G = net.num_generators(), D = net.num_loads();
  if (gen_cost.rows() != hours || gen_cost.cols() != G)
    fail("gen_cost must be T x G");
  if (gen_avail.rows() != hours || gen_avail.cols() != G)
    fail("gen_avail must be T x G");
  if (load.rows() != hours || load.cols() != D) fail("load must be T x D");
  for (int t = 0; t < hours; ++t) {
    for (int g = 0; g < G; ++g) {
      double a = gen_avail(t, g);
      if (!(a >= 0.0 && a <= 1.0))
        fail("availability outside [0,1] at hour " + std::to_string(t) +
             " generator " + std::to_string(g));
    }
    for (int d = 0; d < D; ++d)
      if (load(t, d) < 0.0)
        fail("negative load at hour " + std::to_string(t) + " load " +
             std::to_string(d));
  }
}

void TechParams::validate(const Network& net, int num_scenarios) const {
  auto need = [&](size_t got, size_t want, const char* what) {
    if (got != want)
      throw ValidationError(std::string("tech params: ") + what + " has " +
                            std::to_string(got) + " entries, expected " +
                            std::to_string(want));
  };
  const size_t G = net.num_generators(), S = net.num_storage();
  need(gen_existing.size(), G, "gen_existing");
  need(gen_max_new.size(), G, "gen_max_new");
  need(gen_invest_cost.size(), G, "gen_invest_cost");
  need(gen_ramp.size(), G, "gen_ramp");
  need(gen_emission.size(), G, "gen_emission");
  need(es_power_existing.size(), S, "es_power_existing");
  need(es_energy_existing.size(), S, "es_energy_existing");
  need(es_power_max_new.size(), S, "es_power_max_new");
  need(es_energy_max_new.size(), S, "es_energy_max_new");
  need(es_power_invest_cost.size(), S, "es_power_invest_cost");
  need(es_energy_invest_cost.size(), S, "es_energy_invest_cost");
  if (!(storage_efficiency > 0.0 && storage_efficiency <= 1.0))
    throw ValidationError("storage efficiency must lie in (0,1]");
  if (!(soc_boundary_ratio >= 0.0 && soc_boundary_ratio <= 1.0))
    throw ValidationError("state-of-charge boundary ratio must lie in [0,1]");
  if (reserve_margin < 0.0)
    throw ValidationError("reserve margin must be nonnegative");
  if (contingency_rating < 1.0)
    throw ValidationError("post-contingency rating multiple must be >= 1");
  if (shed_cost < 0.0 || violation_cost < 0.0)
    throw ValidationError("penalty costs must be nonnegative");
  if (!emission_max_per_scenario.empty())
    need(emission_max_per_scenario.size(), static_cast<size_t>(num_scenarios),
         "emission_max_per_scenario");
}

Eigen::VectorXd InvestmentPortfolio::flat() const {
  Eigen::VectorXd v(gen.size() + es_power.size() + es_energy.size() +
                    branch.size() + emission.size());
  v << gen, es_power, es_energy, branch, emission;
  return v;
}

InvestmentPortfolio InvestmentPortfolio::from_flat(const Eigen::VectorXd& v,
                                                   int G, int S, int b,
                                                   int num_scenarios) {
  if (v.size() != G + 2 * S + b + num_scenarios)
    throw ContractViolation("portfolio vector has the wrong length");
  InvestmentPortfolio p;
  p.gen = v.segment(0, G);
  p.es_power = v.segment(G, S);
  p.es_energy = v.segment(G + S, S);
  p.branch = v.segment(G + 2 * S, b);
  p.emission = v.segment(G + 2 * S + b, num_scenarios);
  return p;
}

PortfolioSpace PortfolioSpace::build(const Network& net, const TechParams& tech,
                                     const std::vector<Scenario>& scenarios,
                                     double coupling_duration) {
  PortfolioSpace ps;
  ps.G = net.num_generators();
  ps.S = net.num_storage();
  ps.b = net.num_branches();
  ps.W = static_cast<int>(scenarios.size());
  ps.emission_budget = tech.emission_budget;
  ps.storage_duration = coupling_duration;

  ps.upper.resize(ps.full_dim());
  ps.invest_cost.setZero(ps.full_dim());
  for (int g = 0; g < ps.G; ++g) {
    ps.upper[ps.off_gen() + g] = tech.gen_max_new[g];
    ps.invest_cost[ps.off_gen() + g] = tech.gen_invest_cost[g];
  }
  for (int s = 0; s < ps.S; ++s) {
    ps.upper[ps.off_es_power() + s] = tech.es_power_max_new[s];
    ps.invest_cost[ps.off_es_power() + s] = tech.es_power_invest_cost[s];
    ps.upper[ps.off_es_energy() + s] = tech.es_energy_max_new[s];
    ps.invest_cost[ps.off_es_energy() + s] = tech.es_energy_invest_cost[s];
  }
  for (int j = 0; j < ps.b; ++j) {
    ps.upper[ps.off_branch() + j] = net.branches[j].expansion_limit;
    ps.invest_cost[ps.off_branch() + j] = net.branches[j].expansion_cost;
  }
  for (int w = 0; w < ps.W; ++w) {
    double cap = tech.emission_max_per_scenario.empty()
                     ? tech.emission_budget
                     : tech.emission_max_per_scenario[w];
    if (!std::isfinite(cap)) {
      double max_fossil = 0.0;
      const Scenario& sc = scenarios[w];
      for (int t = 0; t < sc.hours; ++t)
        for (int g = 0; g < ps.G; ++g)
          max_fossil += tech.gen_emission[g] * sc.gen_avail(t, g) *
                        (tech.gen_existing[g] + tech.gen_max_new[g]);
      cap = max_fossil + 1.0;
    }
    ps.upper[ps.off_emission() + w] = cap;
  }
  return ps;
}

Eigen::VectorXd PortfolioSpace::reduce(const Eigen::VectorXd& full) const {
  if (!coupled()) return full;
  Eigen::VectorXd r(reduced_dim());
  r.segment(0, G + S) = full.segment(0, G + S);
  r.segment(G + S, b + W) = full.segment(G + 2 * S, b + W);
  return r;
}

Eigen::VectorXd PortfolioSpace::expand(const Eigen::VectorXd& red) const {
  if (!coupled()) return red;
  Eigen::VectorXd f(full_dim());
  f.segment(0, G + S) = red.segment(0, G + S);
  f.segment(G + S, S) = storage_duration * red.segment(G, S);
  f.segment(G + 2 * S, b + W) = red.segment(G + S, b + W);
  return f;
}

Eigen::VectorXd PortfolioSpace::reduce_gradient(const Eigen::VectorXd& g) const {
  if (!coupled()) return g;
  Eigen::VectorXd r(reduced_dim());
  r.segment(0, G) = g.segment(0, G);
  r.segment(G, S) = g.segment(G, S) + storage_duration * g.segment(G + S, S);
  r.segment(G + S, b + W) = g.segment(G + 2 * S, b + W);
  return r;
}

Eigen::VectorXd PortfolioSpace::reduced_upper() const {
  if (!coupled()) return upper;
  Eigen::VectorXd r(reduced_dim());
  r.segment(0, G) = upper.segment(0, G);
  for (int s = 0; s < S; ++s) {
    double cap_e = upper[off_es_energy() + s] / storage_duration;
    r[G + s] = std::min(upper[off_es_power() + s], cap_e);
  }
  r.segment(G + S, b + W) = upper.segment(G + 2 * S, b + W);
  return r;
}

Eigen::VectorXd PortfolioSpace::reduced_cost() const {
  return reduce_gradient(invest_cost);
}

int PortfolioSpace::reduced_off_emission() const {
  return coupled() ? G + S + b : G + 2 * S + b;
}

Eigen::VectorXd PortfolioSpace::interior_point() const {
  Eigen::VectorXd x = 0.5 * upper;
  if (coupled())
    for (int s = 0; s < S; ++s)
      x[off_es_energy() + s] = storage_duration * x[off_es_power() + s];
  if (std::isfinite(emission_budget) && W > 0) {
    double tot = x.segment(off_emission(), W).sum();
    if (tot >= 0.5 * emission_budget && tot > 0.0)
      x.segment(off_emission(), W) *= 0.5 * emission_budget / tot;
  }
  return x;
}

bool PortfolioSpace::contains(const Eigen::VectorXd& full, double tol) const {
  if (full.size() != full_dim()) return false;
  for (int i = 0; i < full_dim(); ++i)
    if (full[i] < -tol || full[i] > upper[i] + tol) return false;
  if (std::isfinite(emission_budget) &&
      full.segment(off_emission(), W).sum() > emission_budget + tol)
    return false;
  return true;
}

}  // namespace canopi
