#include "canopi/subproblem.hpp"

#include <cmath>
#include <unordered_set>

#include "canopi/errors.hpp"
#include "canopi/kernels.hpp"

namespace canopi {

GridMode mode_from_string(const std::string& s) {
  if (s == "nf") return GridMode::network_flow;
  if (s == "dc") return GridMode::dc;
  if (s == "dc07") return GridMode::dc_derated;
  if (s == "scdc") return GridMode::scdc;
  throw ValidationError("unknown mode '" + s + "' (want nf|dc|dc07|scdc)");
}

std::string to_string(GridMode m) {
  switch (m) {
    case GridMode::network_flow: return "nf";
    case GridMode::dc: return "dc";
    case GridMode::dc_derated: return "dc07";
    case GridMode::scdc: return "scdc";
  }
  return "?";
}

ModelOptions ModelOptions::for_mode(GridMode m) {
  ModelOptions o;
  switch (m) {
    case GridMode::network_flow:
      o.kvl = false;
      o.contingencies = false;
      break;
    case GridMode::dc:
      o.contingencies = false;
      break;
    case GridMode::dc_derated:
      o.contingencies = false;
      o.derate = 0.7;
      break;
    case GridMode::scdc:
      break;
  }
  return o;
}

ContingencySet SubproblemContext::full_contingency_set(int hours) const {
  ContingencySet out;
  if (!options.contingencies) return out;
  const int b = net->num_branches();
  out.reserve(static_cast<size_t>(hours) * b * non_islanding.size());
  for (int t = 0; t < hours; ++t)
    for (int i = 0; i < b; ++i)
      for (int j : non_islanding)
        if (i != j) out.push_back({t, i, j});
  return out;
}

SubproblemContext make_context(const Network& net, const TechParams& tech,
                               const Eigen::VectorXd& x_hat,
                               const ModelOptions& options,
                               const SolverConfig& cfg) {
  SubproblemContext ctx;
  ctx.net = &net;
  ctx.tech = &tech;
  ctx.options = options;
  ctx.x_hat = x_hat;
  const int b = net.num_branches();
  if (x_hat.size() != b)
    throw ContractViolation("make_context: x_hat length != branch count");
  ctx.chi.resize(b);
  for (int j = 0; j < b; ++j)
    ctx.chi[j] = impedance(net.branches[j], x_hat[j]);

  Graph g = net.graph();
  UndirectedCycleBasis fund = fundamental_basis(g, net.slack_bus);
  if (options.minimal_basis && fund.num_cycles() > 0) {
    auto [c, d] = minimal_cycle_basis(fund, g, cfg);
    ctx.cycles = std::move(c);
    ctx.basis = std::move(d);
  } else {
    ctx.cycles = fund;
    ctx.basis.num_edges = b;
    ctx.basis.rows.reserve(fund.num_cycles());
    for (const auto& row : fund.rows) ctx.basis.rows.push_back(orient_cycle(row, g));
  }
  ctx.non_islanding = non_islanding_set(ctx.cycles);
  ctx.sens = lodf(net, x_hat, ctx.non_islanding);
  return ctx;
}

namespace {

// Appends one scenario's operational block. When x_numeric is given the
// portfolio enters through right-hand sides and each x-dependent row lands
// in rhs_sensitivity; with off_x >= 0 the portfolio instead appears as
// columns (extensive form).
void build_block(LinearProgram& lp, BuiltSubproblem& bs,
                 const SubproblemContext& ctx, const Scenario& sc,
                 int scenario_pos, int num_scenarios,
                 const ContingencySet& active,
                 const Eigen::VectorXd* x_numeric, int off_x,
                 double obj_scale) {
  const Network& net = *ctx.net;
  const TechParams& tech = *ctx.tech;
  const ModelOptions& opt = ctx.options;
  const int T = sc.hours;
  const int G = net.num_generators(), S = net.num_storage(),
            D = net.num_loads(), beta = net.num_hvdc(), b = net.num_branches(),
            n = net.num_buses();
  const int nc = ctx.basis.num_cycles();

  const int cg = 0, cp = G, ce = G + S, cb = G + 2 * S, cm = G + 2 * S + b;
  (void)num_scenarios;

  bs.hours = T;
  bs.j_set = active;

  auto add_vars = [&](int count, double lo, double hi) {
    int first = lp.num_vars();
    for (int k = 0; k < count; ++k) lp.add_var(lo, hi, 0.0);
    return first;
  };

  bs.off_pg = add_vars(T * G, 0.0, kInf);
  bs.off_rg = add_vars(T * G, 0.0, kInf);
  bs.off_chg = add_vars(T * S, 0.0, kInf);
  bs.off_dis = add_vars(T * S, 0.0, kInf);
  bs.off_rdis = add_vars(T * S, 0.0, kInf);
  bs.off_q = add_vars(T * S, 0.0, kInf);
  bs.off_sh = lp.num_vars();
  for (int t = 0; t < T; ++t)
    for (int d = 0; d < D; ++d) lp.add_var(0.0, sc.load(t, d), 0.0);
  bs.off_dc = lp.num_vars();
  for (int t = 0; t < T; ++t)
    for (int l = 0; l < beta; ++l)
      lp.add_var(-net.hvdc[l].capacity, net.hvdc[l].capacity, 0.0);
  bs.off_br = add_vars(T * b, -kInf, kInf);
  bs.off_theta = -1;
  if (opt.kvl && opt.angle_formulation)
    bs.off_theta = add_vars(T * (n - 1), -kInf, kInf);
  bs.off_sc = lp.num_vars();
  for (size_t k = 0; k < active.size(); ++k)
    lp.add_var(0.0, kInf, obj_scale * tech.violation_cost);

  auto pg = [&](int t, int g) { return bs.off_pg + t * G + g; };
  auto rg = [&](int t, int g) { return bs.off_rg + t * G + g; };
  auto chg = [&](int t, int s) { return bs.off_chg + t * S + s; };
  auto dis = [&](int t, int s) { return bs.off_dis + t * S + s; };
  auto rdis = [&](int t, int s) { return bs.off_rdis + t * S + s; };
  auto qv = [&](int t, int s) { return bs.off_q + t * S + s; };
  auto shv = [&](int t, int d) { return bs.off_sh + t * D + d; };
  auto dcv = [&](int t, int l) { return bs.off_dc + t * beta + l; };
  auto brv = [&](int t, int j) { return bs.off_br + t * b + j; };

  for (int t = 0; t < T; ++t) {
    for (int g = 0; g < G; ++g) lp.objective[pg(t, g)] = obj_scale * sc.gen_cost(t, g);
    for (int d = 0; d < D; ++d) lp.objective[shv(t, d)] = obj_scale * tech.shed_cost;
  }

  // a row whose rhs is const + sum(coef * x_component)
  auto add_xrow = [&](LinearProgram::Sense sense, double const_rhs,
                      std::vector<std::pair<int, double>> terms,
                      std::vector<std::pair<int, double>> xdeps,
                      std::string tag) {
    if (x_numeric != nullptr) {
      double rhs = const_rhs;
      for (auto [comp, coef] : xdeps) rhs += coef * (*x_numeric)[comp];
      int row = lp.add_row(sense, rhs, std::move(terms), std::move(tag));
      for (auto [comp, coef] : xdeps)
        bs.rhs_sensitivity.push_back({row, comp, coef});
      return row;
    }
    for (auto [comp, coef] : xdeps) terms.push_back({off_x + comp, -coef});
    return lp.add_row(sense, const_rhs, std::move(terms), std::move(tag));
  };

  // generator availability, ramps, emission budget
  for (int t = 0; t < T; ++t)
    for (int g = 0; g < G; ++g) {
      double a = sc.gen_avail(t, g);
      add_xrow(LinearProgram::Sense::le, a * tech.gen_existing[g],
               {{pg(t, g), 1.0}, {rg(t, g), 1.0}}, {{cg + g, a}}, "gen_cap");
    }
  for (int t = 0; t + 1 < T; ++t)
    for (int g = 0; g < G; ++g) {
      double r = tech.gen_ramp[g];
      add_xrow(LinearProgram::Sense::ge, -r * tech.gen_existing[g],
               {{pg(t + 1, g), 1.0}, {pg(t, g), -1.0}}, {{cg + g, -r}},
               "ramp_dn");
      add_xrow(LinearProgram::Sense::le, r * tech.gen_existing[g],
               {{pg(t + 1, g), 1.0}, {pg(t, g), -1.0}}, {{cg + g, r}},
               "ramp_up");
    }
  {
    std::vector<std::pair<int, double>> terms;
    for (int t = 0; t < T; ++t)
      for (int g = 0; g < G; ++g)
        if (tech.gen_emission[g] != 0.0)
          terms.push_back({pg(t, g), tech.gen_emission[g]});
    add_xrow(LinearProgram::Sense::le, 0.0, std::move(terms),
             {{cm + scenario_pos, 1.0}}, "emission");
  }

  // storage
  const double eta = tech.storage_efficiency;
  const double gamma = tech.soc_boundary_ratio;
  for (int t = 0; t < T; ++t)
    for (int s = 0; s < S; ++s) {
      add_xrow(LinearProgram::Sense::le, tech.es_power_existing[s],
               {{chg(t, s), 1.0}, {dis(t, s), 1.0}, {rdis(t, s), 1.0}},
               {{cp + s, 1.0}}, "es_power");
      add_xrow(LinearProgram::Sense::le, tech.es_energy_existing[s],
               {{qv(t, s), 1.0}}, {{ce + s, 1.0}}, "es_energy");
      lp.add_row(LinearProgram::Sense::ge, 0.0,
                 {{qv(t, s), 1.0}, {rdis(t, s), -1.0}});
      if (t == 0) {
        add_xrow(LinearProgram::Sense::eq, gamma * tech.es_energy_existing[s],
                 {{qv(0, s), 1.0}, {chg(0, s), -eta}, {dis(0, s), 1.0 / eta}},
                 {{ce + s, gamma}}, "soc_start");
      } else {
        lp.add_row(LinearProgram::Sense::eq, 0.0,
                   {{qv(t, s), 1.0},
                    {qv(t - 1, s), -1.0},
                    {chg(t, s), -eta},
                    {dis(t, s), 1.0 / eta}});
      }
    }
  for (int s = 0; s < S; ++s)
    add_xrow(LinearProgram::Sense::eq, gamma * tech.es_energy_existing[s],
             {{qv(T - 1, s), 1.0}}, {{ce + s, gamma}}, "soc_end");

  // system reserve margin
  for (int t = 0; t < T; ++t) {
    std::vector<std::pair<int, double>> terms;
    for (int g = 0; g < G; ++g) terms.push_back({rg(t, g), 1.0});
    for (int s = 0; s < S; ++s) terms.push_back({rdis(t, s), 1.0});
    double req = tech.reserve_margin * sc.load.row(t).sum();
    lp.add_row(LinearProgram::Sense::ge, req, std::move(terms));
  }

  // nodal balance: A_br p_br - A_g p_g - A_es p_es - A_dc p_dc - sh = -load
  for (int t = 0; t < T; ++t) {
    std::vector<std::vector<std::pair<int, double>>> bus_terms(n);
    std::vector<double> bus_rhs(n, 0.0);
    for (int j = 0; j < b; ++j) {
      bus_terms[net.branches[j].from_bus].push_back({brv(t, j), -1.0});
      bus_terms[net.branches[j].to_bus].push_back({brv(t, j), 1.0});
    }
    for (int g = 0; g < G; ++g)
      bus_terms[net.generator_bus[g]].push_back({pg(t, g), -1.0});
    for (int s = 0; s < S; ++s) {
      bus_terms[net.storage_bus[s]].push_back({dis(t, s), -1.0});
      bus_terms[net.storage_bus[s]].push_back({chg(t, s), 1.0});
    }
    for (int l = 0; l < beta; ++l) {
      bus_terms[net.hvdc[l].from_bus].push_back({dcv(t, l), 1.0});
      bus_terms[net.hvdc[l].to_bus].push_back({dcv(t, l), -1.0});
    }
    for (int d = 0; d < D; ++d) {
      bus_terms[net.load_bus[d]].push_back({shv(t, d), -1.0});
      bus_rhs[net.load_bus[d]] -= sc.load(t, d);
    }
    for (int i = 0; i < n; ++i)
      lp.add_row(LinearProgram::Sense::eq, bus_rhs[i], std::move(bus_terms[i]));
  }

  // KVL: cycle rows on frozen impedances, or the voltage-angle variant
  if (opt.kvl && !opt.angle_formulation) {
    for (int t = 0; t < T; ++t)
      for (int k = 0; k < nc; ++k) {
        std::vector<std::pair<int, double>> terms;
        for (int j = 0; j < b; ++j) {
          int dkj = ctx.basis.rows[k][j];
          if (dkj != 0) terms.push_back({brv(t, j), dkj * ctx.chi[j]});
        }
        lp.add_row(LinearProgram::Sense::eq, 0.0, std::move(terms));
      }
  } else if (opt.kvl && opt.angle_formulation) {
    // reduced angle index per bus (slack dropped)
    std::vector<int> red(n, -1);
    int c = 0;
    for (int i = 0; i < n; ++i)
      if (i != net.slack_bus) red[i] = c++;
    for (int t = 0; t < T; ++t)
      for (int j = 0; j < b; ++j) {
        double s = 1.0 / ctx.chi[j];
        std::vector<std::pair<int, double>> terms{{brv(t, j), 1.0}};
        int fr = net.branches[j].from_bus, to = net.branches[j].to_bus;
        if (red[to] >= 0)
          terms.push_back({bs.off_theta + t * (n - 1) + red[to], -s});
        if (red[fr] >= 0)
          terms.push_back({bs.off_theta + t * (n - 1) + red[fr], s});
        lp.add_row(LinearProgram::Sense::eq, 0.0, std::move(terms));
      }
  }

  // branch ratings with first-stage capacity on the right-hand side
  for (int t = 0; t < T; ++t)
    for (int j = 0; j < b; ++j) {
      double wbar = opt.derate * net.branches[j].base_capacity;
      add_xrow(LinearProgram::Sense::le, wbar, {{brv(t, j), 1.0}},
               {{cb + j, 1.0}}, "br_up");
      add_xrow(LinearProgram::Sense::ge, -wbar, {{brv(t, j), 1.0}},
               {{cb + j, -1.0}}, "br_lo");
    }

  // active contingency constraints with LODF frozen at x_hat
  const double etac = tech.contingency_rating;
  for (size_t k = 0; k < active.size(); ++k) {
    const auto& c = active[k];
    if (!ctx.sens.outage_valid[c.outaged])
      throw ContractViolation("contingency set includes an islanding outage");
    double lam = ctx.sens.lodf(c.monitored, c.outaged);
    double wbar = opt.derate * net.branches[c.monitored].base_capacity;
    int scv = static_cast<int>(bs.off_sc + k);
    add_xrow(LinearProgram::Sense::le, etac * wbar,
             {{brv(c.hour, c.monitored), 1.0},
              {brv(c.hour, c.outaged), lam},
              {scv, -1.0}},
             {{cb + c.monitored, etac}}, "ctg_up");
    add_xrow(LinearProgram::Sense::ge, -etac * wbar,
             {{brv(c.hour, c.monitored), 1.0},
              {brv(c.hour, c.outaged), lam},
              {scv, 1.0}},
             {{cb + c.monitored, -etac}}, "ctg_lo");
  }
}

}  // namespace

BuiltSubproblem build_subproblem(const SubproblemContext& ctx,
                                 const InvestmentPortfolio& x,
                                 const Scenario& scenario, int scenario_pos,
                                 const ContingencySet& active) {
  BuiltSubproblem bs;
  Eigen::VectorXd flat = x.flat();
  build_block(bs.lp, bs, ctx, scenario, scenario_pos,
              static_cast<int>(x.emission.size()), active, &flat, -1, 1.0);
  return bs;
}

OperationalDecision BuiltSubproblem::extract(const SubproblemContext& ctx,
                                             const Scenario& sc,
                                             const std::vector<double>& x) const {
  const Network& net = *ctx.net;
  const int T = hours;
  const int G = net.num_generators(), S = net.num_storage(),
            D = net.num_loads(), beta = net.num_hvdc(), b = net.num_branches(),
            n = net.num_buses();
  OperationalDecision y;
  auto grab = [&](int off, int cols) {
    Eigen::MatrixXd m(T, cols);
    for (int t = 0; t < T; ++t)
      for (int c = 0; c < cols; ++c) m(t, c) = x[off + t * cols + c];
    return m;
  };
  y.gen_power = grab(off_pg, G);
  y.gen_reserve = grab(off_rg, G);
  y.es_charge = grab(off_chg, S);
  y.es_discharge = grab(off_dis, S);
  y.es_reserve = grab(off_rdis, S);
  y.es_soc = grab(off_q, S);
  y.shed = grab(off_sh, D);
  y.dc_flow = grab(off_dc, beta);
  y.branch_flow = grab(off_br, b);
  y.contingency_slack.reserve(j_set.size());
  for (size_t k = 0; k < j_set.size(); ++k)
    y.contingency_slack.push_back({j_set[k], x[off_sc + k]});

  // net injections by the nodal balance identity
  y.net_injection = Eigen::MatrixXd::Zero(T, n);
  for (int t = 0; t < T; ++t) {
    for (int g = 0; g < G; ++g)
      y.net_injection(t, net.generator_bus[g]) += y.gen_power(t, g);
    for (int s = 0; s < S; ++s)
      y.net_injection(t, net.storage_bus[s]) +=
          y.es_discharge(t, s) - y.es_charge(t, s);
    for (int l = 0; l < beta; ++l) {
      y.net_injection(t, net.hvdc[l].from_bus) -= y.dc_flow(t, l);
      y.net_injection(t, net.hvdc[l].to_bus) += y.dc_flow(t, l);
    }
    for (int d = 0; d < D; ++d)
      y.net_injection(t, net.load_bus[d]) -= sc.load(t, d) - y.shed(t, d);
  }
  return y;
}

ScreenResult screen_contingencies(const Eigen::MatrixXd& flows,
                                  const SubproblemContext& ctx,
                                  const InvestmentPortfolio& x,
                                  const ContingencySet& exclude,
                                  double threshold) {
  ScreenResult out;
  if (!ctx.options.contingencies) return out;
  const Network& net = *ctx.net;
  const int T = static_cast<int>(flows.rows());
  const int b = net.num_branches();

  std::unordered_set<long long> skip;
  skip.reserve(exclude.size() * 2);
  auto key = [b](int t, int i, int j) {
    return (static_cast<long long>(t) * b + i) * b + j;
  };
  for (const auto& c : exclude) skip.insert(key(c.hour, c.monitored, c.outaged));

  Eigen::VectorXd caps(b);
  for (int i = 0; i < b; ++i)
    caps[i] = ctx.tech->contingency_rating *
              (ctx.options.derate * net.branches[i].base_capacity +
               x.branch[i]);

  std::vector<double> p(b), margin(b);
  for (int t = 0; t < T; ++t) {
    for (int i = 0; i < b; ++i) p[i] = flows(t, i);
    for (int j : ctx.non_islanding) {
      kernels::screen_column(margin.data(), p.data(),
                             ctx.sens.lodf.col(j).data(), p[j], caps.data(),
                             static_cast<size_t>(b));
      for (int i = 0; i < b; ++i) {
        if (i == j || margin[i] <= threshold) continue;
        if (skip.count(key(t, i, j))) continue;
        out.implied_slacks.push_back({{t, i, j}, margin[i]});
        out.new_violations.push_back({t, i, j});
        out.sigma_c += ctx.tech->violation_cost * margin[i];
      }
    }
  }
  return out;
}

OracleResult oracle(const SubproblemContext& ctx, const InvestmentPortfolio& x,
                    const Scenario& scenario, int scenario_pos,
                    const ContingencySet& active, const SolverConfig& cfg) {
  BuiltSubproblem bs = build_subproblem(ctx, x, scenario, scenario_pos, active);
  LpSolution sol = solve_lp(bs.lp, cfg);
  if (!sol.optimal())
    throw SolverError("oracle: subproblem LP " + to_string(sol.status) +
                      (sol.message.empty() ? "" : " (" + sol.message + ")"));

  OracleResult res;
  res.theta = sol.objective;
  res.y = bs.extract(ctx, scenario, sol.x);

  res.subgradient = Eigen::VectorXd::Zero(x.flat().size());
  for (auto [row, comp, coef] : bs.rhs_sensitivity)
    res.subgradient[comp] += sol.row_duals[row] * coef;

  ScreenResult screen =
      screen_contingencies(res.y.branch_flow, ctx, x, active);
  res.sigma_c = screen.sigma_c;
  res.new_violations = std::move(screen.new_violations);

  const TechParams& tech = *ctx.tech;
  for (int t = 0; t < scenario.hours; ++t) {
    for (int g = 0; g < ctx.net->num_generators(); ++g)
      res.costs.generation += scenario.gen_cost(t, g) * res.y.gen_power(t, g);
    res.costs.shed_mwh += res.y.shed.row(t).sum();
  }
  res.costs.shed_penalty = tech.shed_cost * res.costs.shed_mwh;
  for (const auto& [idx, s] : res.y.contingency_slack)
    res.costs.violation_mwh += s;
  res.costs.violation_penalty = tech.violation_cost * res.costs.violation_mwh;
  return res;
}

ExtensiveModel build_extensive_form(const SubproblemContext& ctx,
                                    const std::vector<Scenario>& scenarios,
                                    const PortfolioSpace& space,
                                    const std::vector<ContingencySet>& j_sets,
                                    const InvestmentPortfolio* fix_x) {
  if (j_sets.size() != scenarios.size())
    throw ContractViolation("one contingency set per scenario required");
  ExtensiveModel em;
  em.off_x = 0;
  const int N = space.full_dim();
  Eigen::VectorXd fixed;
  if (fix_x != nullptr) fixed = fix_x->flat();
  for (int i = 0; i < N; ++i) {
    double lo = 0.0, hi = space.upper[i];
    if (fix_x != nullptr) lo = hi = fixed[i];
    em.lp.add_var(lo, hi, space.invest_cost[i]);
  }
  if (std::isfinite(space.emission_budget) && space.W > 0) {
    std::vector<std::pair<int, double>> terms;
    for (int w = 0; w < space.W; ++w)
      terms.push_back({space.off_emission() + w, 1.0});
    em.lp.add_row(LinearProgram::Sense::le, space.emission_budget,
                  std::move(terms), "em_budget");
  }
  if (space.coupled()) {
    for (int s = 0; s < space.S; ++s)
      em.lp.add_row(LinearProgram::Sense::eq, 0.0,
                    {{space.off_es_energy() + s, 1.0},
                     {space.off_es_power() + s, -space.storage_duration}},
                    "duration");
  }
  for (size_t w = 0; w < scenarios.size(); ++w) {
    BuiltSubproblem bs;
    build_block(em.lp, bs, ctx, scenarios[w], static_cast<int>(w),
                static_cast<int>(scenarios.size()), j_sets[w], nullptr, 0,
                scenarios[w].weight);
    em.per_scenario.push_back(std::move(bs));
  }
  return em;
}

}  // namespace canopi
