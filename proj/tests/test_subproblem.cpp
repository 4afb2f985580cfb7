#include <doctest.h>
#include <algorithm>

#include <random>

#include "canopi/errors.hpp"
#include "canopi/io.hpp"
#include "canopi/subproblem.hpp"
#include "test_instances.hpp"

using namespace canopi;
namespace oracle_ns = canopi::testing;

namespace {

SubproblemContext context_for(const Instance& inst,
                              GridMode mode = GridMode::scdc) {
  return make_context(inst.net, inst.tech,
                      Eigen::VectorXd::Zero(inst.net.num_branches()),
                      ModelOptions::for_mode(mode));
}

InvestmentPortfolio random_portfolio(const PortfolioSpace& space,
                                     std::mt19937_64& rng) {
  Eigen::VectorXd x(space.full_dim());
  for (int i = 0; i < space.full_dim(); ++i) {
    double hi = std::isfinite(space.upper[i]) ? space.upper[i] : 1000.0;
    x[i] = hi * (rng() % 1000) / 1000.0;
  }
  if (std::isfinite(space.emission_budget) && space.W > 0) {
    double tot = x.segment(space.off_emission(), space.W).sum();
    if (tot > space.emission_budget)
      x.segment(space.off_emission(), space.W) *=
          0.9 * space.emission_budget / tot;
  }
  return InvestmentPortfolio::from_flat(x, space.G, space.S, space.b, space.W);
}

}  // namespace

TEST_CASE("single bus: dispatch cost and full shed") {
  Instance inst = oracle_ns::single_bus(100.0, 20.0);
  auto ctx = context_for(inst);
  auto x = oracle_ns::zero_portfolio(inst);

  SUBCASE("generator covers the load") {
    OracleResult r = oracle(ctx, x, inst.scenarios[0], 0, {});
    CHECK(r.theta == doctest::Approx(20.0 * 100.0));
    CHECK(r.sigma_c == 0.0);
    CHECK(r.new_violations.empty());
    CHECK(r.y.shed.sum() == doctest::Approx(0.0).epsilon(1e-9));
  }
  SUBCASE("zero availability forces shedding at c_sh") {
    inst.scenarios[0].gen_avail.setZero();
    OracleResult r = oracle(ctx, x, inst.scenarios[0], 0, {});
    CHECK(r.theta == doctest::Approx(inst.tech.shed_cost * 100.0));
    CHECK(r.y.shed.sum() == doctest::Approx(100.0));
  }
}

TEST_CASE("triangle: forced contingency slack is hand-checkable") {
  Instance inst = oracle_ns::triangle3();
  auto ctx = context_for(inst);
  auto x = oracle_ns::zero_portfolio(inst);

  // outage of branch 0 reroutes all 180 MW through branch 2
  ContingencySet active{{0, 2, 0}};
  BuiltSubproblem bs = build_subproblem(ctx, x, inst.scenarios[0], 0, active);
  LpSolution sol = solve_lp(bs.lp);
  REQUIRE(sol.optimal());
  // slack = 180 - 1.2*100 = 60 at 2000 $/MWh, dispatch 180 MW at 20 $/MWh
  CHECK(sol.objective == doctest::Approx(180.0 * 20.0 + 60.0 * 2000.0));
  auto y = bs.extract(ctx, inst.scenarios[0], sol.x);
  REQUIRE(y.contingency_slack.size() == 1);
  CHECK(y.contingency_slack[0].second == doctest::Approx(60.0));
}

TEST_CASE("oracle: screening finds the two symmetric overloads") {
  Instance inst = oracle_ns::triangle3();
  auto ctx = context_for(inst);
  auto x = oracle_ns::zero_portfolio(inst);
  OracleResult r = oracle(ctx, x, inst.scenarios[0], 0, {});
  CHECK(r.theta == doctest::Approx(3600.0));
  REQUIRE(r.new_violations.size() == 2);
  CHECK(std::count(r.new_violations.begin(), r.new_violations.end(),
                   ContingencyIndex{0, 0, 2}) == 1);
  CHECK(std::count(r.new_violations.begin(), r.new_violations.end(),
                   ContingencyIndex{0, 2, 0}) == 1);
  CHECK(r.sigma_c == doctest::Approx(2.0 * 60.0 * 2000.0));

  SUBCASE("huge branch build silences the screen") {
    x.branch = Eigen::VectorXd::Constant(3, 200.0);
    OracleResult r2 = oracle(ctx, x, inst.scenarios[0], 0, {});
    CHECK(r2.sigma_c == 0.0);
    CHECK(r2.new_violations.empty());
  }
}

TEST_CASE("screen_contingencies unit behavior") {
  Instance inst = oracle_ns::triangle3();
  auto ctx = context_for(inst);
  auto x = oracle_ns::zero_portfolio(inst);

  SUBCASE("zero flows produce nothing") {
    Eigen::MatrixXd flows = Eigen::MatrixXd::Zero(1, 3);
    auto res = screen_contingencies(flows, ctx, x, {});
    CHECK(res.implied_slacks.empty());
    CHECK(res.sigma_c == 0.0);
  }
  SUBCASE("single constructed overload with margin") {
    Eigen::MatrixXd flows = Eigen::MatrixXd::Zero(1, 3);
    flows(0, 0) = 150.0;
    auto res = screen_contingencies(flows, ctx, x, {});
    // monitored branch 0 carries |150| - 1.2*100 = 30 over, any outage j
    bool found = false;
    for (auto& [idx, s] : res.implied_slacks) {
      if (idx.monitored == 0) {
        CHECK(s == doctest::Approx(30.0));
        found = true;
      }
    }
    CHECK(found);
    auto res2 =
        screen_contingencies(flows, ctx, x, ctx.full_contingency_set(1));
    CHECK(res2.implied_slacks.empty());
  }
  SUBCASE("symmetric network: violations come in mirror pairs") {
    OracleResult r = oracle(ctx, x, inst.scenarios[0], 0, {});
    ScreenResult sr = screen_contingencies(r.y.branch_flow, ctx, x, {});
    REQUIRE(sr.implied_slacks.size() == 2);
    CHECK(sr.implied_slacks[0].second ==
          doctest::Approx(sr.implied_slacks[1].second));
    CHECK(sr.implied_slacks[0].first.monitored ==
          sr.implied_slacks[1].first.outaged);
    CHECK(sr.implied_slacks[0].first.outaged ==
          sr.implied_slacks[1].first.monitored);
  }
}

TEST_CASE("Prop 1 sandwich on the generated 5-bus instance") {
  GenSpec spec;
  spec.buses = 5;
  spec.branches = 7;
  spec.hours = 3;
  spec.scenarios = 1;
  spec.seed = 11;
  Instance inst = generate_test_instance(spec);
  auto ctx = context_for(inst);
  PortfolioSpace space = PortfolioSpace::build(inst.net, inst.tech, inst.scenarios);
  const Scenario& sc = inst.scenarios[0];
  ContingencySet jfull = ctx.full_contingency_set(sc.hours);

  std::mt19937_64 rng(4242);
  for (int trial = 0; trial < 8; ++trial) {
    auto x = random_portfolio(space, rng);
    auto z = random_portfolio(space, rng);
    ContingencySet j;
    for (size_t i = 0; i < jfull.size(); i += 3) j.push_back(jfull[i]);

    OracleResult ox = oracle(ctx, x, sc, 0, j);
    OracleResult oz = oracle(ctx, z, sc, 0, j);

    BuiltSubproblem full = build_subproblem(ctx, x, sc, 0, jfull);
    LpSolution fs = solve_lp(full.lp);
    REQUIRE(fs.optimal());
    double theta_full = fs.objective;

    double lower = oz.theta + oz.subgradient.dot(x.flat() - z.flat());
    double upper = ox.theta + ox.sigma_c;
    double tol = 1e-6 * (1.0 + std::fabs(theta_full));
    CHECK(lower <= theta_full + tol);
    CHECK(theta_full <= upper + tol);
  }
}

TEST_CASE("subgradient is a valid convexity cut") {
  GenSpec spec;
  spec.buses = 5;
  spec.branches = 7;
  spec.hours = 2;
  spec.scenarios = 1;
  spec.seed = 3;
  Instance inst = generate_test_instance(spec);
  auto ctx = context_for(inst);
  PortfolioSpace space = PortfolioSpace::build(inst.net, inst.tech, inst.scenarios);
  const Scenario& sc = inst.scenarios[0];

  std::mt19937_64 rng(17);
  auto x0 = random_portfolio(space, rng);
  OracleResult base = oracle(ctx, x0, sc, 0, {});
  for (int trial = 0; trial < 10; ++trial) {
    auto x1 = random_portfolio(space, rng);
    OracleResult probe = oracle(ctx, x1, sc, 0, {});
    double predicted =
        base.theta + base.subgradient.dot(x1.flat() - x0.flat());
    CHECK(probe.theta >= predicted - 1e-6 * (1.0 + std::fabs(probe.theta)));
  }
}

TEST_CASE("cycle KVL and voltage-angle formulations agree") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 6; ++trial) {
    GenSpec spec;
    spec.buses = 4 + static_cast<int>(rng() % 4);
    spec.branches = spec.buses + 1 + static_cast<int>(rng() % 3);
    spec.hours = 2;
    spec.scenarios = 1;
    spec.seed = 1000 + trial;
    Instance inst = generate_test_instance(spec);
    PortfolioSpace space = PortfolioSpace::build(inst.net, inst.tech, inst.scenarios);
    auto x = random_portfolio(space, rng);

    ModelOptions cyc = ModelOptions::for_mode(GridMode::dc);
    auto ctx_c = make_context(inst.net, inst.tech,
                              Eigen::VectorXd::Zero(inst.net.num_branches()),
                              cyc);
    ModelOptions ang = cyc;
    ang.angle_formulation = true;
    auto ctx_a = make_context(inst.net, inst.tech,
                              Eigen::VectorXd::Zero(inst.net.num_branches()),
                              ang);

    BuiltSubproblem pc = build_subproblem(ctx_c, x, inst.scenarios[0], 0, {});
    BuiltSubproblem pa = build_subproblem(ctx_a, x, inst.scenarios[0], 0, {});
    LpSolution sol_c = solve_lp(pc.lp);
    LpSolution sol_a = solve_lp(pa.lp);
    REQUIRE(sol_c.optimal());
    REQUIRE(sol_a.optimal());
    CHECK(sol_c.objective == doctest::Approx(sol_a.objective).epsilon(1e-6));
  }
}

TEST_CASE("complete recourse: feasible for any portfolio in the box") {
  GenSpec spec;
  spec.buses = 6;
  spec.branches = 8;
  spec.hours = 3;
  spec.scenarios = 2;
  spec.seed = 21;
  Instance inst = generate_test_instance(spec);
  auto ctx = context_for(inst);
  PortfolioSpace space = PortfolioSpace::build(inst.net, inst.tech, inst.scenarios);

  std::mt19937_64 rng(55);
  for (int trial = 0; trial < 25; ++trial) {
    auto x = random_portfolio(space, rng);
    for (size_t w = 0; w < inst.scenarios.size(); ++w) {
      OracleResult r =
          oracle(ctx, x, inst.scenarios[w], static_cast<int>(w), {});
      CHECK(r.theta >= 0.0);
    }
  }
}

TEST_CASE("extensive form with pinned x equals the subproblem sum") {
  Instance inst = oracle_ns::triangle3();
  auto ctx = context_for(inst);
  PortfolioSpace space = PortfolioSpace::build(inst.net, inst.tech, inst.scenarios);
  auto x = oracle_ns::zero_portfolio(inst);
  x.emission = Eigen::VectorXd::Constant(1, 1e9);
  x.branch = Eigen::VectorXd::Constant(3, 25.0);

  ContingencySet jfull = ctx.full_contingency_set(1);
  ExtensiveModel em =
      build_extensive_form(ctx, inst.scenarios, space, {jfull}, &x);
  LpSolution es = solve_lp(em.lp);
  REQUIRE(es.optimal());

  OracleResult r = oracle(ctx, x, inst.scenarios[0], 0, jfull);
  double direct = space.invest_cost.dot(x.flat()) + r.theta;
  CHECK(es.objective == doctest::Approx(direct).epsilon(1e-8));
}

TEST_CASE("contingency sets must respect the non-islanding guard") {
  Instance inst = oracle_ns::triangle3();
  // add a pendant branch (a bridge) carrying a fourth bus
  inst.net.buses.push_back({3, false});
  Branch pend;
  pend.id = 3;
  pend.from_bus = 2;
  pend.to_bus = 3;
  pend.base_impedance = 0.1;
  pend.base_capacity = 100.0;
  pend.expansion_limit = 100.0;
  pend.expansion_cost = 1000.0;
  inst.net.branches.push_back(pend);
  inst.net.load_bus.push_back(3);
  inst.scenarios[0].load.conservativeResize(1, 3);
  inst.scenarios[0].load(0, 2) = 10.0;

  auto ctx = context_for(inst);
  CHECK(ctx.non_islanding == std::vector<int>{0, 1, 2});
  for (const auto& c : ctx.full_contingency_set(1))
    CHECK(c.outaged != 3);  // bridges never appear as outages

  auto x = oracle_ns::zero_portfolio(inst);
  CHECK_THROWS_AS(build_subproblem(ctx, x, inst.scenarios[0], 0,
                                   ContingencySet{{0, 0, 3}}),
                  ContractViolation);
}
