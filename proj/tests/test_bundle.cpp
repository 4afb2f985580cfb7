#include <doctest.h>

#include <cmath>
#include <random>

#include "canopi/bundle.hpp"
#include "canopi/errors.hpp"
#include "canopi/io.hpp"
#include "test_instances.hpp"

using namespace canopi;
namespace oracle_ns = canopi::testing;

namespace {

PortfolioSpace box_space(std::vector<double> upper, std::vector<double> cost) {
  PortfolioSpace s;
  s.G = static_cast<int>(upper.size());
  s.S = 0;
  s.b = 0;
  s.W = 0;
  s.upper = Eigen::Map<Eigen::VectorXd>(upper.data(), upper.size());
  s.invest_cost = Eigen::Map<Eigen::VectorXd>(cost.data(), cost.size());
  return s;
}

}  // namespace

TEST_CASE("lower_bound: zero model, flat cut, and a V shape") {
  SUBCASE("no cuts with nonnegative costs bottoms out at zero") {
    PortfolioSpace space = box_space({10.0, 10.0}, {3.0, 5.0});
    std::vector<std::vector<Cut>> cuts(1);
    auto [L, x] = lower_bound(cuts, space, {1.0});
    CHECK(L == doctest::Approx(0.0));
    CHECK(x.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  }
  SUBCASE("single flat cut raises the floor") {
    PortfolioSpace space = box_space({10.0}, {2.0});
    std::vector<std::vector<Cut>> cuts(1);
    Cut c;
    c.scenario = 0;
    c.theta = 5.0;
    c.slope = Eigen::VectorXd::Zero(1);
    c.anchor = Eigen::VectorXd::Zero(1);
    cuts[0].push_back(c);
    auto [L, x] = lower_bound(cuts, space, {1.0});
    CHECK(L == doctest::Approx(5.0));
  }
  SUBCASE("two cuts form a V; the LP lands on the kink") {
    // h(x) = max(10 - 2x, 1 + x) on x in [0, 6], zero investment cost
    PortfolioSpace space = box_space({6.0}, {0.0});
    std::vector<std::vector<Cut>> cuts(1);
    Cut a, b;
    a.scenario = b.scenario = 0;
    a.theta = 10.0;
    a.slope = Eigen::VectorXd::Constant(1, -2.0);
    a.anchor = Eigen::VectorXd::Zero(1);
    b.theta = 1.0;
    b.slope = Eigen::VectorXd::Constant(1, 1.0);
    b.anchor = Eigen::VectorXd::Zero(1);
    cuts[0] = {a, b};
    auto [L, x] = lower_bound(cuts, space, {1.0});

    // grid-search oracle over the same model
    double best = kInf, best_x = 0.0;
    for (int k = 0; k <= 60000; ++k) {
      double xx = 6.0 * k / 60000.0;
      double v = std::max({0.0, 10.0 - 2.0 * xx, 1.0 + xx});
      if (v < best) {
        best = v;
        best_x = xx;
      }
    }
    CHECK(L == doctest::Approx(best).epsilon(1e-4));
    CHECK(x[0] == doctest::Approx(best_x).epsilon(1e-3));
  }
}

TEST_CASE("analytic center: box midpoint identity") {
  PortfolioSpace space = box_space({2.0, 8.0, 1.0}, {1.0, 1.0, 1.0});
  std::vector<std::vector<Cut>> cuts;  // no scenarios at all
  Eigen::VectorXd lb = Eigen::VectorXd::Zero(3);
  Eigen::VectorXd xk = Eigen::VectorXd::Zero(3);
  Eigen::VectorXd c = analytic_center(cuts, space, {}, kInf, lb, xk);
  CHECK(std::fabs(c[0] - 1.0) < 1e-8);
  CHECK(std::fabs(c[1] - 4.0) < 1e-8);
  CHECK(std::fabs(c[2] - 0.5) < 1e-8);
}

TEST_CASE("analytic center: level row shifts the center off midpoint") {
  // X = [0,2]^2, level row x1 + x2 <= 2. The symmetric stationarity
  // condition 1/x - 1/(2-x) - 1/(2-2x) = 0 has its root at 1 - 1/sqrt(5);
  // cross-checked here with a numeric barrier maximizer.
  PortfolioSpace space = box_space({2.0, 2.0}, {1.0, 1.0});
  std::vector<std::vector<Cut>> cuts;  // no scenarios
  Eigen::VectorXd lb = Eigen::VectorXd::Constant(2, 0.05);
  Eigen::VectorXd xk = Eigen::VectorXd::Constant(2, 0.05);
  Eigen::VectorXd c = analytic_center(cuts, space, {}, 2.0, lb, xk);

  double expected = 1.0 - 1.0 / std::sqrt(5.0);
  CHECK(c[0] == doctest::Approx(expected).epsilon(1e-7));
  CHECK(c[1] == doctest::Approx(expected).epsilon(1e-7));

  // independent oracle: coordinate-ascent maximization of the barrier
  auto barrier = [](double x1, double x2) {
    double terms[] = {x1, 2.0 - x1, x2, 2.0 - x2, 2.0 - x1 - x2};
    double f = 0.0;
    for (double t : terms) {
      if (t <= 0.0) return -1e100;
      f += std::log(t);
    }
    return f;
  };
  double gx = 0.5, gy = 0.5;
  for (int sweep = 0; sweep < 200; ++sweep) {
    for (int axis = 0; axis < 2; ++axis) {
      double lo = 1e-9, hi = 1.999999;
      for (int it = 0; it < 200; ++it) {
        double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
        double f1 = axis == 0 ? barrier(m1, gy) : barrier(gx, m1);
        double f2 = axis == 0 ? barrier(m2, gy) : barrier(gx, m2);
        if (f1 < f2) lo = m1; else hi = m2;
      }
      (axis == 0 ? gx : gy) = 0.5 * (lo + hi);
    }
  }
  CHECK(c[0] == doctest::Approx(gx).epsilon(1e-6));
  CHECK(c[1] == doctest::Approx(gy).epsilon(1e-6));
}

TEST_CASE("analytic center: huge level is the pure box center") {
  PortfolioSpace space = box_space({2.0, 2.0}, {1.0, 1.0});
  std::vector<std::vector<Cut>> cuts(1);
  Cut c0;
  c0.scenario = 0;
  c0.theta = 1.0;
  c0.slope = Eigen::VectorXd::Constant(2, 0.1);
  c0.anchor = Eigen::VectorXd::Zero(2);
  cuts[0].push_back(c0);
  Eigen::VectorXd lb = Eigen::VectorXd::Constant(2, 0.3);
  Eigen::VectorXd xk = Eigen::VectorXd::Constant(2, 0.3);
  Eigen::VectorXd c = analytic_center(cuts, space, {1.0}, 1e12, lb, xk);
  CHECK(c[0] == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(c[1] == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("run_bund: single bus converges to the dispatch cost") {
  Instance inst = oracle_ns::single_bus(100.0, 20.0);
  inst.tech.gen_invest_cost = {1.0};  // cheap so the first gap is small
  auto ctx = make_context(inst.net, inst.tech, Eigen::VectorXd::Zero(0),
                          ModelOptions::for_mode(GridMode::scdc));
  PortfolioSpace space = PortfolioSpace::build(inst.net, inst.tech, inst.scenarios);

  SUBCASE("loose epsilon stops at the first iterate") {
    BundleParams params;
    params.epsilon = 0.5;
    BundleResult res = run_bund(ctx, inst.scenarios, space, params);
    CHECK(res.converged);
    CHECK(res.iterations == 1);
  }
  SUBCASE("tight epsilon reaches the merit-order cost") {
    BundleParams params;
    params.epsilon = 1e-4;
    BundleResult res = run_bund(ctx, inst.scenarios, space, params);
    CHECK(res.converged);
    CHECK(res.upper == doctest::Approx(2000.0).epsilon(2e-4));
    CHECK(res.iterations <= 25);
    // merit order: the generator runs, nothing is shed
    CHECK(res.incumbent_oracles[0].costs.shed_mwh ==
          doctest::Approx(0.0).epsilon(1e-9));
  }
}

TEST_CASE("run_bund: bounds are monotone, level membership holds") {
  Instance inst = oracle_ns::triangle3();
  auto ctx = make_context(inst.net, inst.tech, Eigen::VectorXd::Zero(3),
                          ModelOptions::for_mode(GridMode::scdc));
  PortfolioSpace space = PortfolioSpace::build(inst.net, inst.tech, inst.scenarios);
  BundleParams params;
  params.epsilon = 1e-3;
  BundleResult res = run_bund(ctx, inst.scenarios, space, params);
  REQUIRE(res.converged);

  double prev_l = -kInf, prev_u = kInf;
  size_t prev_j = 0;
  for (const auto& rec : res.trajectory) {
    CHECK(rec.lower >= prev_l - 1e-9 * (1.0 + std::fabs(prev_l)));
    CHECK(rec.upper <= prev_u + 1e-9 * (1.0 + std::fabs(prev_u)));
    CHECK(rec.j_sizes[0] >= static_cast<int>(prev_j));
    prev_l = rec.lower;
    prev_u = rec.upper;
    prev_j = rec.j_sizes[0];
    if (&rec != &res.trajectory.back()) CHECK(rec.level_residual <= 1e-7);
  }
  // the final answer pays for either expansion or violations, never free
  CHECK(res.upper > 3600.0);
}

TEST_CASE("run_bund: cut validity against the extensive form") {
  GenSpec spec;
  spec.buses = 5;
  spec.branches = 7;
  spec.hours = 2;
  spec.scenarios = 1;
  spec.seed = 9;
  Instance inst = generate_test_instance(spec);
  auto ctx = make_context(inst.net, inst.tech,
                          Eigen::VectorXd::Zero(inst.net.num_branches()),
                          ModelOptions::for_mode(GridMode::scdc));
  PortfolioSpace space = PortfolioSpace::build(inst.net, inst.tech, inst.scenarios);
  BundleParams params;
  params.epsilon = 1e-3;
  params.max_iterations = 60;
  BundleResult res = run_bund(ctx, inst.scenarios, space, params);

  // U must upper-bound the extensive optimum, L lower-bound it
  ContingencySet jfull = ctx.full_contingency_set(inst.scenarios[0].hours);
  ExtensiveModel em =
      build_extensive_form(ctx, inst.scenarios, space, {jfull}, nullptr);
  LpSolution es = solve_lp(em.lp);
  REQUIRE(es.optimal());
  CHECK(res.lower <= es.objective + 1e-6 * (1.0 + std::fabs(es.objective)));
  CHECK(res.upper >= es.objective - 1e-6 * (1.0 + std::fabs(es.objective)));
  if (res.converged) {
    CHECK((res.upper - es.objective) / std::fabs(es.objective) <=
          params.epsilon + 1e-9);
  }
}

TEST_CASE("upper-bound bookkeeping follows the min/incumbent rule") {
  Instance inst = oracle_ns::triangle3();
  auto ctx = make_context(inst.net, inst.tech, Eigen::VectorXd::Zero(3),
                          ModelOptions::for_mode(GridMode::scdc));
  PortfolioSpace space =
      PortfolioSpace::build(inst.net, inst.tech, inst.scenarios);
  BundleParams params;
  params.epsilon = 1e-4;
  BundleResult res = run_bund(ctx, inst.scenarios, space, params);
  REQUIRE(res.converged);

  // first iteration: U1 = f1 and the incumbent lands there
  CHECK(res.trajectory.front().upper ==
        doctest::Approx(res.trajectory.front().f_k));
  CHECK(res.trajectory.front().incumbent_updated);
  double prev_u = kInf;
  for (const auto& rec : res.trajectory) {
    if (!rec.incumbent_updated)  // a worse f_k leaves U and x* alone
      CHECK(rec.upper == doctest::Approx(prev_u));
    else
      CHECK(rec.upper == doctest::Approx(std::min(prev_u, rec.f_k)));
    prev_u = rec.upper;
  }

  // at the incumbent with nothing left to screen, U equals the cost under
  // the full contingency set
  bool all_sigma_zero = true;
  for (const auto& o : res.incumbent_oracles) all_sigma_zero &= o.sigma_c == 0.0;
  if (all_sigma_zero) {
    double direct = space.invest_cost.dot(res.x_star.flat());
    for (size_t w = 0; w < inst.scenarios.size(); ++w) {
      ContingencySet jfull =
          ctx.full_contingency_set(inst.scenarios[w].hours);
      BuiltSubproblem bs = build_subproblem(ctx, res.x_star,
                                            inst.scenarios[w],
                                            static_cast<int>(w), jfull);
      LpSolution sol = solve_lp(bs.lp);
      REQUIRE(sol.optimal());
      direct += inst.scenarios[w].weight * sol.objective;
    }
    CHECK(res.upper == doctest::Approx(direct).epsilon(1e-6));
  }
}

TEST_CASE("stored cuts minorize the full value function at probe points") {
  Instance inst = oracle_ns::triangle3();
  auto ctx = make_context(inst.net, inst.tech, Eigen::VectorXd::Zero(3),
                          ModelOptions::for_mode(GridMode::scdc));
  PortfolioSpace space =
      PortfolioSpace::build(inst.net, inst.tech, inst.scenarios);
  BundleParams params;
  params.epsilon = 1e-3;
  BundleResult res = run_bund(ctx, inst.scenarios, space, params);

  REQUIRE(res.converged);
  // fresh cuts anchored at random points, checked against h^r(J_full)
  ContingencySet jfull = ctx.full_contingency_set(1);
  std::vector<Cut> cuts;
  std::mt19937_64 rng(808);
  std::vector<Eigen::VectorXd> anchors;
  for (int k = 0; k < 5; ++k) {
    Eigen::VectorXd a(space.full_dim());
    for (int i = 0; i < space.full_dim(); ++i)
      a[i] = space.upper[i] * (rng() % 1000) / 999.0;
    anchors.push_back(a);
    auto xa = InvestmentPortfolio::from_flat(a, space.G, space.S, space.b,
                                             space.W);
    OracleResult r = oracle(ctx, xa, inst.scenarios[0], 0, {});
    cuts.push_back({0, r.theta, r.subgradient, a});
  }
  for (int probe = 0; probe < 20; ++probe) {
    Eigen::VectorXd p(space.full_dim());
    for (int i = 0; i < space.full_dim(); ++i)
      p[i] = space.upper[i] * (rng() % 1000) / 999.0;
    auto xp =
        InvestmentPortfolio::from_flat(p, space.G, space.S, space.b, space.W);
    BuiltSubproblem bs = build_subproblem(ctx, xp, inst.scenarios[0], 0, jfull);
    LpSolution sol = solve_lp(bs.lp);
    REQUIRE(sol.optimal());
    for (const auto& cut : cuts)
      CHECK(cut.value(p) <=
            sol.objective + 1e-6 * (1.0 + std::fabs(sol.objective)));
  }
}

TEST_CASE("run_bund rejects bad parameters") {
  Instance inst = oracle_ns::single_bus();
  auto ctx = make_context(inst.net, inst.tech, Eigen::VectorXd::Zero(0),
                          ModelOptions::for_mode(GridMode::scdc));
  PortfolioSpace space = PortfolioSpace::build(inst.net, inst.tech, inst.scenarios);
  BundleParams params;
  params.epsilon = 0.0;
  CHECK_THROWS_AS(run_bund(ctx, inst.scenarios, space, params),
                  ContractViolation);
  params.epsilon = 1e-3;
  params.alpha = 1.0;
  CHECK_THROWS_AS(run_bund(ctx, inst.scenarios, space, params),
                  ContractViolation);
}
