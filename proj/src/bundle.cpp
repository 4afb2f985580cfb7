#include "canopi/bundle.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <thread>

#include "canopi/errors.hpp"

namespace canopi {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

}  // namespace

double model_value(const std::vector<std::vector<Cut>>& cuts,
                   const PortfolioSpace& space,
                   const std::vector<double>& weights,
                   const Eigen::VectorXd& x) {
  double v = space.invest_cost.dot(x);
  for (size_t w = 0; w < cuts.size(); ++w) {
    double h = 0.0;  // the initial zero model
    for (const auto& cut : cuts[w]) h = std::max(h, cut.value(x));
    v += weights[w] * h;
  }
  return v;
}

std::pair<double, Eigen::VectorXd> lower_bound(
    const std::vector<std::vector<Cut>>& cuts, const PortfolioSpace& space,
    const std::vector<double>& weights, const SolverConfig& cfg) {
  const int R = space.reduced_dim();
  const int W = static_cast<int>(cuts.size());
  Eigen::VectorXd ru = space.reduced_upper();
  Eigen::VectorXd rc = space.reduced_cost();

  LinearProgram lp;
  for (int i = 0; i < R; ++i) lp.add_var(0.0, ru[i], rc[i]);
  for (int w = 0; w < W; ++w) lp.add_var(0.0, kInf, weights[w]);

  if (std::isfinite(space.emission_budget) && space.W > 0) {
    std::vector<std::pair<int, double>> terms;
    for (int w = 0; w < space.W; ++w)
      terms.push_back({space.reduced_off_emission() + w, 1.0});
    lp.add_row(LinearProgram::Sense::le, space.emission_budget,
               std::move(terms), "em_budget");
  }
  for (int w = 0; w < W; ++w)
    for (const auto& cut : cuts[w]) {
      Eigen::VectorXd gz = space.reduce_gradient(cut.slope);
      std::vector<std::pair<int, double>> terms{{R + w, 1.0}};
      for (int i = 0; i < R; ++i)
        if (gz[i] != 0.0) terms.push_back({i, -gz[i]});
      lp.add_row(LinearProgram::Sense::ge,
                 cut.theta - cut.slope.dot(cut.anchor), std::move(terms));
    }

  LpSolution sol = solve_lp(lp, cfg);
  if (!sol.optimal())
    throw SolverError("bundle lower-bound LP " + to_string(sol.status) +
                      (sol.message.empty() ? "" : ": " + sol.message));
  Eigen::VectorXd z(R);
  for (int i = 0; i < R; ++i) z[i] = sol.x[i];
  return {sol.objective, space.expand(z)};
}

namespace {

// Barrier rows in reduced-plus-eta coordinates: slack_i = r_i - a_i'v > 0.
struct BarrierRows {
  std::vector<Eigen::VectorXd> a;
  std::vector<double> r;

  void add(Eigen::VectorXd ai, double ri) {
    double norm = ai.norm();
    if (norm <= 0.0) return;
    a.push_back(ai / norm);
    r.push_back(ri / norm);
  }
};

}  // namespace

Eigen::VectorXd analytic_center(const std::vector<std::vector<Cut>>& cuts,
                                const PortfolioSpace& space,
                                const std::vector<double>& weights,
                                double theta_lev, const Eigen::VectorXd& x_lb,
                                const Eigen::VectorXd& x_k) {
  const int R = space.reduced_dim();
  const int W = static_cast<int>(cuts.size());
  // without a finite level the epigraph block has no upper pressure, so the
  // barrier is over X alone (cuts only matter through the level row)
  const bool with_level = std::isfinite(theta_lev);
  const bool with_eta = with_level && W > 0;
  Eigen::VectorXd ru = space.reduced_upper();
  Eigen::VectorXd rc = space.reduced_cost();

  // variable map: free reduced components, then eta per scenario
  std::vector<int> var_of;  // reduced comp -> newton var (-1 if fixed)
  int nfree = 0;
  var_of.assign(R, -1);
  for (int i = 0; i < R; ++i)
    if (ru[i] > 0.0) var_of[i] = nfree++;
  const int V = nfree + (with_eta ? W : 0);
  auto eta_var = [&](int w) { return nfree + w; };

  auto fallback = [&]() -> Eigen::VectorXd {
    return 0.9 * x_lb + 0.1 * x_k;
  };
  if (V == 0) return fallback();

  BarrierRows rows;
  for (int i = 0; i < R; ++i) {
    if (var_of[i] < 0) continue;
    Eigen::VectorXd a = Eigen::VectorXd::Zero(V);
    a[var_of[i]] = -1.0;
    rows.add(a, 0.0);  // z_i >= 0
    a[var_of[i]] = 1.0;
    rows.add(a, ru[i]);  // z_i <= ru_i
  }
  if (std::isfinite(space.emission_budget) && space.W > 0) {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(V);
    for (int w = 0; w < space.W; ++w) {
      int vi = var_of[space.reduced_off_emission() + w];
      if (vi >= 0) a[vi] = 1.0;
    }
    if (a.norm() > 0) rows.add(a, space.emission_budget);
  }
  if (with_eta) {
    for (int w = 0; w < W; ++w) {
      Eigen::VectorXd a = Eigen::VectorXd::Zero(V);
      a[eta_var(w)] = -1.0;
      rows.add(a, 0.0);  // eta >= 0, the zero model
      for (const auto& cut : cuts[w]) {
        Eigen::VectorXd gz = space.reduce_gradient(cut.slope);
        Eigen::VectorXd ac = Eigen::VectorXd::Zero(V);
        for (int i = 0; i < R; ++i)
          if (var_of[i] >= 0) ac[var_of[i]] = gz[i];
        ac[eta_var(w)] = -1.0;
        // theta + g'(x - anchor) - eta <= 0
        rows.add(ac, cut.slope.dot(cut.anchor) - cut.theta);
      }
    }
  }
  if (with_level) {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(V);
    for (int i = 0; i < R; ++i)
      if (var_of[i] >= 0) a[var_of[i]] = rc[i];
    if (with_eta)
      for (int w = 0; w < W; ++w) a[eta_var(w)] = weights[w];
    rows.add(a, theta_lev);  // level row
  }

  // --- strictly interior start ---
  Eigen::VectorXd z0;
  {
    Eigen::VectorXd interior = space.reduce(space.interior_point());
    if (!with_level) {
      z0 = interior;
    } else {
      Eigen::VectorXd zlb = space.reduce(x_lb);
      double tau = 0.5;
      bool ok = false;
      for (int tries = 0; tries < 40 && !ok; ++tries) {
        Eigen::VectorXd cand = (1.0 - tau) * zlb + tau * interior;
        double fx = model_value(cuts, space, weights, space.expand(cand));
        if (fx < theta_lev - 1e-12 * (1.0 + std::fabs(theta_lev))) {
          z0 = cand;
          ok = true;
        } else {
          tau *= 0.5;
        }
      }
      if (!ok) return fallback();
    }
  }
  Eigen::VectorXd v0(V);
  for (int i = 0; i < R; ++i)
    if (var_of[i] >= 0) v0[var_of[i]] = z0[i];
  if (with_eta) {
    // place eta strictly above each model, spending half the level slack
    double fx = model_value(cuts, space, weights, space.expand(z0));
    double room = theta_lev - fx;
    if (room <= 0) return fallback();
    double wsum = 0.0;
    for (int w = 0; w < W; ++w) wsum += weights[w];
    double bump = 0.5 * room / std::max(wsum, 1e-12);
    Eigen::VectorXd xfull = space.expand(z0);
    for (int w = 0; w < W; ++w) {
      double h = 0.0;
      for (const auto& cut : cuts[w]) h = std::max(h, cut.value(xfull));
      v0[eta_var(w)] = h + bump;
    }
  }

  auto slacks_ok = [&](const Eigen::VectorXd& v, Eigen::VectorXd& s) {
    s.resize(static_cast<int>(rows.a.size()));
    for (size_t i = 0; i < rows.a.size(); ++i) {
      s[static_cast<int>(i)] = rows.r[i] - rows.a[i].dot(v);
      if (s[static_cast<int>(i)] <= 0.0) return false;
    }
    return true;
  };

  Eigen::VectorXd s;
  if (!slacks_ok(v0, s)) return fallback();

  // damped Newton on -sum log s
  Eigen::VectorXd v = v0;
  const int max_newton = 100;
  for (int it = 0; it < max_newton; ++it) {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(V);
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(V, V);
    for (size_t i = 0; i < rows.a.size(); ++i) {
      double si = s[static_cast<int>(i)];
      grad += rows.a[i] / si;
      hess.noalias() += (rows.a[i] / (si * si)) * rows.a[i].transpose();
    }
    if (grad.norm() < 1e-8) break;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
    Eigen::VectorXd dir = ldlt.solve(-grad);
    if (!dir.allFinite()) break;

    // longest feasible step, then backtrack on the barrier value
    double tmax = kInf;
    for (size_t i = 0; i < rows.a.size(); ++i) {
      double ad = rows.a[i].dot(dir);
      if (ad > 0) tmax = std::min(tmax, s[static_cast<int>(i)] / ad);
    }
    double t = std::min(1.0, 0.99 * tmax);
    auto barrier = [&](const Eigen::VectorXd& vv) {
      double f = 0.0;
      for (size_t i = 0; i < rows.a.size(); ++i) {
        double si = rows.r[i] - rows.a[i].dot(vv);
        if (si <= 0) return kInf;
        f -= std::log(si);
      }
      return f;
    };
    double f0 = barrier(v);
    double slope = grad.dot(dir);
    Eigen::VectorXd vt;
    for (int bt = 0; bt < 60; ++bt) {
      vt = v + t * dir;
      if (barrier(vt) <= f0 + 0.25 * t * slope) break;
      t *= 0.5;
    }
    v = vt;
    if (!slacks_ok(v, s)) return fallback();
  }

  Eigen::VectorXd z(R);
  for (int i = 0; i < R; ++i) z[i] = (var_of[i] >= 0) ? v[var_of[i]] : 0.0;
  return space.expand(z);
}

BundleResult run_bund(const SubproblemContext& ctx,
                      const std::vector<Scenario>& scenarios,
                      const PortfolioSpace& space, const BundleParams& params) {
  const int W = static_cast<int>(scenarios.size());
  if (W == 0) throw ContractViolation("run_bund: no scenarios");
  if (!(params.epsilon > 0.0))
    throw ContractViolation("run_bund: epsilon must be positive");
  if (!(params.alpha > 0.0 && params.alpha < 1.0))
    throw ContractViolation("run_bund: alpha must lie in (0,1)");

  std::vector<double> weights(W);
  for (int w = 0; w < W; ++w) weights[w] = scenarios[w].weight;

  BundleState st;
  st.cuts.assign(W, {});
  st.active.assign(W, {});
  st.iterate = space.interior_point();
  st.lower = 0.0;
  st.upper = kInf;

  BundleResult out;
  int threads = params.threads > 0
                    ? params.threads
                    : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, threads);

  const int G = space.G, S = space.S, b = space.b;

  for (int k = 1; k <= params.max_iterations; ++k) {
    IterationRecord rec;
    rec.k = k;
    auto t0 = std::chrono::steady_clock::now();

    InvestmentPortfolio xk =
        InvestmentPortfolio::from_flat(st.iterate, G, S, b, W);

    // scenario oracles in parallel batches, joined in scenario order
    std::vector<OracleResult> results(W);
    for (int base = 0; base < W; base += threads) {
      int count = std::min(threads, W - base);
      std::vector<std::future<OracleResult>> futs;
      futs.reserve(count);
      for (int i = 0; i < count; ++i) {
        int w = base + i;
        futs.push_back(std::async(std::launch::async, [&, w] {
          return oracle(ctx, xk, scenarios[w], w, st.active[w], params.solver);
        }));
      }
      for (int i = 0; i < count; ++i) results[base + i] = futs[i].get();
    }
    rec.oracle_seconds = seconds_since(t0);

    bool type2 = true;
    double f_k = space.invest_cost.dot(st.iterate);
    for (int w = 0; w < W; ++w) {
      const OracleResult& r = results[w];
      double h_prev = 0.0;
      for (const auto& cut : st.cuts[w])
        h_prev = std::max(h_prev, cut.value(st.iterate));
      if (r.theta > h_prev + 1e-8) type2 = false;       // (a) cut improved
      if (!r.new_violations.empty()) type2 = false;     // (b) new contingencies
      if (r.sigma_c != 0.0) type2 = false;
      st.cuts[w].push_back({w, r.theta, r.subgradient, st.iterate});
      st.active[w].insert(st.active[w].end(), r.new_violations.begin(),
                          r.new_violations.end());
      f_k += weights[w] * (r.theta + r.sigma_c);
    }
    rec.type2 = type2;
    rec.f_k = f_k;
    for (int w = 0; w < W; ++w)
      rec.j_sizes.push_back(static_cast<int>(st.active[w].size()));

    auto t1 = std::chrono::steady_clock::now();
    auto [L, x_lb] = lower_bound(st.cuts, space, weights, params.solver);
    rec.master_seconds = seconds_since(t1);

    if (L < st.lower - 1e-7 * (1.0 + std::fabs(st.lower)))
      throw SolverError("bundle lower bound decreased");
    st.lower = std::max(st.lower, L);

    if (f_k <= st.upper + 1e-9) {
      st.upper = std::min(st.upper, f_k);
      st.incumbent = st.iterate;
      st.incumbent_oracles = results;
      rec.incumbent_updated = true;
    }

    rec.lower = st.lower;
    rec.upper = st.upper;
    rec.gap = (st.upper - st.lower) / std::max(std::fabs(st.upper), 1e-12);

    if (rec.gap < params.epsilon) {
      rec.theta_lev = st.theta_lev;
      out.trajectory.push_back(rec);
      out.converged = true;
      st.iteration = k;
      break;
    }

    st.theta_lev = st.lower + params.alpha * (st.upper - st.lower);
    rec.theta_lev = st.theta_lev;

    auto t2 = std::chrono::steady_clock::now();
    Eigen::VectorXd next = analytic_center(st.cuts, space, weights,
                                           st.theta_lev, x_lb, st.iterate);
    rec.center_seconds = seconds_since(t2);
    rec.level_residual =
        model_value(st.cuts, space, weights, next) - st.theta_lev;
    st.iterate = next;
    st.iteration = k;
    out.trajectory.push_back(rec);
  }

  out.iterations = st.iteration;
  out.lower = st.lower;
  out.upper = st.upper;
  out.converged = out.converged && st.incumbent.size() > 0;
  if (!out.converged) {
    out.hit_iteration_cap = true;
    out.warning = "iteration cap reached before the gap closed; returning the "
                  "best incumbent";
  }
  if (st.incumbent.size() == 0)
    throw SolverError("bundle produced no incumbent");
  out.x_star = InvestmentPortfolio::from_flat(st.incumbent, G, S, b, W);
  out.incumbent_oracles = std::move(st.incumbent_oracles);
  return out;
}

}  // namespace canopi
