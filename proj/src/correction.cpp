#include "canopi/correction.hpp"

#include <algorithm>
#include <cmath>

#include "canopi/errors.hpp"
#include "canopi/kernels.hpp"

namespace canopi {

double rth_largest(std::vector<double> v, int r) {
  if (r < 1) throw ContractViolation("rth_largest: r must be >= 1");
  if (r > static_cast<int>(v.size())) return 0.0;
  std::nth_element(v.begin(), v.begin() + (r - 1), v.end(),
                   std::greater<double>());
  return v[r - 1];
}

Eigen::VectorXd restricted_expansion(
    const Eigen::VectorXd& x_hat,
    const std::vector<Eigen::MatrixXd>& injections, const Network& net,
    const TechParams& tech, const std::vector<int>& non_islanding) {
  const int b = net.num_branches();
  const int n = net.num_buses();
  if (x_hat.size() != b)
    throw ContractViolation("restricted_expansion: x_hat length mismatch");
  for (int j = 0; j < b; ++j)
    if (x_hat[j] < -1e-9 || x_hat[j] > net.branches[j].expansion_limit + 1e-6)
      throw ContractViolation("restricted_expansion: x_hat outside [0, xbar]");

  SensitivityMatrices sens = lodf(net, x_hat.cwiseMax(0.0), non_islanding);

  // pre-contingency PTDF flows per (scenario, hour)
  std::vector<Eigen::MatrixXd> flows;  // per scenario, T x b
  double scale = 1.0;
  for (const auto& inj : injections)
    scale = std::max(scale, inj.cwiseAbs().maxCoeff());
  for (const auto& inj : injections) {
    if (inj.cols() != n)
      throw ContractViolation("restricted_expansion: injection bus mismatch");
    Eigen::MatrixXd f(inj.rows(), b);
    for (int t = 0; t < inj.rows(); ++t) {
      if (std::fabs(inj.row(t).sum()) > 1e-6 * scale)
        throw ContractViolation(
            "restricted_expansion: injections do not balance");
      Eigen::VectorXd red(n - 1);
      int c = 0;
      for (int i = 0; i < n; ++i)
        if (i != net.slack_bus) red[c++] = inj(t, i);
      f.row(t) = (sens.ptdf * red).transpose();
    }
    flows.push_back(std::move(f));
  }

  const double etac = tech.contingency_rating;
  const double cvio = tech.violation_cost;
  Eigen::VectorXd result(b);

  std::vector<double> margins(b);
  // per-branch breakpoint arrays: delta_c / eta_c over (scenario, hour, outage)
  std::vector<std::vector<double>> breakpoints(b);
  Eigen::VectorXd base_lb = Eigen::VectorXd::Zero(b);
  Eigen::VectorXd ctg_cap(b);
  for (int i = 0; i < b; ++i) ctg_cap[i] = etac * net.branches[i].base_capacity;

  for (size_t w = 0; w < flows.size(); ++w) {
    const Eigen::MatrixXd& f = flows[w];
    for (int t = 0; t < f.rows(); ++t) {
      for (int i = 0; i < b; ++i) {
        double over = std::fabs(f(t, i)) - net.branches[i].base_capacity;
        if (over > base_lb[i]) base_lb[i] = over;
      }
      Eigen::VectorXd p = f.row(t);
      for (int j : non_islanding) {
        kernels::screen_column(margins.data(), p.data(),
                               sens.lodf.col(j).data(), p[j], ctg_cap.data(),
                               static_cast<size_t>(b));
        for (int i = 0; i < b; ++i)
          breakpoints[i].push_back(std::max(margins[i], 0.0) / etac);
      }
    }
  }

  for (int i = 0; i < b; ++i) {
    double cost_ratio = net.branches[i].expansion_cost / (etac * cvio);
    int r = std::max(1, static_cast<int>(std::ceil(cost_ratio)));
    double x_opt = rth_largest(std::move(breakpoints[i]), r);
    result[i] = std::min(std::max(base_lb[i], x_opt),
                         net.branches[i].expansion_limit);
  }
  return result;
}

CorrResult corr_fixed_point(const Eigen::VectorXd& x_br_start,
                            const std::vector<Eigen::MatrixXd>& injections,
                            const Network& net, const TechParams& tech,
                            const std::vector<int>& non_islanding,
                            const CorrParams& params) {
  CorrResult out;
  CorrState st;
  st.x_hat = x_br_start;
  st.damping = params.damping;
  Eigen::VectorXd best = st.x_hat;
  double best_residual = kInf;

  for (int restart = 0; restart <= params.max_restarts; ++restart) {
    for (int it = 0; it < params.max_iterations; ++it) {
      Eigen::VectorXd x_tilde =
          restricted_expansion(st.x_hat, injections, net, tech, non_islanding);
      st.residual = (x_tilde - st.x_hat).lpNorm<Eigen::Infinity>();
      ++st.iterations;
      out.residuals.push_back(st.residual);
      if (st.residual < best_residual) {
        best_residual = st.residual;
        best = x_tilde;
      }
      if (st.residual < params.tolerance) {
        out.x_br = x_tilde;
        out.converged = true;
        out.restarts = restart;
        out.iterations = st.iterations;
        return out;
      }
      st.x_hat = (1.0 - st.damping) * st.x_hat + st.damping * x_tilde;
    }
    st.damping *= 0.5;
    st.x_hat = best;
    out.restarts = restart + 1;
  }
  out.x_br = best;
  out.iterations = st.iterations;
  out.converged = false;
  out.warning = "fixed point did not reach tolerance; best residual " +
                std::to_string(best_residual);
  return out;
}

std::vector<Eigen::MatrixXd> injections_from_solutions(
    const std::vector<OracleResult>& oracles) {
  std::vector<Eigen::MatrixXd> inj;
  inj.reserve(oracles.size());
  for (const auto& o : oracles) inj.push_back(o.y.net_injection);
  return inj;
}

}  // namespace canopi
