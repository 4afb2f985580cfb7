#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <optional>
#include <cmath>
#include <stdexcept>

#include "canopi/kernels.hpp"
#include "canopi/lp.hpp"

namespace canopi {

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::failed: return "failed";
  }
  return "?";
}

int LinearProgram::add_var(double lo, double hi, double cost, bool integral) {
  objective.push_back(cost);
  lower.push_back(lo);
  upper.push_back(hi);
  if (integral && is_integer.empty())
    is_integer.assign(objective.size() - 1, 0);  // backfill earlier vars
  if (integral || !is_integer.empty()) is_integer.push_back(integral ? 1 : 0);
  return num_vars() - 1;
}

int LinearProgram::add_row(Sense sense, double rhs,
                           std::vector<std::pair<int, double>> terms,
                           std::string tag) {
  Row r;
  r.terms = std::move(terms);
  r.sense = sense;
  r.rhs = rhs;
  r.tag = std::move(tag);
  rows.push_back(std::move(r));
  return num_rows() - 1;
}

bool LinearProgram::has_integers() const {
  for (char c : is_integer)
    if (c) return true;
  return false;
}

namespace {

using clock_type = std::chrono::steady_clock;

enum VarStatus : unsigned char { kBasic, kAtLower, kAtUpper, kFreeNB };

// Bounded-variable revised simplex over [A | I] x = b with a dense explicit
// basis inverse. Phase 1 minimizes the total bound violation of the basic
// variables; phase 2 prices with an incrementally-updated reduced-cost row
// and refactorizes through Eigen before reporting.
class Simplex {
 public:
  Simplex(const LinearProgram& lp, const SolverConfig& cfg)
      : lp_(lp), cfg_(cfg), m_(lp.num_rows()), n_(lp.num_vars()), nn_(m_ + n_) {
    build();
  }

  LpSolution run() {
    deadline_ = clock_type::now() +
                std::chrono::duration_cast<clock_type::duration>(
                    std::chrono::duration<double>(cfg_.time_limit_s));
    LpSolution sol;
    try {
      SolveStatus st = iterate();
      finalize(st, sol);
    } catch (const std::exception& e) {
      sol.status = SolveStatus::failed;
      sol.message = e.what();
    }
    sol.iterations = iters_;
    return sol;
  }

 private:
  const LinearProgram& lp_;
  SolverConfig cfg_;
  int m_, n_, nn_;

  // columns of [A | I] in sparse form
  std::vector<std::vector<std::pair<int, double>>> cols_;
  std::vector<double> cost_, lo_, up_, b_;

  std::vector<double> binv_;  // m x m row-major
  std::vector<int> basis_;    // row -> variable
  std::vector<unsigned char> stat_;
  std::vector<double> xval_;  // nonbasic resting values
  std::vector<double> beta_;  // basic values per row
  std::vector<double> dj_;    // phase-2 reduced costs, maintained
  std::vector<double> work_row_;

  long iters_ = 0;
  std::optional<Eigen::PartialPivLU<Eigen::MatrixXd>> final_lu_;
  int degen_streak_ = 0;
  bool bland_ = false;
  clock_type::time_point deadline_;

  double* binv_row(int i) { return binv_.data() + static_cast<size_t>(i) * m_; }

  void build() {
    cols_.assign(nn_, {});
    cost_.assign(nn_, 0.0);
    lo_.assign(nn_, 0.0);
    up_.assign(nn_, 0.0);
    b_.resize(m_);
    for (int j = 0; j < n_; ++j) {
      cost_[j] = lp_.objective[j];
      lo_[j] = lp_.lower[j];
      up_[j] = lp_.upper[j];
      if (lo_[j] > up_[j] + 1e-12)
        throw std::runtime_error("inconsistent bounds on variable " +
                                 std::to_string(j));
    }
    for (int i = 0; i < m_; ++i) {
      const auto& row = lp_.rows[i];
      b_[i] = row.rhs;
      for (auto [j, v] : row.terms) {
        if (j < 0 || j >= n_)
          throw std::runtime_error("row references unknown variable");
        if (v != 0.0) cols_[j].push_back({i, v});
      }
      int s = n_ + i;
      cols_[s] = {{i, 1.0}};
      switch (row.sense) {
        case LinearProgram::Sense::le: lo_[s] = 0.0; up_[s] = kInf; break;
        case LinearProgram::Sense::ge: lo_[s] = -kInf; up_[s] = 0.0; break;
        case LinearProgram::Sense::eq: lo_[s] = 0.0; up_[s] = 0.0; break;
      }
    }
    // slack basis; nonbasic structurals rest at the bound nearest zero
    basis_.resize(m_);
    stat_.assign(nn_, kAtLower);
    xval_.assign(nn_, 0.0);
    for (int j = 0; j < n_; ++j) {
      if (std::isfinite(lo_[j]) && std::isfinite(up_[j])) {
        if (std::fabs(lo_[j]) <= std::fabs(up_[j])) {
          stat_[j] = kAtLower;
          xval_[j] = lo_[j];
        } else {
          stat_[j] = kAtUpper;
          xval_[j] = up_[j];
        }
      } else if (std::isfinite(lo_[j])) {
        stat_[j] = kAtLower;
        xval_[j] = lo_[j];
      } else if (std::isfinite(up_[j])) {
        stat_[j] = kAtUpper;
        xval_[j] = up_[j];
      } else {
        stat_[j] = kFreeNB;
        xval_[j] = 0.0;
      }
    }
    binv_.assign(static_cast<size_t>(m_) * m_, 0.0);
    for (int i = 0; i < m_; ++i) {
      basis_[i] = n_ + i;
      stat_[n_ + i] = kBasic;
      binv_row(i)[i] = 1.0;
    }
    recompute_beta();
    work_row_.resize(m_);
  }

  void recompute_beta() {
    std::vector<double> rhs(b_);
    for (int j = 0; j < nn_; ++j) {
      if (stat_[j] == kBasic || xval_[j] == 0.0) continue;
      for (auto [i, v] : cols_[j]) rhs[i] -= v * xval_[j];
    }
    beta_.assign(m_, 0.0);
    for (int i = 0; i < m_; ++i)
      beta_[i] = kernels::dot(binv_row(i), rhs.data(), m_);
  }

  // y = Binv * A_j
  void ftran(int j, std::vector<double>& y) {
    std::fill(y.begin(), y.end(), 0.0);
    for (auto [k, v] : cols_[j]) {
      const double* col_src = binv_.data() + k;
      // strided column access; m is desk-scale so this stays cache-tolerable
      for (int i = 0; i < m_; ++i) y[i] += v * col_src[static_cast<size_t>(i) * m_];
    }
  }

  // pi = cb' * Binv for an arbitrary basic-cost vector
  void btran(const std::vector<double>& cb, std::vector<double>& pi) {
    pi.assign(m_, 0.0);
    for (int i = 0; i < m_; ++i)
      if (cb[i] != 0.0) kernels::axpy(pi.data(), binv_row(i), cb[i], m_);
  }

  double price_col(int j, const std::vector<double>& pi) const {
    double s = 0.0;
    for (auto [i, v] : cols_[j]) s += pi[i] * v;
    return s;
  }

  // feasibility is judged per bound, not against a global scale: one huge
  // right-hand side must not loosen every other row
  double bound_tol(double bound) const {
    return cfg_.feas_tol * (1.0 + std::fabs(bound));
  }
  bool below_lower(int row) const {
    int v = basis_[row];
    return beta_[row] < lo_[v] - bound_tol(lo_[v]);
  }
  bool above_upper(int row) const {
    int v = basis_[row];
    return beta_[row] > up_[v] + bound_tol(up_[v]);
  }
  bool primal_feasible() const {
    for (int i = 0; i < m_; ++i)
      if (below_lower(i) || above_upper(i)) return false;
    return true;
  }

  void full_reduced_costs() {
    std::vector<double> cb(m_);
    for (int i = 0; i < m_; ++i) cb[i] = cost_[basis_[i]];
    std::vector<double> pi;
    btran(cb, pi);
    dj_.assign(nn_, 0.0);
    for (int j = 0; j < nn_; ++j) {
      if (stat_[j] == kBasic) continue;
      dj_[j] = cost_[j] - price_col(j, pi);
    }
  }

  bool time_up() const { return clock_type::now() > deadline_; }

  // entering-variable pick; returns -1 when priced out
  int choose_entering(const std::vector<double>& d, bool phase1,
                      int* direction) {
    int best = -1, best_dir = 0;
    double best_score = 0.0;
    for (int j = 0; j < nn_; ++j) {
      unsigned char st = stat_[j];
      if (st == kBasic) continue;
      if (lo_[j] == up_[j] && st != kFreeNB) continue;  // fixed
      double tol = phase1 ? cfg_.opt_tol
                          : cfg_.opt_tol * (1.0 + std::fabs(cost_[j]));
      double djv = d[j];
      int dir = 0;
      double score = 0.0;
      if (st == kAtLower && djv < -tol) { dir = +1; score = -djv; }
      else if (st == kAtUpper && djv > tol) { dir = -1; score = djv; }
      else if (st == kFreeNB && std::fabs(djv) > tol) {
        dir = djv < 0 ? +1 : -1;
        score = std::fabs(djv);
      }
      if (dir == 0) continue;
      if (bland_) { *direction = dir; return j; }
      if (score > best_score) { best_score = score; best = j; best_dir = dir; }
    }
    *direction = best_dir;
    return best;
  }

  struct Ratio {
    double t = kInf;
    int row = -1;        // -1 with finite t: bound flip
    bool to_upper = false;  // leaving variable lands on its upper bound
  };

  Ratio ratio_test(int q, int dir, const std::vector<double>& y, bool phase1) {
    const double ztol = 1e-11;
    Ratio best;
    double best_pivot = 0.0;
    for (int i = 0; i < m_; ++i) {
      double w = dir * y[i];
      if (std::fabs(w) <= ztol) continue;
      int v = basis_[i];
      bool below = phase1 && below_lower(i);
      bool above = phase1 && above_upper(i);
      double t = kInf;
      bool to_upper = false;
      if (below) {
        if (w < 0) { t = (beta_[i] - lo_[v]) / w; to_upper = false; }
      } else if (above) {
        if (w > 0) { t = (beta_[i] - up_[v]) / w; to_upper = true; }
      } else {
        if (w > 0 && std::isfinite(lo_[v])) {
          t = (beta_[i] - lo_[v]) / w;
          to_upper = false;
        } else if (w < 0 && std::isfinite(up_[v])) {
          t = (beta_[i] - up_[v]) / w;
          to_upper = true;
        }
      }
      if (t == kInf) continue;
      if (t < -1e-9) t = 0.0;  // numerical shield
      if (t < best.t - 1e-12 ||
          (t < best.t + 1e-12 &&
           (bland_ ? (best.row < 0 || v < basis_[best.row])
                   : std::fabs(y[i]) > best_pivot))) {
        best.t = std::max(t, 0.0);
        best.row = i;
        best.to_upper = to_upper;
        best_pivot = std::fabs(y[i]);
      }
    }
    // flip to the variable's own other bound
    if (std::isfinite(lo_[q]) && std::isfinite(up_[q])) {
      double span = up_[q] - lo_[q];
      if (span < best.t) {
        best.t = span;
        best.row = -1;
      }
    }
    return best;
  }

  void apply_pivot(int q, int dir, const Ratio& r, const std::vector<double>& y) {
    double delta = dir * r.t;
    if (r.row < 0) {  // bound flip
      for (int i = 0; i < m_; ++i) beta_[i] -= y[i] * delta;
      stat_[q] = (stat_[q] == kAtLower) ? kAtUpper : kAtLower;
      xval_[q] = (stat_[q] == kAtLower) ? lo_[q] : up_[q];
      return;
    }
    int rr = r.row;
    int leaving = basis_[rr];
    double enter_val = xval_[q] + delta;
    for (int i = 0; i < m_; ++i)
      if (i != rr) beta_[i] -= y[i] * delta;

    // Binv <- E * Binv; entries below the drop tolerance cannot move the
    // result above refactorization noise and are skipped
    double piv = y[rr];
    double inv_piv = 1.0 / piv;
    double* row_r = binv_row(rr);
    for (int k = 0; k < m_; ++k) row_r[k] *= inv_piv;
    for (int i = 0; i < m_; ++i) {
      if (i == rr) continue;
      double f = y[i];
      if (std::fabs(f) > 1e-13) kernels::axpy(binv_row(i), row_r, -f, m_);
    }

    basis_[rr] = q;
    beta_[rr] = enter_val;
    stat_[q] = kBasic;
    stat_[leaving] = r.to_upper ? kAtUpper : kAtLower;
    xval_[leaving] = r.to_upper ? up_[leaving] : lo_[leaving];
    if (!std::isfinite(xval_[leaving])) {
      // free basic forced out at a degenerate step; park it at zero
      stat_[leaving] = kFreeNB;
      xval_[leaving] = 0.0;
    }

    // incremental phase-2 reduced-cost row update using old Binv row r is
    // folded into iterate(); here we only track degeneracy
    degen_streak_ = (r.t <= 1e-10) ? degen_streak_ + 1 : 0;
    if (degen_streak_ > 60) bland_ = true;
    if (degen_streak_ == 0) bland_ = false;
  }

  Eigen::PartialPivLU<Eigen::MatrixXd> factor_basis() const {
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(m_, m_);
    for (int i = 0; i < m_; ++i)
      for (auto [k, v] : cols_[basis_[i]]) B(k, i) = v;
    return Eigen::PartialPivLU<Eigen::MatrixXd>(B);
  }

  void refactorize() {
    Eigen::PartialPivLU<Eigen::MatrixXd> lu = factor_basis();
    Eigen::MatrixXd inv = lu.inverse();
    if (!inv.allFinite()) {
      Eigen::MatrixXd B = Eigen::MatrixXd::Zero(m_, m_);
      for (int i = 0; i < m_; ++i)
        for (auto [k, v] : cols_[basis_[i]]) B(k, i) = v;
      Eigen::FullPivLU<Eigen::MatrixXd> flu(B);
      if (!flu.isInvertible()) throw std::runtime_error("singular basis");
      inv = flu.inverse();
    }
    for (int i = 0; i < m_; ++i)
      for (int k = 0; k < m_; ++k) binv_row(i)[k] = inv(i, k);
    recompute_beta();
  }

  // Exact pricing straight from a fresh LU: refreshes beta and dj without
  // paying for a full inverse. Returns the factorization for finalize.
  Eigen::PartialPivLU<Eigen::MatrixXd> exact_prices() {
    Eigen::PartialPivLU<Eigen::MatrixXd> lu = factor_basis();
    Eigen::VectorXd rhs(m_);
    for (int i = 0; i < m_; ++i) rhs[i] = b_[i];
    for (int j = 0; j < nn_; ++j) {
      if (stat_[j] == kBasic || xval_[j] == 0.0) continue;
      for (auto [i, v] : cols_[j]) rhs[i] -= v * xval_[j];
    }
    Eigen::VectorXd xb = lu.solve(rhs);
    for (int i = 0; i < m_; ++i) beta_[i] = xb[i];

    Eigen::VectorXd cb(m_);
    for (int i = 0; i < m_; ++i) cb[i] = cost_[basis_[i]];
    Eigen::VectorXd pi = lu.transpose().solve(cb);
    dj_.assign(nn_, 0.0);
    for (int j = 0; j < nn_; ++j) {
      if (stat_[j] == kBasic) continue;
      double d = cost_[j];
      for (auto [i, v] : cols_[j]) d -= pi[i] * v;
      dj_[j] = d;
    }
    return lu;
  }

  SolveStatus iterate() {
    std::vector<double> y(m_), d1(nn_), pi;
    long since_refactor = 0;
    long since_full_price = 0;

    // ---- phase 1 ----
    while (!primal_feasible()) {
      if (time_up()) throw std::runtime_error("time limit in simplex phase 1");
      std::vector<double> cb(m_, 0.0);
      for (int i = 0; i < m_; ++i) {
        if (below_lower(i)) cb[i] = -1.0;
        else if (above_upper(i)) cb[i] = 1.0;
      }
      btran(cb, pi);
      for (int j = 0; j < nn_; ++j)
        d1[j] = (stat_[j] == kBasic) ? 0.0 : -price_col(j, pi);
      int dir = 0;
      int q = choose_entering(d1, true, &dir);
      if (q < 0) {
        // re-check with a fresh factorization before declaring infeasible
        refactorize();
        if (!primal_feasible()) return SolveStatus::infeasible;
        break;
      }
      ftran(q, y);
      Ratio r = ratio_test(q, dir, y, true);
      if (r.t == kInf)
        throw std::runtime_error("phase-1 ratio test found no blocker");
      apply_pivot(q, dir, r, y);
      ++iters_;
      if (++since_refactor >= 1500) {
        refactorize();
        since_refactor = 0;
      }
    }

    // ---- phase 2 ----
    full_reduced_costs();
    since_full_price = 0;
    while (true) {
      if (time_up()) throw std::runtime_error("time limit in simplex phase 2");
      int dir = 0;
      int q = choose_entering(dj_, false, &dir);
      if (q < 0) {
        // confirm against exact prices from a fresh factorization
        final_lu_ = exact_prices();
        q = choose_entering(dj_, false, &dir);
        if (q < 0) return SolveStatus::optimal;
        final_lu_.reset();
        refactorize();  // drift fooled the maintained prices; resume clean
      }
      ftran(q, y);
      Ratio r = ratio_test(q, dir, y, false);
      if (r.t == kInf) return SolveStatus::unbounded;

      if (r.row >= 0) {
        // pivot-row values against every column, with the pre-pivot Binv row
        const double* row_r = binv_row(r.row);
        double alpha_q = y[r.row];
        double dq = dj_[q];
        double ratio_coef = dq / alpha_q;
        if (std::fabs(alpha_q) < 1e-11)
          throw std::runtime_error("tiny pivot in phase 2");
        std::copy(row_r, row_r + m_, work_row_.data());
        apply_pivot(q, dir, r, y);
        for (int j = 0; j < nn_; ++j) {
          if (stat_[j] == kBasic) { dj_[j] = 0.0; continue; }
          double alpha_j;
          if (j >= n_) alpha_j = work_row_[j - n_];
          else {
            alpha_j = 0.0;
            for (auto [i, v] : cols_[j]) alpha_j += work_row_[i] * v;
          }
          dj_[j] -= ratio_coef * alpha_j;
        }
        dj_[q] = 0.0;
      } else {
        apply_pivot(q, dir, r, y);  // bound flip leaves reduced costs alone
      }
      ++iters_;
      if (++since_refactor >= 1500) {
        refactorize();
        since_refactor = 0;
      }
      if (++since_full_price >= 300) {
        full_reduced_costs();
        since_full_price = 0;
      }
    }
  }

  void finalize(SolveStatus st, LpSolution& sol) {
    sol.status = st;
    if (st != SolveStatus::optimal) {
      if (st == SolveStatus::infeasible) sol.message = "primal infeasible";
      if (st == SolveStatus::unbounded) sol.message = "unbounded";
      return;
    }
    // clean solve of the final basis, reusing the confirmation factorization
    Eigen::PartialPivLU<Eigen::MatrixXd> lu =
        final_lu_.has_value() ? std::move(*final_lu_) : factor_basis();
    final_lu_.reset();

    Eigen::VectorXd rhs(m_);
    for (int i = 0; i < m_; ++i) rhs[i] = b_[i];
    for (int j = 0; j < nn_; ++j) {
      if (stat_[j] == kBasic || xval_[j] == 0.0) continue;
      for (auto [i, v] : cols_[j]) rhs[i] -= v * xval_[j];
    }
    Eigen::VectorXd xb = lu.solve(rhs);

    Eigen::VectorXd cb(m_);
    for (int i = 0; i < m_; ++i) cb[i] = cost_[basis_[i]];
    Eigen::VectorXd pi = lu.transpose().solve(cb);

    std::vector<double> full(nn_);
    for (int j = 0; j < nn_; ++j) full[j] = (stat_[j] == kBasic) ? 0.0 : xval_[j];
    for (int i = 0; i < m_; ++i) full[basis_[i]] = xb[i];

    // clamp hairline bound violations from the refined basic solve
    for (int j = 0; j < nn_; ++j) {
      double btol = 10.0 * bound_tol(full[j]);
      if (full[j] < lo_[j]) {
        if (full[j] < lo_[j] - btol) {
          sol.status = SolveStatus::failed;
          sol.message = "basic value breaches lower bound";
          return;
        }
        full[j] = lo_[j];
      } else if (full[j] > up_[j]) {
        if (full[j] > up_[j] + btol) {
          sol.status = SolveStatus::failed;
          sol.message = "basic value breaches upper bound";
          return;
        }
        full[j] = up_[j];
      }
    }

    sol.x.assign(full.begin(), full.begin() + n_);
    sol.row_duals.assign(m_, 0.0);
    for (int i = 0; i < m_; ++i) sol.row_duals[i] = pi[i];
    sol.reduced_costs.assign(n_, 0.0);
    double obj = 0.0;
    for (int j = 0; j < n_; ++j) obj += cost_[j] * full[j];
    sol.objective = obj;
    for (int j = 0; j < n_; ++j) {
      double d = cost_[j];
      for (auto [i, v] : cols_[j]) d -= pi[i] * v;
      sol.reduced_costs[j] = d;
    }

    // the dual objective must close the gap: pi'b plus bound contributions
    double dual_obj = 0.0;
    for (int i = 0; i < m_; ++i) dual_obj += pi[i] * b_[i];
    for (int j = 0; j < nn_; ++j) {
      if (stat_[j] == kBasic || full[j] == 0.0) continue;
      double d = cost_[j];
      for (auto [i, v] : cols_[j]) d -= pi[i] * v;
      dual_obj += d * full[j];
    }
    if (std::fabs(obj - dual_obj) > 1e-6 * (1.0 + std::fabs(obj))) {
      sol.status = SolveStatus::failed;
      sol.message = "strong duality check failed: primal " +
                    std::to_string(obj) + " dual " + std::to_string(dual_obj);
      return;
    }
    // primal feasibility audit on the refined point, row-relative
    for (int i = 0; i < m_; ++i) {
      double ax = 0.0;
      for (auto [j, v] : lp_.rows[i].terms) ax += v * full[j];
      double resid = 0.0;
      switch (lp_.rows[i].sense) {
        case LinearProgram::Sense::le: resid = ax - lp_.rows[i].rhs; break;
        case LinearProgram::Sense::ge: resid = lp_.rows[i].rhs - ax; break;
        case LinearProgram::Sense::eq: resid = std::fabs(ax - lp_.rows[i].rhs); break;
      }
      if (resid > 100.0 * cfg_.feas_tol * (1.0 + std::fabs(lp_.rows[i].rhs))) {
        sol.status = SolveStatus::failed;
        sol.message = "primal residual " + std::to_string(resid) + " on row " +
                      std::to_string(i);
        return;
      }
    }
  }

};

}  // namespace

LpSolution solve_lp(const LinearProgram& lp, const SolverConfig& cfg) {
  // crossed bounds (a branch-and-bound child can produce them) mean an
  // empty feasible set, not a malformed program
  for (int j = 0; j < lp.num_vars(); ++j) {
    if (lp.lower[j] > lp.upper[j] + 1e-12) {
      LpSolution sol;
      sol.status = SolveStatus::infeasible;
      sol.message = "variable " + std::to_string(j) + " has crossed bounds";
      return sol;
    }
  }
  if (lp.num_rows() == 0) {
    // pure box problem: minimize each cost independently
    LpSolution sol;
    sol.x.resize(lp.num_vars());
    sol.reduced_costs = lp.objective;
    double obj = 0.0;
    for (int j = 0; j < lp.num_vars(); ++j) {
      double c = lp.objective[j];
      double v;
      if (c > 0) v = lp.lower[j];
      else if (c < 0) v = lp.upper[j];
      else v = std::isfinite(lp.lower[j]) ? lp.lower[j]
                                          : (std::isfinite(lp.upper[j]) ? lp.upper[j] : 0.0);
      if (!std::isfinite(v)) {
        sol.status = c == 0.0 ? SolveStatus::optimal : SolveStatus::unbounded;
        if (sol.status == SolveStatus::unbounded) return sol;
        v = 0.0;
      }
      sol.x[j] = v;
      obj += c * v;
    }
    sol.objective = obj;
    sol.status = SolveStatus::optimal;
    return sol;
  }
  Simplex s(lp, cfg);
  return s.run();
}

}  // namespace canopi
