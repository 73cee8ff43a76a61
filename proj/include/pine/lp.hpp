#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <vector>

namespace pine::milp::detail {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class LpStatus { Optimal, Infeasible, Unbounded, IterLimit };

struct SparseRow {
  std::vector<int> idx;
  std::vector<double> val;
};

/// min c.x  s.t.  row_i . x + s_i = rhs_i,  s_i in [slack_lo_i, slack_hi_i],  lb <= x <= ub.
/// A "<=" row has slack in [0, inf), ">=" in (-inf, 0], "=" in [0, 0].
struct LpData {
  int n = 0;
  std::vector<double> cost;
  std::vector<SparseRow> rows;
  std::vector<double> rhs;
  std::vector<double> slack_lo;
  std::vector<double> slack_hi;
  std::vector<double> lb;
  std::vector<double> ub;
};

/// Dense-tableau bounded simplex. Primal two-phase from a slack/artificial
/// basis; dual simplex to re-optimise after bound tightening, which is how
/// branch-and-bound children are warm-started from their parent.
class DenseSimplex {
 public:
  explicit DenseSimplex(std::shared_ptr<const LpData> data) : data_(std::move(data)) {
    lb_ = data_->lb;
    ub_ = data_->ub;
    for (std::size_t i = 0; i < data_->rows.size(); ++i) {
      lb_.push_back(data_->slack_lo[i]);
      ub_.push_back(data_->slack_hi[i]);
    }
  }

  int n_structural() const noexcept { return data_->n; }

  /// Cold start: rebuild the tableau for the current bounds and run both phases.
  LpStatus solve() {
    build();
    LpStatus st = primal();
    if (st != LpStatus::Optimal) return status_ = st;
    if (phase1_objective() > 1e-7 * (1.0 + rhs_scale_)) return status_ = LpStatus::Infeasible;
    for (int j = n_real_; j < ncols_; ++j) {
      lb_[j] = 0.0;
      ub_[j] = 0.0;
      if (pos_[j] < 0) value_[j] = 0.0;
    }
    set_costs(false);
    st = primal();
    return status_ = st;
  }

  /// Tighten bounds of a structural variable; call resolve() afterwards.
  void tighten(int var, double lo, double hi) {
    lb_[var] = lo;
    ub_[var] = hi;
    if (!built_) return;
    if (pos_[var] >= 0) return;
    double target = value_[var];
    if (state_[var] == FreeZero) target = initial_value(lo, hi);
    if (target < lo) target = lo;
    if (target > hi) target = hi;
    const double delta = target - value_[var];
    if (delta != 0.0)
      for (int i = 0; i < m_; ++i) beta_[i] -= at(i, var) * delta;
    park(var, target);
  }

  /// Re-optimise after tightening. Falls back to a cold start when the warm
  /// basis is unusable or the dual iterations stall.
  LpStatus resolve() {
    if (!built_ || status_ != LpStatus::Optimal) return solve();
    const LpStatus st = dual();
    if (st == LpStatus::IterLimit) return solve();
    if (st == LpStatus::Optimal && max_row_residual() > 1e-7 * (1.0 + rhs_scale_)) return solve();
    return status_ = st;
  }

  LpStatus status() const noexcept { return status_; }

  std::vector<double> primal_values() const {
    std::vector<double> x(static_cast<std::size_t>(data_->n));
    for (int j = 0; j < data_->n; ++j) x[static_cast<std::size_t>(j)] = column_value(j);
    return x;
  }

  double objective() const {
    double z = 0.0;
    for (int j = 0; j < data_->n; ++j) z += data_->cost[static_cast<std::size_t>(j)] * column_value(j);
    return z;
  }

 private:
  enum : std::int8_t { AtLower, AtUpper, FreeZero, Basic };

  double& at(int i, int j) { return tab_[static_cast<std::size_t>(i) * static_cast<std::size_t>(ncols_) + static_cast<std::size_t>(j)]; }
  double at(int i, int j) const { return tab_[static_cast<std::size_t>(i) * static_cast<std::size_t>(ncols_) + static_cast<std::size_t>(j)]; }

  double column_value(int j) const { return pos_[j] >= 0 ? beta_[pos_[j]] : value_[j]; }

  static double initial_value(double lo, double hi) {
    if (std::isfinite(lo)) return lo;
    if (std::isfinite(hi)) return hi;
    return 0.0;
  }

  void build() {
    const auto& d = *data_;
    m_ = static_cast<int>(d.rows.size());
    n_real_ = d.n + m_;
    lb_.resize(static_cast<std::size_t>(n_real_));
    ub_.resize(static_cast<std::size_t>(n_real_));
    // Residual of each row with every structural variable at its starting bound.
    value_.assign(static_cast<std::size_t>(n_real_), 0.0);
    for (int j = 0; j < d.n; ++j) value_[j] = initial_value(lb_[j], ub_[j]);
    std::vector<double> resid(static_cast<std::size_t>(m_));
    std::vector<int> art_sign(static_cast<std::size_t>(m_), 0);
    rhs_scale_ = 0.0;
    int n_art = 0;
    for (int i = 0; i < m_; ++i) {
      double r = d.rhs[i];
      for (std::size_t k = 0; k < d.rows[i].idx.size(); ++k) r -= d.rows[i].val[k] * value_[d.rows[i].idx[k]];
      resid[i] = r;
      rhs_scale_ = std::max(rhs_scale_, std::abs(d.rhs[i]));
      const int s = d.n + i;
      if (r < lb_[s] - 1e-12 || r > ub_[s] + 1e-12) {
        art_sign[i] = 1;
        ++n_art;
      }
    }
    ncols_ = n_real_ + n_art;
    lb_.resize(static_cast<std::size_t>(ncols_), 0.0);
    ub_.resize(static_cast<std::size_t>(ncols_), kInf);
    value_.resize(static_cast<std::size_t>(ncols_), 0.0);
    tab_.assign(static_cast<std::size_t>(m_) * static_cast<std::size_t>(ncols_), 0.0);
    beta_.assign(static_cast<std::size_t>(m_), 0.0);
    basis_.assign(static_cast<std::size_t>(m_), -1);
    pos_.assign(static_cast<std::size_t>(ncols_), -1);
    state_.assign(static_cast<std::size_t>(ncols_), AtLower);
    for (int j = 0; j < d.n; ++j) {
      state_[j] = std::isfinite(lb_[j]) ? AtLower : (std::isfinite(ub_[j]) ? AtUpper : FreeZero);
    }
    int next_art = n_real_;
    for (int i = 0; i < m_; ++i) {
      for (std::size_t k = 0; k < d.rows[i].idx.size(); ++k) at(i, d.rows[i].idx[k]) += d.rows[i].val[k];
      const int s = d.n + i;
      at(i, s) = 1.0;
      if (art_sign[i] == 0) {
        basis_[i] = s;
        pos_[s] = i;
        state_[s] = Basic;
        beta_[i] = resid[i];
        continue;
      }
      // Slack parks at its violated bound; an artificial column absorbs the rest.
      const double sv = resid[i] < lb_[s] ? lb_[s] : ub_[s];
      value_[s] = sv;
      state_[s] = sv == lb_[s] ? AtLower : AtUpper;
      const double rest = resid[i] - sv;
      const double sign = rest >= 0.0 ? 1.0 : -1.0;
      const int a = next_art++;
      at(i, a) = sign;
      // Normalise the row so the basic artificial has coefficient +1.
      if (sign < 0.0)
        for (int j = 0; j < ncols_; ++j) at(i, j) = -at(i, j);
      basis_[i] = a;
      pos_[a] = i;
      state_[a] = Basic;
      beta_[i] = std::abs(rest);
    }
    built_ = true;
    set_costs(true);
  }

  void set_costs(bool phase1) {
    cost_.assign(static_cast<std::size_t>(ncols_), 0.0);
    if (phase1) {
      for (int j = n_real_; j < ncols_; ++j) cost_[j] = 1.0;
    } else {
      for (int j = 0; j < data_->n; ++j) cost_[j] = data_->cost[j];
    }
    dj_ = cost_;
    for (int i = 0; i < m_; ++i) {
      const double cb = cost_[basis_[i]];
      if (cb == 0.0) continue;
      const double* row = &tab_[static_cast<std::size_t>(i) * static_cast<std::size_t>(ncols_)];
      for (int j = 0; j < ncols_; ++j) dj_[j] -= cb * row[j];
    }
  }

  double phase1_objective() const {
    double z = 0.0;
    for (int j = n_real_; j < ncols_; ++j) z += column_value(j);
    return z;
  }

  double max_row_residual() const {
    const auto& d = *data_;
    double worst = 0.0;
    for (int i = 0; i < m_; ++i) {
      double r = column_value(d.n + i) - d.rhs[i];
      for (std::size_t k = 0; k < d.rows[i].idx.size(); ++k) r += d.rows[i].val[k] * column_value(d.rows[i].idx[k]);
      worst = std::max(worst, std::abs(r));
    }
    return worst;
  }

  void pivot(int r, int q) {
    double* prow = &tab_[static_cast<std::size_t>(r) * static_cast<std::size_t>(ncols_)];
    const double piv = prow[q];
    const double inv = 1.0 / piv;
    for (int j = 0; j < ncols_; ++j) prow[j] *= inv;
    prow[q] = 1.0;
    for (int i = 0; i < m_; ++i) {
      if (i == r) continue;
      double* row = &tab_[static_cast<std::size_t>(i) * static_cast<std::size_t>(ncols_)];
      const double f = row[q];
      if (f == 0.0) continue;
      for (int j = 0; j < ncols_; ++j) row[j] -= f * prow[j];
      row[q] = 0.0;
    }
    const double fd = dj_[q];
    if (fd != 0.0) {
      for (int j = 0; j < ncols_; ++j) dj_[j] -= fd * prow[j];
      dj_[q] = 0.0;
    }
    const int leaving = basis_[r];
    pos_[leaving] = -1;
    basis_[r] = q;
    pos_[q] = r;
    state_[q] = Basic;
  }

  void park(int j, double v) {
    value_[j] = v;
    if (std::isfinite(lb_[j]) && v == lb_[j]) state_[j] = AtLower;
    else if (std::isfinite(ub_[j]) && v == ub_[j]) state_[j] = AtUpper;
    else state_[j] = FreeZero;
  }

  LpStatus primal() {
    const long max_iter = 50L * (m_ + ncols_) + 1000;
    int degenerate_run = 0;
    for (long it = 0; it < max_iter; ++it) {
      const bool bland = degenerate_run > 50;
      int q = -1;
      double best = 0.0;
      double dir = 0.0;
      for (int j = 0; j < ncols_; ++j) {
        const auto st = state_[j];
        if (st == Basic || lb_[j] == ub_[j]) continue;
        const double d = dj_[j];
        double cand_dir = 0.0;
        if (st == AtLower && d < -opt_tol_) cand_dir = 1.0;
        else if (st == AtUpper && d > opt_tol_) cand_dir = -1.0;
        else if (st == FreeZero && std::abs(d) > opt_tol_) cand_dir = d < 0 ? 1.0 : -1.0;
        if (cand_dir == 0.0) continue;
        if (bland) {
          q = j;
          dir = cand_dir;
          break;
        }
        if (std::abs(d) > best) {
          best = std::abs(d);
          q = j;
          dir = cand_dir;
        }
      }
      if (q < 0) return LpStatus::Optimal;

      // Harris two-pass ratio test.
      const double own = (std::isfinite(ub_[q]) && std::isfinite(lb_[q])) ? ub_[q] - lb_[q] : kInf;
      double relaxed = own;
      for (int i = 0; i < m_; ++i) {
        const double a = dir * at(i, q);
        const int b = basis_[i];
        if (a > piv_tol_ && std::isfinite(lb_[b])) relaxed = std::min(relaxed, (beta_[i] - lb_[b] + feas_tol_) / a);
        else if (a < -piv_tol_ && std::isfinite(ub_[b])) relaxed = std::min(relaxed, (ub_[b] - beta_[i] + feas_tol_) / -a);
      }
      if (std::isinf(relaxed)) return LpStatus::Unbounded;
      int r = -1;
      double r_alpha = 0.0;
      double step = own;
      for (int i = 0; i < m_; ++i) {
        const double a = dir * at(i, q);
        const int b = basis_[i];
        double ratio = kInf;
        if (a > piv_tol_ && std::isfinite(lb_[b])) ratio = (beta_[i] - lb_[b]) / a;
        else if (a < -piv_tol_ && std::isfinite(ub_[b])) ratio = (ub_[b] - beta_[i]) / -a;
        else continue;
        if (ratio <= relaxed && std::abs(a) > std::abs(r_alpha)) {
          r = i;
          r_alpha = a;
          step = std::max(ratio, 0.0);
        }
      }
      if (r < 0 || own <= step) {
        // Bound flip of the entering variable.
        step = own;
        for (int i = 0; i < m_; ++i) beta_[i] -= dir * step * at(i, q);
        park(q, dir > 0 ? ub_[q] : lb_[q]);
        degenerate_run = 0;
        continue;
      }
      degenerate_run = step < 1e-12 ? degenerate_run + 1 : 0;
      const int leaving = basis_[r];
      const double entering_value = value_[q] + dir * step;
      for (int i = 0; i < m_; ++i) beta_[i] -= dir * step * at(i, q);
      const double leave_to = r_alpha > 0 ? lb_[leaving] : ub_[leaving];
      pivot(r, q);
      beta_[r] = entering_value;
      park(leaving, leave_to);
    }
    return LpStatus::IterLimit;
  }

  LpStatus dual() {
    const long max_iter = 20L * (m_ + ncols_) + 1000;
    for (long it = 0; it < max_iter; ++it) {
      int r = -1;
      double worst = feas_tol_;
      double target = 0.0;
      for (int i = 0; i < m_; ++i) {
        const int b = basis_[i];
        const double below = lb_[b] - beta_[i];
        const double above = beta_[i] - ub_[b];
        if (below > worst) {
          worst = below;
          r = i;
          target = lb_[b];
        } else if (above > worst) {
          worst = above;
          r = i;
          target = ub_[b];
        }
      }
      if (r < 0) return LpStatus::Optimal;
      const bool increase = beta_[r] < target;
      // Entering j moving by delta_j changes beta_r by -T_rj * delta_j.
      double relaxed = kInf;
      auto eligible = [&](int j, double& dir) {
        const auto st = state_[j];
        if (st == Basic || lb_[j] == ub_[j]) return false;
        const double a = at(r, j);
        if (std::abs(a) <= piv_tol_) return false;
        const double want = increase ? -1.0 : 1.0;  // sign of a * dir needed
        if (st == AtLower) dir = 1.0;
        else if (st == AtUpper) dir = -1.0;
        else dir = (want * a > 0) ? 1.0 : -1.0;
        return a * dir * want > 0;
      };
      for (int j = 0; j < ncols_; ++j) {
        double dir;
        if (!eligible(j, dir)) continue;
        relaxed = std::min(relaxed, (std::abs(dj_[j]) + opt_tol_) / std::abs(at(r, j)));
      }
      if (std::isinf(relaxed)) return LpStatus::Infeasible;
      int q = -1;
      double best_a = 0.0;
      for (int j = 0; j < ncols_; ++j) {
        double dir;
        if (!eligible(j, dir)) continue;
        const double a = std::abs(at(r, j));
        if (std::abs(dj_[j]) / a <= relaxed && a > best_a) {
          best_a = a;
          q = j;
        }
      }
      const double delta = (beta_[r] - target) / at(r, q);
      const int leaving = basis_[r];
      for (int i = 0; i < m_; ++i) beta_[i] -= at(i, q) * delta;
      const double entering_value = value_[q] + delta;
      pivot(r, q);
      beta_[r] = entering_value;
      park(leaving, target);
    }
    return LpStatus::IterLimit;
  }

  std::shared_ptr<const LpData> data_;
  int m_ = 0;
  int n_real_ = 0;
  int ncols_ = 0;
  bool built_ = false;
  LpStatus status_ = LpStatus::IterLimit;
  double rhs_scale_ = 0.0;
  std::vector<double> tab_;
  std::vector<double> beta_;
  std::vector<double> value_;
  std::vector<double> lb_;
  std::vector<double> ub_;
  std::vector<double> cost_;
  std::vector<double> dj_;
  std::vector<int> basis_;
  std::vector<int> pos_;
  std::vector<std::int8_t> state_;

  static constexpr double feas_tol_ = 1e-9;
  static constexpr double opt_tol_ = 1e-9;
  static constexpr double piv_tol_ = 1e-9;
};

}  // namespace pine::milp::detail
