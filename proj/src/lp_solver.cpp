#include <algorithm>
#include <cmath>

#include "nnmip/solver.hpp"

namespace nnmip {

namespace {

constexpr double kFeasTol = 1e-9;
constexpr double kOptTol = 1e-9;
constexpr double kPivotTol = 1e-9;
constexpr double kDropTol = 1e-14;
constexpr std::size_t kRefactorEvery = 64;

}  // namespace

std::string_view to_string(LpStatus status) {
  switch (status) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::Infeasible: return "infeasible";
    case LpStatus::Unbounded: return "unbounded";
    case LpStatus::IterationLimit: return "iteration_limit";
    case LpStatus::NumericalFailure: return "numerical_failure";
  }
  return "?";
}

LpEngine::LpEngine(const MipModel& model)
    : m_(model.num_constraints()),
      n_(model.num_variables()),
      cols_(model.num_variables() + model.num_constraints()),
      maximize_(model.objective().sense == ObjSense::Maximize) {
  original_.assign(m_ * cols_, 0.0);
  model_lo_.resize(cols_);
  model_hi_.resize(cols_);
  for (std::size_t j = 0; j < n_; ++j) {
    const auto& v = model.variable(static_cast<VarId>(j));
    model_lo_[j] = v.lo;
    model_hi_[j] = v.hi;
  }
  for (std::size_t i = 0; i < m_; ++i) {
    const auto& c = model.constraint(static_cast<RowId>(i));
    double* orow = original_.data() + i * cols_;
    for (const auto& t : c.terms) orow[t.var] += t.coef;
    orow[n_ + i] = -1.0;
    const std::size_t s = n_ + i;
    switch (c.sense) {
      case RowSense::LessEqual: model_lo_[s] = -kInf; model_hi_[s] = c.rhs; break;
      case RowSense::GreaterEqual: model_lo_[s] = c.rhs; model_hi_[s] = kInf; break;
      case RowSense::Equal: model_lo_[s] = c.rhs; model_hi_[s] = c.rhs; break;
    }
  }
  cost_.assign(cols_, 0.0);
  for (const auto& t : model.objective().terms) cost_[t.var] = maximize_ ? -t.coef : t.coef;
  lo_ = model_lo_;
  hi_ = model_hi_;

  // Slack basis: B = -I, so the tableau starts as [-A | I].
  tableau_.resize(m_ * cols_);
  for (std::size_t k = 0; k < m_ * cols_; ++k) tableau_[k] = -original_[k];
  head_.resize(m_);
  status_.assign(cols_, Status::AtLower);
  value_.assign(cols_, 0.0);
  for (std::size_t i = 0; i < m_; ++i) {
    head_[i] = n_ + i;
    status_[n_ + i] = Status::Basic;
  }
  for (std::size_t j = 0; j < n_; ++j) {
    if (std::isfinite(lo_[j])) status_[j] = Status::AtLower;
    else if (std::isfinite(hi_[j])) status_[j] = Status::AtUpper;
    else status_[j] = Status::Free;
  }
}

void LpEngine::set_bounds(VarId var, double lo, double hi) {
  lo_[static_cast<std::size_t>(var)] = lo;
  hi_[static_cast<std::size_t>(var)] = hi;
}

void LpEngine::reset_bounds() {
  lo_ = model_lo_;
  hi_ = model_hi_;
}

void LpEngine::place_nonbasic_on_bounds() {
  for (std::size_t j = 0; j < cols_; ++j) {
    Status& s = status_[j];
    if (s == Status::Basic) continue;
    const bool has_lo = std::isfinite(lo_[j]);
    const bool has_hi = std::isfinite(hi_[j]);
    if (s == Status::AtUpper && !has_hi) s = has_lo ? Status::AtLower : Status::Free;
    if (s == Status::AtLower && !has_lo) s = has_hi ? Status::AtUpper : Status::Free;
    if (s == Status::Free && (has_lo || has_hi)) s = has_lo ? Status::AtLower : Status::AtUpper;
    switch (s) {
      case Status::AtLower: value_[j] = lo_[j]; break;
      case Status::AtUpper: value_[j] = hi_[j]; break;
      case Status::Free: break;
      case Status::Basic: break;
    }
  }
}

void LpEngine::recompute_basic_values() {
  for (std::size_t i = 0; i < m_; ++i) {
    const double* t = row(i);
    double sum = 0.0;
    for (std::size_t j = 0; j < cols_; ++j) {
      if (status_[j] != Status::Basic && t[j] != 0.0) sum -= t[j] * value_[j];
    }
    value_[head_[i]] = sum;
  }
}

void LpEngine::pivot(std::size_t r, std::size_t q) {
  double* pr = row(r);
  const double inv = 1.0 / pr[q];
  for (std::size_t j = 0; j < cols_; ++j) pr[j] *= inv;
  pr[q] = 1.0;
  for (std::size_t i = 0; i < m_; ++i) {
    if (i == r) continue;
    double* pi = row(i);
    const double f = pi[q];
    if (f == 0.0) continue;
    for (std::size_t j = 0; j < cols_; ++j) {
      if (pr[j] != 0.0) {
        pi[j] -= f * pr[j];
        if (std::abs(pi[j]) < kDropTol) pi[j] = 0.0;
      }
    }
    pi[q] = 0.0;
  }
  ++pivots_since_refactor_;
}

void LpEngine::refactor() {
  tableau_ = original_;
  std::vector<std::size_t> basics(head_);
  std::vector<bool> row_done(m_, false);
  std::vector<std::size_t> new_head(m_, cols_);
  for (auto var : basics) status_[var] = Status::AtLower;  // provisional
  for (auto var : basics) {
    std::size_t best = m_;
    double best_abs = 1e-9;
    for (std::size_t i = 0; i < m_; ++i) {
      if (row_done[i]) continue;
      const double a = std::abs(row(i)[var]);
      if (a > best_abs) {
        best_abs = a;
        best = i;
      }
    }
    if (best == m_) continue;  // dependent column: dropped from the basis
    pivot(best, var);
    row_done[best] = true;
    new_head[best] = var;
    status_[var] = Status::Basic;
  }
  // Repair rows left without a basic variable with the best available logical.
  for (std::size_t i = 0; i < m_; ++i) {
    if (row_done[i]) continue;
    std::size_t best = cols_;
    double best_abs = 0.0;
    for (std::size_t j = n_; j < cols_; ++j) {
      if (status_[j] == Status::Basic) continue;
      const double a = std::abs(row(i)[j]);
      if (a > best_abs) {
        best_abs = a;
        best = j;
      }
    }
    if (best == cols_) {
      for (std::size_t j = 0; j < n_; ++j) {
        if (status_[j] == Status::Basic) continue;
        const double a = std::abs(row(i)[j]);
        if (a > best_abs) {
          best_abs = a;
          best = j;
        }
      }
    }
    pivot(i, best);
    row_done[i] = true;
    new_head[i] = best;
    status_[best] = Status::Basic;
  }
  head_ = new_head;
  // Variables dropped from the basis sit on their nearest bound.
  for (std::size_t j = 0; j < cols_; ++j) {
    if (status_[j] == Status::Basic) continue;
    if (std::find(basics.begin(), basics.end(), j) == basics.end()) continue;
    const double v = value_[j];
    if (std::isfinite(lo_[j]) && (!std::isfinite(hi_[j]) || std::abs(v - lo_[j]) <= std::abs(v - hi_[j]))) {
      status_[j] = Status::AtLower;
    } else if (std::isfinite(hi_[j])) {
      status_[j] = Status::AtUpper;
    } else {
      status_[j] = Status::Free;
    }
  }
  pivots_since_refactor_ = 0;
  place_nonbasic_on_bounds();
  recompute_basic_values();
}

bool LpEngine::verify_solution() const {
  for (std::size_t j = 0; j < cols_; ++j) {
    const double tol = 1e-7 * (1.0 + std::abs(value_[j]));
    if (value_[j] < lo_[j] - tol || value_[j] > hi_[j] + tol) return false;
  }
  for (std::size_t i = 0; i < m_; ++i) {
    const double* o = original_.data() + i * cols_;
    double act = 0.0;
    double scale = 1.0;
    for (std::size_t j = 0; j < n_; ++j) {
      if (o[j] != 0.0) {
        act += o[j] * value_[j];
        scale = std::max(scale, std::abs(o[j] * value_[j]));
      }
    }
    if (std::abs(act - value_[n_ + i]) > 1e-9 * scale + 1e-9) return false;
  }
  return true;
}

LpResult LpEngine::solve() {
  LpResult result;
  place_nonbasic_on_bounds();
  if (pivots_since_refactor_ > 0) refactor();
  else recompute_basic_values();

  const std::size_t max_iter = 20000 + 50 * (m_ + cols_);
  std::size_t iter = 0;
  int degenerate_streak = 0;
  int verify_failures = 0;
  int infeasible_retries = 0;
  std::vector<double> phase_cost(cols_, 0.0);
  std::vector<double> reduced(cols_, 0.0);
  std::vector<double> cb(m_, 0.0);

  while (true) {
    if (iter >= max_iter) {
      result.status = LpStatus::IterationLimit;
      break;
    }
    if (pivots_since_refactor_ >= kRefactorEvery) refactor();

    // Phase selection from the current primal infeasibility.
    bool phase1 = false;
    for (std::size_t i = 0; i < m_; ++i) {
      const std::size_t b = head_[i];
      const double v = value_[b];
      if (v < lo_[b] - kFeasTol) { cb[i] = -1.0; phase1 = true; }
      else if (v > hi_[b] + kFeasTol) { cb[i] = 1.0; phase1 = true; }
      else cb[i] = 0.0;
    }
    if (!phase1) {
      for (std::size_t i = 0; i < m_; ++i) cb[i] = cost_[head_[i]];
    }
    const bool bland = degenerate_streak >= kDegenerateStreakForBland;

    // Pricing.
    for (std::size_t j = 0; j < cols_; ++j) reduced[j] = (phase1 || status_[j] == Status::Basic) ? 0.0 : cost_[j];
    for (std::size_t i = 0; i < m_; ++i) {
      if (cb[i] == 0.0) continue;
      const double* t = row(i);
      for (std::size_t j = 0; j < cols_; ++j) {
        if (t[j] != 0.0) reduced[j] -= cb[i] * t[j];
      }
    }
    std::size_t q = cols_;
    int dir = 0;
    double best = 0.0;
    for (std::size_t j = 0; j < cols_; ++j) {
      const Status s = status_[j];
      if (s == Status::Basic || lo_[j] == hi_[j]) continue;
      const double d = reduced[j];
      int cand = 0;
      if ((s == Status::AtLower || s == Status::Free) && d < -kOptTol) cand = 1;
      else if ((s == Status::AtUpper || s == Status::Free) && d > kOptTol) cand = -1;
      if (cand == 0) continue;
      if (bland) {
        q = j;
        dir = cand;
        break;
      }
      if (std::abs(d) > best) {
        best = std::abs(d);
        q = j;
        dir = cand;
      }
    }

    if (q == cols_) {
      if (phase1) {
        if (infeasible_retries++ == 0 && pivots_since_refactor_ > 0) {
          refactor();
          continue;
        }
        result.status = LpStatus::Infeasible;
        break;
      }
      if (!verify_solution()) {
        if (verify_failures++ < 2) {
          refactor();
          continue;
        }
        result.status = LpStatus::NumericalFailure;
        break;
      }
      result.status = LpStatus::Optimal;
      break;
    }

    // Ratio test. Basic i moves at rate -T[i][q] * dir per unit step.
    double step_limit = (std::isfinite(lo_[q]) && std::isfinite(hi_[q])) ? hi_[q] - lo_[q] : kInf;
    auto ratio = [&](std::size_t i, double relax, double& out, bool& to_upper) -> bool {
      const double alpha = row(i)[q];
      if (std::abs(alpha) <= kPivotTol) return false;
      const double rate = -alpha * dir;
      const std::size_t b = head_[i];
      const double v = value_[b];
      const bool below = v < lo_[b] - kFeasTol;
      const bool above = v > hi_[b] + kFeasTol;
      if (rate > 0) {
        if (below) { out = (lo_[b] - v) / rate; to_upper = false; return true; }
        if (above || !std::isfinite(hi_[b])) return false;
        out = (hi_[b] + relax - v) / rate;
        to_upper = true;
        return true;
      }
      if (above) { out = (hi_[b] - v) / rate; to_upper = true; return true; }
      if (below || !std::isfinite(lo_[b])) return false;
      out = (lo_[b] - relax - v) / rate;
      to_upper = false;
      return true;
    };

    std::size_t r = m_;
    bool leave_upper = false;
    double theta = step_limit;
    if (bland) {
      std::size_t best_var = cols_;
      for (std::size_t i = 0; i < m_; ++i) {
        double t;
        bool up;
        if (!ratio(i, 0.0, t, up)) continue;
        t = std::max(t, 0.0);
        if (t < theta - 1e-12 || (t <= theta + 1e-12 && r != m_ && head_[i] < best_var)) {
          theta = t;
          r = i;
          leave_upper = up;
          best_var = head_[i];
        }
      }
    } else {
      // Harris two-pass: bound the step with relaxed bounds, then take the largest pivot.
      double relaxed = step_limit;
      for (std::size_t i = 0; i < m_; ++i) {
        double t;
        bool up;
        if (ratio(i, kFeasTol, t, up)) relaxed = std::min(relaxed, std::max(t, 0.0));
      }
      double best_alpha = 0.0;
      for (std::size_t i = 0; i < m_; ++i) {
        double t;
        bool up;
        if (!ratio(i, 0.0, t, up)) continue;
        t = std::max(t, 0.0);
        if (t <= relaxed && std::abs(row(i)[q]) > best_alpha) {
          best_alpha = std::abs(row(i)[q]);
          r = i;
          theta = t;
          leave_upper = up;
        }
      }
      if (r != m_ && step_limit <= theta) r = m_, theta = step_limit;
    }

    if (r == m_ && !std::isfinite(theta)) {
      if (phase1) {
        // Cannot happen in exact arithmetic; treat as numerical trouble.
        if (verify_failures++ < 2) {
          refactor();
          continue;
        }
        result.status = LpStatus::NumericalFailure;
      } else {
        result.status = LpStatus::Unbounded;
      }
      break;
    }

    // Apply the step.
    const double delta = theta * dir;
    if (delta != 0.0) {
      for (std::size_t i = 0; i < m_; ++i) {
        const double alpha = row(i)[q];
        if (alpha != 0.0) value_[head_[i]] -= alpha * delta;
      }
      value_[q] += delta;
    }
    degenerate_streak = theta <= 1e-12 ? degenerate_streak + 1 : 0;
    ++iter;
    ++total_iterations_;

    if (r == m_) {
      // Bound flip of the entering variable.
      status_[q] = dir > 0 ? Status::AtUpper : Status::AtLower;
      value_[q] = dir > 0 ? hi_[q] : lo_[q];
      continue;
    }
    const std::size_t leaving = head_[r];
    status_[leaving] = leave_upper ? Status::AtUpper : Status::AtLower;
    value_[leaving] = leave_upper ? hi_[leaving] : lo_[leaving];
    pivot(r, q);
    head_[r] = q;
    status_[q] = Status::Basic;
  }

  result.iterations = iter;
  result.x.assign(value_.begin(), value_.begin() + static_cast<std::ptrdiff_t>(n_));
  if (result.status == LpStatus::Optimal) {
    double obj = 0.0;
    for (std::size_t j = 0; j < n_; ++j) obj += cost_[j] * value_[j];
    result.objective = maximize_ ? -obj : obj;
  } else if (result.status == LpStatus::Unbounded) {
    result.objective = maximize_ ? kInf : -kInf;
  } else if (result.status == LpStatus::Infeasible) {
    result.objective = maximize_ ? -kInf : kInf;
  }
  return result;
}

LpResult solve_lp(const MipModel& model) {
  LpEngine engine(model);
  return engine.solve();
}

}  // namespace nnmip
