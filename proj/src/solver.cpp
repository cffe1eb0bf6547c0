#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <mutex>
#include <ostream>
#include <queue>
#include <stdexcept>
#include <thread>

#include "nnmip/solver.hpp"

namespace nnmip {

std::string_view to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::FeasibleBound: return "feasible_bound";
    case SolveStatus::Unbounded: return "unbounded";
    case SolveStatus::Limit: return "limit";
  }
  return "?";
}

void SolveConfig::validate() const {
  if (workers < 1) throw std::invalid_argument("workers must be at least 1");
  if (!(mip_gap >= 0.0)) throw std::invalid_argument("mip_gap must be non-negative");
  if (!(int_tol > 0.0 && int_tol < 0.5)) throw std::invalid_argument("int_tol must lie in (0, 0.5)");
  if (!(time_limit > 0.0)) throw std::invalid_argument("time_limit must be positive");
  if (log_interval < 0.0) throw std::invalid_argument("log_interval must be non-negative");
}

double SolveResult::gap() const {
  if (!std::isfinite(objective) || !std::isfinite(dual_bound)) return kInf;
  return std::abs(objective - dual_bound) / std::max(1.0, std::abs(objective));
}

std::string format_progress(std::size_t nodes, double incumbent, double bound, double seconds) {
  double gap = kInf;
  if (std::isfinite(incumbent) && std::isfinite(bound)) {
    gap = std::abs(incumbent - bound) / std::max(1.0, std::abs(incumbent));
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "nodes=%zu incumbent=%.6g bound=%.6g gap=%.6g time=%.3f", nodes, incumbent,
                bound, gap, seconds);
  return buf;
}

namespace {

using Clock = std::chrono::steady_clock;

struct Node {
  double bound;  // internal (minimisation) LP bound inherited from the parent
  std::uint64_t seq;
  std::vector<std::pair<VarId, unsigned char>> fixes;
};

struct NodeOrder {
  bool operator()(const Node& a, const Node& b) const {
    if (a.bound != b.bound) return a.bound > b.bound;
    return a.seq > b.seq;
  }
};

class BranchAndBound {
 public:
  BranchAndBound(const MipModel& model, const SolveConfig& config)
      : model_(model), config_(config), sign_(model.objective().sense == ObjSense::Maximize ? -1.0 : 1.0) {
    for (std::size_t j = 0; j < model.num_variables(); ++j) {
      if (model.variable(static_cast<VarId>(j)).type == Integrality::Binary) {
        binaries_.push_back(static_cast<VarId>(j));
      }
    }
    priority_.reserve(binaries_.size());
    for (auto v : binaries_) priority_.push_back(model.branch_priority(v));
  }

  SolveResult run() {
    start_ = Clock::now();
    last_log_ = start_;
    SolveResult result;
    if (const auto& ws = model_.warm_start(); ws && check_feasible(model_, *ws, config_.int_tol)) {
      accept_incumbent(sign_ * model_.objective_value(*ws), *ws);
      result.warm_start_used = true;
    }
    pool_.push(Node{-kInf, next_seq_++, {}});

    const int workers = config_.workers;
    if (workers == 1) {
      worker();
    } else {
      std::vector<std::thread> threads;
      threads.reserve(static_cast<std::size_t>(workers));
      for (int w = 0; w < workers; ++w) threads.emplace_back([this] { worker(); });
      for (auto& t : threads) t.join();
    }

    result.nodes_explored = nodes_.load();
    result.lp_iterations = lp_iterations_.load();
    result.wall_time = elapsed();
    result.incumbent_history.reserve(history_.size());
    for (double v : history_) result.incumbent_history.push_back(sign_ * v);

    double bound = std::min(incumbent_, pruned_bound_);
    while (!pool_.empty()) {
      bound = std::min(bound, pool_.top().bound);
      pool_.pop();
    }
    const bool have = incumbent_assignment_.has_value();
    if (unbounded_) {
      result.status = SolveStatus::Unbounded;
      bound = -kInf;
    } else if (stopped_ || incomplete_) {
      result.status = have ? SolveStatus::FeasibleBound : SolveStatus::Limit;
    } else {
      result.status = have ? SolveStatus::Optimal : SolveStatus::Infeasible;
    }
    result.objective = sign_ * incumbent_;
    result.dual_bound = sign_ * bound;
    result.assignment = incumbent_assignment_;
    if (config_.log && config_.log_interval > 0.0) {
      *config_.log << format_progress(result.nodes_explored, result.objective, result.dual_bound, result.wall_time)
                   << '\n';
    }
    return result;
  }

 private:
  double elapsed() const { return std::chrono::duration<double>(Clock::now() - start_).count(); }

  double cutoff() const {
    const double inc = incumbent_relaxed_.load(std::memory_order_relaxed);
    if (!std::isfinite(inc)) return kInf;
    return inc - config_.mip_gap * std::max(1.0, std::abs(inc)) - 1e-9;
  }

  void accept_incumbent(double value, const Assignment& a) {
    std::lock_guard lock(incumbent_mutex_);
    if (value >= incumbent_) return;
    incumbent_ = value;
    incumbent_assignment_ = a;
    incumbent_relaxed_.store(value, std::memory_order_relaxed);
    history_.push_back(value);
  }

  void note_pruned(double bound) {
    std::lock_guard lock(incumbent_mutex_);
    pruned_bound_ = std::min(pruned_bound_, bound);
  }

  bool limit_reached() const {
    return nodes_.load() >= config_.node_limit || elapsed() >= config_.time_limit;
  }

  void maybe_log() {
    if (!config_.log || config_.log_interval <= 0.0) return;
    std::lock_guard lock(log_mutex_);
    const auto now = Clock::now();
    if (std::chrono::duration<double>(now - last_log_).count() < config_.log_interval) return;
    last_log_ = now;
    double bound;
    {
      std::lock_guard plock(pool_mutex_);
      bound = pool_.empty() ? incumbent_relaxed_.load() : pool_.top().bound;
    }
    *config_.log << format_progress(nodes_.load(), sign_ * incumbent_relaxed_.load(), sign_ * bound, elapsed())
                 << '\n';
  }

  void push_node(Node node) {
    std::lock_guard lock(pool_mutex_);
    node.seq = next_seq_++;
    pool_.push(std::move(node));
    pool_cv_.notify_one();
  }

  void worker() {
    LpEngine engine(model_);
    while (true) {
      Node node;
      {
        std::unique_lock lock(pool_mutex_);
        pool_cv_.wait(lock, [&] { return stopped_ || !pool_.empty() || active_ == 0; });
        if (stopped_ || pool_.empty()) {
          pool_cv_.notify_all();
          return;
        }
        node = pool_.top();
        pool_.pop();
        ++active_;
      }
      plunge(engine, std::move(node));
      {
        std::lock_guard lock(pool_mutex_);
        --active_;
        pool_cv_.notify_all();
      }
    }
  }

  void apply_fixes(LpEngine& engine, const Node& node) {
    engine.reset_bounds();
    for (const auto& [var, v] : node.fixes) engine.set_bounds(var, v, v);
  }

  // Fractional binary to branch on, or -1 if every binary is integral within tol.
  int select_branch(const LpEngine& engine, const std::vector<double>& x, double tol) const {
    int best = -1;
    double best_frac = 0.0;
    int best_prio = 0;
    for (std::size_t k = 0; k < binaries_.size(); ++k) {
      const VarId v = binaries_[k];
      if (engine.lower(v) == engine.upper(v)) continue;
      const double val = x[static_cast<std::size_t>(v)];
      const double frac = std::min(val - std::floor(val), std::ceil(val) - val);
      if (frac <= tol) continue;
      const int prio = priority_[k];
      if (best < 0 || prio > best_prio || (prio == best_prio && frac > best_frac + 1e-12)) {
        best = static_cast<int>(k);
        best_prio = prio;
        best_frac = frac;
      }
    }
    return best;
  }

  void plunge(LpEngine& engine, Node current) {
    while (true) {
      if (limit_reached()) {
        std::lock_guard lock(pool_mutex_);
        stopped_ = true;
        pool_.push(std::move(current));
        pool_cv_.notify_all();
        return;
      }
      {
        std::lock_guard lock(pool_mutex_);
        if (stopped_) {
          pool_.push(std::move(current));
          return;
        }
      }
      if (current.bound >= cutoff()) {
        note_pruned(current.bound);
        return;
      }
      apply_fixes(engine, current);
      const LpResult lp = engine.solve();
      nodes_.fetch_add(1);
      lp_iterations_.fetch_add(lp.iterations);
      maybe_log();

      if (lp.status == LpStatus::Infeasible) return;
      if (lp.status == LpStatus::Unbounded) {
        std::lock_guard lock(pool_mutex_);
        unbounded_ = true;
        stopped_ = true;
        pool_cv_.notify_all();
        return;
      }
      const bool lp_ok = lp.status == LpStatus::Optimal;
      const double z = lp_ok ? std::max(current.bound, sign_ * lp.objective) : current.bound;
      if (lp_ok && z >= cutoff()) {
        note_pruned(z);
        return;
      }

      int k = lp_ok ? select_branch(engine, lp.x, config_.int_tol) : -1;
      if (!lp_ok) {
        // No usable relaxation: branch on the first free binary by priority.
        std::vector<double> half(model_.num_variables(), 0.5);
        k = select_branch(engine, half, 0.0);
        if (k < 0) {
          std::lock_guard lock(incumbent_mutex_);
          incomplete_ = true;
          pruned_bound_ = std::min(pruned_bound_, z);
          return;
        }
      }
      if (k < 0) {
        if (try_integral(engine, current, lp)) return;
        k = select_branch(engine, lp.x, 0.0);
        if (k < 0) return;
      }

      const VarId var = binaries_[static_cast<std::size_t>(k)];
      const double val = lp_ok ? lp.x[static_cast<std::size_t>(var)] : 0.5;
      const unsigned char near = val >= 0.5 ? 1 : 0;
      Node other{z, 0, current.fixes};
      other.fixes.emplace_back(var, static_cast<unsigned char>(1 - near));
      push_node(std::move(other));
      current.bound = z;
      current.fixes.emplace_back(var, near);
    }
  }

  // Fixes every binary at its rounded value and re-solves for exact continuous values.
  bool try_integral(LpEngine& engine, const Node& node, const LpResult& lp) {
    for (auto v : binaries_) {
      const double r = std::round(lp.x[static_cast<std::size_t>(v)]);
      engine.set_bounds(v, r, r);
    }
    const LpResult fixed = engine.solve();
    lp_iterations_.fetch_add(fixed.iterations);
    apply_fixes(engine, node);
    if (fixed.status != LpStatus::Optimal) return false;
    Assignment a = fixed.x;
    for (auto v : binaries_) a[static_cast<std::size_t>(v)] = std::round(a[static_cast<std::size_t>(v)]);
    if (!check_feasible(model_, a, 1e-6)) return false;
    accept_incumbent(sign_ * model_.objective_value(a), a);
    return true;
  }

  const MipModel& model_;
  const SolveConfig& config_;
  const double sign_;
  std::vector<VarId> binaries_;
  std::vector<int> priority_;

  Clock::time_point start_;
  std::mutex log_mutex_;
  Clock::time_point last_log_;

  std::mutex pool_mutex_;
  std::condition_variable pool_cv_;
  std::priority_queue<Node, std::vector<Node>, NodeOrder> pool_;
  std::uint64_t next_seq_ = 0;
  int active_ = 0;
  bool stopped_ = false;
  bool unbounded_ = false;

  std::mutex incumbent_mutex_;
  double incumbent_ = kInf;
  std::atomic<double> incumbent_relaxed_{kInf};
  std::optional<Assignment> incumbent_assignment_;
  std::vector<double> history_;
  double pruned_bound_ = kInf;
  bool incomplete_ = false;

  std::atomic<std::size_t> nodes_{0};
  std::atomic<std::size_t> lp_iterations_{0};
};

}  // namespace

SolveResult solve(const MipModel& model, const SolveConfig& config) {
  config.validate();
  BranchAndBound bb(model, config);
  return bb.run();
}

}  // namespace nnmip
