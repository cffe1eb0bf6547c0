#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nnmip/mip_model.hpp"

namespace nnmip {

// ---------------------------------------------------------------------------
// LP relaxation
// ---------------------------------------------------------------------------

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit, NumericalFailure };

std::string_view to_string(LpStatus status);

struct LpResult {
  LpStatus status = LpStatus::NumericalFailure;
  /// In the model's own objective sense.
  double objective = 0.0;
  /// Structural variable values (size = model.num_variables()).
  std::vector<double> x;
  std::size_t iterations = 0;
};

/// Dense bounded-variable primal simplex over the rows A x - s = 0 with the
/// logical s carrying the row bounds. Infeasible starts are handled by a
/// composite phase 1 that minimises the sum of bound violations of the basic
/// variables, so any basis (in particular the one left by a previous solve)
/// can seed the next solve after bounds change. Dantzig pricing switches to
/// the least-index rule after a streak of degenerate pivots.
class LpEngine {
 public:
  /// Binaries are relaxed to their bounds. The objective sense is taken from the model.
  explicit LpEngine(const MipModel& model);

  std::size_t num_structural() const { return n_; }
  std::size_t num_rows() const { return m_; }

  void set_bounds(VarId var, double lo, double hi);
  void reset_bounds();
  double lower(VarId var) const { return lo_[static_cast<std::size_t>(var)]; }
  double upper(VarId var) const { return hi_[static_cast<std::size_t>(var)]; }

  /// Solves from the current basis.
  LpResult solve();

  /// Pivots performed since construction.
  std::size_t total_iterations() const { return total_iterations_; }

  static constexpr int kDegenerateStreakForBland = 50;

 private:
  enum class Status : unsigned char { Basic, AtLower, AtUpper, Free };

  double* row(std::size_t i) { return tableau_.data() + i * cols_; }
  const double* row(std::size_t i) const { return tableau_.data() + i * cols_; }

  void place_nonbasic_on_bounds();
  void recompute_basic_values();
  void refactor();
  void pivot(std::size_t r, std::size_t q);
  bool verify_solution() const;

  std::size_t m_ = 0;     // rows
  std::size_t n_ = 0;     // structural columns
  std::size_t cols_ = 0;  // n_ + m_
  bool maximize_ = false;

  std::vector<double> original_;  // [A | -I], row-major m x cols
  std::vector<double> tableau_;   // B^{-1} [A | -I]
  std::vector<double> cost_;      // minimisation costs, logicals 0
  std::vector<double> model_lo_, model_hi_;
  std::vector<double> lo_, hi_;
  std::vector<double> value_;
  std::vector<std::size_t> head_;  // basic variable of each row
  std::vector<Status> status_;
  std::size_t pivots_since_refactor_ = 0;
  std::size_t total_iterations_ = 0;
};

/// Solves the LP relaxation of the model (binaries relaxed to [lo, hi]).
LpResult solve_lp(const MipModel& model);

// ---------------------------------------------------------------------------
// Branch and bound
// ---------------------------------------------------------------------------

struct SolveConfig {
  double time_limit = 1e30;  // seconds
  std::size_t node_limit = static_cast<std::size_t>(-1);
  int workers = 1;
  double mip_gap = 1e-6;  // relative
  double int_tol = 1e-6;
  /// With workers == 1 the search order, node counts and answers are reproducible.
  bool deterministic = true;
  /// Seconds between progress lines; 0 disables logging.
  double log_interval = 0.0;
  std::ostream* log = nullptr;

  void validate() const;
};

/// Optimal: search completed and objective within mip_gap of dual_bound.
/// FeasibleBound: a limit stopped the search after an incumbent was found.
/// Limit: a limit stopped the search before any incumbent was found.
enum class SolveStatus { Optimal, Infeasible, FeasibleBound, Unbounded, Limit };

std::string_view to_string(SolveStatus status);

struct SolveResult {
  SolveStatus status = SolveStatus::Limit;
  /// Incumbent objective (model sense); +-inf when there is none.
  double objective = kInf;
  /// Proven bound in the model sense: <= optimum for minimisation, >= for maximisation.
  double dual_bound = -kInf;
  std::optional<Assignment> assignment;
  std::size_t nodes_explored = 0;
  std::size_t lp_iterations = 0;
  double wall_time = 0.0;
  bool warm_start_used = false;
  /// Objective of every accepted incumbent, in acceptance order.
  std::vector<double> incumbent_history;

  bool has_solution() const { return assignment.has_value(); }
  double gap() const;
};

/// Best-bound branch and bound with depth-first plunging. Branches on the
/// fractional binary with the highest priority, then the most fractional,
/// then the lowest id. workers > 1 shares one node pool and incumbent.
SolveResult solve(const MipModel& model, const SolveConfig& config = {});

/// One progress line: nodes=<n> incumbent=<v> bound=<v> gap=<v> time=<s>
std::string format_progress(std::size_t nodes, double incumbent, double bound, double seconds);

}  // namespace nnmip
