#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include "nnmip/dataflow.hpp"
#include "nnmip/network.hpp"
#include "nnmip/solver.hpp"

namespace nnmip {

/// Caller-side input errors (bad class, input not classified as claimed, ...).
class QueryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kDefaultAlpha = 1.1;
inline constexpr int kDefaultK = 2;

struct ResilienceConfig {
  SolveConfig solve;
  /// Lookback tightening before encoding; depth < 2 skips it.
  LookbackConfig lookback;
  bool tighten = true;
  int atan_segments = 8;
  /// Seed the full model with the two cheaper solves and their Phi bound.
  bool warm_start = true;
};

struct ResilienceResult {
  int m = 1;
  double alpha = kDefaultAlpha;
  int k = kDefaultK;

  /// Optimal, Infeasible, FeasibleBound (limit with incumbent) or Limit.
  SolveStatus status = SolveStatus::Limit;
  /// Phi_m; +inf when no violation exists (in particular when no input is strongly classified).
  double phi = kInf;
  /// Proven lower bound on the MIP optimum (equals phi when Optimal).
  double phi_lower = kInf;
  /// Bound from the fixed-input solve; +inf when not available.
  double phi_ini = kInf;
  /// False when no input is strongly classified to m at alpha.
  bool strongly_classifiable = true;
  /// False for networks with atan layers: phi under-approximates the true bound.
  bool exact = true;
  bool warm_started = false;

  std::vector<double> witness_a;
  std::vector<double> witness_eps;
  /// Witness re-checked by exact forward evaluation.
  bool witness_valid = false;

  SolveResult search;  // step 1
  SolveResult initial; // step 2
  SolveResult full;    // step 3
  double wall_time = 0.0;
};

/// Phi_m through the three-step process: find a strongly classified input,
/// bound Phi_m by perturbing only that input, then solve the full model with
/// that solution as warm start and |sum eps| <= Phi_ini as extra rows.
ResilienceResult compute_phi(const Network& net, int m, double alpha = kDefaultAlpha, int k = kDefaultK,
                             const ResilienceConfig& config = {});

struct XiResult {
  std::vector<ResilienceResult> classes;
  /// min over classes of phi; unset when no class admits a violation.
  std::optional<double> xi;
  /// Interval containing the true minimum when some class stopped on a limit.
  double xi_lower = kInf;
  double xi_upper = kInf;
  bool resolved = true;
};

/// Phi_m for every class, solved concurrently. config.solve.workers is split among the classes.
XiResult compute_xi(const Network& net, double alpha = kDefaultAlpha, int k = kDefaultK,
                    const ResilienceConfig& config = {});

enum class Verdict { Robust, Violated, Unknown };

std::string_view to_string(Verdict v);

struct RobustnessResult {
  Verdict verdict = Verdict::Unknown;
  std::vector<double> witness_eps;  // set when Violated
  bool exact = true;
  SolveResult solve;
};

/// Is there eps with ||eps||_1 <= delta and a + eps in the domain for which at
/// least k classes score >= class m? Infeasible means Robust. a must strongly
/// classify to m at alpha.
RobustnessResult check_local_robustness(const Network& net, const std::vector<double>& a, int m, double delta,
                                        int k = kDefaultK, const ResilienceConfig& config = {},
                                        double alpha = 1.0);

struct MaxAlphaResult {
  int m = 1;
  SolveStatus status = SolveStatus::Limit;
  /// e^{t*}; on a limit the incumbent gives a lower bound and the dual bound an upper bound.
  double alpha = 0.0;
  double alpha_upper = kInf;
  double margin = -kInf;  // t*
  std::vector<double> witness_a;
  bool exact = true;
  SolveResult solve;

  /// Class m is never the top score.
  bool never_top() const { return status == SolveStatus::Infeasible; }
};

MaxAlphaResult compute_max_alpha(const Network& net, int m, const ResilienceConfig& config = {});

}  // namespace nnmip
