#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nnmip/mip_model.hpp"
#include "nnmip/network.hpp"
#include "nnmip/solver.hpp"

namespace nnmip {

class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GridPhiResult {
  /// Some grid input is strongly classified to m.
  bool any_strong = false;
  /// Smallest 1-norm distance between a strongly classified grid point and a
  /// grid point where >= k classes score >= class m; +inf when there is no pair.
  double estimate = kInf;
  std::vector<double> a;
  std::vector<double> eps;
  /// The estimate overshoots the true minimum by discretisation only; this is
  /// the tolerance used when comparing against exact values.
  double resolution_bound = 0.0;
  std::size_t grid_points = 0;
  std::size_t strong_points = 0;
};

inline constexpr std::size_t kGridMaxInputs = 3;
inline constexpr std::size_t kGridMaxNeurons = 12;

/// Exhaustive scan over a grid of pitch step on the input box using exact forward
/// evaluation only. Parallel over grid points.
GridPhiResult grid_phi(const Network& net, int m, double alpha, int k, double step = 0.01);
/// Single-threaded reference of grid_phi; identical results.
GridPhiResult grid_phi_serial(const Network& net, int m, double alpha, int k, double step = 0.01);

struct EnumerationResult {
  SolveStatus status = SolveStatus::Infeasible;  // Optimal, Infeasible or Unbounded
  double objective = kInf;
  std::optional<Assignment> assignment;
  std::size_t assignments_tried = 0;
  std::size_t lp_failures = 0;
};

inline constexpr std::size_t kEnumerateMaxBinaries = 12;

/// Fixes every 0/1 combination of the binaries and solves the remaining LP.
EnumerationResult enumerate_mip(const MipModel& model);

struct ConsistencyOptions {
  std::uint64_t seed = 1;
  /// Multiplier applied to every big-M before encoding (< 1 corrupts the encoding).
  double big_m_scale = 1.0;
  int atan_segments = 8;
  double tol = 1e-7;
};

struct ConsistencyViolation {
  std::size_t sample = 0;
  std::string row;  // name carries the node coordinates, e.g. l2.n3.x_ub_b
  double amount = 0.0;
};

struct ConsistencyReport {
  std::size_t samples = 0;
  std::vector<ConsistencyViolation> violations;
  bool ok() const { return violations.empty(); }
};

/// Encodes the network body over the input box and checks that the forward
/// trace of random inputs, with phase-consistent binaries, satisfies every row.
ConsistencyReport encoding_consistency(const Network& net, std::size_t samples,
                                       const ConsistencyOptions& options = {});

}  // namespace nnmip
