#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "nnmip/dataflow.hpp"
#include "nnmip/mip_model.hpp"
#include "nnmip/network.hpp"

namespace nnmip {

class EncodingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Single-node gadgets
// ---------------------------------------------------------------------------

/// im = bias + sum_j w_ji x_j as one equality row (im - sum w x = bias). Returns the im variable.
VarId encode_affine(MipModel& model, const WeightMatrix& weights, std::size_t i, const std::vector<VarId>& prev,
                    const NodeBounds& node, const std::string& name);

struct ReluGadget {
  VarId x = -1;
  VarId binary = -1;  // -1 when the phase is decided
};

/// x = max(0, im). Decided phases collapse to x = im or x = 0; otherwise six
/// big-M rows with one binary b (b = 1 iff im >= 0).
ReluGadget encode_relu(MipModel& model, VarId im, const NodeBounds& node, const std::string& name);

struct PairGadget {
  VarId u = -1;
  VarId v = -1;
  VarId y = -1;
  VarId binary = -1;  // b = 1 selects u; -1 when one operand dominates
  Interval bounds;    // of y
};

/// y = max(u, v) with one binary, or y = u (resp. v) when LO(u) >= UP(v) (resp. LO(v) >= UP(u)).
PairGadget encode_max_pair(MipModel& model, VarId u, Interval ub, VarId v, Interval vb, const std::string& name);

/// Max over a group of 2 or 4 operands; 4-groups become max(max(x1, x2), max(x3, x4)).
/// The last gadget's y is the group output.
std::vector<PairGadget> encode_maxpool(MipModel& model, const std::vector<VarId>& operands,
                                       const std::vector<Interval>& bounds, const std::string& name);

/// x_m - x_i >= ln(alpha) for every i != m (m is 1-based). Returns the row ids.
std::vector<RowId> encode_strong_classification(MipModel& model, const std::vector<VarId>& logits, int m,
                                                double alpha, const std::string& name);

// ---------------------------------------------------------------------------
// atan envelope
// ---------------------------------------------------------------------------

/// Worst-case gap between atan and its quadratic approximation on [-1, 1].
inline constexpr double kAtanApproxError = 0.0038;
inline constexpr double kAtanQuadCoef = 0.273;

/// (pi/4) t + 0.273 t (1 - |t|), the approximation of atan on [-1, 1].
double atan_quadratic(double t);
/// Quadratic approximation extended to the real line through atan(p) = sign(p) pi/2 - atan(1/p).
double atan_approx(double p);

/// Piecewise-linear envelope of atan over [lo, hi]. Breakpoints are the interval
/// ends plus a grid with pitch 1/segments on [-1, 1] and a grid uniform in 1/p
/// (segments pieces) outside. On segment k, atan lies within the chord of
/// atan_approx through the segment ends, widened by half_width[k].
struct AtanEnvelope {
  std::vector<double> breakpoints;  // increasing, >= 1 entry
  std::vector<double> values;       // atan_approx at each breakpoint
  std::vector<double> half_width;   // per segment: approximation error + chord gap

  std::size_t num_segments() const { return breakpoints.size() - 1; }
  /// Segment containing p (clamped to the interval).
  std::size_t segment_of(double p) const;
  /// [lower, upper] of the envelope at p.
  Interval at(double p) const;
};

AtanEnvelope make_atan_envelope(double lo, double hi, int segments);

/// Chord gap bound of atan_approx over one segment [p, q] that does not cross 0 or +-1.
double atan_chord_gap(double p, double q);

struct AtanGadget {
  VarId x = -1;
  AtanEnvelope envelope;
  std::vector<VarId> lambda;   // one per breakpoint; empty for a single segment
  std::vector<VarId> segment;  // one binary per segment; empty for a single segment
};

/// Envelope rows bounding x = atan(im). Multi-segment intervals use a
/// lambda formulation with one selector binary per segment.
AtanGadget encode_atan(MipModel& model, VarId im, const NodeBounds& node, int segments, const std::string& name);

// ---------------------------------------------------------------------------
// Network copies
// ---------------------------------------------------------------------------

struct NodeEncoding {
  VarId im = -1;
  VarId x = -1;
  VarId binary = -1;               // ReLU
  std::vector<PairGadget> pairs;   // MaxPool
  AtanGadget atan;                 // AtanDense
};

/// Variables of layers first..last of one network copy. inputs hold the
/// variables standing for the outputs of layer first - 1.
struct NetworkEncoding {
  std::string prefix;
  std::size_t first = 1;
  std::size_t last = 0;
  std::vector<VarId> inputs;
  std::vector<std::vector<NodeEncoding>> layers;

  const NodeEncoding& node(std::size_t l, std::size_t i) const { return layers.at(l - first).at(i); }
  /// Output variables of layer l, first - 1 <= l <= last.
  std::vector<VarId> outputs(std::size_t l) const;
  /// Every binary created for layer l.
  std::vector<VarId> binaries(std::size_t l) const;
};

/// Encodes layers first..last (dense, max-pool; softmax is rejected) on top
/// of the given input variables. Variable names start with prefix.
NetworkEncoding encode_network(MipModel& model, const Network& net, const IntervalBounds& bounds,
                               const std::vector<VarId>& inputs, std::size_t first, std::size_t last,
                               const std::string& prefix, int atan_segments = 8);

/// Writes the values of a forward trace into the variables of enc, with
/// ReLU binaries b = 1 iff im >= 0, pool binaries per the realised maximum
/// and atan selectors on the segment containing im.
void assign_trace(const NetworkEncoding& enc, const Network& net, const ForwardTrace& trace, Assignment& a);

// ---------------------------------------------------------------------------
// Queries
// ---------------------------------------------------------------------------

enum class QueryKind {
  MaxPerturbation,         // min ||eps||_1 over strongly classified a with >= k competitors at a + eps
  LocalRobustness,         // fixed a, is there eps with ||eps||_1 <= delta and >= k competitors
  MaxAlpha,                // max t with x_m - x_i >= t for all i != m
  StrongInputSearch,       // any a strongly classified to m at alpha
  FixedInputPerturbation,  // fixed a, min ||eps||_1 with >= k competitors
};

std::string_view to_string(QueryKind kind);

struct QuerySpec {
  QueryKind kind = QueryKind::MaxPerturbation;
  int m = 1;           // 1-based class
  double alpha = 1.1;  // >= 1
  int k = 2;           // 1 <= k <= classes - 1
  std::vector<double> input;  // LocalRobustness and FixedInputPerturbation
  double delta = 0.0;         // LocalRobustness
  int atan_segments = 8;

  /// Throws EncodingError when a parameter is out of range for net.
  void validate(const Network& net) const;
};

struct QueryEncoding {
  MipModel model;
  QuerySpec spec;
  std::optional<NetworkEncoding> unperturbed;  // copy at a, prefix "u."
  std::optional<NetworkEncoding> perturbed;    // copy at a + eps, prefix "p."
  std::vector<VarId> a;        // empty when a is a constant
  std::vector<VarId> eps;
  std::vector<VarId> eps_abs;
  std::vector<VarId> selectors;  // c_i per class (0-based), -1 at m
  VarId t = -1;
  /// False when the network has atan layers: the model relaxes the network.
  bool exact = true;

  /// Complete assignment from exact forward evaluation at a and a + eps.
  /// Selectors are set to 1 exactly for the classes dominating m at a + eps.
  Assignment assignment_from(const Network& net, const std::vector<double>& a_value,
                             const std::vector<double>& eps_value) const;
};

/// Builds the MIP of the query. bounds must be sound for every input the
/// copies can take (the whole domain, or the delta box for fixed inputs).
QueryEncoding encode_query(const Network& net, const IntervalBounds& bounds, const QuerySpec& spec);

/// Binaries of layer l get priority (L - l), L counting the layers below any softmax; class selectors get 0.
void assign_branch_priorities(QueryEncoding& enc, const Network& net);

}  // namespace nnmip
