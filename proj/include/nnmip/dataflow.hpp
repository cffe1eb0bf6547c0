#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string_view>
#include <vector>

#include "nnmip/network.hpp"
#include "nnmip/solver.hpp"

namespace nnmip {

enum class Phase { AlwaysActive, AlwaysInactive, Undecided };

std::string_view to_string(Phase phase);

/// Bounds for one network node (l, i).
struct NodeBounds {
  double lo = 0.0;
  double hi = 0.0;
  /// Bounds of the intermediate value im; only set for dense layers.
  double im_lo = 0.0;
  double im_hi = 0.0;
  bool has_im = false;
  /// ReLU nodes only.
  std::optional<Phase> phase;
  /// Dense nodes only: bounds |im| with a small outward inflation.
  double big_m = 0.0;

  Interval x() const { return {lo, hi}; }
  Interval im() const { return {im_lo, im_hi}; }
};

class IntervalBounds {
 public:
  IntervalBounds() = default;
  explicit IntervalBounds(std::vector<Interval> input) : input_(std::move(input)) {}

  const std::vector<Interval>& input() const { return input_; }
  std::size_t num_layers() const { return layers_.size(); }

  /// Output interval of node i in layer l (l = 0 is the input layer).
  Interval output(std::size_t l, std::size_t i) const {
    return l == 0 ? input_.at(i) : layers_.at(l - 1).at(i).x();
  }
  const NodeBounds& node(std::size_t l, std::size_t i) const { return layers_.at(l - 1).at(i); }
  NodeBounds& node(std::size_t l, std::size_t i) { return layers_.at(l - 1).at(i); }
  const std::vector<NodeBounds>& layer(std::size_t l) const { return layers_.at(l - 1); }
  std::vector<NodeBounds>& layer(std::size_t l) { return layers_.at(l - 1); }

  void push_layer(std::vector<NodeBounds> nodes) { layers_.push_back(std::move(nodes)); }
  void truncate(std::size_t num_layers) { layers_.resize(num_layers); }

  std::size_t count_undecided() const;

 private:
  std::vector<Interval> input_;
  std::vector<std::vector<NodeBounds>> layers_;
};

/// M with a tiny outward inflation so -M <= im and x <= M hold under rounding.
double inflate_big_m(double magnitude);

/// Recomputes x bounds, ReLU phase and big-M of a dense node from its im bounds.
void finish_dense_node(LayerKind kind, NodeBounds& node);

/// Interval image of layer l given bounds of layers < l.
std::vector<NodeBounds> propagate_layer(const Network& net, const IntervalBounds& bounds, std::size_t l);

/// Interval arithmetic through the whole network, starting from the input box.
IntervalBounds propagate_intervals(const Network& net);
IntervalBounds propagate_intervals(const Network& net, std::vector<Interval> input_box);

struct LookbackConfig {
  /// Number of preceding layers each sub-problem spans. 1 reproduces plain propagation.
  int depth = 2;
  /// Budget for every per-bound sub-MIP.
  SolveConfig solve = default_lookback_solve_config();
  /// Segments per half interval for atan envelopes inside the windows.
  int atan_segments = 8;
  /// Run the per-node sub-MIPs of one layer on OpenMP threads.
  bool parallel = true;

  static SolveConfig default_lookback_solve_config();
};

struct LookbackStats {
  std::size_t subproblems = 0;
  std::size_t adopted = 0;   // sub-MIPs that ended Optimal and were used
  std::size_t improved = 0;  // bounds that actually shrank
};

/// Tightens im bounds by maximising and minimising each dense node over a window
/// of preceding layers. Only bounds from sub-MIPs solved to optimality are
/// adopted; results are intersected with the incoming bounds.
IntervalBounds tighten_lookback(const Network& net, const IntervalBounds& bounds,
                                const LookbackConfig& config, LookbackStats* stats = nullptr);

/// Plain-text dump: one line per node with layer, node, im_lo, im_hi, lo, hi, phase, big_m.
void write_bounds_dump(std::ostream& os, const Network& net, const IntervalBounds& bounds);

}  // namespace nnmip
