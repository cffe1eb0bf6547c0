#include <algorithm>
#include <cmath>

#include "nnmip/dataflow.hpp"
#include "nnmip/encoder.hpp"

namespace nnmip {

SolveConfig LookbackConfig::default_lookback_solve_config() {
  SolveConfig cfg;
  cfg.node_limit = 10000;
  cfg.workers = 1;
  return cfg;
}

namespace {

struct BoundPair {
  std::optional<double> lo;
  std::optional<double> hi;
  std::size_t solved = 0;
};

// Optimises im of node i of layer l over the window of layers start+1..l-1.
BoundPair solve_window(const Network& net, const IntervalBounds& bounds, std::size_t l, std::size_t i,
                       std::size_t start, const LookbackConfig& config) {
  MipModel model;
  std::vector<VarId> inputs;
  for (std::size_t j = 0; j < net.width(start); ++j) {
    const Interval b = bounds.output(start, j);
    inputs.push_back(model.add_variable("w.in." + std::to_string(j + 1), b.lo, b.hi));
  }
  std::vector<VarId> prev = inputs;
  if (start + 1 <= l - 1) {
    const auto enc = encode_network(model, net, bounds, inputs, start + 1, l - 1, "w.", config.atan_segments);
    prev = enc.outputs(l - 1);
  }
  const auto& w = net.layer(l).weights;
  std::vector<Term> expr;
  for (std::size_t j = 0; j < prev.size(); ++j) {
    if (w(j + 1, i) != 0.0) expr.push_back({prev[j], w(j + 1, i)});
  }
  const double bias = w.bias(i);

  BoundPair out;
  for (ObjSense sense : {ObjSense::Maximize, ObjSense::Minimize}) {
    model.set_objective(sense, expr);
    const SolveResult r = solve(model, config.solve);
    ++out.solved;
    if (r.status != SolveStatus::Optimal || !std::isfinite(r.dual_bound)) continue;
    const double v = r.dual_bound + bias;
    const double pad = 1e-7 * std::max(1.0, std::abs(v));
    if (sense == ObjSense::Maximize) out.hi = v + pad;
    else out.lo = v - pad;
  }
  return out;
}

}  // namespace

IntervalBounds tighten_lookback(const Network& net, const IntervalBounds& bounds, const LookbackConfig& config,
                                LookbackStats* stats) {
  if (config.depth < 1) throw std::invalid_argument("lookback depth must be at least 1");
  LookbackStats local;
  IntervalBounds out(bounds.input());
  for (std::size_t l = 1; l <= net.num_layers(); ++l) {
    // Re-propagate from the tightened predecessors, never widening the incoming bounds.
    std::vector<NodeBounds> nodes = propagate_layer(net, out, l);
    const auto& old = bounds.layer(l);
    const LayerKind kind = net.layer(l).kind;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i].has_im) {
        nodes[i].im_lo = std::max(nodes[i].im_lo, old[i].im_lo);
        nodes[i].im_hi = std::min(nodes[i].im_hi, old[i].im_hi);
        finish_dense_node(kind, nodes[i]);
      } else {
        nodes[i].lo = std::max(nodes[i].lo, old[i].lo);
        nodes[i].hi = std::min(nodes[i].hi, old[i].hi);
      }
    }

    const std::size_t depth = static_cast<std::size_t>(config.depth);
    const std::size_t start = l > depth ? l - depth : 0;
    if (is_dense(kind) && start + 1 < l) {
      const auto n = static_cast<long>(nodes.size());
      std::vector<BoundPair> results(nodes.size());
#pragma omp parallel for schedule(dynamic) if (config.parallel)
      for (long i = 0; i < n; ++i) {
        results[static_cast<std::size_t>(i)] = solve_window(net, out, l, static_cast<std::size_t>(i), start, config);
      }
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        auto& nb = nodes[i];
        const auto& r = results[i];
        local.subproblems += r.solved;
        const double before = nb.im_hi - nb.im_lo;
        if (r.hi) {
          ++local.adopted;
          nb.im_hi = std::min(nb.im_hi, *r.hi);
        }
        if (r.lo) {
          ++local.adopted;
          nb.im_lo = std::max(nb.im_lo, *r.lo);
        }
        if (nb.im_lo > nb.im_hi) {
          // Rounding on a (near) constant node: collapse to the midpoint.
          const double mid = 0.5 * (nb.im_lo + nb.im_hi);
          nb.im_lo = nb.im_hi = mid;
        }
        if (nb.im_hi - nb.im_lo < before) ++local.improved;
        finish_dense_node(kind, nb);
      }
    }
    out.push_layer(std::move(nodes));
  }
  if (stats) *stats = local;
  return out;
}

}  // namespace nnmip
