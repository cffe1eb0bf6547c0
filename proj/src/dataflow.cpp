#include "nnmip/dataflow.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

namespace nnmip {

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::AlwaysActive: return "active";
    case Phase::AlwaysInactive: return "inactive";
    case Phase::Undecided: return "undecided";
  }
  return "?";
}

std::size_t IntervalBounds::count_undecided() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) {
    for (const auto& node : layer) n += node.phase == Phase::Undecided;
  }
  return n;
}

double inflate_big_m(double magnitude) { return magnitude * (1.0 + 1e-7) + 1e-9; }

void finish_dense_node(LayerKind kind, NodeBounds& node) {
  node.has_im = true;
  node.big_m = inflate_big_m(std::max(std::abs(node.im_lo), std::abs(node.im_hi)));
  switch (kind) {
    case LayerKind::ReluDense:
      node.lo = std::max(0.0, node.im_lo);
      node.hi = std::max(0.0, node.im_hi);
      if (node.im_lo >= 0.0) node.phase = Phase::AlwaysActive;
      else if (node.im_hi <= 0.0) node.phase = Phase::AlwaysInactive;
      else node.phase = Phase::Undecided;
      break;
    case LayerKind::AtanDense:
      node.lo = std::atan(node.im_lo);
      node.hi = std::atan(node.im_hi);
      break;
    default:
      node.lo = node.im_lo;
      node.hi = node.im_hi;
      break;
  }
}

std::vector<NodeBounds> propagate_layer(const Network& net, const IntervalBounds& bounds, std::size_t l) {
  const Layer& layer = net.layer(l);
  const std::size_t prev = net.width(l - 1);
  std::vector<NodeBounds> out;
  if (is_dense(layer.kind)) {
    const auto& w = layer.weights;
    out.resize(w.outputs());
    for (std::size_t i = 0; i < w.outputs(); ++i) {
      double lo = w.bias(i);
      double hi = w.bias(i);
      for (std::size_t j = 0; j < prev; ++j) {
        const double wij = w(j + 1, i);
        if (wij == 0.0) continue;
        const Interval in = bounds.output(l - 1, j);
        const double a = wij * in.lo;
        const double b = wij * in.hi;
        lo += std::min(a, b);
        hi += std::max(a, b);
      }
      out[i].im_lo = lo;
      out[i].im_hi = hi;
      finish_dense_node(layer.kind, out[i]);
    }
  } else if (layer.kind == LayerKind::MaxPool) {
    for (const auto& g : layer.pool_groups) {
      NodeBounds nb;
      nb.lo = -kInf;
      nb.hi = -kInf;
      for (auto j : g) {
        const Interval in = bounds.output(l - 1, j);
        nb.lo = std::max(nb.lo, in.lo);
        nb.hi = std::max(nb.hi, in.hi);
      }
      out.push_back(nb);
    }
  } else {
    // Softmax: e^{lo_i} / (e^{lo_i} + sum_{j != i} e^{hi_j}) and the symmetric upper bound.
    out.resize(prev);
    for (std::size_t i = 0; i < prev; ++i) {
      const Interval zi = bounds.output(l - 1, i);
      double others_hi = 0.0;
      double others_lo = 0.0;
      for (std::size_t j = 0; j < prev; ++j) {
        if (j == i) continue;
        const Interval zj = bounds.output(l - 1, j);
        others_hi += std::exp(zj.hi - zi.lo);
        others_lo += std::exp(zj.lo - zi.hi);
      }
      out[i].lo = 1.0 / (1.0 + others_hi);
      out[i].hi = 1.0 / (1.0 + others_lo);
    }
  }
  return out;
}

IntervalBounds propagate_intervals(const Network& net, std::vector<Interval> input_box) {
  if (input_box.size() != net.input_dim()) {
    throw std::invalid_argument("propagate_intervals: input box dimension mismatch");
  }
  IntervalBounds bounds(std::move(input_box));
  for (std::size_t l = 1; l <= net.num_layers(); ++l) bounds.push_layer(propagate_layer(net, bounds, l));
  return bounds;
}

IntervalBounds propagate_intervals(const Network& net) {
  return propagate_intervals(net, net.input_bounds());
}

void write_bounds_dump(std::ostream& os, const Network& net, const IntervalBounds& bounds) {
  const auto flags = os.flags();
  const auto prec = os.precision();
  os << "# layer node im_lo im_hi lo hi phase big_m\n";
  os << std::setprecision(17);
  for (std::size_t l = 1; l <= bounds.num_layers(); ++l) {
    const auto kind = net.layer(l).kind;
    const auto& nodes = bounds.layer(l);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const auto& nb = nodes[i];
      os << l << ' ' << i + 1 << ' ';
      if (nb.has_im) os << nb.im_lo << ' ' << nb.im_hi << ' ';
      else os << "- - ";
      os << nb.lo << ' ' << nb.hi << ' ';
      if (nb.phase) os << to_string(*nb.phase);
      else os << (kind == LayerKind::ReluDense ? "undecided" : "-");
      os << ' ';
      if (nb.has_im) os << nb.big_m;
      else os << '-';
      os << '\n';
    }
  }
  os.flags(flags);
  os.precision(prec);
}

}  // namespace nnmip
