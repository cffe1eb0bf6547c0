#include "nnmip/encoder.hpp"

#include <algorithm>
#include <cmath>

namespace nnmip {

namespace {

std::string idx(std::size_t i) { return std::to_string(i + 1); }

bool has_atan_layers(const Network& net) {
  return std::any_of(net.layers().begin(), net.layers().end(),
                     [](const Layer& l) { return l.kind == LayerKind::AtanDense; });
}

}  // namespace

VarId encode_affine(MipModel& model, const WeightMatrix& weights, std::size_t i, const std::vector<VarId>& prev,
                    const NodeBounds& node, const std::string& name) {
  if (!node.has_im) throw EncodingError("missing bounds for " + name);
  if (prev.size() != weights.inputs()) throw EncodingError("predecessor count mismatch for " + name);
  const VarId im = model.add_variable(name + ".im", node.im_lo, node.im_hi);
  std::vector<Term> terms{{im, 1.0}};
  for (std::size_t j = 0; j < prev.size(); ++j) {
    const double w = weights(j + 1, i);
    if (w != 0.0) terms.push_back({prev[j], -w});
  }
  model.add_constraint(name + ".affine", std::move(terms), RowSense::Equal, weights.bias(i));
  return im;
}

ReluGadget encode_relu(MipModel& model, VarId im, const NodeBounds& node, const std::string& name) {
  if (!node.has_im || !node.phase) throw EncodingError("missing bounds for ReLU node " + name);
  ReluGadget g;
  g.x = model.add_variable(name + ".x", node.lo, node.hi);
  switch (*node.phase) {
    case Phase::AlwaysActive:
      model.add_constraint(name + ".active", {{g.x, 1.0}, {im, -1.0}}, RowSense::Equal, 0.0);
      return g;
    case Phase::AlwaysInactive:
      model.add_constraint(name + ".inactive", {{g.x, 1.0}}, RowSense::Equal, 0.0);
      return g;
    case Phase::Undecided:
      break;
  }
  const double big_m = node.big_m;
  g.binary = model.add_binary(name + ".b");
  const VarId x = g.x;
  const VarId b = g.binary;
  model.add_constraint(name + ".nonneg", {{x, 1.0}}, RowSense::GreaterEqual, 0.0);
  model.add_constraint(name + ".above_im", {{x, 1.0}, {im, -1.0}}, RowSense::GreaterEqual, 0.0);
  model.add_constraint(name + ".im_ub", {{im, 1.0}, {b, -big_m}}, RowSense::LessEqual, 0.0);
  model.add_constraint(name + ".im_lb", {{im, 1.0}, {b, -big_m}}, RowSense::GreaterEqual, -big_m);
  model.add_constraint(name + ".x_ub_im", {{x, 1.0}, {im, -1.0}, {b, big_m}}, RowSense::LessEqual, big_m);
  model.add_constraint(name + ".x_ub_b", {{x, 1.0}, {b, -big_m}}, RowSense::LessEqual, 0.0);
  return g;
}

PairGadget encode_max_pair(MipModel& model, VarId u, Interval ub, VarId v, Interval vb, const std::string& name) {
  PairGadget g{u, v, -1, -1, {std::max(ub.lo, vb.lo), std::max(ub.hi, vb.hi)}};
  g.y = model.add_variable(name + ".y", g.bounds.lo, g.bounds.hi);
  if (ub.lo >= vb.hi) {
    model.add_constraint(name + ".eq", {{g.y, 1.0}, {u, -1.0}}, RowSense::Equal, 0.0);
    return g;
  }
  if (vb.lo >= ub.hi) {
    model.add_constraint(name + ".eq", {{g.y, 1.0}, {v, -1.0}}, RowSense::Equal, 0.0);
    return g;
  }
  const double big_m = inflate_big_m(std::max(ub.hi - vb.lo, vb.hi - ub.lo));
  g.binary = model.add_binary(name + ".b");
  model.add_constraint(name + ".ge_u", {{g.y, 1.0}, {u, -1.0}}, RowSense::GreaterEqual, 0.0);
  model.add_constraint(name + ".ge_v", {{g.y, 1.0}, {v, -1.0}}, RowSense::GreaterEqual, 0.0);
  model.add_constraint(name + ".le_u", {{g.y, 1.0}, {u, -1.0}, {g.binary, big_m}}, RowSense::LessEqual, big_m);
  model.add_constraint(name + ".le_v", {{g.y, 1.0}, {v, -1.0}, {g.binary, -big_m}}, RowSense::LessEqual, 0.0);
  return g;
}

std::vector<PairGadget> encode_maxpool(MipModel& model, const std::vector<VarId>& operands,
                                       const std::vector<Interval>& bounds, const std::string& name) {
  if (operands.size() != bounds.size()) throw EncodingError("max-pool operand/bound mismatch for " + name);
  std::vector<PairGadget> out;
  if (operands.size() == 2) {
    out.push_back(encode_max_pair(model, operands[0], bounds[0], operands[1], bounds[1], name));
  } else if (operands.size() == 4) {
    out.push_back(encode_max_pair(model, operands[0], bounds[0], operands[1], bounds[1], name + ".p1"));
    out.push_back(encode_max_pair(model, operands[2], bounds[2], operands[3], bounds[3], name + ".p2"));
    out.push_back(encode_max_pair(model, out[0].y, out[0].bounds, out[1].y, out[1].bounds, name));
  } else {
    throw EncodingError("max-pool group of size " + std::to_string(operands.size()) + " in " + name);
  }
  return out;
}

std::vector<RowId> encode_strong_classification(MipModel& model, const std::vector<VarId>& logits, int m,
                                                double alpha, const std::string& name) {
  if (!(alpha >= 1.0)) throw EncodingError("alpha must be at least 1");
  if (m < 1 || static_cast<std::size_t>(m) > logits.size()) throw EncodingError("class index out of range");
  const double margin = std::log(alpha);
  const VarId xm = logits[static_cast<std::size_t>(m - 1)];
  std::vector<RowId> rows;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (static_cast<int>(i) == m - 1) continue;
    rows.push_back(model.add_constraint(name + "." + idx(i), {{xm, 1.0}, {logits[i], -1.0}},
                                        RowSense::GreaterEqual, margin));
  }
  return rows;
}

// ---------------------------------------------------------------------------

std::vector<VarId> NetworkEncoding::outputs(std::size_t l) const {
  if (l + 1 == first) return inputs;
  std::vector<VarId> out;
  for (const auto& n : layers.at(l - first)) out.push_back(n.x);
  return out;
}

std::vector<VarId> NetworkEncoding::binaries(std::size_t l) const {
  std::vector<VarId> out;
  for (const auto& n : layers.at(l - first)) {
    if (n.binary >= 0) out.push_back(n.binary);
    for (const auto& p : n.pairs) {
      if (p.binary >= 0) out.push_back(p.binary);
    }
    out.insert(out.end(), n.atan.segment.begin(), n.atan.segment.end());
  }
  return out;
}

NetworkEncoding encode_network(MipModel& model, const Network& net, const IntervalBounds& bounds,
                               const std::vector<VarId>& inputs, std::size_t first, std::size_t last,
                               const std::string& prefix, int atan_segments) {
  if (first < 1 || last > net.num_layers() || bounds.num_layers() < last) {
    throw EncodingError("encode_network: layer range outside the network or its bounds");
  }
  if (inputs.size() != net.width(first - 1)) throw EncodingError("encode_network: input count mismatch");
  NetworkEncoding enc;
  enc.prefix = prefix;
  enc.first = first;
  enc.last = last;
  enc.inputs = inputs;
  std::vector<VarId> prev = inputs;
  for (std::size_t l = first; l <= last; ++l) {
    const Layer& layer = net.layer(l);
    const std::string lname = prefix + "l" + std::to_string(l);
    std::vector<NodeEncoding> nodes;
    if (is_dense(layer.kind)) {
      nodes.resize(layer.weights.outputs());
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        const NodeBounds& nb = bounds.node(l, i);
        const std::string name = lname + ".n" + idx(i);
        NodeEncoding& ne = nodes[i];
        ne.im = encode_affine(model, layer.weights, i, prev, nb, name);
        switch (layer.kind) {
          case LayerKind::ReluDense: {
            const auto g = encode_relu(model, ne.im, nb, name);
            ne.x = g.x;
            ne.binary = g.binary;
            break;
          }
          case LayerKind::AtanDense:
            ne.atan = encode_atan(model, ne.im, nb, atan_segments, name);
            ne.x = ne.atan.x;
            break;
          default:
            ne.x = ne.im;
            break;
        }
      }
    } else if (layer.kind == LayerKind::MaxPool) {
      for (std::size_t g = 0; g < layer.pool_groups.size(); ++g) {
        std::vector<VarId> ops;
        std::vector<Interval> ivs;
        for (auto j : layer.pool_groups[g]) {
          ops.push_back(prev[j]);
          ivs.push_back(bounds.output(l - 1, j));
        }
        NodeEncoding ne;
        ne.pairs = encode_maxpool(model, ops, ivs, lname + ".g" + idx(g));
        ne.x = ne.pairs.back().y;
        nodes.push_back(std::move(ne));
      }
    } else {
      throw EncodingError("the softmax layer is never encoded");
    }
    prev.clear();
    for (const auto& n : nodes) prev.push_back(n.x);
    enc.layers.push_back(std::move(nodes));
  }
  return enc;
}

void assign_trace(const NetworkEncoding& enc, const Network& net, const ForwardTrace& trace, Assignment& a) {
  auto set = [&](VarId v, double value) {
    if (v >= 0) a.at(static_cast<std::size_t>(v)) = value;
  };
  const auto& in = trace.output(enc.first - 1);
  for (std::size_t j = 0; j < enc.inputs.size(); ++j) set(enc.inputs[j], in[j]);
  for (std::size_t l = enc.first; l <= enc.last; ++l) {
    const Layer& layer = net.layer(l);
    const auto& lt = trace.layers.at(l - 1);
    const auto& nodes = enc.layers.at(l - enc.first);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const NodeEncoding& ne = nodes[i];
      if (is_dense(layer.kind)) {
        const double im = lt.im[i];
        set(ne.im, im);
        set(ne.x, lt.x[i]);
        if (ne.binary >= 0) set(ne.binary, im >= 0.0 ? 1.0 : 0.0);
        const auto& env = ne.atan.envelope;
        if (!ne.atan.lambda.empty()) {
          const std::size_t k = env.segment_of(im);
          for (auto v : ne.atan.lambda) set(v, 0.0);
          for (auto v : ne.atan.segment) set(v, 0.0);
          const double p0 = env.breakpoints[k];
          const double p1 = env.breakpoints[k + 1];
          const double s = std::clamp((im - p0) / (p1 - p0), 0.0, 1.0);
          set(ne.atan.lambda[k], 1.0 - s);
          set(ne.atan.lambda[k + 1], s);
          set(ne.atan.segment[k], 1.0);
        }
      } else {
        // Pool gadgets: operands already hold their values, so walk the pairs in order.
        for (const auto& p : ne.pairs) {
          const double u = a.at(static_cast<std::size_t>(p.u));
          const double v = a.at(static_cast<std::size_t>(p.v));
          set(p.y, std::max(u, v));
          if (p.binary >= 0) set(p.binary, u >= v ? 1.0 : 0.0);
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------

std::string_view to_string(QueryKind kind) {
  switch (kind) {
    case QueryKind::MaxPerturbation: return "max_perturbation";
    case QueryKind::LocalRobustness: return "local_robustness";
    case QueryKind::MaxAlpha: return "max_alpha";
    case QueryKind::StrongInputSearch: return "strong_input_search";
    case QueryKind::FixedInputPerturbation: return "fixed_input_perturbation";
  }
  return "?";
}

void QuerySpec::validate(const Network& net) const {
  if (!net.ends_with_softmax()) throw EncodingError("queries need a network ending in softmax");
  const int classes = static_cast<int>(net.num_classes());
  if (m < 1 || m > classes) {
    throw EncodingError("class " + std::to_string(m) + " outside 1.." + std::to_string(classes));
  }
  if (kind != QueryKind::MaxAlpha && !(alpha >= 1.0 && std::isfinite(alpha))) {
    throw EncodingError("alpha must be a finite value >= 1");
  }
  const bool perturbs = kind == QueryKind::MaxPerturbation || kind == QueryKind::LocalRobustness ||
                        kind == QueryKind::FixedInputPerturbation;
  if (perturbs && (k < 1 || k > classes - 1)) {
    throw EncodingError("k must lie in 1.." + std::to_string(classes - 1));
  }
  if (atan_segments < 2) throw EncodingError("atan_segments must be at least 2");
  if (kind == QueryKind::LocalRobustness || kind == QueryKind::FixedInputPerturbation) {
    if (input.size() != net.input_dim()) throw EncodingError("input vector has the wrong dimension");
    for (std::size_t j = 0; j < input.size(); ++j) {
      if (!net.input_bounds()[j].contains(input[j], 1e-12)) {
        throw EncodingError("input component " + idx(j) + " lies outside the input domain");
      }
    }
  }
  if (kind == QueryKind::LocalRobustness && !(delta >= 0.0 && std::isfinite(delta))) {
    throw EncodingError("delta must be a finite value >= 0");
  }
}

QueryEncoding encode_query(const Network& net, const IntervalBounds& bounds, const QuerySpec& spec) {
  spec.validate(net);
  QueryEncoding q;
  q.spec = spec;
  q.exact = !has_atan_layers(net);
  MipModel& model = q.model;
  const std::size_t d = net.input_dim();
  const std::size_t body_last = net.logit_layer();
  const std::size_t classes = net.num_classes();
  const auto& domain = net.input_bounds();

  const bool needs_a = spec.kind == QueryKind::MaxPerturbation || spec.kind == QueryKind::MaxAlpha ||
                       spec.kind == QueryKind::StrongInputSearch;
  const bool needs_p = spec.kind == QueryKind::MaxPerturbation || spec.kind == QueryKind::LocalRobustness ||
                       spec.kind == QueryKind::FixedInputPerturbation;

  auto encode_body = [&](const std::vector<VarId>& inputs, const std::string& prefix) {
    if (body_last == 0) {
      NetworkEncoding enc;
      enc.prefix = prefix;
      enc.first = 1;
      enc.last = 0;
      enc.inputs = inputs;
      return enc;
    }
    return encode_network(model, net, bounds, inputs, 1, body_last, prefix, spec.atan_segments);
  };

  if (needs_a) {
    for (std::size_t j = 0; j < d; ++j) q.a.push_back(model.add_variable("a." + idx(j), domain[j].lo, domain[j].hi));
    q.unperturbed = encode_body(q.a, "u.");
    const auto logits = q.unperturbed->outputs(body_last);
    if (spec.kind == QueryKind::MaxAlpha) {
      q.t = model.add_variable("t", 0.0, kInf);
      const VarId xm = logits[static_cast<std::size_t>(spec.m - 1)];
      for (std::size_t i = 0; i < classes; ++i) {
        if (static_cast<int>(i) == spec.m - 1) continue;
        model.add_constraint("margin." + idx(i), {{xm, 1.0}, {logits[i], -1.0}, {q.t, -1.0}},
                             RowSense::GreaterEqual, 0.0);
      }
      model.set_objective(ObjSense::Maximize, {{q.t, 1.0}});
    } else {
      encode_strong_classification(model, logits, spec.m, spec.alpha, "strong");
    }
  }

  if (needs_p) {
    std::vector<VarId> p_in;
    for (std::size_t j = 0; j < d; ++j) {
      const double w = domain[j].hi - domain[j].lo;
      q.eps.push_back(model.add_variable("eps." + idx(j), -w, w));
      q.eps_abs.push_back(model.add_variable("epsabs." + idx(j), 0.0, w));
      p_in.push_back(model.add_variable("p.in." + idx(j), domain[j].lo, domain[j].hi));
    }
    for (std::size_t j = 0; j < d; ++j) {
      model.add_constraint("epsabs." + idx(j) + ".pos", {{q.eps_abs[j], 1.0}, {q.eps[j], -1.0}},
                           RowSense::GreaterEqual, 0.0);
      model.add_constraint("epsabs." + idx(j) + ".neg", {{q.eps_abs[j], 1.0}, {q.eps[j], 1.0}},
                           RowSense::GreaterEqual, 0.0);
      if (needs_a) {
        model.add_constraint("perturb." + idx(j), {{p_in[j], 1.0}, {q.a[j], -1.0}, {q.eps[j], -1.0}},
                             RowSense::Equal, 0.0);
      } else {
        model.add_constraint("perturb." + idx(j), {{p_in[j], 1.0}, {q.eps[j], -1.0}}, RowSense::Equal,
                             spec.input[j]);
      }
    }
    q.perturbed = encode_body(p_in, "p.");
    const auto logits = q.perturbed->outputs(body_last);
    const std::size_t mi = static_cast<std::size_t>(spec.m - 1);
    const VarId xm = logits[mi];
    const Interval xm_b = bounds.output(body_last, mi);
    q.selectors.assign(classes, -1);
    std::vector<Term> count;
    for (std::size_t i = 0; i < classes; ++i) {
      if (i == mi) continue;
      const VarId c = model.add_binary("c." + idx(i));
      q.selectors[i] = c;
      count.push_back({c, 1.0});
      const double big_m = inflate_big_m(std::max(0.0, xm_b.hi - bounds.output(body_last, i).lo));
      // x_i >= x_m - M (1 - c_i)
      model.add_constraint("dom." + idx(i), {{logits[i], 1.0}, {xm, -1.0}, {c, -big_m}}, RowSense::GreaterEqual,
                           -big_m);
    }
    model.add_constraint("dominance", std::move(count), RowSense::GreaterEqual, static_cast<double>(spec.k));

    std::vector<Term> l1;
    for (auto v : q.eps_abs) l1.push_back({v, 1.0});
    if (spec.kind == QueryKind::LocalRobustness) {
      model.add_constraint("budget", std::move(l1), RowSense::LessEqual, spec.delta);
    } else {
      model.set_objective(ObjSense::Minimize, std::move(l1));
    }
  }
  return q;
}

Assignment QueryEncoding::assignment_from(const Network& net, const std::vector<double>& a_value,
                                          const std::vector<double>& eps_value) const {
  Assignment out(model.num_variables(), 0.0);
  const std::size_t d = net.input_dim();
  const std::size_t body_last = net.logit_layer();
  std::vector<double> base = a_value;
  if (a.empty() && !spec.input.empty()) base = spec.input;
  if (unperturbed) {
    const ForwardTrace tr = forward(net, base);
    for (std::size_t j = 0; j < a.size(); ++j) out[static_cast<std::size_t>(a[j])] = base[j];
    assign_trace(*unperturbed, net, tr, out);
    if (t >= 0) {
      const auto& logits = tr.output(body_last);
      double margin = kInf;
      for (std::size_t i = 0; i < logits.size(); ++i) {
        if (static_cast<int>(i) != spec.m - 1) margin = std::min(margin, logits[spec.m - 1] - logits[i]);
      }
      out[static_cast<std::size_t>(t)] = margin;
    }
  }
  if (perturbed) {
    std::vector<double> shifted(d);
    for (std::size_t j = 0; j < d; ++j) {
      out[static_cast<std::size_t>(eps[j])] = eps_value[j];
      out[static_cast<std::size_t>(eps_abs[j])] = std::abs(eps_value[j]);
      shifted[j] = base[j] + eps_value[j];
    }
    const ForwardTrace tr = forward(net, shifted);
    assign_trace(*perturbed, net, tr, out);
    const auto& logits = tr.output(body_last);
    const double xm = logits[static_cast<std::size_t>(spec.m - 1)];
    for (std::size_t i = 0; i < selectors.size(); ++i) {
      if (selectors[i] >= 0) out[static_cast<std::size_t>(selectors[i])] = logits[i] >= xm ? 1.0 : 0.0;
    }
  }
  return out;
}

void assign_branch_priorities(QueryEncoding& enc, const Network& net) {
  // Softmax adds no binaries, so the top tier is counted from the logit layer.
  const std::size_t L = net.ends_with_softmax() ? net.logit_layer() : net.num_layers();
  for (const auto* copy : {&enc.unperturbed, &enc.perturbed}) {
    if (!*copy) continue;
    const NetworkEncoding& ne = **copy;
    for (std::size_t l = ne.first; l <= ne.last; ++l) {
      for (auto b : ne.binaries(l)) enc.model.set_branch_priority(b, static_cast<int>(L - l));
    }
  }
  for (auto c : enc.selectors) {
    if (c >= 0) enc.model.set_branch_priority(c, 0);
  }
}

}  // namespace nnmip
