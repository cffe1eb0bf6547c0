#include "nnmip/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "nnmip/dataflow.hpp"
#include "nnmip/encoder.hpp"

namespace nnmip {

namespace {

constexpr double kGridSlack = 1e-12;

struct Grid {
  std::size_t d = 0;
  std::vector<std::size_t> counts;  // points per axis
  std::vector<double> lo, pitch;
  std::size_t total = 1;

  std::vector<double> point(std::size_t index) const {
    std::vector<double> p(d);
    for (std::size_t j = 0; j < d; ++j) {
      const std::size_t c = index % counts[j];
      index /= counts[j];
      p[j] = lo[j] + static_cast<double>(c) * pitch[j];
    }
    return p;
  }
};

Grid make_grid(const Network& net, double step) {
  if (!(step > 0.0)) throw OracleError("grid step must be positive");
  if (net.input_dim() > kGridMaxInputs) throw OracleError("grid oracle limited to 3 inputs");
  std::size_t neurons = 0;
  for (std::size_t l = 1; l <= net.num_layers(); ++l) {
    if (net.layer(l).kind != LayerKind::Softmax) neurons += net.width(l);
  }
  if (neurons > kGridMaxNeurons) throw OracleError("grid oracle limited to 12 neurons");
  if (!net.ends_with_softmax()) throw OracleError("grid oracle needs a network ending in softmax");
  Grid g;
  g.d = net.input_dim();
  for (const auto& b : net.input_bounds()) {
    const auto n = static_cast<std::size_t>(std::max(1.0, std::round((b.hi - b.lo) / step)));
    g.counts.push_back(b.hi > b.lo ? n + 1 : 1);
    g.lo.push_back(b.lo);
    g.pitch.push_back(b.hi > b.lo ? (b.hi - b.lo) / static_cast<double>(n) : 0.0);
    g.total *= g.counts.back();
  }
  return g;
}

struct Classified {
  std::vector<std::vector<double>> strong;
  std::vector<std::vector<double>> dominated;
};

void classify_point(const Network& net, const std::vector<double>& p, int m, double alpha, int k, bool& strong,
                    bool& dominated) {
  const auto trace = forward(net, p);
  const auto& logits = trace.output(net.logit_layer());
  strong = strongly_classifies_logits(logits, m, alpha, kGridSlack);
  dominated = count_dominating(logits, m, kGridSlack) >= k;
}

GridPhiResult finish(const Grid& g, const Classified& c, std::size_t best_s, std::size_t best_d, double best) {
  GridPhiResult r;
  r.grid_points = g.total;
  r.strong_points = c.strong.size();
  r.any_strong = !c.strong.empty();
  double max_pitch = 0.0;
  for (double p : g.pitch) max_pitch = std::max(max_pitch, p);
  r.resolution_bound = 2.0 * static_cast<double>(g.d) * max_pitch;
  if (std::isfinite(best)) {
    r.estimate = best;
    r.a = c.strong[best_s];
    r.eps.resize(g.d);
    for (std::size_t j = 0; j < g.d; ++j) r.eps[j] = c.dominated[best_d][j] - r.a[j];
  }
  return r;
}

double l1(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += std::abs(a[j] - b[j]);
  return s;
}

}  // namespace

GridPhiResult grid_phi_serial(const Network& net, int m, double alpha, int k, double step) {
  const Grid g = make_grid(net, step);
  Classified c;
  for (std::size_t i = 0; i < g.total; ++i) {
    const auto p = g.point(i);
    bool s, dom;
    classify_point(net, p, m, alpha, k, s, dom);
    if (s) c.strong.push_back(p);
    if (dom) c.dominated.push_back(p);
  }
  double best = kInf;
  std::size_t bs = 0, bd = 0;
  for (std::size_t i = 0; i < c.strong.size(); ++i) {
    for (std::size_t j = 0; j < c.dominated.size(); ++j) {
      const double dist = l1(c.strong[i], c.dominated[j]);
      if (dist < best) {
        best = dist;
        bs = i;
        bd = j;
      }
    }
  }
  return finish(g, c, bs, bd, best);
}

GridPhiResult grid_phi(const Network& net, int m, double alpha, int k, double step) {
  const Grid g = make_grid(net, step);
  const auto total = static_cast<long>(g.total);
  std::vector<unsigned char> strong(g.total), dominated(g.total);
#pragma omp parallel for schedule(static)
  for (long i = 0; i < total; ++i) {
    bool s, dom;
    classify_point(net, g.point(static_cast<std::size_t>(i)), m, alpha, k, s, dom);
    strong[static_cast<std::size_t>(i)] = s;
    dominated[static_cast<std::size_t>(i)] = dom;
  }
  Classified c;
  for (std::size_t i = 0; i < g.total; ++i) {
    if (strong[i]) c.strong.push_back(g.point(i));
    if (dominated[i]) c.dominated.push_back(g.point(i));
  }
  // Per strong point, nearest dominated point; reduce keeping the serial tie order.
  const auto ns = static_cast<long>(c.strong.size());
  std::vector<double> near(c.strong.size(), kInf);
  std::vector<std::size_t> near_idx(c.strong.size(), 0);
#pragma omp parallel for schedule(dynamic, 64)
  for (long i = 0; i < ns; ++i) {
    const auto& a = c.strong[static_cast<std::size_t>(i)];
    double best = kInf;
    std::size_t bj = 0;
    for (std::size_t j = 0; j < c.dominated.size(); ++j) {
      const double dist = l1(a, c.dominated[j]);
      if (dist < best) {
        best = dist;
        bj = j;
      }
    }
    near[static_cast<std::size_t>(i)] = best;
    near_idx[static_cast<std::size_t>(i)] = bj;
  }
  double best = kInf;
  std::size_t bs = 0, bd = 0;
  for (std::size_t i = 0; i < near.size(); ++i) {
    if (near[i] < best) {
      best = near[i];
      bs = i;
      bd = near_idx[i];
    }
  }
  return finish(g, c, bs, bd, best);
}

EnumerationResult enumerate_mip(const MipModel& model) {
  std::vector<VarId> binaries;
  for (std::size_t j = 0; j < model.num_variables(); ++j) {
    if (model.variable(static_cast<VarId>(j)).type == Integrality::Binary) binaries.push_back(static_cast<VarId>(j));
  }
  if (binaries.size() > kEnumerateMaxBinaries) throw OracleError("enumerate_mip limited to 12 binaries");
  const bool maximize = model.objective().sense == ObjSense::Maximize;
  EnumerationResult r;
  r.objective = maximize ? -kInf : kInf;
  bool unbounded = false;
  const std::size_t combos = std::size_t{1} << binaries.size();
  for (std::size_t mask = 0; mask < combos; ++mask) {
    MipModel fixed = model;
    bool skip = false;
    for (std::size_t b = 0; b < binaries.size(); ++b) {
      const double v = (mask >> b) & 1U ? 1.0 : 0.0;
      const auto& var = model.variable(binaries[b]);
      if (v < var.lo || v > var.hi) {
        skip = true;
        break;
      }
      fixed.set_variable_bounds(binaries[b], v, v);
    }
    if (skip) continue;
    ++r.assignments_tried;
    const LpResult lp = solve_lp(fixed);
    if (lp.status == LpStatus::Unbounded) {
      unbounded = true;
    } else if (lp.status == LpStatus::Optimal) {
      const bool better = maximize ? lp.objective > r.objective : lp.objective < r.objective;
      if (better) {
        r.objective = lp.objective;
        r.assignment = lp.x;
        for (std::size_t b = 0; b < binaries.size(); ++b) {
          (*r.assignment)[static_cast<std::size_t>(binaries[b])] = (mask >> b) & 1U ? 1.0 : 0.0;
        }
      }
    } else if (lp.status != LpStatus::Infeasible) {
      ++r.lp_failures;
    }
  }
  if (unbounded) {
    r.status = SolveStatus::Unbounded;
    r.objective = maximize ? kInf : -kInf;
  } else {
    r.status = r.assignment ? SolveStatus::Optimal : SolveStatus::Infeasible;
  }
  return r;
}

ConsistencyReport encoding_consistency(const Network& net, std::size_t samples, const ConsistencyOptions& options) {
  IntervalBounds bounds = propagate_intervals(net);
  const std::size_t last = net.ends_with_softmax() ? net.num_layers() - 1 : net.num_layers();
  for (std::size_t l = 1; l <= last; ++l) {
    for (auto& nb : bounds.layer(l)) nb.big_m *= options.big_m_scale;
  }
  MipModel model;
  std::vector<VarId> inputs;
  for (std::size_t j = 0; j < net.input_dim(); ++j) {
    const auto& b = net.input_bounds()[j];
    inputs.push_back(model.add_variable("in." + std::to_string(j + 1), b.lo, b.hi));
  }
  NetworkEncoding enc;
  enc.inputs = inputs;
  enc.first = 1;
  enc.last = 0;
  if (last >= 1) enc = encode_network(model, net, bounds, inputs, 1, last, "", options.atan_segments);

  std::mt19937_64 rng(options.seed);
  std::vector<std::vector<double>> points(samples);
  for (auto& p : points) {
    for (const auto& b : net.input_bounds()) p.push_back(std::uniform_real_distribution<double>(b.lo, b.hi)(rng));
  }
  std::vector<std::vector<ConsistencyViolation>> found(samples);
  const auto n = static_cast<long>(samples);
#pragma omp parallel for schedule(dynamic, 16)
  for (long s = 0; s < n; ++s) {
    const auto trace = forward(net, points[static_cast<std::size_t>(s)]);
    Assignment a(model.num_variables(), 0.0);
    assign_trace(enc, net, trace, a);
    for (const auto& v : find_violations(model, a, options.tol)) {
      found[static_cast<std::size_t>(s)].push_back({static_cast<std::size_t>(s), v.name, v.amount});
    }
  }
  ConsistencyReport report;
  report.samples = samples;
  for (auto& f : found) report.violations.insert(report.violations.end(), f.begin(), f.end());
  return report;
}

}  // namespace nnmip
