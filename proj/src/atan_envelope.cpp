#include <algorithm>
#include <cmath>
#include <numbers>

#include "nnmip/encoder.hpp"

namespace nnmip {

namespace {

constexpr double kQuarterPi = std::numbers::pi / 4.0;
// |A''| on [-1, 1] is 2 * 0.273; beyond it A'' = (1.638 - 2 c1 p) / p^4 with c1 = pi/4 + 0.273.
constexpr double kInnerCurvature = 2.0 * kAtanQuadCoef;
constexpr double kOuterC1 = kQuarterPi + kAtanQuadCoef;

double outer_curvature_bound(double p, double q) {
  // 1 <= p < q: |A''| <= (2 c1 q - 1.638) / p^4 on [p, q].
  return (2.0 * kOuterC1 * q - 6.0 * kAtanQuadCoef) / (p * p * p * p);
}

}  // namespace

double atan_quadratic(double t) { return kQuarterPi * t + kAtanQuadCoef * t * (1.0 - std::abs(t)); }

double atan_approx(double p) {
  if (std::abs(p) <= 1.0) return atan_quadratic(p);
  const double half_pi = p > 0 ? std::numbers::pi / 2.0 : -std::numbers::pi / 2.0;
  return half_pi - atan_quadratic(1.0 / p);
}

double atan_chord_gap(double p, double q) {
  if (q < p) std::swap(p, q);
  const double h = q - p;
  if (h <= 0.0) return 0.0;
  const double ap = std::abs(p);
  const double aq = std::abs(q);
  double curvature = 0.0;
  // Part of the segment inside [-1, 1].
  if (std::min(ap, aq) < 1.0 || p * q < 0.0) curvature = kInnerCurvature;
  // Part outside: the bound is monotone in both ends, so use the innermost and outermost magnitudes.
  if (std::max(ap, aq) > 1.0) {
    const double inner = p * q < 0.0 ? 1.0 : std::max(1.0, std::min(ap, aq));
    curvature = std::max(curvature, outer_curvature_bound(inner, std::max(ap, aq)));
  }
  return curvature * h * h / 8.0;
}

std::size_t AtanEnvelope::segment_of(double p) const {
  if (breakpoints.size() < 2) return 0;
  const auto it = std::upper_bound(breakpoints.begin() + 1, breakpoints.end() - 1, p);
  return static_cast<std::size_t>(it - breakpoints.begin()) - 1;
}

Interval AtanEnvelope::at(double p) const {
  if (breakpoints.size() == 1) return {values[0] - kAtanApproxError, values[0] + kAtanApproxError};
  const std::size_t k = segment_of(p);
  const double p0 = breakpoints[k];
  const double p1 = breakpoints[k + 1];
  const double s = std::clamp((p - p0) / (p1 - p0), 0.0, 1.0);
  const double chord = values[k] + s * (values[k + 1] - values[k]);
  return {chord - half_width[k], chord + half_width[k]};
}

AtanEnvelope make_atan_envelope(double lo, double hi, int segments) {
  if (!std::isfinite(lo) || !std::isfinite(hi)) throw EncodingError("atan envelope needs a bounded interval");
  if (lo > hi) throw EncodingError("atan envelope: lower bound above upper bound");
  if (segments < 2) throw EncodingError("atan envelope needs at least 2 segments");

  std::vector<double> grid;
  for (int k = -segments; k <= segments; ++k) grid.push_back(static_cast<double>(k) / segments);
  if (hi > 1.0) {
    const double u_end = 1.0 / hi;
    for (int j = 1; j < segments; ++j) grid.push_back(1.0 / (1.0 - j * (1.0 - u_end) / segments));
  }
  if (lo < -1.0) {
    const double u_end = 1.0 / -lo;
    for (int j = 1; j < segments; ++j) grid.push_back(-1.0 / (1.0 - j * (1.0 - u_end) / segments));
  }

  AtanEnvelope env;
  env.breakpoints.push_back(lo);
  std::sort(grid.begin(), grid.end());
  const double merge = 1e-9 * std::max(1.0, hi - lo);
  for (double g : grid) {
    if (g > lo + merge && g < hi - merge) env.breakpoints.push_back(g);
  }
  if (hi > lo) env.breakpoints.push_back(hi);

  for (double p : env.breakpoints) env.values.push_back(atan_approx(p));
  for (std::size_t k = 0; k + 1 < env.breakpoints.size(); ++k) {
    env.half_width.push_back(kAtanApproxError + atan_chord_gap(env.breakpoints[k], env.breakpoints[k + 1]));
  }
  return env;
}

AtanGadget encode_atan(MipModel& model, VarId im, const NodeBounds& node, int segments, const std::string& name) {
  if (!node.has_im) throw EncodingError("missing bounds for atan node " + name);
  AtanGadget g;
  g.envelope = make_atan_envelope(node.im_lo, node.im_hi, segments);
  const auto& env = g.envelope;
  g.x = model.add_variable(name + ".x", node.lo, node.hi);

  if (env.breakpoints.size() == 1) {
    const double v = env.values[0];
    model.add_constraint(name + ".env_ub", {{g.x, 1.0}}, RowSense::LessEqual, v + kAtanApproxError);
    model.add_constraint(name + ".env_lb", {{g.x, 1.0}}, RowSense::GreaterEqual, v - kAtanApproxError);
    return g;
  }
  if (env.num_segments() == 1) {
    const double p0 = env.breakpoints[0];
    const double s = (env.values[1] - env.values[0]) / (env.breakpoints[1] - p0);
    const double c = env.values[0] - s * p0;
    const double w = env.half_width[0];
    model.add_constraint(name + ".env_ub", {{g.x, 1.0}, {im, -s}}, RowSense::LessEqual, c + w);
    model.add_constraint(name + ".env_lb", {{g.x, 1.0}, {im, -s}}, RowSense::GreaterEqual, c - w);
    return g;
  }

  const std::size_t n = env.breakpoints.size();
  const std::size_t segs = env.num_segments();
  for (std::size_t j = 0; j < n; ++j) g.lambda.push_back(model.add_variable(name + ".lam." + std::to_string(j + 1), 0.0, 1.0));
  for (std::size_t k = 0; k < segs; ++k) g.segment.push_back(model.add_binary(name + ".seg." + std::to_string(k + 1)));

  std::vector<Term> sum_lambda, sum_seg, link{{im, 1.0}}, upper{{g.x, 1.0}}, lower{{g.x, 1.0}};
  for (std::size_t j = 0; j < n; ++j) {
    sum_lambda.push_back({g.lambda[j], 1.0});
    link.push_back({g.lambda[j], -env.breakpoints[j]});
    upper.push_back({g.lambda[j], -env.values[j]});
    lower.push_back({g.lambda[j], -env.values[j]});
  }
  for (std::size_t k = 0; k < segs; ++k) {
    sum_seg.push_back({g.segment[k], 1.0});
    upper.push_back({g.segment[k], -env.half_width[k]});
    lower.push_back({g.segment[k], env.half_width[k]});
  }
  model.add_constraint(name + ".lam_sum", std::move(sum_lambda), RowSense::Equal, 1.0);
  model.add_constraint(name + ".seg_sum", std::move(sum_seg), RowSense::Equal, 1.0);
  model.add_constraint(name + ".link", std::move(link), RowSense::Equal, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<Term> adj{{g.lambda[j], 1.0}};
    if (j > 0) adj.push_back({g.segment[j - 1], -1.0});
    if (j < segs) adj.push_back({g.segment[j], -1.0});
    model.add_constraint(name + ".adj." + std::to_string(j + 1), std::move(adj), RowSense::LessEqual, 0.0);
  }
  model.add_constraint(name + ".env_ub", std::move(upper), RowSense::LessEqual, 0.0);
  model.add_constraint(name + ".env_lb", std::move(lower), RowSense::GreaterEqual, 0.0);
  return g;
}

}  // namespace nnmip
