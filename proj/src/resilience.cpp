#include "nnmip/resilience.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>

#include "nnmip/encoder.hpp"

namespace nnmip {

namespace {

constexpr double kWitnessSlack = 1e-7;

IntervalBounds prepare_bounds(const Network& net, std::vector<Interval> box, const ResilienceConfig& config) {
  IntervalBounds bounds = propagate_intervals(net, std::move(box));
  if (config.tighten && config.lookback.depth >= 2) bounds = tighten_lookback(net, bounds, config.lookback);
  return bounds;
}

std::vector<double> values_of(const Assignment& a, const std::vector<VarId>& vars) {
  std::vector<double> out;
  out.reserve(vars.size());
  for (auto v : vars) out.push_back(a[static_cast<std::size_t>(v)]);
  return out;
}

// Snaps values that rounding pushed marginally outside the domain.
std::vector<double> clamp_to_domain(const Network& net, std::vector<double> x) {
  for (std::size_t j = 0; j < x.size(); ++j) {
    x[j] = std::clamp(x[j], net.input_bounds()[j].lo, net.input_bounds()[j].hi);
  }
  return x;
}

double l1_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += std::abs(x);
  return s;
}

// >= k classes at a + eps score at least x_m (exact forward pass).
bool dominated_at(const Network& net, const std::vector<double>& a, const std::vector<double>& eps, int m, int k) {
  std::vector<double> p(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) p[j] = a[j] + eps[j];
  p = clamp_to_domain(net, p);
  const auto trace = forward(net, p);
  return count_dominating(trace.output(net.logit_layer()), m, kWitnessSlack) >= k;
}

QuerySpec make_spec(QueryKind kind, int m, double alpha, int k, int segments) {
  QuerySpec s;
  s.kind = kind;
  s.m = m;
  s.alpha = alpha;
  s.k = k;
  s.atan_segments = segments;
  return s;
}

}  // namespace

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Robust: return "ROBUST";
    case Verdict::Violated: return "VIOLATED";
    case Verdict::Unknown: return "UNKNOWN";
  }
  return "?";
}

ResilienceResult compute_phi(const Network& net, int m, double alpha, int k, const ResilienceConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  ResilienceResult r;
  r.m = m;
  r.alpha = alpha;
  r.k = k;

  QuerySpec full_spec = make_spec(QueryKind::MaxPerturbation, m, alpha, k, config.atan_segments);
  try {
    full_spec.validate(net);
  } catch (const EncodingError& e) {
    throw QueryError(e.what());
  }
  const IntervalBounds bounds = prepare_bounds(net, net.input_bounds(), config);
  auto finish = [&] {
    r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
  };

  std::optional<QueryEncoding> search_enc;
  std::optional<QueryEncoding> initial_enc;
  if (config.warm_start) {
    // Step 1: any strongly classified input.
    search_enc = encode_query(net, bounds, make_spec(QueryKind::StrongInputSearch, m, alpha, k, config.atan_segments));
    assign_branch_priorities(*search_enc, net);
    r.search = solve(search_enc->model, config.solve);
    if (r.search.status == SolveStatus::Infeasible) {
      r.status = SolveStatus::Infeasible;
      r.strongly_classifiable = false;
      r.exact = search_enc->exact;
      return finish();
    }
    // Step 2: perturb only that input.
    if (r.search.has_solution()) {
      QuerySpec s2 = make_spec(QueryKind::FixedInputPerturbation, m, alpha, k, config.atan_segments);
      s2.input = clamp_to_domain(net, values_of(*r.search.assignment, search_enc->a));
      initial_enc = encode_query(net, bounds, s2);
      assign_branch_priorities(*initial_enc, net);
      r.initial = solve(initial_enc->model, config.solve);
      if (r.initial.has_solution()) r.phi_ini = r.initial.objective;
    }
  }

  // Step 3: the full model.
  QueryEncoding enc = encode_query(net, bounds, full_spec);
  assign_branch_priorities(enc, net);
  r.exact = enc.exact;
  if (std::isfinite(r.phi_ini)) {
    const double cap = r.phi_ini * (1.0 + 1e-9) + 1e-9;
    std::vector<Term> sum;
    for (auto v : enc.eps) sum.push_back({v, 1.0});
    enc.model.add_constraint("phi_ini.ub", sum, RowSense::LessEqual, cap);
    enc.model.add_constraint("phi_ini.lb", sum, RowSense::GreaterEqual, -cap);
    std::vector<std::pair<const MipModel*, const Assignment*>> sources{
        {&search_enc->model, &*r.search.assignment}, {&initial_enc->model, &*r.initial.assignment}};
    try {
      enc.model.set_warm_start(merge_by_name(enc.model, sources));
    } catch (const ModelError&) {
      // Out-of-bounds seed: solve cold.
    }
  }
  r.full = solve(enc.model, config.solve);
  r.warm_started = r.full.warm_start_used;
  r.status = r.full.status;
  r.phi_lower = r.full.dual_bound;
  if (r.full.status == SolveStatus::Infeasible) {
    r.phi = kInf;
    r.phi_lower = kInf;
    return finish();
  }
  if (r.full.has_solution()) {
    const Assignment& a = *r.full.assignment;
    r.phi = r.full.objective;
    r.witness_a = clamp_to_domain(net, values_of(a, enc.a));
    r.witness_eps = values_of(a, enc.eps);
    const auto trace = forward(net, r.witness_a);
    r.witness_valid = strongly_classifies_logits(trace.output(net.logit_layer()), m, alpha, kWitnessSlack) &&
                      dominated_at(net, r.witness_a, r.witness_eps, m, k) &&
                      std::abs(l1_norm(r.witness_eps) - r.phi) <= 1e-6 * std::max(1.0, r.phi);
  }
  return finish();
}

XiResult compute_xi(const Network& net, double alpha, int k, const ResilienceConfig& config) {
  const int classes = static_cast<int>(net.num_classes());
  ResilienceConfig per_class = config;
  per_class.solve.workers = std::max(1, config.solve.workers / std::max(1, classes));

  std::vector<std::future<ResilienceResult>> jobs;
  for (int m = 1; m <= classes; ++m) {
    jobs.push_back(std::async(std::launch::async, [&, m] { return compute_phi(net, m, alpha, k, per_class); }));
  }
  XiResult x;
  for (auto& j : jobs) x.classes.push_back(j.get());
  for (const auto& c : x.classes) {
    x.xi_lower = std::min(x.xi_lower, c.phi_lower);
    x.xi_upper = std::min(x.xi_upper, c.phi);
    if (c.status != SolveStatus::Optimal && c.status != SolveStatus::Infeasible) x.resolved = false;
  }
  if (x.resolved) x.xi_lower = x.xi_upper;
  if (std::isfinite(x.xi_upper) && x.resolved) x.xi = x.xi_upper;
  return x;
}

RobustnessResult check_local_robustness(const Network& net, const std::vector<double>& a, int m, double delta,
                                        int k, const ResilienceConfig& config, double alpha) {
  QuerySpec spec = make_spec(QueryKind::LocalRobustness, m, alpha, k, config.atan_segments);
  spec.input = a;
  spec.delta = delta;
  try {
    spec.validate(net);
  } catch (const EncodingError& e) {
    throw QueryError(e.what());
  }
  if (!strongly_classifies(net, a, m, alpha)) {
    throw QueryError("the input is not strongly classified to class " + std::to_string(m));
  }
  std::vector<Interval> box = net.input_bounds();
  for (std::size_t j = 0; j < box.size(); ++j) {
    box[j].lo = std::max(box[j].lo, a[j] - delta);
    box[j].hi = std::min(box[j].hi, a[j] + delta);
  }
  const IntervalBounds bounds = prepare_bounds(net, box, config);
  QueryEncoding enc = encode_query(net, bounds, spec);
  assign_branch_priorities(enc, net);

  RobustnessResult r;
  r.exact = enc.exact;
  r.solve = solve(enc.model, config.solve);
  if (r.solve.status == SolveStatus::Infeasible) {
    r.verdict = Verdict::Robust;
  } else if (r.solve.has_solution()) {
    r.witness_eps = values_of(*r.solve.assignment, enc.eps);
    const bool valid = l1_norm(r.witness_eps) <= delta + 1e-6 && dominated_at(net, a, r.witness_eps, m, k);
    r.verdict = valid ? Verdict::Violated : Verdict::Unknown;
  }
  return r;
}

MaxAlphaResult compute_max_alpha(const Network& net, int m, const ResilienceConfig& config) {
  QuerySpec spec = make_spec(QueryKind::MaxAlpha, m, 1.0, 1, config.atan_segments);
  try {
    spec.validate(net);
  } catch (const EncodingError& e) {
    throw QueryError(e.what());
  }
  const IntervalBounds bounds = prepare_bounds(net, net.input_bounds(), config);
  QueryEncoding enc = encode_query(net, bounds, spec);
  assign_branch_priorities(enc, net);

  MaxAlphaResult r;
  r.m = m;
  r.exact = enc.exact;
  r.solve = solve(enc.model, config.solve);
  r.status = r.solve.status;
  if (r.solve.has_solution()) {
    r.margin = r.solve.objective;
    r.alpha = std::exp(r.margin);
    r.witness_a = clamp_to_domain(net, values_of(*r.solve.assignment, enc.a));
  }
  if (r.status == SolveStatus::Infeasible) {
    r.alpha_upper = 0.0;
  } else {
    r.alpha_upper = std::exp(r.solve.dual_bound);
  }
  return r;
}

}  // namespace nnmip
