// nnmip: command-line front end for evaluation, bounds, robustness queries and MPS export.

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "nnmip/dataflow.hpp"
#include "nnmip/encoder.hpp"
#include "nnmip/mps.hpp"
#include "nnmip/network.hpp"
#include "nnmip/report.hpp"
#include "nnmip/resilience.hpp"

using namespace nnmip;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitUsage = 2;
constexpr int kExitViolated = 10;
constexpr int kExitUnknown = 20;

struct Common {
  std::string net_path;
  int workers = 1;
  double time_limit = 1e30;
  long long node_limit = -1;
  double log_interval = 0.0;
  int lookback = 2;
  int segments = 8;
  std::string report_path;

  ResilienceConfig config() const {
    ResilienceConfig c;
    c.solve.workers = workers;
    c.solve.time_limit = time_limit;
    if (node_limit >= 0) c.solve.node_limit = static_cast<std::size_t>(node_limit);
    c.solve.log_interval = log_interval;
    c.solve.log = &std::cerr;
    c.tighten = lookback >= 2;
    c.lookback.depth = std::max(1, lookback);
    c.lookback.atan_segments = segments;
    c.atan_segments = segments;
    return c;
  }
};

int default_workers() {
  if (const char* env = std::getenv("NNMIP_WORKERS")) {
    try {
      const int w = std::stoi(env);
      if (w >= 1) return w;
    } catch (const std::exception&) {
    }
    std::cerr << "warning: ignoring NNMIP_WORKERS=" << env << "\n";
  }
  return 1;
}

void add_solver_options(CLI::App* app, Common& c) {
  app->add_option("--workers", c.workers, "Branch-and-bound worker threads (default: $NNMIP_WORKERS or 1)")
      ->check(CLI::PositiveNumber);
  app->add_option("--time-limit", c.time_limit, "Wall-clock limit per solve in seconds")->check(CLI::PositiveNumber);
  app->add_option("--node-limit", c.node_limit, "Node limit per solve")->check(CLI::NonNegativeNumber);
  app->add_option("--log-interval", c.log_interval, "Seconds between progress lines on stderr (0 = off)");
  app->add_option("--lookback", c.lookback, "Lookback tightening depth (< 2 disables)");
  app->add_option("--segments", c.segments, "Segments per half interval for atan envelopes")
      ->check(CLI::Range(2, 1000));
  app->add_option("--report", c.report_path, "Write a JSON result document");
}

void write_json(const std::string& path, const nlohmann::json& doc) {
  if (path.empty()) return;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << doc.dump(2) << '\n';
}

void write_witness(const std::string& path, const std::vector<double>& a, const std::vector<double>& eps) {
  if (path.empty()) return;
  std::vector<double> p(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) p[j] = a[j] + eps[j];
  write_json(path, {{"input", a}, {"eps", eps}, {"perturbed", p}});
}

bool limited(SolveStatus s) { return s == SolveStatus::Limit || s == SolveStatus::FeasibleBound; }

// ---------------------------------------------------------------------------

int cmd_eval(const std::string& net_path, const std::string& input_path) {
  const Network net = load_network(net_path);
  const auto input = load_input_vector(input_path);
  const auto trace = forward(net, input, {.check_domain = true});
  std::cout << "input " << format_vector(input) << "\n";
  for (std::size_t l = 1; l <= net.num_layers(); ++l) {
    const auto& lt = trace.layers[l - 1];
    std::cout << "layer " << l << " " << to_string(net.layer(l).kind);
    if (!lt.im.empty()) std::cout << " im=" << format_vector(lt.im);
    std::cout << " x=" << format_vector(lt.x) << "\n";
  }
  const auto& out = trace.output(net.num_layers());
  if (net.ends_with_softmax()) {
    std::cout << "probabilities " << format_vector(out) << "\n";
    const auto top = std::max_element(out.begin(), out.end()) - out.begin();
    std::cout << "top class " << top + 1 << "\n";
  }
  return kExitOk;
}

int cmd_bounds(const Common& c, const std::string& out_path) {
  const Network net = load_network(c.net_path);
  IntervalBounds b = propagate_intervals(net);
  LookbackStats stats;
  if (c.lookback >= 2) {
    const auto cfg = c.config();
    b = tighten_lookback(net, b, cfg.lookback, &stats);
  }
  if (out_path.empty()) {
    write_bounds_dump(std::cout, net, b);
  } else {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    write_bounds_dump(out, net, b);
    std::cout << "bounds written to " << out_path << "\n";
  }
  std::cerr << "undecided ReLU nodes: " << b.count_undecided();
  if (c.lookback >= 2) std::cerr << " (lookback depth " << c.lookback << ", " << stats.improved << " bounds improved)";
  std::cerr << "\n";
  return kExitOk;
}

int resolve_k(const Network& net, int k) { return k > 0 ? k : std::min(kDefaultK, static_cast<int>(net.num_classes()) - 1); }

int cmd_verify(const Common& c, const std::string& input_path, int m, double delta, int k, double alpha,
               const std::string& witness_path) {
  const Network net = load_network(c.net_path);
  const auto a = load_input_vector(input_path);
  k = resolve_k(net, k);
  const auto r = check_local_robustness(net, a, m, delta, k, c.config(), alpha);
  std::cout << to_string(r.verdict) << "\n";
  if (r.verdict == Verdict::Violated) {
    std::cout << "witness eps " << format_vector(r.witness_eps) << "\n";
    write_witness(witness_path, a, r.witness_eps);
    if (!witness_path.empty()) std::cout << "witness written to " << witness_path << "\n";
  }
  if (!r.exact) std::cout << "note: atan layers are relaxed; ROBUST is sound, violations are re-checked\n";
  nlohmann::json doc = to_json(r);
  doc["query"] = {{"class", m}, {"delta", delta}, {"k", k}, {"alpha", alpha}, {"input", a}};
  write_json(c.report_path, doc);
  switch (r.verdict) {
    case Verdict::Robust: return kExitOk;
    case Verdict::Violated: return kExitViolated;
    case Verdict::Unknown: return kExitUnknown;
  }
  return kExitUnknown;
}

void print_phi(const ResilienceResult& r) {
  std::cout << "class " << r.m << " alpha " << format_number(r.alpha) << " k " << r.k << "\n";
  if (!r.strongly_classifiable) {
    std::cout << "infeasible at alpha: no input is strongly classified to class " << r.m << "\n";
  }
  std::cout << "phi = " << format_number(r.phi) << "\n";
  std::cout << "status " << to_string(r.status) << "\n";
  if (limited(r.status)) std::cout << "phi lower bound = " << format_number(r.phi_lower) << "\n";
  if (std::isfinite(r.phi_ini)) std::cout << "phi_ini = " << format_number(r.phi_ini) << "\n";
  std::cout << (r.exact ? "exact" : "under-approximation (atan layers relaxed)") << "\n";
  if (!r.witness_a.empty()) {
    std::cout << "witness a " << format_vector(r.witness_a) << " eps " << format_vector(r.witness_eps)
              << (r.witness_valid ? " (validated)" : " (not confirmed by exact evaluation)") << "\n";
  }
}

int cmd_phi(const Common& c, int m, double alpha, int k, bool cold, const std::string& witness_path) {
  const Network net = load_network(c.net_path);
  k = resolve_k(net, k);
  ResilienceConfig cfg = c.config();
  cfg.warm_start = !cold;
  const auto r = compute_phi(net, m, alpha, k, cfg);
  print_phi(r);
  if (!r.witness_a.empty() && !witness_path.empty()) {
    write_witness(witness_path, r.witness_a, r.witness_eps);
    std::cout << "witness written to " << witness_path << "\n";
  }
  write_json(c.report_path, to_json(r));
  return limited(r.status) ? kExitUnknown : kExitOk;
}

int cmd_xi(const Common& c, double alpha, int k) {
  const Network net = load_network(c.net_path);
  k = resolve_k(net, k);
  const auto x = compute_xi(net, alpha, k, c.config());
  std::cout << "class  phi  status  exact\n";
  for (const auto& r : x.classes) {
    std::cout << r.m << "  " << format_number(r.phi) << "  " << to_string(r.status) << "  " << (r.exact ? "yes" : "no")
              << "\n";
  }
  if (x.xi) {
    std::cout << "xi = " << format_number(*x.xi) << "\n";
  } else if (!x.resolved) {
    std::cout << "xi in [" << format_number(x.xi_lower) << ", " << format_number(x.xi_upper) << "]\n";
  } else {
    std::cout << "xi undefined: no class admits a violation\n";
  }
  write_json(c.report_path, to_json(x));
  return x.resolved ? kExitOk : kExitUnknown;
}

int cmd_max_alpha(const Common& c, int m) {
  const Network net = load_network(c.net_path);
  const auto r = compute_max_alpha(net, m, c.config());
  if (r.never_top()) {
    std::cout << "class " << m << " is never the top score (infeasible)\n";
  } else if (limited(r.status)) {
    std::cout << "alpha_max in [" << format_number(r.alpha) << ", " << format_number(r.alpha_upper) << "]\n";
  } else {
    std::cout << "alpha_max = " << format_number(r.alpha) << "\n";
    std::cout << "attained at " << format_vector(r.witness_a) << "\n";
  }
  if (!r.exact) std::cout << "over-approximation (atan layers relaxed)\n";
  write_json(c.report_path, to_json(r));
  return limited(r.status) ? kExitUnknown : kExitOk;
}

// kind[:key=value,...]
QuerySpec parse_query(const std::string& text, const Network& net, std::vector<Interval>& box) {
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  std::map<std::string, std::string> kv;
  if (colon != std::string::npos) {
    std::stringstream ss(text.substr(colon + 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw CLI::ValidationError("--query", "expected key=value, got '" + item + "'");
      kv[item.substr(0, eq)] = item.substr(eq + 1);
    }
  }
  QuerySpec q;
  if (kind == "phi") q.kind = QueryKind::MaxPerturbation;
  else if (kind == "robust") q.kind = QueryKind::LocalRobustness;
  else if (kind == "max-alpha") q.kind = QueryKind::MaxAlpha;
  else if (kind == "search") q.kind = QueryKind::StrongInputSearch;
  else throw CLI::ValidationError("--query", "unknown query kind '" + kind + "' (phi, robust, max-alpha, search)");
  q.k = std::min(kDefaultK, static_cast<int>(net.num_classes()) - 1);
  try {
    for (const auto& [key, value] : kv) {
      if (key == "m") q.m = std::stoi(value);
      else if (key == "alpha") q.alpha = std::stod(value);
      else if (key == "k") q.k = std::stoi(value);
      else if (key == "delta") q.delta = std::stod(value);
      else if (key == "input") q.input = load_input_vector(value);
      else if (key == "segments") q.atan_segments = std::stoi(value);
      else throw CLI::ValidationError("--query", "unknown key '" + key + "'");
    }
  } catch (const std::invalid_argument&) {
    throw CLI::ValidationError("--query", "malformed number in '" + text + "'");
  }
  box = net.input_bounds();
  if (q.kind == QueryKind::LocalRobustness) {
    if (q.input.empty()) throw CLI::ValidationError("--query", "robust queries need input=FILE");
    if (q.input.size() != box.size()) throw std::runtime_error("input vector has the wrong dimension");
    for (std::size_t j = 0; j < box.size(); ++j) {
      box[j].lo = std::max(box[j].lo, q.input[j] - q.delta);
      box[j].hi = std::min(box[j].hi, q.input[j] + q.delta);
    }
  }
  return q;
}

int cmd_export(const Common& c, const std::string& query, const std::string& out_path) {
  const Network net = load_network(c.net_path);
  std::vector<Interval> box;
  const QuerySpec q = parse_query(query, net, box);
  IntervalBounds b = propagate_intervals(net, box);
  if (c.lookback >= 2) b = tighten_lookback(net, b, c.config().lookback);
  QueryEncoding enc = encode_query(net, b, q);
  assign_branch_priorities(enc, net);
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write " + out_path);
  out << export_mps(enc.model);
  std::cout << "wrote " << out_path << ": " << enc.model.num_variables() << " columns, "
            << enc.model.num_constraints() << " rows, " << enc.model.num_binaries() << " binaries\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MIP-based resilience analysis for small feed-forward networks"};
  app.require_subcommand(1);

  Common common;
  common.workers = default_workers();

  std::string input_path, out_path, witness_path, query;
  int m = 1;
  int k = 0;
  double alpha = kDefaultAlpha;
  double delta = 0.0;
  bool cold = false;

  auto* eval = app.add_subcommand("eval", "Forward trace and softmax probabilities");
  eval->add_option("--net", common.net_path, "Network file")->required();
  eval->add_option("--input", input_path, "Input vector file")->required();

  auto* bounds = app.add_subcommand("bounds", "Interval bounds, optionally tightened");
  bounds->add_option("--net", common.net_path, "Network file")->required();
  int bounds_lookback = 0;
  bounds->add_option("--lookback", bounds_lookback, "Lookback depth (< 2 disables)");
  bounds->add_option("--out", out_path, "Write the dump here instead of stdout");

  auto* verify = app.add_subcommand("verify", "Local robustness within an L1 budget");
  verify->add_option("--net", common.net_path, "Network file")->required();
  verify->add_option("--input", input_path, "Input vector file")->required();
  verify->add_option("--class", m, "Class (1-based)")->required();
  verify->add_option("--delta", delta, "L1 perturbation budget")->required()->check(CLI::NonNegativeNumber);
  verify->add_option("--k", k, "Competing classes required (default min(2, classes - 1))");
  verify->add_option("--alpha", alpha, "Strong-classification factor the input must satisfy")->default_val(1.0);
  verify->add_option("--witness", witness_path, "Write a violating perturbation here");

  auto* phi = app.add_subcommand("phi", "Maximum perturbation bound of one class");
  phi->add_option("--net", common.net_path, "Network file")->required();
  phi->add_option("--class", m, "Class (1-based)")->required();
  phi->add_option("--alpha", alpha, "Strong-classification factor (>= 1)");
  phi->add_option("--k", k, "Competing classes required (default min(2, classes - 1))");
  phi->add_option("--witness", witness_path, "Write the optimal perturbation here");
  phi->add_flag("--cold", cold, "Skip the warm-start steps");

  auto* xi = app.add_subcommand("xi", "Perturbation bound over all classes");
  xi->add_option("--net", common.net_path, "Network file")->required();
  xi->add_option("--alpha", alpha, "Strong-classification factor (>= 1)");
  xi->add_option("--k", k, "Competing classes required (default min(2, classes - 1))");

  auto* max_alpha = app.add_subcommand("max-alpha", "Largest alpha at which a class is strongly classified");
  max_alpha->add_option("--net", common.net_path, "Network file")->required();
  max_alpha->add_option("--class", m, "Class (1-based)")->required();

  auto* exp = app.add_subcommand("export", "Write the MIP of a query as fixed-format MPS");
  exp->add_option("--net", common.net_path, "Network file")->required();
  exp->add_option("--query", query,
                  "kind[:key=value,...], kind in phi|robust|max-alpha|search; keys m, alpha, k, delta, input, segments")
      ->required();
  exp->add_option("--out", out_path, "MPS output file")->required();

  for (auto* sub : {verify, phi, xi, max_alpha, exp}) add_solver_options(sub, common);
  bounds->add_option("--segments", common.segments, "Segments per half interval for atan envelopes");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*eval) return cmd_eval(common.net_path, input_path);
    if (*bounds) {
      common.lookback = bounds_lookback;
      return cmd_bounds(common, out_path);
    }
    if (*verify) return cmd_verify(common, input_path, m, delta, k, alpha, witness_path);
    if (*phi) return cmd_phi(common, m, alpha, k, cold, witness_path);
    if (*xi) return cmd_xi(common, alpha, k);
    if (*max_alpha) return cmd_max_alpha(common, m);
    if (*exp) return cmd_export(common, query, out_path);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitUsage;
}
