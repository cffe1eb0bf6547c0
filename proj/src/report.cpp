#include "nnmip/report.hpp"

#include <cmath>
#include <cstdio>

namespace nnmip {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "+inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v == 0.0 ? 0.0 : v);
  return buf;
}

std::string format_vector(const std::vector<double>& v) {
  std::string out = "(";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += format_number(v[i]);
  }
  return out + ")";
}

nlohmann::json json_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

namespace {

nlohmann::json json_vector(const std::vector<double>& v) {
  auto arr = nlohmann::json::array();
  for (double x : v) arr.push_back(json_number(x));
  return arr;
}

}  // namespace

nlohmann::json to_json(const SolveResult& r, bool with_assignment) {
  nlohmann::json j{
      {"status", std::string(to_string(r.status))},
      {"objective", json_number(r.objective)},
      {"dual_bound", json_number(r.dual_bound)},
      {"gap", json_number(r.gap())},
      {"nodes_explored", r.nodes_explored},
      {"lp_iterations", r.lp_iterations},
      {"wall_time", r.wall_time},
      {"warm_start_used", r.warm_start_used},
      {"incumbent_history", json_vector(r.incumbent_history)},
  };
  if (with_assignment && r.assignment) j["assignment"] = json_vector(*r.assignment);
  return j;
}

nlohmann::json to_json(const ResilienceResult& r) {
  return {
      {"class", r.m},
      {"alpha", r.alpha},
      {"k", r.k},
      {"status", std::string(to_string(r.status))},
      {"phi", json_number(r.phi)},
      {"phi_lower", json_number(r.phi_lower)},
      {"phi_ini", json_number(r.phi_ini)},
      {"strongly_classifiable", r.strongly_classifiable},
      {"exact", r.exact},
      {"approximation", r.exact ? "exact" : "under-approximation"},
      {"warm_started", r.warm_started},
      {"witness_a", json_vector(r.witness_a)},
      {"witness_eps", json_vector(r.witness_eps)},
      {"witness_valid", r.witness_valid},
      {"wall_time", r.wall_time},
      {"steps", {{"search", to_json(r.search)}, {"initial", to_json(r.initial)}, {"full", to_json(r.full)}}},
  };
}

nlohmann::json to_json(const XiResult& r) {
  auto classes = nlohmann::json::array();
  for (const auto& c : r.classes) classes.push_back(to_json(c));
  return {
      {"xi", r.xi ? json_number(*r.xi) : nlohmann::json(nullptr)},
      {"xi_lower", json_number(r.xi_lower)},
      {"xi_upper", json_number(r.xi_upper)},
      {"resolved", r.resolved},
      {"classes", classes},
  };
}

nlohmann::json to_json(const RobustnessResult& r) {
  return {
      {"verdict", std::string(to_string(r.verdict))},
      {"witness_eps", json_vector(r.witness_eps)},
      {"exact", r.exact},
      {"solve", to_json(r.solve)},
  };
}

nlohmann::json to_json(const MaxAlphaResult& r) {
  return {
      {"class", r.m},
      {"status", std::string(to_string(r.status))},
      {"never_top", r.never_top()},
      {"alpha_max", json_number(r.alpha)},
      {"alpha_upper", json_number(r.alpha_upper)},
      {"margin", json_number(r.margin)},
      {"witness_a", json_vector(r.witness_a)},
      {"exact", r.exact},
      {"solve", to_json(r.solve)},
  };
}

}  // namespace nnmip
