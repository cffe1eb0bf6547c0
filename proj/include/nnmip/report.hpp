#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "nnmip/oracle.hpp"
#include "nnmip/resilience.hpp"
#include "nnmip/solver.hpp"

namespace nnmip {

/// Six significant digits; infinities print as "+inf" / "-inf".
std::string format_number(double v);
std::string format_vector(const std::vector<double>& v);

/// Finite values as numbers, infinities as the strings "inf" / "-inf".
nlohmann::json json_number(double v);

nlohmann::json to_json(const SolveResult& r, bool with_assignment = false);
nlohmann::json to_json(const ResilienceResult& r);
nlohmann::json to_json(const XiResult& r);
nlohmann::json to_json(const RobustnessResult& r);
nlohmann::json to_json(const MaxAlphaResult& r);

}  // namespace nnmip
