#include "nnmip/mip_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace nnmip {

VarId MipModel::add_variable(std::string name, double lo, double hi, Integrality type) {
  if (var_index_.count(name)) throw ModelError("duplicate variable name '" + name + "'");
  if (std::isnan(lo) || std::isnan(hi) || lo > hi) {
    throw ModelError("variable '" + name + "': invalid bounds");
  }
  if (lo == kInf || hi == -kInf) throw ModelError("variable '" + name + "': empty domain");
  if (type == Integrality::Binary && (lo < 0.0 || hi > 1.0)) {
    throw ModelError("binary variable '" + name + "' must have bounds within [0, 1]");
  }
  const auto id = static_cast<VarId>(vars_.size());
  var_index_.emplace(name, id);
  vars_.push_back({std::move(name), lo, hi, type});
  return id;
}

void MipModel::check_var(VarId id, std::string_view context) const {
  if (id < 0 || static_cast<std::size_t>(id) >= vars_.size()) {
    throw ModelError(std::string(context) + ": unknown variable id " + std::to_string(id));
  }
}

RowId MipModel::add_constraint(std::string name, std::vector<Term> terms, RowSense sense, double rhs) {
  if (row_index_.count(name)) throw ModelError("duplicate constraint name '" + name + "'");
  if (!std::isfinite(rhs)) throw ModelError("constraint '" + name + "': right-hand side must be finite");
  std::unordered_set<VarId> seen;
  for (const auto& t : terms) {
    check_var(t.var, "constraint '" + name + "'");
    if (!std::isfinite(t.coef)) throw ModelError("constraint '" + name + "': non-finite coefficient");
    if (!seen.insert(t.var).second) {
      throw ModelError("constraint '" + name + "': variable '" + vars_[t.var].name + "' appears twice");
    }
  }
  const auto id = static_cast<RowId>(rows_.size());
  row_index_.emplace(name, id);
  rows_.push_back({std::move(name), std::move(terms), sense, rhs});
  return id;
}

void MipModel::set_objective(ObjSense sense, std::vector<Term> terms) {
  std::unordered_set<VarId> seen;
  for (const auto& t : terms) {
    check_var(t.var, "objective");
    if (!seen.insert(t.var).second) throw ModelError("objective: variable appears twice");
  }
  objective_ = {sense, std::move(terms)};
}

void MipModel::set_branch_priority(VarId var, int priority) {
  check_var(var, "branch priority");
  priorities_[var] = priority;
}

int MipModel::branch_priority(VarId var) const {
  auto it = priorities_.find(var);
  return it == priorities_.end() ? 0 : it->second;
}

void MipModel::set_warm_start(Assignment values) {
  if (values.size() != vars_.size()) throw ModelError("warm start must assign every variable");
  for (std::size_t j = 0; j < vars_.size(); ++j) {
    const auto& v = vars_[j];
    if (!std::isfinite(values[j])) throw ModelError("warm start: non-finite value for '" + v.name + "'");
    if (values[j] < v.lo - 1e-6 || values[j] > v.hi + 1e-6) {
      throw ModelError("warm start violates bounds of '" + v.name + "'");
    }
    values[j] = std::clamp(values[j], v.lo, v.hi);
  }
  warm_start_ = std::move(values);
}

void MipModel::set_variable_bounds(VarId var, double lo, double hi) {
  check_var(var, "set_variable_bounds");
  auto& v = vars_[var];
  if (std::isnan(lo) || std::isnan(hi) || lo > hi) throw ModelError("variable '" + v.name + "': invalid bounds");
  if (v.type == Integrality::Binary && (lo < 0.0 || hi > 1.0)) {
    throw ModelError("binary variable '" + v.name + "' must have bounds within [0, 1]");
  }
  v.lo = lo;
  v.hi = hi;
}

std::size_t MipModel::num_binaries() const {
  return static_cast<std::size_t>(std::count_if(vars_.begin(), vars_.end(), [](const Variable& v) {
    return v.type == Integrality::Binary;
  }));
}

std::optional<VarId> MipModel::find_variable(std::string_view name) const {
  auto it = var_index_.find(std::string(name));
  if (it == var_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<RowId> MipModel::find_constraint(std::string_view name) const {
  auto it = row_index_.find(std::string(name));
  if (it == row_index_.end()) return std::nullopt;
  return it->second;
}

double MipModel::objective_value(const Assignment& a) const {
  double sum = 0.0;
  for (const auto& t : objective_.terms) sum += t.coef * a.at(t.var);
  return sum;
}

double row_activity(const Constraint& row, const Assignment& a) {
  double sum = 0.0;
  for (const auto& t : row.terms) sum += t.coef * a[t.var];
  return sum;
}

std::vector<Violation> find_violations(const MipModel& model, const Assignment& a, double tol) {
  std::vector<Violation> out;
  if (a.size() != model.num_variables()) {
    out.push_back({Violation::Kind::Bound, -1, "<assignment size>", kInf});
    return out;
  }
  for (std::size_t j = 0; j < model.num_variables(); ++j) {
    const auto& v = model.variable(static_cast<VarId>(j));
    const double x = a[j];
    if (!std::isfinite(x)) {
      out.push_back({Violation::Kind::Bound, static_cast<int>(j), v.name, kInf});
      continue;
    }
    const double excess = std::max(v.lo - x, x - v.hi);
    if (excess > tol) out.push_back({Violation::Kind::Bound, static_cast<int>(j), v.name, excess});
    if (v.type == Integrality::Binary) {
      const double frac = std::abs(x - std::round(x));
      if (frac > tol) out.push_back({Violation::Kind::Integrality, static_cast<int>(j), v.name, frac});
    }
  }
  for (std::size_t r = 0; r < model.num_constraints(); ++r) {
    const auto& row = model.constraint(static_cast<RowId>(r));
    const double act = row_activity(row, a);
    double excess = 0.0;
    switch (row.sense) {
      case RowSense::LessEqual: excess = act - row.rhs; break;
      case RowSense::GreaterEqual: excess = row.rhs - act; break;
      case RowSense::Equal: excess = std::abs(act - row.rhs); break;
    }
    if (excess > tol) out.push_back({Violation::Kind::Row, static_cast<int>(r), row.name, excess});
  }
  return out;
}

bool check_feasible(const MipModel& model, const Assignment& a, double tol) {
  return find_violations(model, a, tol).empty();
}

namespace {

void write_terms(std::ostream& os, const MipModel& model, const std::vector<Term>& terms) {
  if (terms.empty()) {
    os << "0";
    return;
  }
  bool first = true;
  for (const auto& t : terms) {
    if (first) {
      if (t.coef < 0) os << "- ";
    } else {
      os << (t.coef < 0 ? " - " : " + ");
    }
    const double c = std::abs(t.coef);
    if (c != 1.0) os << c << " ";
    os << model.variable(t.var).name;
    first = false;
  }
}

}  // namespace

std::string to_lp_string(const MipModel& model) {
  std::ostringstream os;
  os.precision(12);
  os << (model.objective().sense == ObjSense::Minimize ? "Minimize" : "Maximize") << "\n  obj: ";
  write_terms(os, model, model.objective().terms);
  os << "\nSubject To\n";
  for (const auto& row : model.constraints()) {
    os << "  " << row.name << ": ";
    write_terms(os, model, row.terms);
    switch (row.sense) {
      case RowSense::LessEqual: os << " <= "; break;
      case RowSense::GreaterEqual: os << " >= "; break;
      case RowSense::Equal: os << " = "; break;
    }
    os << row.rhs << "\n";
  }
  os << "Bounds\n";
  for (const auto& v : model.variables()) {
    os << "  " << v.lo << " <= " << v.name << " <= " << v.hi << "\n";
  }
  bool any_bin = false;
  for (const auto& v : model.variables()) {
    if (v.type != Integrality::Binary) continue;
    if (!any_bin) os << "Binaries\n ";
    any_bin = true;
    os << " " << v.name;
  }
  if (any_bin) os << "\n";
  os << "End\n";
  return os.str();
}

Assignment merge_by_name(const MipModel& target,
                         const std::vector<std::pair<const MipModel*, const Assignment*>>& sources,
                         double fallback) {
  Assignment out(target.num_variables(), fallback);
  for (std::size_t j = 0; j < target.num_variables(); ++j) {
    const auto& name = target.variable(static_cast<VarId>(j)).name;
    for (const auto& [model, values] : sources) {
      if (auto id = model->find_variable(name)) {
        out[j] = (*values)[*id];
        break;
      }
    }
  }
  return out;
}

}  // namespace nnmip
