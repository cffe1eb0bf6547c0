#pragma once

#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace nnmip {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

using VarId = int;
using RowId = int;

enum class Integrality { Continuous, Binary };
enum class RowSense { LessEqual, GreaterEqual, Equal };
enum class ObjSense { Minimize, Maximize };

struct Term {
  VarId var;
  double coef;
};

struct Variable {
  std::string name;
  double lo = 0.0;
  double hi = kInf;
  Integrality type = Integrality::Continuous;
};

struct Constraint {
  std::string name;
  std::vector<Term> terms;
  RowSense sense = RowSense::LessEqual;
  double rhs = 0.0;
};

struct Objective {
  ObjSense sense = ObjSense::Minimize;
  std::vector<Term> terms;
};

/// Dense assignment indexed by VarId.
using Assignment = std::vector<double>;

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sparse mixed-binary linear program. Variables and rows get dense ids in
/// insertion order. Infinite bounds are stored as +-infinity.
class MipModel {
 public:
  VarId add_variable(std::string name, double lo, double hi,
                     Integrality type = Integrality::Continuous);
  VarId add_binary(std::string name) { return add_variable(std::move(name), 0.0, 1.0, Integrality::Binary); }

  RowId add_constraint(std::string name, std::vector<Term> terms, RowSense sense, double rhs);

  /// Replaces any previous objective.
  void set_objective(ObjSense sense, std::vector<Term> terms);

  /// Higher priority branches earlier. Only meaningful for binaries.
  void set_branch_priority(VarId var, int priority);
  int branch_priority(VarId var) const;
  const std::map<VarId, int>& branch_priorities() const { return priorities_; }

  void set_warm_start(Assignment values);
  void clear_warm_start() { warm_start_.reset(); }
  const std::optional<Assignment>& warm_start() const { return warm_start_; }

  void set_variable_bounds(VarId var, double lo, double hi);

  std::size_t num_variables() const { return vars_.size(); }
  std::size_t num_constraints() const { return rows_.size(); }
  std::size_t num_binaries() const;

  const Variable& variable(VarId id) const { return vars_.at(static_cast<std::size_t>(id)); }
  const Constraint& constraint(RowId id) const { return rows_.at(static_cast<std::size_t>(id)); }
  const std::vector<Variable>& variables() const { return vars_; }
  const std::vector<Constraint>& constraints() const { return rows_; }
  const Objective& objective() const { return objective_; }

  std::optional<VarId> find_variable(std::string_view name) const;
  std::optional<RowId> find_constraint(std::string_view name) const;

  double objective_value(const Assignment& a) const;

 private:
  void check_var(VarId id, std::string_view context) const;

  std::vector<Variable> vars_;
  std::vector<Constraint> rows_;
  Objective objective_;
  std::unordered_map<std::string, VarId> var_index_;
  std::unordered_map<std::string, RowId> row_index_;
  std::map<VarId, int> priorities_;
  std::optional<Assignment> warm_start_;
};

/// Row activity sum_j a_j x_j.
double row_activity(const Constraint& row, const Assignment& a);

struct Violation {
  enum class Kind { Bound, Integrality, Row } kind;
  int index;          // VarId or RowId
  std::string name;
  double amount;
};

/// All violated bounds, integrality conditions and rows at tolerance tol.
std::vector<Violation> find_violations(const MipModel& model, const Assignment& a, double tol);

/// True iff every bound, binary integrality and row holds within tol.
bool check_feasible(const MipModel& model, const Assignment& a, double tol);

/// Human-readable LP-style listing. Not an interchange format.
std::string to_lp_string(const MipModel& model);

/// Copy of the assignment with values looked up by variable name in other models.
/// Variables missing from every source keep the fallback value.
Assignment merge_by_name(const MipModel& target,
                         const std::vector<std::pair<const MipModel*, const Assignment*>>& sources,
                         double fallback = 0.0);

}  // namespace nnmip
