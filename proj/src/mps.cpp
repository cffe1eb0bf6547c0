#include "nnmip/mps.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <sstream>
#include <unordered_map>
#include <vector>

namespace nnmip {

namespace {

constexpr const char* kObjRow = "_OBJ";

bool representable(std::string_view name) {
  if (name.empty() || name.size() > 8 || name.front() == '_' || name.front() == '*') return false;
  for (char c : name) {
    if (c <= ' ' || c > '~') return false;
  }
  return true;
}

std::string format_number(double v) {
  char buf[32];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

std::string pad(std::string_view s, std::size_t width) {
  std::string out(s);
  if (out.size() < width) out.append(width - out.size(), ' ');
  return out;
}

// Fields 2-4 of a data line: name at column 5, second name at 15, value at 25.
std::string entry(std::string_view a, std::string_view b, std::string_view value) {
  return "    " + pad(a, 8) + "  " + pad(b, 8) + "  " + std::string(value) + "\n";
}

}  // namespace

std::string mangle_mps_name(std::string_view name, char kind, int id) {
  if (representable(name)) return std::string(name);
  char buf[16];
  std::snprintf(buf, sizeof buf, "_%c%06d", kind, id);
  return buf;
}

std::string export_mps(const MipModel& model, std::string_view model_name) {
  const auto nvars = model.num_variables();
  const auto nrows = model.num_constraints();
  std::vector<std::string> cname(nvars), rname(nrows);
  std::ostringstream out;
  out << "* written by nnmip\n";
  for (std::size_t j = 0; j < nvars; ++j) {
    const auto& orig = model.variable(static_cast<VarId>(j)).name;
    cname[j] = mangle_mps_name(orig, 'C', static_cast<int>(j));
    if (cname[j] != orig) out << "*@var " << cname[j] << " " << orig << "\n";
  }
  for (std::size_t r = 0; r < nrows; ++r) {
    const auto& orig = model.constraint(static_cast<RowId>(r)).name;
    rname[r] = mangle_mps_name(orig, 'R', static_cast<int>(r));
    if (rname[r] != orig) out << "*@row " << rname[r] << " " << orig << "\n";
  }

  out << "NAME          " << model_name << "\n";
  if (model.objective().sense == ObjSense::Maximize) out << "OBJSENSE\n    MAX\n";
  out << "ROWS\n";
  out << " N  " << kObjRow << "\n";
  for (std::size_t r = 0; r < nrows; ++r) {
    const auto& row = model.constraint(static_cast<RowId>(r));
    const char* type = row.sense == RowSense::LessEqual ? "L" : row.sense == RowSense::GreaterEqual ? "G" : "E";
    out << " " << type << "  " << rname[r] << "\n";
  }

  // Column-major view of the rows.
  std::vector<std::vector<std::pair<std::size_t, double>>> cols(nvars);
  for (std::size_t r = 0; r < nrows; ++r) {
    for (const auto& t : model.constraint(static_cast<RowId>(r)).terms) cols[t.var].emplace_back(r, t.coef);
  }
  std::vector<double> obj(nvars, 0.0);
  for (const auto& t : model.objective().terms) obj[t.var] = t.coef;

  out << "COLUMNS\n";
  bool in_int = false;
  int marker = 0;
  for (std::size_t j = 0; j < nvars; ++j) {
    const bool is_bin = model.variable(static_cast<VarId>(j)).type == Integrality::Binary;
    if (is_bin != in_int) {
      char buf[80];
      std::snprintf(buf, sizeof buf, "    MARKER%-4d            'MARKER'                 '%s'\n", marker++,
                    is_bin ? "INTORG" : "INTEND");
      out << buf;
      in_int = is_bin;
    }
    if (obj[j] != 0.0 || cols[j].empty()) out << entry(cname[j], kObjRow, format_number(obj[j]));
    for (const auto& [r, coef] : cols[j]) out << entry(cname[j], rname[r], format_number(coef));
  }
  if (in_int) {
    char buf[80];
    std::snprintf(buf, sizeof buf, "    MARKER%-4d            'MARKER'                 'INTEND'\n", marker++);
    out << buf;
  }

  out << "RHS\n";
  for (std::size_t r = 0; r < nrows; ++r) {
    const double rhs = model.constraint(static_cast<RowId>(r)).rhs;
    if (rhs != 0.0) out << entry("RHS", rname[r], format_number(rhs));
  }

  out << "BOUNDS\n";
  auto bound = [&](const char* type, std::size_t j, const std::string& value) {
    out << " " << type << " " << pad("BND", 8) << "  " << pad(cname[j], 8);
    if (!value.empty()) out << "  " << value;
    out << "\n";
  };
  for (std::size_t j = 0; j < nvars; ++j) {
    const auto& v = model.variable(static_cast<VarId>(j));
    if (v.lo == v.hi) {
      bound("FX", j, format_number(v.lo));
    } else if (v.lo == -kInf && v.hi == kInf) {
      bound("FR", j, "");
    } else {
      if (v.lo == -kInf) {
        bound("MI", j, "");
      } else if (v.lo != 0.0) {
        bound("LO", j, format_number(v.lo));
      }
      if (v.hi != kInf) bound("UP", j, format_number(v.hi));
    }
  }
  out << "ENDATA\n";
  return out.str();
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::istringstream is(line);
  std::vector<std::string> out;
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

double parse_number(const std::string& tok, int line_no) {
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0') {
    throw ModelError("MPS line " + std::to_string(line_no) + ": bad number '" + tok + "'");
  }
  return v;
}

struct ParsedColumn {
  std::string name;
  bool integer = false;
  double lo = 0.0;
  double hi = kInf;
  bool hi_set = false;
  std::vector<std::pair<int, double>> entries;  // row index, -1 for objective
};

}  // namespace

MipModel parse_mps(std::string_view text) {
  enum class Section { None, Name, ObjSense, Rows, Columns, Rhs, Bounds, End };
  Section section = Section::None;
  std::unordered_map<std::string, std::string> var_alias, row_alias;
  std::string obj_row;
  ObjSense sense = ObjSense::Minimize;
  std::vector<std::string> row_names;
  std::vector<RowSense> row_senses;
  std::unordered_map<std::string, int> row_index;
  std::vector<double> rhs;
  std::vector<ParsedColumn> cols;
  std::unordered_map<std::string, std::size_t> col_index;
  bool integer_block = false;

  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& msg) -> ModelError {
    return ModelError("MPS line " + std::to_string(line_no) + ": " + msg);
  };
  auto column = [&](const std::string& name) -> ParsedColumn& {
    auto it = col_index.find(name);
    if (it == col_index.end()) throw fail("unknown column '" + name + "'");
    return cols[it->second];
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("*@var ", 0) == 0 || line.rfind("*@row ", 0) == 0) {
      const auto rest = line.substr(6);
      const auto space = rest.find(' ');
      if (space == std::string::npos) throw fail("bad name-map comment");
      (line[2] == 'v' ? var_alias : row_alias)[rest.substr(0, space)] = rest.substr(space + 1);
      continue;
    }
    if (line.empty() || line[0] == '*') continue;
    const auto tok = split(line);
    if (tok.empty()) continue;

    if (line[0] != ' ' && line[0] != '\t') {
      const auto& head = tok[0];
      if (head == "NAME") section = Section::Name;
      else if (head == "OBJSENSE") {
        section = Section::ObjSense;
        if (tok.size() > 1) sense = (tok[1] == "MAX" || tok[1] == "MAXIMIZE") ? ObjSense::Maximize : ObjSense::Minimize;
      } else if (head == "ROWS") section = Section::Rows;
      else if (head == "COLUMNS") section = Section::Columns;
      else if (head == "RHS") section = Section::Rhs;
      else if (head == "BOUNDS") section = Section::Bounds;
      else if (head == "RANGES") throw fail("RANGES section is not supported");
      else if (head == "ENDATA") { section = Section::End; break; }
      else throw fail("unknown section '" + head + "'");
      continue;
    }

    switch (section) {
      case Section::ObjSense:
        sense = (tok[0] == "MAX" || tok[0] == "MAXIMIZE") ? ObjSense::Maximize : ObjSense::Minimize;
        break;
      case Section::Rows: {
        if (tok.size() != 2) throw fail("ROWS entry needs a type and a name");
        if (tok[0] == "N") {
          if (obj_row.empty()) obj_row = tok[1];
          break;
        }
        RowSense rs;
        if (tok[0] == "L") rs = RowSense::LessEqual;
        else if (tok[0] == "G") rs = RowSense::GreaterEqual;
        else if (tok[0] == "E") rs = RowSense::Equal;
        else throw fail("unknown row type '" + tok[0] + "'");
        if (row_index.count(tok[1])) throw fail("duplicate row '" + tok[1] + "'");
        row_index[tok[1]] = static_cast<int>(row_names.size());
        row_names.push_back(tok[1]);
        row_senses.push_back(rs);
        rhs.push_back(0.0);
        break;
      }
      case Section::Columns: {
        if (tok.size() >= 3 && tok[1] == "'MARKER'") {
          if (tok[2] == "'INTORG'") integer_block = true;
          else if (tok[2] == "'INTEND'") integer_block = false;
          else throw fail("unknown marker " + tok[2]);
          break;
        }
        if (tok.size() != 3 && tok.size() != 5) throw fail("COLUMNS entry has wrong field count");
        auto it = col_index.find(tok[0]);
        if (it == col_index.end()) {
          it = col_index.emplace(tok[0], cols.size()).first;
          cols.push_back({tok[0], integer_block, 0.0, kInf, false, {}});
        }
        auto& col = cols[it->second];
        for (std::size_t f = 1; f + 1 < tok.size(); f += 2) {
          const double v = parse_number(tok[f + 1], line_no);
          if (tok[f] == obj_row) {
            col.entries.emplace_back(-1, v);
          } else {
            auto r = row_index.find(tok[f]);
            if (r == row_index.end()) throw fail("unknown row '" + tok[f] + "'");
            col.entries.emplace_back(r->second, v);
          }
        }
        break;
      }
      case Section::Rhs: {
        if (tok.size() != 3 && tok.size() != 5) throw fail("RHS entry has wrong field count");
        for (std::size_t f = 1; f + 1 < tok.size(); f += 2) {
          if (tok[f] == obj_row) continue;
          auto r = row_index.find(tok[f]);
          if (r == row_index.end()) throw fail("unknown row '" + tok[f] + "'");
          rhs[r->second] = parse_number(tok[f + 1], line_no);
        }
        break;
      }
      case Section::Bounds: {
        if (tok.size() < 3) throw fail("BOUNDS entry too short");
        auto& col = column(tok[2]);
        const auto& type = tok[0];
        auto value = [&]() {
          if (tok.size() < 4) throw fail("bound " + type + " needs a value");
          return parse_number(tok[3], line_no);
        };
        if (type == "UP") { col.hi = value(); col.hi_set = true; }
        else if (type == "LO") col.lo = value();
        else if (type == "FX") { col.lo = col.hi = value(); col.hi_set = true; }
        else if (type == "FR") { col.lo = -kInf; col.hi = kInf; col.hi_set = true; }
        else if (type == "MI") col.lo = -kInf;
        else if (type == "PL") { col.hi = kInf; col.hi_set = true; }
        else if (type == "BV") { col.lo = 0.0; col.hi = 1.0; col.hi_set = true; col.integer = true; }
        else throw fail("unsupported bound type '" + type + "'");
        break;
      }
      default:
        throw fail("data line outside a section");
    }
  }
  if (section != Section::End) throw ModelError("MPS: missing ENDATA");

  auto restore = [](const std::unordered_map<std::string, std::string>& alias, const std::string& n) {
    auto it = alias.find(n);
    return it == alias.end() ? n : it->second;
  };

  MipModel model;
  std::vector<Term> obj_terms;
  std::vector<std::vector<Term>> row_terms(row_names.size());
  for (std::size_t j = 0; j < cols.size(); ++j) {
    const auto& c = cols[j];
    Integrality type = Integrality::Continuous;
    if (c.integer) {
      if (c.lo < 0.0 || c.hi > 1.0) {
        throw ModelError("MPS: integer column '" + c.name + "' is not binary (general integers unsupported)");
      }
      type = Integrality::Binary;
    }
    const VarId id = model.add_variable(restore(var_alias, c.name), c.lo, c.hi, type);
    for (const auto& [r, v] : c.entries) {
      if (r < 0) {
        if (v != 0.0) obj_terms.push_back({id, v});
      } else {
        row_terms[r].push_back({id, v});
      }
    }
  }
  for (std::size_t r = 0; r < row_names.size(); ++r) {
    model.add_constraint(restore(row_alias, row_names[r]), std::move(row_terms[r]), row_senses[r], rhs[r]);
  }
  model.set_objective(sense, std::move(obj_terms));
  return model;
}

}  // namespace nnmip
