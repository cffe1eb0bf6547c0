#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <sstream>

#include "nnmip/mip_model.hpp"
#include "nnmip/mps.hpp"
#include "nnmip/solver.hpp"
#include "test_support.hpp"

using namespace nnmip;

TEST_CASE("builders") {
  MipModel m;
  const VarId b = m.add_binary("b");
  CHECK(m.variable(b).type == Integrality::Binary);
  CHECK(m.variable(b).lo == 0.0);
  CHECK(m.variable(b).hi == 1.0);
  CHECK(m.num_binaries() == 1);

  const VarId x = m.add_variable("x", -kInf, kInf);
  CHECK(m.find_variable("x") == x);
  CHECK_FALSE(m.find_variable("y").has_value());
  CHECK_THROWS_AS(m.add_variable("x", 0, 1), ModelError);
  CHECK_THROWS_AS(m.add_variable("z", 2, 1), ModelError);

  CHECK_THROWS_AS(m.add_constraint("bad", {{7, 1.0}}, RowSense::LessEqual, 0.0), ModelError);
  const RowId r = m.add_constraint("r", {{x, 1.0}, {b, 2.0}}, RowSense::GreaterEqual, 1.0);
  CHECK(m.find_constraint("r") == r);

  m.set_objective(ObjSense::Minimize, {{x, 1.0}});
  m.set_objective(ObjSense::Maximize, {{b, 3.0}});
  CHECK(m.objective().sense == ObjSense::Maximize);
  REQUIRE(m.objective().terms.size() == 1);
  CHECK(m.objective().terms[0].var == b);

  m.set_branch_priority(b, 4);
  CHECK(m.branch_priority(b) == 4);
  CHECK(m.branch_priority(x) == 0);
}

TEST_CASE("check_feasible") {
  SUBCASE("contradictory rows") {
    MipModel m;
    const VarId x = m.add_variable("x", -10, 10);
    m.add_constraint("lo", {{x, 1.0}}, RowSense::GreaterEqual, 1.0);
    m.add_constraint("hi", {{x, 1.0}}, RowSense::LessEqual, 0.0);
    for (double v : {-1.0, 0.0, 0.5, 1.0, 3.0}) CHECK_FALSE(check_feasible(m, {v}, 1e-9));
  }
  SUBCASE("empty model") { CHECK(check_feasible(MipModel{}, {}, 1e-9)); }
  SUBCASE("tolerance") {
    MipModel m;
    const VarId x = m.add_variable("x", 0, 10);
    m.add_constraint("eq", {{x, 1.0}}, RowSense::Equal, 3.0);
    CHECK(check_feasible(m, {3.0 + 1e-12}, 1e-9));
    CHECK_FALSE(check_feasible(m, {3.0 + 1e-6}, 1e-9));
  }
  SUBCASE("integrality and violations") {
    MipModel m;
    m.add_binary("b");
    CHECK(check_feasible(m, {1.0}, 1e-9));
    CHECK_FALSE(check_feasible(m, {0.5}, 1e-9));
    const auto v = find_violations(m, {0.5}, 1e-9);
    REQUIRE(v.size() == 1);
    CHECK(v[0].kind == Violation::Kind::Integrality);
    CHECK(v[0].name == "b");
  }
}

TEST_CASE("merge_by_name copies values across models") {
  MipModel a;
  a.add_variable("x", 0, 1);
  a.add_variable("y", 0, 1);
  MipModel b;
  b.add_variable("y", 0, 1);
  b.add_variable("z", 0, 1);
  b.add_variable("x", 0, 1);
  const Assignment va{0.25, 0.75};
  const auto merged = merge_by_name(b, {{&a, &va}}, -1.0);
  CHECK(merged == Assignment{0.75, -1.0, 0.25});
}

TEST_CASE("MPS layout") {
  SUBCASE("G row and upper bound") {
    MipModel m;
    const VarId x = m.add_variable("x", 0, 10);
    m.add_constraint("c1", {{x, 1.0}}, RowSense::GreaterEqual, 3.0);
    m.set_objective(ObjSense::Minimize, {{x, 1.0}});
    const std::string text = export_mps(m);
    std::istringstream in(text);
    std::string line, section;
    bool g_row = false, rhs = false, up = false;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '*') continue;
      if (line[0] != ' ') {
        std::istringstream ls(line);
        ls >> section;
        continue;
      }
      std::istringstream ls(line);
      std::vector<std::string> f;
      for (std::string t; ls >> t;) f.push_back(t);
      if (section == "ROWS" && f.size() == 2 && f[0] == "G" && f[1] == "c1") g_row = true;
      if (section == "RHS" && f.size() == 3 && f[1] == "c1" && std::stod(f[2]) == 3.0) rhs = true;
      if (section == "BOUNDS" && f.size() == 4 && f[0] == "UP" && f[2] == "x" && std::stod(f[3]) == 10.0) up = true;
    }
    CHECK(g_row);
    CHECK(rhs);
    CHECK(up);
  }
  SUBCASE("integer markers") {
    MipModel m;
    const VarId x = m.add_variable("x", 0, 1);
    const VarId b = m.add_binary("b");
    m.add_constraint("c", {{x, 1.0}, {b, 1.0}}, RowSense::LessEqual, 1.0);
    const std::string text = export_mps(m);
    const auto start = text.find("'INTORG'");
    const auto end = text.find("'INTEND'");
    REQUIRE(start != std::string::npos);
    REQUIRE(end != std::string::npos);
    const std::string inner = text.substr(start, end - start);
    CHECK(inner.find(" b ") != std::string::npos);
    CHECK(inner.find(" x ") == std::string::npos);
    CHECK(parse_mps(text).variable(b).type == Integrality::Binary);
  }
  SUBCASE("long names are mangled and restored") {
    MipModel m;
    const VarId v = m.add_variable("p.l1.n3.x", -1, 2);
    m.add_constraint("strong.1", {{v, 1.5}}, RowSense::LessEqual, 1.0);
    const std::string text = export_mps(m);
    CHECK(text.find(mangle_mps_name("p.l1.n3.x", 'C', 0)) != std::string::npos);
    const MipModel back = parse_mps(text);
    CHECK(back.variable(0).name == "p.l1.n3.x");
    CHECK(back.constraint(0).name == "strong.1");
  }
  SUBCASE("malformed input") {
    CHECK_THROWS_AS(parse_mps("NAME X\nROWS\n N _OBJ\nCOLUMNS\n x _OBJ\n"), ModelError);
    CHECK_THROWS_AS(parse_mps("NAME X\nROWS\n N _OBJ\nRANGES\n R r 1\nENDATA\n"), ModelError);
  }
}

TEST_CASE("MPS round trip preserves feasibility and objective") {
  std::mt19937_64 rng(4242);
  for (int inst = 0; inst < 10; ++inst) {
    const MipModel m = testing::random_mip(rng, 3, 3, 5, inst % 2 == 1);
    const MipModel back = parse_mps(export_mps(m));
    REQUIRE(back.num_variables() == m.num_variables());
    REQUIRE(back.num_constraints() == m.num_constraints());
    CHECK(back.objective().sense == m.objective().sense);
    std::uniform_real_distribution<double> u(-4.0, 7.0);
    for (int s = 0; s < 100; ++s) {
      Assignment a(m.num_variables());
      for (std::size_t j = 0; j < a.size(); ++j) {
        const auto& v = m.variable(static_cast<VarId>(j));
        a[j] = v.type == Integrality::Binary ? std::round(u(rng) / 7.0) : u(rng);
      }
      CHECK(check_feasible(m, a, 1e-9) == check_feasible(back, a, 1e-9));
      CHECK(m.objective_value(a) == back.objective_value(a));
    }
    // A feasible point of the relaxation exercises the accepting side.
    const MipModel relaxed = testing::relax(m);
    const auto lp = solve_lp(relaxed);
    if (lp.status == LpStatus::Optimal) {
      CHECK(check_feasible(relaxed, lp.x, 1e-7) == check_feasible(testing::relax(back), lp.x, 1e-7));
      CHECK(check_feasible(relaxed, lp.x, 1e-7));
    }
  }
}

TEST_CASE("lp listing mentions every row") {
  MipModel m;
  const VarId x = m.add_variable("x", 0, 4);
  m.add_constraint("cap", {{x, 2.0}}, RowSense::LessEqual, 3.0);
  m.set_objective(ObjSense::Maximize, {{x, 1.0}});
  const std::string lp = to_lp_string(m);
  CHECK(lp.find("cap") != std::string::npos);
  CHECK(lp.find("x") != std::string::npos);
}
