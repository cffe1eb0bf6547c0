#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <sstream>

#include "nnmip/oracle.hpp"
#include "nnmip/solver.hpp"
#include "test_support.hpp"

using namespace nnmip;

namespace {

MipModel knapsack() {
  MipModel m;
  const VarId x = m.add_binary("x");
  const VarId y = m.add_binary("y");
  m.add_constraint("cap", {{x, 1.0}, {y, 1.0}}, RowSense::LessEqual, 1.0);
  m.set_objective(ObjSense::Minimize, {{x, -1.0}, {y, -1.0}});
  return m;
}

bool close(double a, double b, double rel = 1e-6) { return std::abs(a - b) <= rel * std::max(1.0, std::abs(b)); }

}  // namespace

TEST_CASE("binary knapsack") {
  for (int workers : {1, 4}) {
    SolveConfig cfg;
    cfg.workers = workers;
    const auto r = solve(knapsack(), cfg);
    CHECK(r.status == SolveStatus::Optimal);
    CHECK(r.objective == doctest::Approx(-1.0));
    REQUIRE(r.has_solution());
    CHECK((*r.assignment)[0] + (*r.assignment)[1] == doctest::Approx(1.0));
  }
}

TEST_CASE("pure LP takes one node") {
  MipModel m;
  const VarId x = m.add_variable("x", 0, 10);
  m.add_constraint("cap", {{x, 1.0}}, RowSense::LessEqual, 3.0);
  m.set_objective(ObjSense::Maximize, {{x, 1.0}});
  const auto r = solve(m);
  CHECK(r.status == SolveStatus::Optimal);
  CHECK(r.nodes_explored == 1);
  CHECK(r.objective == doctest::Approx(solve_lp(m).objective));
  CHECK(r.dual_bound == doctest::Approx(3.0));
}

TEST_CASE("infeasible and unbounded models") {
  MipModel inf;
  const VarId b = inf.add_binary("b");
  inf.add_constraint("half", {{b, 2.0}}, RowSense::Equal, 1.0);
  CHECK(solve(inf).status == SolveStatus::Infeasible);

  MipModel unb;
  const VarId x = unb.add_variable("x", 0, kInf);
  unb.add_binary("c");
  unb.set_objective(ObjSense::Maximize, {{x, 1.0}});
  CHECK(solve(unb).status == SolveStatus::Unbounded);
}

TEST_CASE("random MIPs agree with enumeration") {
  std::mt19937_64 rng(8080);
  int optimal = 0;
  for (int inst = 0; inst < 50; ++inst) {
    const MipModel m = testing::random_mip(rng, 1 + inst % 3, 2 + inst % 7, 3 + inst % 4, inst % 3 == 0);
    const auto expect = enumerate_mip(m);
    const auto got = solve(m);
    INFO("instance " << inst);
    REQUIRE(got.status == expect.status);
    if (expect.status == SolveStatus::Optimal) {
      ++optimal;
      CHECK(close(got.objective, expect.objective));
      CHECK(check_feasible(m, *got.assignment, 1e-6));
    }
  }
  CHECK(optimal > 20);
}

TEST_CASE("parallel workers return the same optimum") {
  std::mt19937_64 rng(31);
  for (int inst = 0; inst < 10; ++inst) {
    const MipModel m = testing::random_mip(rng, 2, 10, 6);
    const auto one = solve(m);
    for (int workers : {2, 4}) {
      SolveConfig cfg;
      cfg.workers = workers;
      cfg.deterministic = false;
      const auto many = solve(m, cfg);
      CHECK(many.status == one.status);
      if (one.status == SolveStatus::Optimal) CHECK(close(many.objective, one.objective));
      CHECK(many.wall_time >= 0.0);
    }
  }
}

TEST_CASE("warm start") {
  SUBCASE("valid start is used and optimum unchanged") {
    MipModel m = knapsack();
    m.set_warm_start({1.0, 0.0});
    const auto r = solve(m);
    CHECK(r.warm_start_used);
    CHECK(r.objective == doctest::Approx(-1.0));
    REQUIRE_FALSE(r.incumbent_history.empty());
    CHECK(r.incumbent_history.front() == doctest::Approx(-1.0));
  }
  SUBCASE("infeasible start is ignored") {
    MipModel m = knapsack();
    m.set_warm_start({1.0, 1.0});
    const auto r = solve(m);
    CHECK_FALSE(r.warm_start_used);
    CHECK(r.objective == doctest::Approx(-1.0));
  }
}

TEST_CASE("incumbents improve monotonically and bracket the dual bound") {
  std::mt19937_64 rng(5);
  for (int inst = 0; inst < 20; ++inst) {
    const bool maximize = inst % 2 == 1;
    const MipModel m = testing::random_mip(rng, 2, 10, 5, maximize);
    const auto r = solve(m);
    for (std::size_t i = 1; i < r.incumbent_history.size(); ++i) {
      if (maximize) CHECK(r.incumbent_history[i] >= r.incumbent_history[i - 1]);
      else CHECK(r.incumbent_history[i] <= r.incumbent_history[i - 1]);
    }
    if (r.status == SolveStatus::Optimal) {
      if (maximize) CHECK(r.dual_bound >= r.objective - 1e-9);
      else CHECK(r.dual_bound <= r.objective + 1e-9);
      CHECK(r.gap() <= 1e-6);
    }
  }
}

TEST_CASE("limits") {
  std::mt19937_64 rng(17);
  // Find an instance that needs more than one node.
  for (int inst = 0; inst < 50; ++inst) {
    const MipModel m = testing::random_mip(rng, 2, 12, 6);
    const auto full = solve(m);
    if (full.status != SolveStatus::Optimal || full.nodes_explored < 5) continue;
    SolveConfig cfg;
    cfg.node_limit = 1;
    const auto r = solve(m, cfg);
    CHECK(r.nodes_explored <= 2);
    CHECK((r.status == SolveStatus::Limit || r.status == SolveStatus::FeasibleBound ||
           r.status == SolveStatus::Optimal));
    if (r.status == SolveStatus::FeasibleBound) {
      CHECK(r.has_solution());
      CHECK(r.objective >= full.objective - 1e-9);
      CHECK(r.dual_bound <= full.objective + 1e-9);
    }
    return;
  }
  FAIL("no instance needed branching");
}

TEST_CASE("single worker runs are reproducible") {
  std::mt19937_64 rng(23);
  const MipModel m = testing::random_mip(rng, 3, 11, 7);
  const auto a = solve(m);
  const auto b = solve(m);
  CHECK(a.status == b.status);
  CHECK(a.nodes_explored == b.nodes_explored);
  CHECK(a.lp_iterations == b.lp_iterations);
  CHECK(a.incumbent_history == b.incumbent_history);
  CHECK(a.assignment == b.assignment);
}

TEST_CASE("configuration validation and progress lines") {
  SolveConfig cfg;
  cfg.workers = 0;
  CHECK_THROWS(cfg.validate());
  cfg.workers = 1;
  cfg.mip_gap = -1.0;
  CHECK_THROWS(cfg.validate());

  const std::string line = format_progress(12, 1.5, 1.25, 0.5);
  CHECK(line.find("nodes=12") != std::string::npos);
  CHECK(line.find("incumbent=1.5") != std::string::npos);
  CHECK(line.find("bound=1.25") != std::string::npos);

  std::ostringstream log;
  SolveConfig logged;
  logged.log_interval = 1e-9;
  logged.log = &log;
  std::mt19937_64 rng(1);
  solve(testing::random_mip(rng, 2, 8, 5), logged);
  CHECK(log.str().find("nodes=") != std::string::npos);
}
