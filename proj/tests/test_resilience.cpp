#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "nnmip/oracle.hpp"
#include "nnmip/resilience.hpp"
#include "test_support.hpp"

using namespace nnmip;

namespace {

/// Re-checks a phi witness with forward evaluation only.
bool witness_holds(const Network& net, const ResilienceResult& r, double tol = 1e-6) {
  if (r.witness_a.size() != net.input_dim()) return false;
  const std::size_t L = net.logit_layer();
  const auto at_a = forward(net, r.witness_a).output(L);
  if (!strongly_classifies_logits(at_a, r.m, r.alpha, tol)) return false;
  std::vector<double> moved(r.witness_a);
  double norm = 0.0;
  for (std::size_t j = 0; j < moved.size(); ++j) {
    moved[j] += r.witness_eps[j];
    norm += std::abs(r.witness_eps[j]);
  }
  if (std::abs(norm - r.phi) > tol * std::max(1.0, r.phi)) return false;
  return count_dominating(forward(net, moved).output(L), r.m, tol) >= r.k;
}

}  // namespace

TEST_CASE("phi on the linear two-class net") {
  const Network net = testing::load_fixture("linear2.json");
  SUBCASE("alpha e") {
    const auto r = compute_phi(net, 1, std::numbers::e, 1);
    CHECK(r.status == SolveStatus::Optimal);
    CHECK(std::abs(r.phi - 1.0) <= 1e-6);
    CHECK(r.exact);
    CHECK(r.witness_valid);
    CHECK(witness_holds(net, r));
    CHECK(r.phi_ini >= r.phi - 1e-9);
  }
  SUBCASE("alpha 1") {
    const auto r = compute_phi(net, 1, 1.0, 1);
    CHECK(r.status == SolveStatus::Optimal);
    CHECK(std::abs(r.phi) <= 1e-6);
  }
  SUBCASE("alpha above the maximum") {
    const auto r = compute_phi(net, 1, 3.0, 1);
    CHECK(r.status == SolveStatus::Infeasible);
    CHECK(std::isinf(r.phi));
    CHECK_FALSE(r.strongly_classifiable);
    CHECK(r.search.status == SolveStatus::Infeasible);
  }
  SUBCASE("bad arguments") {
    CHECK_THROWS(compute_phi(net, 0, 1.1, 1));
    CHECK_THROWS(compute_phi(net, 1, 0.5, 1));
    CHECK_THROWS(compute_phi(net, 1, 1.1, 2));
  }
}

TEST_CASE("warm and cold solves agree") {
  for (const char* f : {"relu_margin.json", "maxpool.json"}) {
    const Network net = testing::load_fixture(f);
    ResilienceConfig cold;
    cold.warm_start = false;
    const auto w = compute_phi(net, 1, 1.1, 1);
    const auto c = compute_phi(net, 1, 1.1, 1, cold);
    REQUIRE(w.status == SolveStatus::Optimal);
    REQUIRE(c.status == SolveStatus::Optimal);
    CHECK(std::abs(w.phi - c.phi) <= 1e-6 * std::max(1.0, c.phi));
    CHECK(w.warm_started);
    CHECK_FALSE(c.warm_started);
  }
}

TEST_CASE("phi is monotone in alpha and k") {
  const Network net = testing::load_fixture("relu3class.json");
  double prev = 0.0;
  for (double alpha : {1.0, 1.1, 1.5, std::numbers::e}) {
    const auto r1 = compute_phi(net, 1, alpha, 1);
    const auto r2 = compute_phi(net, 1, alpha, 2);
    if (r1.status == SolveStatus::Infeasible) break;
    REQUIRE(r1.status == SolveStatus::Optimal);
    REQUIRE(r2.status == SolveStatus::Optimal);
    CHECK(r1.phi >= prev - 1e-6);
    CHECK(r2.phi >= r1.phi - 1e-6);
    CHECK(witness_holds(net, r1));
    CHECK(witness_holds(net, r2));
    prev = r1.phi;
  }
}

TEST_CASE("phi matches the grid oracle") {
  for (const char* f : {"relu_margin.json", "deep.json"}) {
    const Network net = testing::load_fixture(f);
    const auto r = compute_phi(net, 1, 1.1, 1);
    const auto g = grid_phi(net, 1, 1.1, 1, 0.01);
    INFO(f);
    REQUIRE(r.status == SolveStatus::Optimal);
    CHECK(r.phi <= g.estimate + 1e-6);
    CHECK(r.phi >= g.estimate - g.resolution_bound - 1e-6);
  }
}

TEST_CASE("perturbations below phi are safe, above phi some are not") {
  const Network net = testing::load_fixture("relu_margin.json");
  const auto r = compute_phi(net, 1, 1.1, 1);
  REQUIRE(r.status == SolveStatus::Optimal);
  // The witness input itself is robust for delta < phi and violated at phi + 0.05.
  ResilienceConfig cfg;
  const auto safe = check_local_robustness(net, r.witness_a, 1, std::max(0.0, r.phi - 0.05), 1, cfg);
  CHECK(safe.verdict == Verdict::Robust);
  const auto broken = check_local_robustness(net, r.witness_a, 1, r.phi + 0.05, 1, cfg);
  CHECK(broken.verdict == Verdict::Violated);
}

TEST_CASE("xi") {
  SUBCASE("symmetric net") {
    const Network net = testing::load_fixture("symmetric.json");
    const auto x = compute_xi(net, 1.1, 1);
    REQUIRE(x.classes.size() == 2);
    REQUIRE(x.xi.has_value());
    CHECK(x.resolved);
    CHECK(std::abs(x.classes[0].phi - x.classes[1].phi) <= 1e-6);
    CHECK(std::abs(*x.xi - x.classes[0].phi) <= 1e-6);
  }
  SUBCASE("three classes against the grid") {
    const Network net = testing::load_fixture("relu3class.json");
    const auto x = compute_xi(net, 1.1, 1);
    REQUIRE(x.xi.has_value());
    double grid_min = kInf, tol = 0.0;
    for (int m = 1; m <= 3; ++m) {
      const auto g = grid_phi(net, m, 1.1, 1, 0.01);
      grid_min = std::min(grid_min, g.estimate);
      tol = std::max(tol, g.resolution_bound);
    }
    CHECK(*x.xi <= grid_min + 1e-6);
    CHECK(*x.xi >= grid_min - tol - 1e-6);
  }
  SUBCASE("classes never strongly classified are excluded") {
    const Network net = testing::load_fixture("linear2.json");
    // Scores differ by at most 1, so alpha = 3 rules out both classes and alpha = 2 keeps both.
    const auto none = compute_xi(net, 3.0, 1);
    CHECK_FALSE(none.xi.has_value());
    const auto some = compute_xi(net, 2.0, 1);
    REQUIRE(some.xi.has_value());
    CHECK(std::isfinite(*some.xi));
  }
}

TEST_CASE("local robustness on the linear net") {
  const Network net = testing::load_fixture("linear2.json");
  const std::vector<double> a{1.0, 0.0};
  SUBCASE("delta 0.5 is robust") {
    CHECK(check_local_robustness(net, a, 1, 0.5, 1).verdict == Verdict::Robust);
  }
  SUBCASE("delta 1 is violated with a checked witness") {
    const auto r = check_local_robustness(net, a, 1, 1.0, 1);
    REQUIRE(r.verdict == Verdict::Violated);
    double norm = 0.0;
    std::vector<double> moved(a);
    for (std::size_t j = 0; j < 2; ++j) {
      norm += std::abs(r.witness_eps[j]);
      moved[j] += r.witness_eps[j];
    }
    CHECK(norm <= 1.0 + 1e-6);
    const auto logits = forward(net, moved).output(1);
    CHECK(logits[1] >= logits[0] - 1e-6);
  }
  SUBCASE("zero budget with a strict margin") {
    CHECK(check_local_robustness(net, a, 1, 0.0, 1).verdict == Verdict::Robust);
  }
  SUBCASE("input not classified as claimed") {
    CHECK_THROWS_AS(check_local_robustness(net, a, 2, 0.5, 1), QueryError);
  }
}

TEST_CASE("maximum alpha") {
  SUBCASE("linear net") {
    const auto r = compute_max_alpha(testing::load_fixture("linear2.json"), 1);
    REQUIRE(r.status == SolveStatus::Optimal);
    CHECK(r.alpha == doctest::Approx(std::numbers::e).epsilon(1e-6));
    CHECK(r.margin == doctest::Approx(1.0));
  }
  SUBCASE("symmetric net has equal values") {
    const Network net = testing::load_fixture("symmetric.json");
    const auto a = compute_max_alpha(net, 1);
    const auto b = compute_max_alpha(net, 2);
    CHECK(a.alpha == doctest::Approx(b.alpha).epsilon(1e-6));
  }
  SUBCASE("dominated class") {
    WeightMatrix w(1, 2);
    w(0, 0) = 1.0;  // class 1 always leads by 1
    w(1, 0) = 1.0;
    w(1, 1) = 1.0;
    const Network net({{0.0, 1.0}}, {Layer{LayerKind::LinearOutput, w, {}}, Layer{LayerKind::Softmax, {}, {}}});
    CHECK(compute_max_alpha(net, 2).never_top());
    CHECK(compute_max_alpha(net, 1).alpha == doctest::Approx(std::numbers::e));
  }
}

TEST_CASE("atan networks give flagged under-approximations") {
  const Network net = testing::load_fixture("atan2.json");
  ResilienceConfig cfg;
  cfg.atan_segments = 4;
  const auto r = compute_phi(net, 1, 1.1, 1, cfg);
  CHECK_FALSE(r.exact);
  REQUIRE(r.status == SolveStatus::Optimal);
  const auto g = grid_phi(net, 1, 1.1, 1, 0.02);
  CHECK(r.phi <= g.estimate + 1e-6);
}
