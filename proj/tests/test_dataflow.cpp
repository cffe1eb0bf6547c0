#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <sstream>

#include "nnmip/dataflow.hpp"
#include "test_support.hpp"

using namespace nnmip;

namespace {

Network single_relu(double bias, double w1, double w2, Interval box = {0.0, 1.0}) {
  WeightMatrix w(2, 1);
  w(0, 0) = bias;
  w(1, 0) = w1;
  w(2, 0) = w2;
  return Network({box, box}, {Layer{LayerKind::ReluDense, w, {}}});
}

bool inside(double v, Interval b, double tol = 1e-9) { return b.contains(v, tol); }

}  // namespace

TEST_CASE("interval image of a single dense node") {
  const auto b = propagate_intervals(single_relu(0.0, 2.0, -3.0));
  const auto& n = b.node(1, 0);
  CHECK(n.has_im);
  CHECK(n.im_lo == -3.0);
  CHECK(n.im_hi == 2.0);
  CHECK(n.lo == 0.0);
  CHECK(n.hi == 2.0);
  REQUIRE(n.phase.has_value());
  CHECK(*n.phase == Phase::Undecided);
  CHECK(n.big_m >= 3.0);
  CHECK(n.big_m <= 3.0 * (1.0 + 1e-6));
}

TEST_CASE("phase classification") {
  SUBCASE("always active") {
    const auto b = propagate_intervals(single_relu(1.0, 3.0, 0.0));
    CHECK(b.node(1, 0).lo == 1.0);
    CHECK(b.node(1, 0).hi == 4.0);
    CHECK(*b.node(1, 0).phase == Phase::AlwaysActive);
  }
  SUBCASE("always inactive") {
    const auto b = propagate_intervals(single_relu(-4.0, 3.0, 0.0));
    CHECK(b.node(1, 0).lo == 0.0);
    CHECK(b.node(1, 0).hi == 0.0);
    CHECK(*b.node(1, 0).phase == Phase::AlwaysInactive);
    CHECK(b.count_undecided() == 0);
  }
}

TEST_CASE("max-pool and atan images") {
  const auto mp = propagate_intervals(testing::load_fixture("maxpool.json"));
  // Layer 1 nodes: x1 in [0,1], 0.5 x1 in [0,0.5] -> group max in [0,1].
  CHECK(mp.node(2, 0).lo == 0.0);
  CHECK(mp.node(2, 0).hi == 1.0);
  CHECK_FALSE(mp.node(2, 0).has_im);

  const auto at = propagate_intervals(testing::load_fixture("atan2.json"));
  const auto& n = at.node(1, 0);
  CHECK(n.im_lo == -6.0);
  CHECK(n.im_hi == 6.0);
  CHECK(n.lo == doctest::Approx(std::atan(-6.0)));
  CHECK(n.hi == doctest::Approx(std::atan(6.0)));
}

TEST_CASE("propagated bounds contain every forward trace") {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 10; ++t) {
    const Network net = testing::random_network(rng, 1 + t % 4, 1 + t % 3, 6, 3, false);
    const auto bounds = propagate_intervals(net);
    for (int s = 0; s < 500; ++s) {
      const auto tr = forward(net, testing::random_input(rng, net));
      for (std::size_t l = 1; l <= net.num_layers(); ++l) {
        for (std::size_t i = 0; i < net.width(l); ++i) {
          const auto& nb = bounds.node(l, i);
          CHECK(inside(tr.layers[l - 1].x[i], nb.x()));
          if (nb.has_im) CHECK(inside(tr.layers[l - 1].im[i], nb.im()));
          if (nb.has_im) CHECK(std::abs(tr.layers[l - 1].im[i]) <= nb.big_m);
        }
      }
    }
  }
}

TEST_CASE("lookback tightens the x - ReLU(x) chain") {
  const Network net = testing::load_fixture("lookback_chain.json");
  const auto plain = propagate_intervals(net);
  CHECK(plain.node(2, 0).im_lo == doctest::Approx(-2.0));
  CHECK(plain.node(2, 0).im_hi == doctest::Approx(1.0));

  LookbackConfig cfg;
  cfg.depth = 2;
  LookbackStats stats;
  const auto tight = tighten_lookback(net, plain, cfg, &stats);
  CHECK(std::abs(tight.node(2, 0).im_lo + 1.0) <= 1e-6);
  CHECK(std::abs(tight.node(2, 0).im_hi - 0.0) <= 1e-6);
  CHECK(stats.improved >= 1);

  // Grid check of z = min(x, 0) over the domain.
  double lo = kInf, hi = -kInf;
  for (int s = 0; s <= 200; ++s) {
    const double x = -1.0 + 0.01 * s;
    const double z = forward(net, std::vector<double>{x}).layers[1].x[0];
    lo = std::min(lo, z);
    hi = std::max(hi, z);
  }
  CHECK(lo >= tight.node(2, 0).im_lo - 1e-9);
  CHECK(hi <= tight.node(2, 0).im_hi + 1e-9);
  CHECK(lo == doctest::Approx(-1.0));
  CHECK(hi == doctest::Approx(0.0));
}

TEST_CASE("depth one reproduces interval propagation") {
  const Network net = testing::load_fixture("deep.json");
  const auto plain = propagate_intervals(net);
  LookbackConfig cfg;
  cfg.depth = 1;
  const auto same = tighten_lookback(net, plain, cfg);
  for (std::size_t l = 1; l <= net.num_layers(); ++l) {
    for (std::size_t i = 0; i < net.width(l); ++i) {
      CHECK(same.node(l, i).lo == plain.node(l, i).lo);
      CHECK(same.node(l, i).hi == plain.node(l, i).hi);
      CHECK(same.node(l, i).im_lo == plain.node(l, i).im_lo);
      CHECK(same.node(l, i).im_hi == plain.node(l, i).im_hi);
    }
  }
}

TEST_CASE("inactive nodes stay at zero after tightening") {
  WeightMatrix w1(1, 2);
  w1(0, 0) = -3.0;  // always inactive
  w1(1, 0) = 1.0;
  w1(1, 1) = 1.0;
  WeightMatrix w2(2, 1);
  w2(1, 0) = 1.0;
  w2(2, 0) = 1.0;
  const Network net({{-1.0, 1.0}}, {Layer{LayerKind::ReluDense, w1, {}}, Layer{LayerKind::ReluDense, w2, {}}});
  const auto plain = propagate_intervals(net);
  REQUIRE(*plain.node(1, 0).phase == Phase::AlwaysInactive);
  const auto tight = tighten_lookback(net, plain, LookbackConfig{});
  CHECK(tight.node(1, 0).lo == 0.0);
  CHECK(tight.node(1, 0).hi == 0.0);
  CHECK(*tight.node(1, 0).phase == Phase::AlwaysInactive);
}

TEST_CASE("tightened bounds stay sound and never loosen") {
  std::mt19937_64 rng(99);
  for (int t = 0; t < 6; ++t) {
    const Network net = testing::random_network(rng, 2 + t % 2, 2, 5, 2, false);
    const auto plain = propagate_intervals(net);
    const auto tight = tighten_lookback(net, plain, LookbackConfig{});
    for (std::size_t l = 1; l <= net.num_layers(); ++l) {
      for (std::size_t i = 0; i < net.width(l); ++i) {
        CHECK(tight.node(l, i).lo >= plain.node(l, i).lo - 1e-12);
        CHECK(tight.node(l, i).hi <= plain.node(l, i).hi + 1e-12);
      }
    }
    for (int s = 0; s < 500; ++s) {
      const auto tr = forward(net, testing::random_input(rng, net));
      for (std::size_t l = 1; l <= net.num_layers(); ++l) {
        for (std::size_t i = 0; i < net.width(l); ++i) {
          CHECK(inside(tr.layers[l - 1].x[i], tight.node(l, i).x(), 1e-6));
          if (tight.node(l, i).has_im) CHECK(inside(tr.layers[l - 1].im[i], tight.node(l, i).im(), 1e-6));
        }
      }
    }
  }
}

TEST_CASE("bounds dump lists every node") {
  const Network net = testing::load_fixture("relu3class.json");
  std::ostringstream os;
  write_bounds_dump(os, net, propagate_intervals(net));
  const std::string text = os.str();
  std::size_t lines = 0;
  for (char c : text) lines += c == '\n';
  CHECK(lines >= 4 + 3);
  CHECK(text.find("undecided") != std::string::npos);
}
