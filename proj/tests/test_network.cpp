#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "nnmip/network.hpp"
#include "test_support.hpp"

using namespace nnmip;

namespace {

Network logits_net(std::size_t classes) {
  // Identity linear layer on [-10, 10]^classes followed by softmax.
  WeightMatrix w(classes, classes);
  for (std::size_t i = 0; i < classes; ++i) w(i + 1, i) = 1.0;
  return Network(std::vector<Interval>(classes, {-10.0, 10.0}),
                 {Layer{LayerKind::LinearOutput, w, {}}, Layer{LayerKind::Softmax, {}, {}}});
}

std::string error_of(const std::string& text) {
  try {
    parse_network(text);
  } catch (const NetworkError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("minimal network with one ReLU neuron") {
  const Network net = parse_network(R"({"input_dim": 1, "input_bounds": [[0, 1]],
      "layers": [{"kind": "relu_dense", "weights": [[0], [1]]}]})");
  CHECK(net.num_layers() == 1);
  CHECK(net.input_dim() == 1);
  CHECK(net.width(1) == 1);
  CHECK_FALSE(net.ends_with_softmax());
}

TEST_CASE("two dense layers over the unit square") {
  const Network net = parse_network(R"({"input_dim": 2, "input_bounds": [[0, 1], [0, 1]],
      "layers": [{"kind": "relu_dense", "weights": [[0, 0, 0], [1, 2, 3], [4, 5, 6]]},
                 {"kind": "linear_output", "weights": [[1], [1], [1], [1]]}]})");
  CHECK(net.input_dim() == 2);
  CHECK(net.num_layers() == 2);
  CHECK(net.width(1) == 3);
  CHECK(net.layer(1).weights(2, 1) == 5.0);
  CHECK(net.layer(1).weights.bias(2) == 0.0);
}

TEST_CASE("validation errors name the offending layer or field") {
  SUBCASE("layer 2 input dimension mismatch") {
    const auto msg = error_of(R"({"input_dim": 1, "input_bounds": [[0, 1]],
        "layers": [{"kind": "relu_dense", "weights": [[0, 0], [1, 1]]},
                   {"kind": "linear_output", "weights": [[0], [1], [1], [1]]}]})");
    CHECK(msg.find("layer 2") != std::string::npos);
  }
  SUBCASE("lower bound above upper bound") {
    const auto msg = error_of(R"({"input_dim": 1, "input_bounds": [[2, 1]],
        "layers": [{"kind": "relu_dense", "weights": [[0], [1]]}]})");
    CHECK(msg.find("input_bounds[1]") != std::string::npos);
  }
  SUBCASE("softmax before the last layer") {
    const auto msg = error_of(R"({"input_dim": 2, "input_bounds": [[0, 1], [0, 1]],
        "layers": [{"kind": "softmax"}, {"kind": "linear_output", "weights": [[0], [1], [1]]}]})");
    CHECK(msg.find("layer 1") != std::string::npos);
  }
  SUBCASE("pool groups must partition the predecessors") {
    const auto msg = error_of(R"({"input_dim": 3, "input_bounds": [[0, 1], [0, 1], [0, 1]],
        "layers": [{"kind": "max_pool", "pool_groups": [[1, 2]]}]})");
    CHECK(msg.find("layer 1") != std::string::npos);
  }
  SUBCASE("group of three") {
    const auto msg = error_of(R"({"input_dim": 3, "input_bounds": [[0, 1], [0, 1], [0, 1]],
        "layers": [{"kind": "max_pool", "pool_groups": [[1, 2, 3]]}]})");
    CHECK(msg.find("size") != std::string::npos);
  }
  SUBCASE("unknown kind") {
    CHECK_FALSE(error_of(R"({"input_dim": 1, "input_bounds": [[0, 1]],
        "layers": [{"kind": "sigmoid", "weights": [[0], [1]]}]})").empty());
  }
  SUBCASE("malformed document") {
    CHECK_THROWS_AS(parse_network("{not json"), NetworkParseError);
    CHECK_THROWS_AS(parse_network(R"({"input_dim": 1})"), NetworkParseError);
  }
}

TEST_CASE("forward pass examples") {
  SUBCASE("softmax of (-1, 2, 3)") {
    const auto p = softmax(std::vector<double>{-1.0, 2.0, 3.0});
    CHECK(std::abs(p[0] - 0.0132) <= 5e-4);
    CHECK(std::abs(p[1] - 0.2654) <= 5e-4);
    CHECK(std::abs(p[2] - 0.7214) <= 5e-4);
  }
  SUBCASE("ReLU clamps negative inputs") {
    WeightMatrix w(1, 1);
    w(1, 0) = 1.0;
    const Network net({{-10.0, 10.0}}, {Layer{LayerKind::ReluDense, w, {}}});
    const auto tr = forward(net, std::vector<double>{-5.0});
    CHECK(tr.layers[0].im[0] == -5.0);
    CHECK(tr.layers[0].x[0] == 0.0);
  }
  SUBCASE("all-zero weights") {
    const Network net({{0.0, 1.0}, {0.0, 1.0}}, {Layer{LayerKind::ReluDense, WeightMatrix(2, 3), {}}});
    const auto tr = forward(net, std::vector<double>{0.3, 0.9});
    for (double v : tr.layers[0].im) CHECK(v == 0.0);
    for (double v : tr.layers[0].x) CHECK(v == 0.0);
  }
  SUBCASE("max pool of four is the overall maximum") {
    const Network net({{-1, 1}, {-1, 1}, {-1, 1}, {-1, 1}}, {Layer{LayerKind::MaxPool, {}, {{0, 1, 2, 3}}}});
    const auto tr = forward(net, std::vector<double>{0.1, -0.4, 0.7, 0.2});
    CHECK(tr.layers[0].x[0] == 0.7);
  }
  SUBCASE("dimension mismatch and domain checking") {
    const Network net = testing::load_fixture("linear2.json");
    CHECK_THROWS_AS(forward(net, std::vector<double>{0.5}), std::invalid_argument);
    CHECK_NOTHROW(forward(net, std::vector<double>{2.0, 0.0}));
    CHECK_THROWS_AS(forward(net, std::vector<double>{2.0, 0.0}, {.check_domain = true}), std::invalid_argument);
  }
}

TEST_CASE("strong classification through the logit margin") {
  const Network net = logits_net(3);
  CHECK(strongly_classifies(net, std::vector<double>{3, 2, -1}, 1, 1.0));
  CHECK(strongly_classifies(net, std::vector<double>{3, 2, -1}, 1, std::numbers::e));
  CHECK_FALSE(strongly_classifies(net, std::vector<double>{3, 2.5, -1}, 1, std::numbers::e));
  CHECK_FALSE(strongly_classifies(net, std::vector<double>{3, 2, -1}, 2, 1.0));
  CHECK_THROWS(strongly_classifies(net, std::vector<double>{3, 2, -1}, 4, 1.0));
  CHECK_THROWS(strongly_classifies(net, std::vector<double>{3, 2, -1}, 1, 0.5));
}

TEST_CASE("softmax outputs form a distribution") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> z(0.0, 20.0);
  for (int t = 0; t < 2000; ++t) {
    std::vector<double> logits(1 + t % 6);
    for (auto& v : logits) v = z(rng);
    const auto p = softmax(logits);
    double sum = 0.0;
    for (double v : p) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-9);
  }
}

TEST_CASE("log-margin test agrees with the probability ratio test") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> z(-5.0, 5.0);
  std::uniform_real_distribution<double> a(1.0, 50.0);
  int checked = 0;
  for (int t = 0; t < 10000; ++t) {
    std::vector<double> logits(2 + t % 4);
    for (auto& v : logits) v = z(rng);
    const double alpha = a(rng);
    const auto p = softmax(logits);
    // Probability form, compared in the log domain with a 1e-9 margin around ties.
    bool by_prob = true;
    bool near_tie = false;
    for (std::size_t j = 1; j < p.size(); ++j) {
      const double lhs = std::log(p[0]);
      const double rhs = std::log(alpha) + std::log(p[j]);
      if (std::abs(lhs - rhs) <= 1e-9) near_tie = true;
      if (lhs < rhs) by_prob = false;
    }
    if (near_tie) continue;
    ++checked;
    CHECK(by_prob == strongly_classifies_logits(logits, 1, alpha));
  }
  CHECK(checked > 9900);
}

TEST_CASE("forward is deterministic") {
  std::mt19937_64 rng(3);
  const Network net = testing::random_network(rng, 3, 2, 6, 3);
  const auto x = testing::random_input(rng, net);
  const auto a = forward(net, x);
  const auto b = forward(net, x);
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    CHECK(a.layers[l].x == b.layers[l].x);
    CHECK(a.layers[l].im == b.layers[l].im);
  }
}

TEST_CASE("serialisation round trip") {
  for (const char* f : {"maxpool.json", "deep.json", "atan2.json", "lookback_chain.json"}) {
    const Network net = testing::load_fixture(f);
    const Network again = parse_network(serialize_network(net));
    REQUIRE(again.num_layers() == net.num_layers());
    std::mt19937_64 rng(5);
    for (int t = 0; t < 20; ++t) {
      const auto x = testing::random_input(rng, net);
      CHECK(forward(net, x).output(net.num_layers()) == forward(again, x).output(net.num_layers()));
    }
  }
}

TEST_CASE("input vector files") {
  CHECK(load_input_vector(testing::fixture("input_a10.json")) == std::vector<double>{1.0, 0.0});
  const std::string path = "nnmip_test_input_array.json";
  {
    std::ofstream out(path);
    out << "[0.25, -1.5]";
  }
  CHECK(load_input_vector(path) == std::vector<double>{0.25, -1.5});
  std::remove(path.c_str());
}
