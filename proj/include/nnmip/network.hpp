#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace nnmip {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double width() const { return hi - lo; }
  bool contains(double v, double tol = 0.0) const { return v >= lo - tol && v <= hi + tol; }
};

enum class LayerKind { ReluDense, AtanDense, MaxPool, Softmax, LinearOutput };

std::string_view to_string(LayerKind kind);
LayerKind layer_kind_from_string(std::string_view name);

/// True for the kinds that carry a weight matrix and an intermediate value im.
bool is_dense(LayerKind kind);

/// Dense weight matrix of shape (inputs + 1) x outputs. Row 0 holds the bias
/// (weight of the constant-1 bias node), rows 1..inputs the edge weights.
class WeightMatrix {
 public:
  WeightMatrix() = default;
  WeightMatrix(std::size_t inputs, std::size_t outputs);

  std::size_t inputs() const { return inputs_; }
  std::size_t outputs() const { return outputs_; }

  /// j = 0 is the bias row; j = 1..inputs are predecessor nodes.
  double operator()(std::size_t j, std::size_t i) const { return data_[j * outputs_ + i]; }
  double& operator()(std::size_t j, std::size_t i) { return data_[j * outputs_ + i]; }

  double bias(std::size_t i) const { return (*this)(0, i); }

 private:
  std::size_t inputs_ = 0;
  std::size_t outputs_ = 0;
  std::vector<double> data_;
};

struct Layer {
  LayerKind kind = LayerKind::ReluDense;
  WeightMatrix weights;
  /// Max-pool groups, 0-based predecessor indices. Each group has 2 or 4 members.
  std::vector<std::vector<std::size_t>> pool_groups;
};

class NetworkError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed network document (syntax or schema).
class NetworkParseError : public NetworkError {
 public:
  using NetworkError::NetworkError;
};

/// Well-formed document describing an invalid network.
class NetworkValidationError : public NetworkError {
 public:
  using NetworkError::NetworkError;
};

/// Feed-forward network over a bounded input box. Layers are numbered
/// 1..num_layers() in the public interface; layer 0 is the input.
class Network {
 public:
  Network(std::vector<Interval> input_bounds, std::vector<Layer> layers);

  std::size_t input_dim() const { return input_bounds_.size(); }
  std::size_t num_layers() const { return layers_.size(); }
  const std::vector<Interval>& input_bounds() const { return input_bounds_; }

  /// l in 1..num_layers().
  const Layer& layer(std::size_t l) const { return layers_.at(l - 1); }
  const std::vector<Layer>& layers() const { return layers_; }

  /// Width of layer l; l = 0 is the input layer.
  std::size_t width(std::size_t l) const;

  bool ends_with_softmax() const;
  /// Index of the layer whose outputs feed the softmax (L - 1); 0 means the raw input.
  std::size_t logit_layer() const;
  std::size_t num_classes() const;

  Network with_input_bounds(std::vector<Interval> bounds) const;

 private:
  void validate() const;

  std::vector<Interval> input_bounds_;
  std::vector<Layer> layers_;
  std::vector<std::size_t> widths_;
};

struct LayerTrace {
  std::vector<double> im;  // empty for MaxPool and Softmax layers
  std::vector<double> x;
};

struct ForwardTrace {
  std::vector<double> input;
  std::vector<LayerTrace> layers;  // layers[l - 1] for layer l

  /// Output of layer l (l = 0 gives the input).
  const std::vector<double>& output(std::size_t l) const {
    return l == 0 ? input : layers.at(l - 1).x;
  }
};

struct ForwardOptions {
  /// Reject inputs outside the declared input box.
  bool check_domain = false;
  double domain_tol = 1e-12;
};

ForwardTrace forward(const Network& net, std::span<const double> input,
                     ForwardOptions options = {});

/// Numerically stable e^{z_i} / sum_j e^{z_j}.
std::vector<double> softmax(std::span<const double> logits);

/// Softmax-free strong classification test: the logit of class m must exceed
/// every other logit by at least ln(alpha). Class m is 1-based.
bool strongly_classifies(const Network& net, std::span<const double> input, int m, double alpha);

/// Same test on an explicit logit vector, with an optional slack.
bool strongly_classifies_logits(std::span<const double> logits, int m, double alpha,
                                double slack = 0.0);

/// Number of classes i != m with logit_i >= logit_m - slack.
int count_dominating(std::span<const double> logits, int m, double slack = 0.0);

Network load_network(const std::filesystem::path& path);
Network parse_network(std::string_view text);
std::string serialize_network(const Network& net);

std::vector<double> load_input_vector(const std::filesystem::path& path);

}  // namespace nnmip
