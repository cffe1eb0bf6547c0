#include "nnmip/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace nnmip {

namespace {

using json = nlohmann::json;

std::string layer_label(std::size_t l) { return "layer " + std::to_string(l); }

}  // namespace

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::ReluDense: return "relu_dense";
    case LayerKind::AtanDense: return "atan_dense";
    case LayerKind::MaxPool: return "max_pool";
    case LayerKind::Softmax: return "softmax";
    case LayerKind::LinearOutput: return "linear_output";
  }
  return "unknown";
}

LayerKind layer_kind_from_string(std::string_view name) {
  for (auto kind : {LayerKind::ReluDense, LayerKind::AtanDense, LayerKind::MaxPool,
                    LayerKind::Softmax, LayerKind::LinearOutput}) {
    if (to_string(kind) == name) return kind;
  }
  throw NetworkParseError("unknown layer kind '" + std::string(name) + "'");
}

bool is_dense(LayerKind kind) {
  return kind == LayerKind::ReluDense || kind == LayerKind::AtanDense ||
         kind == LayerKind::LinearOutput;
}

WeightMatrix::WeightMatrix(std::size_t inputs, std::size_t outputs)
    : inputs_(inputs), outputs_(outputs), data_((inputs + 1) * outputs, 0.0) {}

Network::Network(std::vector<Interval> input_bounds, std::vector<Layer> layers)
    : input_bounds_(std::move(input_bounds)), layers_(std::move(layers)) {
  validate();
  widths_.push_back(input_bounds_.size());
  for (const auto& layer : layers_) {
    if (is_dense(layer.kind)) {
      widths_.push_back(layer.weights.outputs());
    } else if (layer.kind == LayerKind::MaxPool) {
      widths_.push_back(layer.pool_groups.size());
    } else {
      widths_.push_back(widths_.back());
    }
  }
}

void Network::validate() const {
  if (input_bounds_.empty()) throw NetworkValidationError("input_dim: must be positive");
  for (std::size_t i = 0; i < input_bounds_.size(); ++i) {
    const auto& b = input_bounds_[i];
    if (!std::isfinite(b.lo) || !std::isfinite(b.hi)) {
      throw NetworkValidationError("input_bounds[" + std::to_string(i + 1) + "]: bounds must be finite");
    }
    if (b.lo > b.hi) {
      throw NetworkValidationError("input_bounds[" + std::to_string(i + 1) + "]: lower > upper");
    }
  }
  if (layers_.empty()) throw NetworkValidationError("layers: at least one layer required");

  std::size_t prev = input_bounds_.size();
  for (std::size_t idx = 0; idx < layers_.size(); ++idx) {
    const std::size_t l = idx + 1;
    const Layer& layer = layers_[idx];
    if (is_dense(layer.kind)) {
      if (!layer.pool_groups.empty()) {
        throw NetworkValidationError(layer_label(l) + ": dense layer must not carry pool_groups");
      }
      if (layer.weights.inputs() != prev) {
        throw NetworkValidationError(layer_label(l) + ": weights expect " +
                                     std::to_string(layer.weights.inputs()) +
                                     " inputs but preceding layer has " + std::to_string(prev));
      }
      if (layer.weights.outputs() == 0) {
        throw NetworkValidationError(layer_label(l) + ": dense layer needs at least one neuron");
      }
      for (std::size_t j = 0; j <= prev; ++j) {
        for (std::size_t i = 0; i < layer.weights.outputs(); ++i) {
          if (!std::isfinite(layer.weights(j, i))) {
            throw NetworkValidationError(layer_label(l) + ": weights[" + std::to_string(j) + "][" +
                                         std::to_string(i) + "] is not finite");
          }
        }
      }
      prev = layer.weights.outputs();
    } else if (layer.kind == LayerKind::MaxPool) {
      if (layer.weights.outputs() != 0) {
        throw NetworkValidationError(layer_label(l) + ": max_pool carries no weights");
      }
      if (layer.pool_groups.empty()) {
        throw NetworkValidationError(layer_label(l) + ": max_pool needs pool_groups");
      }
      std::vector<int> seen(prev, 0);
      for (const auto& group : layer.pool_groups) {
        if (group.size() != 2 && group.size() != 4) {
          throw NetworkValidationError(layer_label(l) + ": pool group size must be 2 or 4");
        }
        for (auto j : group) {
          if (j >= prev) {
            throw NetworkValidationError(layer_label(l) + ": pool index " + std::to_string(j + 1) +
                                         " out of range");
          }
          if (seen[j]++) {
            throw NetworkValidationError(layer_label(l) + ": pool index " + std::to_string(j + 1) +
                                         " appears twice");
          }
        }
      }
      if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
        throw NetworkValidationError(layer_label(l) + ": pool_groups must cover every predecessor");
      }
      prev = layer.pool_groups.size();
    } else {  // Softmax
      if (l != layers_.size()) {
        throw NetworkValidationError(layer_label(l) + ": softmax is only allowed as the final layer");
      }
      if (layer.weights.outputs() != 0 || !layer.pool_groups.empty()) {
        throw NetworkValidationError(layer_label(l) + ": softmax carries no weights or groups");
      }
      if (prev < 2) {
        throw NetworkValidationError(layer_label(l) + ": softmax needs at least two classes");
      }
    }
  }
}

std::size_t Network::width(std::size_t l) const { return widths_.at(l); }

bool Network::ends_with_softmax() const { return layers_.back().kind == LayerKind::Softmax; }

std::size_t Network::logit_layer() const {
  return ends_with_softmax() ? layers_.size() - 1 : layers_.size();
}

std::size_t Network::num_classes() const { return widths_.back(); }

Network Network::with_input_bounds(std::vector<Interval> bounds) const {
  return Network(std::move(bounds), layers_);
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double top = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - top);
    sum += out[i];
  }
  for (auto& v : out) v /= sum;
  return out;
}

ForwardTrace forward(const Network& net, std::span<const double> input, ForwardOptions options) {
  if (input.size() != net.input_dim()) {
    throw std::invalid_argument("forward: input has " + std::to_string(input.size()) +
                                " entries, network expects " + std::to_string(net.input_dim()));
  }
  if (options.check_domain) {
    for (std::size_t i = 0; i < input.size(); ++i) {
      if (!net.input_bounds()[i].contains(input[i], options.domain_tol)) {
        throw std::invalid_argument("forward: input " + std::to_string(i + 1) +
                                    " outside the input domain");
      }
    }
  }
  ForwardTrace trace;
  trace.input.assign(input.begin(), input.end());
  trace.layers.reserve(net.num_layers());
  for (std::size_t l = 1; l <= net.num_layers(); ++l) {
    const Layer& layer = net.layer(l);
    const auto& prev = trace.output(l - 1);
    LayerTrace out;
    if (is_dense(layer.kind)) {
      const auto& w = layer.weights;
      out.im.resize(w.outputs());
      out.x.resize(w.outputs());
      for (std::size_t i = 0; i < w.outputs(); ++i) {
        double sum = w.bias(i);
        for (std::size_t j = 0; j < prev.size(); ++j) sum += w(j + 1, i) * prev[j];
        out.im[i] = sum;
        switch (layer.kind) {
          case LayerKind::ReluDense: out.x[i] = std::max(0.0, sum); break;
          case LayerKind::AtanDense: out.x[i] = std::atan(sum); break;
          default: out.x[i] = sum; break;
        }
      }
    } else if (layer.kind == LayerKind::MaxPool) {
      out.x.reserve(layer.pool_groups.size());
      for (const auto& g : layer.pool_groups) {
        if (g.size() == 4) {
          const double left = std::max(prev[g[0]], prev[g[1]]);
          const double right = std::max(prev[g[2]], prev[g[3]]);
          out.x.push_back(std::max(left, right));
        } else {
          out.x.push_back(std::max(prev[g[0]], prev[g[1]]));
        }
      }
    } else {
      out.x = softmax(prev);
    }
    trace.layers.push_back(std::move(out));
  }
  return trace;
}

bool strongly_classifies_logits(std::span<const double> logits, int m, double alpha, double slack) {
  if (m < 1 || static_cast<std::size_t>(m) > logits.size()) {
    throw std::out_of_range("class index " + std::to_string(m) + " out of range");
  }
  if (!(alpha >= 1.0)) throw std::invalid_argument("alpha must be >= 1");
  const double margin = std::log(alpha);
  const double xm = logits[m - 1];
  for (std::size_t j = 0; j < logits.size(); ++j) {
    if (static_cast<int>(j) == m - 1) continue;
    if (xm < margin + logits[j] - slack) return false;
  }
  return true;
}

bool strongly_classifies(const Network& net, std::span<const double> input, int m, double alpha) {
  if (!net.ends_with_softmax()) {
    throw std::invalid_argument("strongly_classifies: network does not end in softmax");
  }
  const auto trace = forward(net, input);
  return strongly_classifies_logits(trace.output(net.logit_layer()), m, alpha);
}

int count_dominating(std::span<const double> logits, int m, double slack) {
  int count = 0;
  const double xm = logits[m - 1];
  for (std::size_t j = 0; j < logits.size(); ++j) {
    if (static_cast<int>(j) != m - 1 && logits[j] >= xm - slack) ++count;
  }
  return count;
}

namespace {

double read_real(const json& v, const std::string& where) {
  if (!v.is_number()) throw NetworkParseError(where + ": expected a number");
  return v.get<double>();
}

Network network_from_json(const json& doc) {
  if (!doc.is_object()) throw NetworkParseError("network document must be an object");
  for (const char* field : {"input_dim", "input_bounds", "layers"}) {
    if (!doc.contains(field)) throw NetworkParseError(std::string("missing field '") + field + "'");
  }
  if (!doc["input_dim"].is_number_integer() || doc["input_dim"].get<long long>() <= 0) {
    throw NetworkParseError("input_dim: expected a positive integer");
  }
  const auto d = doc["input_dim"].get<std::size_t>();
  const auto& jb = doc["input_bounds"];
  if (!jb.is_array()) throw NetworkParseError("input_bounds: expected an array");
  if (jb.size() != d) {
    throw NetworkValidationError("input_bounds: " + std::to_string(jb.size()) +
                                 " intervals for input_dim " + std::to_string(d));
  }
  std::vector<Interval> bounds;
  for (std::size_t i = 0; i < d; ++i) {
    const std::string where = "input_bounds[" + std::to_string(i + 1) + "]";
    if (!jb[i].is_array() || jb[i].size() != 2) throw NetworkParseError(where + ": expected [lo, hi]");
    bounds.push_back({read_real(jb[i][0], where), read_real(jb[i][1], where)});
  }

  const auto& jl = doc["layers"];
  if (!jl.is_array()) throw NetworkParseError("layers: expected an array");
  std::vector<Layer> layers;
  std::size_t prev = d;
  for (std::size_t idx = 0; idx < jl.size(); ++idx) {
    const std::string where = layer_label(idx + 1);
    const auto& obj = jl[idx];
    if (!obj.is_object() || !obj.contains("kind") || !obj["kind"].is_string()) {
      throw NetworkParseError(where + ": expected an object with a 'kind' string");
    }
    Layer layer;
    layer.kind = layer_kind_from_string(obj["kind"].get<std::string>());
    if (is_dense(layer.kind)) {
      if (!obj.contains("weights") || !obj["weights"].is_array() || obj["weights"].empty()) {
        throw NetworkParseError(where + ": dense layer needs a 'weights' array");
      }
      const auto& jw = obj["weights"];
      if (jw.size() != prev + 1) {
        throw NetworkValidationError(where + ": weights have " + std::to_string(jw.size()) +
                                     " rows, expected " + std::to_string(prev + 1) +
                                     " (bias row + " + std::to_string(prev) + " inputs)");
      }
      if (!jw[0].is_array()) throw NetworkParseError(where + ": weights rows must be arrays");
      const std::size_t outputs = jw[0].size();
      WeightMatrix w(prev, outputs);
      for (std::size_t j = 0; j < jw.size(); ++j) {
        if (!jw[j].is_array() || jw[j].size() != outputs) {
          throw NetworkValidationError(where + ": weights row " + std::to_string(j) +
                                       " has the wrong length");
        }
        for (std::size_t i = 0; i < outputs; ++i) {
          w(j, i) = read_real(jw[j][i], where + " weights");
        }
      }
      layer.weights = std::move(w);
      prev = outputs;
    } else if (layer.kind == LayerKind::MaxPool) {
      if (!obj.contains("pool_groups") || !obj["pool_groups"].is_array()) {
        throw NetworkParseError(where + ": max_pool needs 'pool_groups'");
      }
      for (const auto& g : obj["pool_groups"]) {
        if (!g.is_array()) throw NetworkParseError(where + ": pool group must be an array");
        std::vector<std::size_t> group;
        for (const auto& idx1 : g) {
          if (!idx1.is_number_integer() || idx1.get<long long>() < 1) {
            throw NetworkValidationError(where + ": pool indices are 1-based positive integers");
          }
          group.push_back(idx1.get<std::size_t>() - 1);
        }
        layer.pool_groups.push_back(std::move(group));
      }
      prev = layer.pool_groups.size();
    }
    layers.push_back(std::move(layer));
  }
  return Network(std::move(bounds), std::move(layers));
}

}  // namespace

Network parse_network(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw NetworkParseError(std::string("malformed network document: ") + e.what());
  }
  return network_from_json(doc);
}

Network load_network(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NetworkParseError("cannot open network file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_network(ss.str());
}

std::string serialize_network(const Network& net) {
  json doc;
  doc["input_dim"] = net.input_dim();
  doc["input_bounds"] = json::array();
  for (const auto& b : net.input_bounds()) doc["input_bounds"].push_back({b.lo, b.hi});
  doc["layers"] = json::array();
  for (const auto& layer : net.layers()) {
    json jl;
    jl["kind"] = std::string(to_string(layer.kind));
    if (is_dense(layer.kind)) {
      json rows = json::array();
      for (std::size_t j = 0; j <= layer.weights.inputs(); ++j) {
        json row = json::array();
        for (std::size_t i = 0; i < layer.weights.outputs(); ++i) row.push_back(layer.weights(j, i));
        rows.push_back(std::move(row));
      }
      jl["weights"] = std::move(rows);
    } else if (layer.kind == LayerKind::MaxPool) {
      json groups = json::array();
      for (const auto& g : layer.pool_groups) {
        json jg = json::array();
        for (auto j : g) jg.push_back(j + 1);
        groups.push_back(std::move(jg));
      }
      jl["pool_groups"] = std::move(groups);
    }
    doc["layers"].push_back(std::move(jl));
  }
  return doc.dump(2);
}

std::vector<double> load_input_vector(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NetworkParseError("cannot open input file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw NetworkParseError(std::string("malformed input document: ") + e.what());
  }
  const json& arr = doc.is_object() && doc.contains("input") ? doc["input"] : doc;
  if (!arr.is_array()) throw NetworkParseError("input document: expected an array of reals");
  std::vector<double> out;
  for (const auto& v : arr) out.push_back(read_real(v, "input"));
  return out;
}

}  // namespace nnmip
