#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "uvote/common.hpp"
#include "uvote/layer.hpp"
#include "uvote/matrix.hpp"

namespace uvote {

// Predicted log scales are clamped here so exp(-s) stays representable.
constexpr double kLogScaleClamp = 15.0;

struct ModelConfig {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden;  // trunk widths; empty trunk = identity embedding
  std::size_t num_experts = 1;
  Activation hidden_activation = Activation::relu;
};

// Shared trunk plus one (value, log_scale) pair of affine heads per expert.
struct UvoteModel {
  struct Head {
    DenseLayer value;
    DenseLayer log_scale;
  };

  std::vector<DenseLayer> trunk;
  std::vector<Head> heads;

  std::size_t num_experts() const { return heads.size(); }
  std::size_t embedding_dim() const { return heads.front().value.in_dim(); }
  std::size_t input_dim() const {
    return trunk.empty() ? embedding_dim() : trunk.front().in_dim();
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : trunk) n += l.weights.size() + l.bias.size();
    for (const auto& h : heads)
      n += h.value.weights.size() + h.value.bias.size() + h.log_scale.weights.size() +
           h.log_scale.bias.size();
    return n;
  }

  std::size_t head_parameter_count() const {
    return num_experts() * 2 * (embedding_dim() + 1);
  }

  // Canonical tensor order: trunk layers (weights, bias), then per expert the
  // value head (weights, bias) and log-scale head (weights, bias). Gradients
  // and optimizer state follow the same order.
  std::vector<std::span<double>> parameter_views() {
    std::vector<std::span<double>> views;
    for (auto& l : trunk) {
      views.push_back(l.weights.values());
      views.push_back(std::span<double>(l.bias));
    }
    for (auto& h : heads) {
      views.push_back(h.value.weights.values());
      views.push_back(std::span<double>(h.value.bias));
      views.push_back(h.log_scale.weights.values());
      views.push_back(std::span<double>(h.log_scale.bias));
    }
    return views;
  }

  std::vector<std::span<const double>> parameter_views() const {
    std::vector<std::span<const double>> views;
    for (const auto& l : trunk) {
      views.push_back(l.weights.values());
      views.push_back(std::span<const double>(l.bias));
    }
    for (const auto& h : heads) {
      views.push_back(h.value.weights.values());
      views.push_back(std::span<const double>(h.value.bias));
      views.push_back(h.log_scale.weights.values());
      views.push_back(std::span<const double>(h.log_scale.bias));
    }
    return views;
  }

  // True for tensors belonging to a log-scale head; those train with the
  // smaller uncertainty learning rate.
  std::vector<bool> log_scale_tensor_mask() const {
    std::vector<bool> mask;
    mask.assign(trunk.size() * 2, false);
    for (std::size_t m = 0; m < heads.size(); ++m) {
      mask.push_back(false);
      mask.push_back(false);
      mask.push_back(true);
      mask.push_back(true);
    }
    return mask;
  }
};

inline UvoteModel build_model(const ModelConfig& config, std::uint64_t seed) {
  if (config.input_dim == 0) throw ConfigError("build_model: input_dim must be >= 1");
  if (config.num_experts == 0) throw ConfigError("build_model: need at least one expert");
  for (std::size_t w : config.hidden)
    if (w == 0) throw ConfigError("build_model: hidden widths must be >= 1");

  std::mt19937_64 rng(seed);
  UvoteModel model;
  std::size_t in = config.input_dim;
  for (std::size_t width : config.hidden) {
    model.trunk.push_back(make_dense_layer(in, width, config.hidden_activation, rng));
    in = width;
  }
  const std::size_t dim_z = in;
  model.heads.reserve(config.num_experts);
  for (std::size_t m = 0; m < config.num_experts; ++m) {
    UvoteModel::Head head;
    head.value = make_dense_layer(dim_z, 1, Activation::identity, rng);
    head.log_scale = make_dense_layer(dim_z, 1, Activation::identity, rng);
    model.heads.push_back(std::move(head));
  }
  return model;
}

// One column per expert; log scales already clamped.
struct ExpertOutput {
  Matrix y_hat;
  Matrix s_hat;

  std::size_t batch() const { return y_hat.rows(); }
  std::size_t num_experts() const { return y_hat.cols(); }
};

inline ExpertOutput predict_all(const UvoteModel& model, const Matrix& inputs) {
  const Matrix z = forward(model.trunk, inputs);
  ExpertOutput out;
  out.y_hat = Matrix(inputs.rows(), model.num_experts());
  out.s_hat = Matrix(inputs.rows(), model.num_experts());
  for (std::size_t m = 0; m < model.num_experts(); ++m) {
    const auto& head = model.heads[m];
    if (z.cols() != head.value.in_dim())
      throw ShapeError("predict_all: embedding dim " + std::to_string(z.cols()) +
                       " does not match head " + std::to_string(m));
    for (std::size_t n = 0; n < z.rows(); ++n) {
      double y = head.value.bias[0];
      double s = head.log_scale.bias[0];
      for (std::size_t k = 0; k < z.cols(); ++k) {
        y += head.value.weights(0, k) * z(n, k);
        s += head.log_scale.weights(0, k) * z(n, k);
      }
      out.y_hat(n, m) = y;
      out.s_hat(n, m) = std::clamp(s, -kLogScaleClamp, kLogScaleClamp);
    }
  }
  return out;
}

// ---- checkpoint io ----------------------------------------------------

namespace detail {

inline nlohmann::json layer_to_json(const DenseLayer& layer) {
  return {{"in", layer.in_dim()},
          {"out", layer.out_dim()},
          {"activation", to_string(layer.activation)},
          {"weights", std::vector<double>(layer.weights.values().begin(),
                                          layer.weights.values().end())},
          {"bias", layer.bias}};
}

inline DenseLayer layer_from_json(const nlohmann::json& j) {
  DenseLayer layer;
  const std::size_t in = j.at("in").get<std::size_t>();
  const std::size_t out = j.at("out").get<std::size_t>();
  layer.activation = activation_from_string(j.at("activation").get<std::string>());
  const auto w = j.at("weights").get<std::vector<double>>();
  layer.bias = j.at("bias").get<std::vector<double>>();
  if (w.size() != in * out || layer.bias.size() != out)
    throw ParseError("model checkpoint: layer shape does not match its arrays");
  layer.weights = Matrix(out, in);
  std::copy(w.begin(), w.end(), layer.weights.values().begin());
  return layer;
}

}  // namespace detail

constexpr int kModelSchemaVersion = 1;

inline nlohmann::json model_to_json(const UvoteModel& model) {
  nlohmann::json j;
  j["schema_version"] = kModelSchemaVersion;
  j["kind"] = "uvote_model";
  j["trunk"] = nlohmann::json::array();
  for (const auto& l : model.trunk) j["trunk"].push_back(detail::layer_to_json(l));
  j["heads"] = nlohmann::json::array();
  for (const auto& h : model.heads)
    j["heads"].push_back({{"value", detail::layer_to_json(h.value)},
                          {"log_scale", detail::layer_to_json(h.log_scale)}});
  return j;
}

inline UvoteModel model_from_json(const nlohmann::json& j) {
  if (j.value("kind", "") != "uvote_model")
    throw ParseError("model checkpoint: unexpected kind");
  if (j.value("schema_version", 0) != kModelSchemaVersion)
    throw ParseError("model checkpoint: unsupported schema_version");
  UvoteModel model;
  for (const auto& l : j.at("trunk")) model.trunk.push_back(detail::layer_from_json(l));
  for (const auto& h : j.at("heads"))
    model.heads.push_back({detail::layer_from_json(h.at("value")),
                           detail::layer_from_json(h.at("log_scale"))});
  if (model.heads.empty()) throw ParseError("model checkpoint: no heads");
  return model;
}

inline void save_model(const UvoteModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("save_model: cannot open " + path);
  out << model_to_json(model).dump(2) << '\n';
}

inline UvoteModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("load_model: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("load_model: " + std::string(e.what()));
  }
  return model_from_json(j);
}

}  // namespace uvote
