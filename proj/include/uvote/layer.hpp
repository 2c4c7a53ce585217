#pragma once

#include <cmath>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "uvote/common.hpp"
#include "uvote/matrix.hpp"
#include "uvote/rng.hpp"

namespace uvote {

enum class Activation { identity, relu, tanh };

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
  }
  return "identity";
}

inline Activation activation_from_string(std::string_view s) {
  if (s == "identity") return Activation::identity;
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  throw ConfigError("unknown activation: " + std::string(s));
}

inline double apply_activation(Activation a, double z) {
  switch (a) {
    case Activation::identity: return z;
    case Activation::relu: return z > 0.0 ? z : 0.0;
    case Activation::tanh: return std::tanh(z);
  }
  return z;
}

// Derivative with respect to the pre-activation. relu at exactly 0 uses the
// zero subgradient.
inline double activation_grad(Activation a, double z) {
  switch (a) {
    case Activation::identity: return 1.0;
    case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::tanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
  }
  return 1.0;
}

// Fully connected layer: y = act(x . W^T + b), weights stored [out x in].
struct DenseLayer {
  Matrix weights;
  std::vector<double> bias;
  Activation activation = Activation::identity;

  std::size_t in_dim() const { return weights.cols(); }
  std::size_t out_dim() const { return weights.rows(); }
};

// Uniform init in +-sqrt(6/(in+out)), zero bias.
inline DenseLayer make_dense_layer(std::size_t in, std::size_t out, Activation act,
                                   std::mt19937_64& rng) {
  if (in == 0 || out == 0) throw ConfigError("dense layer dimensions must be positive");
  DenseLayer layer;
  layer.weights = Matrix(out, in);
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  for (double& w : layer.weights.values()) w = uniform_range(rng, -bound, bound);
  layer.bias.assign(out, 0.0);
  layer.activation = act;
  return layer;
}

struct LayerGrad {
  Matrix weights;
  std::vector<double> bias;
};

// Parameter gradients for a layer stack, shape-congruent with the layers.
struct GradientTape {
  std::vector<LayerGrad> layers;

  void zero() {
    for (auto& g : layers) {
      for (double& w : g.weights.values()) w = 0.0;
      for (double& b : g.bias) b = 0.0;
    }
  }
};

inline GradientTape make_tape(const std::vector<DenseLayer>& layers) {
  GradientTape tape;
  tape.layers.reserve(layers.size());
  for (const auto& l : layers)
    tape.layers.push_back({Matrix(l.out_dim(), l.in_dim()), std::vector<double>(l.out_dim(), 0.0)});
  return tape;
}

// Cached per-layer inputs and pre-activations from a forward pass; backward
// requires it.
struct ForwardTrace {
  std::vector<Matrix> inputs;
  std::vector<Matrix> pre;
  Matrix output;
};

namespace detail {
inline Matrix affine(const DenseLayer& layer, const Matrix& x, std::size_t layer_index) {
  if (x.cols() != layer.in_dim())
    throw ShapeError("dense layer " + std::to_string(layer_index) + ": input has " +
                     std::to_string(x.cols()) + " columns, expected " +
                     std::to_string(layer.in_dim()));
  Matrix z = matmul_nt(x, layer.weights);
  for (std::size_t r = 0; r < z.rows(); ++r)
    for (std::size_t c = 0; c < z.cols(); ++c) z(r, c) += layer.bias[c];
  return z;
}
}  // namespace detail

// An empty layer stack is the identity map.
inline Matrix forward(const std::vector<DenseLayer>& layers, const Matrix& input) {
  Matrix x = input;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    Matrix z = detail::affine(layers[i], x, i);
    for (double& v : z.values()) v = apply_activation(layers[i].activation, v);
    x = std::move(z);
  }
  return x;
}

inline ForwardTrace forward_trace(const std::vector<DenseLayer>& layers, const Matrix& input) {
  ForwardTrace trace;
  trace.inputs.reserve(layers.size());
  trace.pre.reserve(layers.size());
  Matrix x = input;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    Matrix z = detail::affine(layers[i], x, i);
    trace.inputs.push_back(std::move(x));
    Matrix a = z;
    for (double& v : a.values()) v = apply_activation(layers[i].activation, v);
    trace.pre.push_back(std::move(z));
    x = std::move(a);
  }
  trace.output = x;
  return trace;
}

// Exact gradients through the stack. `upstream` is dL/d(output); returns
// parameter gradients and dL/d(input).
inline std::pair<GradientTape, Matrix> backward(const std::vector<DenseLayer>& layers,
                                                const ForwardTrace& trace,
                                                const Matrix& upstream) {
  if (trace.inputs.size() != layers.size() || trace.pre.size() != layers.size())
    throw UsageError("backward: forward trace does not match the layer stack");
  GradientTape tape;
  tape.layers.resize(layers.size());
  Matrix grad = upstream;
  for (std::size_t n = layers.size(); n > 0; --n) {
    const std::size_t i = n - 1;
    const DenseLayer& layer = layers[i];
    const Matrix& pre = trace.pre[i];
    if (grad.rows() != pre.rows() || grad.cols() != pre.cols())
      throw ShapeError("backward: upstream gradient shape mismatch at layer " +
                       std::to_string(i));
    Matrix dz = grad;
    for (std::size_t r = 0; r < dz.rows(); ++r)
      for (std::size_t c = 0; c < dz.cols(); ++c)
        dz(r, c) *= activation_grad(layer.activation, pre(r, c));
    tape.layers[i].weights = matmul_tn(dz, trace.inputs[i]);
    tape.layers[i].bias.assign(layer.out_dim(), 0.0);
    for (std::size_t r = 0; r < dz.rows(); ++r)
      for (std::size_t c = 0; c < dz.cols(); ++c) tape.layers[i].bias[c] += dz(r, c);
    grad = matmul(dz, layer.weights);
  }
  return {std::move(tape), std::move(grad)};
}

}  // namespace uvote
