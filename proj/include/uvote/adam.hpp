#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "uvote/common.hpp"

namespace uvote {

// Bias-corrected Adam over a flat list of parameter tensors. Moment buffers
// are kept per tensor in the same order the views are handed in.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long long step_count = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
};

inline AdamState make_adam_state(const std::vector<std::span<double>>& params,
                                 double beta1 = 0.9, double beta2 = 0.999,
                                 double epsilon = 1e-8) {
  AdamState state;
  state.beta1 = beta1;
  state.beta2 = beta2;
  state.epsilon = epsilon;
  state.first_moment.reserve(params.size());
  state.second_moment.reserve(params.size());
  for (const auto& p : params) {
    state.first_moment.emplace_back(p.size(), 0.0);
    state.second_moment.emplace_back(p.size(), 0.0);
  }
  return state;
}

inline void adam_step(const std::vector<std::span<double>>& params,
                      const std::vector<std::span<const double>>& grads,
                      const std::vector<double>& learning_rates, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size() ||
      params.size() != learning_rates.size())
    throw ShapeError("adam_step: tensor count mismatch");
  state.step_count += 1;
  const double corr1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double corr2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto p = params[t];
    auto g = grads[t];
    auto& m = state.first_moment[t];
    auto& v = state.second_moment[t];
    if (p.size() != g.size() || p.size() != m.size())
      throw ShapeError("adam_step: tensor " + std::to_string(t) + " shape mismatch");
    const double lr = learning_rates[t];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double grad = g[i];
      if (!std::isfinite(grad))
        throw TrainingError("non-finite gradient in tensor " + std::to_string(t) +
                            " at adam step " + std::to_string(state.step_count));
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * grad;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * grad * grad;
      const double m_hat = m[i] / corr1;
      const double v_hat = v[i] / corr2;
      p[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

}  // namespace uvote
