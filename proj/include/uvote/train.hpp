#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "uvote/adam.hpp"
#include "uvote/common.hpp"
#include "uvote/density.hpp"
#include "uvote/layer.hpp"
#include "uvote/loss.hpp"
#include "uvote/matrix.hpp"
#include "uvote/model.hpp"
#include "uvote/rng.hpp"

namespace uvote {

enum class WeightingMode { frequency_power, uniform };
enum class DensityKind { histogram, kde };

inline const char* to_string(WeightingMode w) {
  return w == WeightingMode::frequency_power ? "frequency_power" : "uniform";
}
inline WeightingMode weighting_from_string(std::string_view s) {
  if (s == "frequency_power") return WeightingMode::frequency_power;
  if (s == "uniform") return WeightingMode::uniform;
  throw ConfigError("unknown weighting mode: " + std::string(s));
}
inline const char* to_string(ScheduleMode s) {
  return s == ScheduleMode::dynamic ? "dynamic" : "flat";
}
inline ScheduleMode schedule_from_string(std::string_view s) {
  if (s == "dynamic") return ScheduleMode::dynamic;
  if (s == "flat") return ScheduleMode::flat;
  throw ConfigError("unknown schedule mode: " + std::string(s));
}
inline const char* to_string(ExpertBlend b) {
  return b == ExpertBlend::sum ? "sum" : "mean";
}
inline ExpertBlend blend_from_string(std::string_view s) {
  if (s == "sum") return ExpertBlend::sum;
  if (s == "mean") return ExpertBlend::mean;
  throw ConfigError("unknown expert blend: " + std::string(s));
}
inline const char* to_string(DensityKind k) {
  return k == DensityKind::histogram ? "histogram" : "kde";
}
inline DensityKind density_kind_from_string(std::string_view s) {
  if (s == "histogram") return DensityKind::histogram;
  if (s == "kde") return DensityKind::kde;
  throw ConfigError("unknown density kind: " + std::string(s));
}

struct DensityConfig {
  DensityKind kind = DensityKind::histogram;
  double bin_width = 1.0;  // histogram bins
  double bandwidth = 2.0;  // kde kernel width
};

struct TrainConfig {
  std::size_t max_epochs = 60;
  std::size_t batch_size = 64;
  double lr_main = 1e-3;
  double lr_uncertainty = 1e-4;  // log-scale head tensors only
  std::optional<std::vector<std::size_t>> decay_milestones;  // unset = 2/3 and 8/9 points
  double decay_factor = 0.1;
  std::size_t num_experts = 1;
  WeightingMode weighting = WeightingMode::frequency_power;
  ScheduleMode schedule = ScheduleMode::dynamic;
  ExpertBlend blend = ExpertBlend::sum;
  LossKind loss = LossKind::laplace_nll;
  DensityConfig density;
  std::uint64_t seed = 0;
};

// Mirrors the supplement-style schedule: drop at 2/3 and 8/9 of the run.
inline std::vector<std::size_t> default_milestones(std::size_t max_epochs) {
  std::vector<std::size_t> m{max_epochs * 2 / 3, max_epochs * 8 / 9};
  m.erase(std::remove(m.begin(), m.end(), std::size_t{0}), m.end());
  m.erase(std::unique(m.begin(), m.end()), m.end());
  return m;
}

// Parameter gradients for a whole model, tensor order matching
// UvoteModel::parameter_views().
struct ModelGradients {
  std::vector<LayerGrad> layers;

  std::vector<std::span<const double>> views() const {
    std::vector<std::span<const double>> v;
    v.reserve(layers.size() * 2);
    for (const auto& l : layers) {
      v.push_back(l.weights.values());
      v.push_back(std::span<const double>(l.bias));
    }
    return v;
  }
};

struct CompositeResult {
  LossBreakdown breakdown;
  ModelGradients grads;
};

namespace detail {

struct HeadColumns {
  Matrix y;      // batch x M
  Matrix s_raw;  // batch x M, before clamping
  Matrix s;      // batch x M, clamped
};

inline HeadColumns head_columns(const UvoteModel& model, const Matrix& z) {
  const std::size_t batch = z.rows();
  const std::size_t experts = model.num_experts();
  HeadColumns cols{Matrix(batch, experts), Matrix(batch, experts), Matrix(batch, experts)};
  for (std::size_t m = 0; m < experts; ++m) {
    const auto& head = model.heads[m];
    for (std::size_t n = 0; n < batch; ++n) {
      double y = head.value.bias[0];
      double s = head.log_scale.bias[0];
      for (std::size_t k = 0; k < z.cols(); ++k) {
        y += head.value.weights(0, k) * z(n, k);
        s += head.log_scale.weights(0, k) * z(n, k);
      }
      cols.y(n, m) = y;
      cols.s_raw(n, m) = s;
      cols.s(n, m) = std::clamp(s, -kLogScaleClamp, kLogScaleClamp);
    }
  }
  return cols;
}

inline LossGrad expert_loss(LossKind kind, std::span<const double> y,
                            std::span<const double> y_hat, std::span<const double> s_hat,
                            std::span<const double> w) {
  switch (kind) {
    case LossKind::laplace_nll: return laplace_nll(y, y_hat, s_hat, w);
    case LossKind::l1: return l1_loss(y, y_hat, w);
    case LossKind::l2: return l2_loss(y, y_hat, w);
  }
  return laplace_nll(y, y_hat, s_hat, w);
}

}  // namespace detail

// Blended objective over one batch, no gradients. `weights` holds one column
// per expert for exactly the batch rows.
inline LossBreakdown composite_loss(const UvoteModel& model, const Matrix& inputs,
                                    std::span<const double> targets, const Matrix& weights,
                                    double alpha, ScheduleMode schedule, ExpertBlend blend,
                                    LossKind kind) {
  const Matrix z = forward(model.trunk, inputs);
  const auto cols = detail::head_columns(model, z);
  std::vector<double> per_expert(model.num_experts());
  for (std::size_t m = 0; m < model.num_experts(); ++m) {
    const auto y_hat = cols.y.column(m);
    const auto s_hat = cols.s.column(m);
    const auto w = weights.column(m);
    per_expert[m] = detail::expert_loss(kind, targets, y_hat, s_hat, w).loss;
  }
  return blend_losses(std::move(per_expert), alpha, schedule, blend);
}

// Same objective with exact gradients for every parameter tensor. The clamp
// on the log scale saturates: no gradient flows where it engages.
inline CompositeResult composite_loss_and_grad(const UvoteModel& model, const Matrix& inputs,
                                               std::span<const double> targets,
                                               const Matrix& weights, double alpha,
                                               ScheduleMode schedule, ExpertBlend blend,
                                               LossKind kind) {
  const std::size_t batch = inputs.rows();
  const std::size_t experts = model.num_experts();
  const ForwardTrace trace = forward_trace(model.trunk, inputs);
  const Matrix& z = trace.output;
  const auto cols = detail::head_columns(model, z);

  CompositeResult result;
  std::vector<double> per_expert(experts);
  Matrix d_embedding(batch, z.cols());
  std::vector<LayerGrad> head_grads;
  head_grads.reserve(experts * 2);

  for (std::size_t m = 0; m < experts; ++m) {
    const auto& head = model.heads[m];
    const auto y_hat = cols.y.column(m);
    const auto s_hat = cols.s.column(m);
    const auto w = weights.column(m);
    LossGrad lg = detail::expert_loss(kind, targets, y_hat, s_hat, w);
    per_expert[m] = lg.loss;
    const double coeff = expert_coefficient(m, experts, alpha, schedule, blend);

    LayerGrad value_grad{Matrix(1, z.cols()), std::vector<double>(1, 0.0)};
    LayerGrad scale_grad{Matrix(1, z.cols()), std::vector<double>(1, 0.0)};
    for (std::size_t n = 0; n < batch; ++n) {
      const double dy = coeff * lg.d_y_hat[n];
      const bool inside = std::abs(cols.s_raw(n, m)) <= kLogScaleClamp;
      const double ds = inside ? coeff * lg.d_s_hat[n] : 0.0;
      value_grad.bias[0] += dy;
      scale_grad.bias[0] += ds;
      for (std::size_t k = 0; k < z.cols(); ++k) {
        value_grad.weights(0, k) += dy * z(n, k);
        scale_grad.weights(0, k) += ds * z(n, k);
        d_embedding(n, k) += dy * head.value.weights(0, k) + ds * head.log_scale.weights(0, k);
      }
    }
    head_grads.push_back(std::move(value_grad));
    head_grads.push_back(std::move(scale_grad));
  }

  auto [trunk_tape, d_input] = backward(model.trunk, trace, d_embedding);
  (void)d_input;
  result.grads.layers = std::move(trunk_tape.layers);
  for (auto& g : head_grads) result.grads.layers.push_back(std::move(g));
  result.breakdown = blend_losses(std::move(per_expert), alpha, schedule, blend);
  return result;
}

struct EpochLog {
  std::size_t epoch = 0;
  LossBreakdown losses;
  double lr = 0.0;
};

// Minibatch Adam training under the blended objective. Deterministic for a
// fixed seed: per-epoch shuffles come from their own seeded generators and
// batches are visited in order.
inline std::vector<EpochLog> train(UvoteModel& model, const Matrix& inputs,
                                   const std::vector<double>& targets,
                                   const WeightTable& weights, const TrainConfig& config) {
  const std::size_t n = targets.size();
  if (n == 0) throw InputError("train: empty training set");
  if (inputs.rows() != n) throw ShapeError("train: feature/target row mismatch");
  if (weights.weights.rows() != n)
    throw ShapeError("train: weight table rows do not match training size");
  if (weights.weights.cols() != model.num_experts())
    throw ShapeError("train: weight table columns do not match expert count");
  if (config.max_epochs == 0) throw ConfigError("train: max_epochs must be >= 1");
  if (config.batch_size == 0) throw ConfigError("train: batch_size must be >= 1");
  if (config.lr_uncertainty > config.lr_main)
    throw ConfigError("train: lr_uncertainty must not exceed lr_main");

  auto views = model.parameter_views();
  AdamState adam = make_adam_state(views);
  const auto scale_mask = model.log_scale_tensor_mask();
  const auto milestones = config.decay_milestones
                              ? *config.decay_milestones
                              : default_milestones(config.max_epochs);
  double lr_factor = 1.0;

  std::vector<EpochLog> history;
  history.reserve(config.max_epochs);
  const std::size_t dim = inputs.cols();

  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    for (std::size_t m : milestones)
      if (m == epoch) lr_factor *= config.decay_factor;
    const double alpha = config.schedule == ScheduleMode::dynamic
                             ? dynamic_alpha(epoch, config.max_epochs)
                             : 0.0;

    std::mt19937_64 shuffle_rng(config.seed ^ (0x9E3779B97F4A7C15ULL * (epoch + 1)));
    const auto order = permutation(n, shuffle_rng);

    std::vector<double> lrs(views.size());
    for (std::size_t t = 0; t < views.size(); ++t)
      lrs[t] = (scale_mask[t] ? config.lr_uncertainty : config.lr_main) * lr_factor;

    std::vector<double> expert_acc(model.num_experts(), 0.0);
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < n; start += config.batch_size, ++batch_index) {
      const std::size_t count = std::min(config.batch_size, n - start);
      Matrix xb(count, dim);
      std::vector<double> yb(count);
      Matrix wb(count, model.num_experts());
      for (std::size_t i = 0; i < count; ++i) {
        const std::size_t src = order[start + i];
        for (std::size_t c = 0; c < dim; ++c) xb(i, c) = inputs(src, c);
        yb[i] = targets[src];
        for (std::size_t m = 0; m < model.num_experts(); ++m)
          wb(i, m) = weights.weights(src, m);
      }
      CompositeResult step = composite_loss_and_grad(model, xb, yb, wb, alpha,
                                                     config.schedule, config.blend,
                                                     config.loss);
      if (!std::isfinite(step.breakdown.total))
        throw TrainingError("training diverged at epoch " + std::to_string(epoch) +
                            ", batch " + std::to_string(batch_index));
      adam_step(views, step.grads.views(), lrs, adam);
      for (std::size_t m = 0; m < model.num_experts(); ++m)
        expert_acc[m] += step.breakdown.per_expert[m] * static_cast<double>(count);
    }

    std::vector<double> per_expert(model.num_experts());
    for (std::size_t m = 0; m < model.num_experts(); ++m)
      per_expert[m] = expert_acc[m] / static_cast<double>(n);
    EpochLog log;
    log.epoch = epoch;
    log.losses = blend_losses(std::move(per_expert), alpha, config.schedule, config.blend);
    log.lr = config.lr_main * lr_factor;
    history.push_back(std::move(log));
  }
  return history;
}

}  // namespace uvote
