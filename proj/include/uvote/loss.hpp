#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "uvote/common.hpp"

namespace uvote {

enum class LossKind { laplace_nll, l1, l2 };

inline const char* to_string(LossKind k) {
  switch (k) {
    case LossKind::laplace_nll: return "laplace_nll";
    case LossKind::l1: return "l1";
    case LossKind::l2: return "l2";
  }
  return "laplace_nll";
}

inline LossKind loss_kind_from_string(std::string_view s) {
  if (s == "laplace_nll") return LossKind::laplace_nll;
  if (s == "l1") return LossKind::l1;
  if (s == "l2") return LossKind::l2;
  throw ConfigError("unknown loss kind: " + std::string(s));
}

inline double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Scalar loss plus gradients with respect to the predictions.
struct LossGrad {
  double loss = 0.0;
  std::vector<double> d_y_hat;
  std::vector<double> d_s_hat;
};

// Weighted Laplace negative log-likelihood,
//   L = (1/N) sum_n w_n (exp(-s_n) |y_n - yhat_n| + s_n).
inline LossGrad laplace_nll(std::span<const double> y, std::span<const double> y_hat,
                            std::span<const double> s_hat, std::span<const double> w) {
  const std::size_t n = y.size();
  if (y_hat.size() != n || s_hat.size() != n || w.size() != n)
    throw ShapeError("laplace_nll: length mismatch");
  if (n == 0) throw InputError("laplace_nll: empty batch");
  LossGrad out;
  out.d_y_hat.resize(n);
  out.d_s_hat.resize(n);
  const double inv_n = 1.0 / static_cast<double>(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(y[i]) || !std::isfinite(y_hat[i]) || !std::isfinite(s_hat[i]) ||
        !std::isfinite(w[i]))
      throw TrainingError("laplace_nll: non-finite input at sample " + std::to_string(i));
    if (!(w[i] > 0.0)) throw InputError("laplace_nll: weights must be positive");
    const double r = y[i] - y_hat[i];
    const double inv_scale = std::exp(-s_hat[i]);
    acc += w[i] * (inv_scale * std::abs(r) + s_hat[i]);
    out.d_y_hat[i] = -w[i] * inv_n * inv_scale * sign(r);
    out.d_s_hat[i] = w[i] * inv_n * (1.0 - inv_scale * std::abs(r));
  }
  out.loss = acc * inv_n;
  return out;
}

// Weighted mean absolute error; the log-scale output does not participate.
inline LossGrad l1_loss(std::span<const double> y, std::span<const double> y_hat,
                        std::span<const double> w) {
  const std::size_t n = y.size();
  if (y_hat.size() != n || w.size() != n) throw ShapeError("l1_loss: length mismatch");
  if (n == 0) throw InputError("l1_loss: empty batch");
  LossGrad out;
  out.d_y_hat.resize(n);
  out.d_s_hat.assign(n, 0.0);
  const double inv_n = 1.0 / static_cast<double>(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - y_hat[i];
    acc += w[i] * std::abs(r);
    out.d_y_hat[i] = -w[i] * inv_n * sign(r);
  }
  out.loss = acc * inv_n;
  return out;
}

inline LossGrad l2_loss(std::span<const double> y, std::span<const double> y_hat,
                        std::span<const double> w) {
  const std::size_t n = y.size();
  if (y_hat.size() != n || w.size() != n) throw ShapeError("l2_loss: length mismatch");
  if (n == 0) throw InputError("l2_loss: empty batch");
  LossGrad out;
  out.d_y_hat.resize(n);
  out.d_s_hat.assign(n, 0.0);
  const double inv_n = 1.0 / static_cast<double>(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - y_hat[i];
    acc += w[i] * r * r;
    out.d_y_hat[i] = -2.0 * w[i] * inv_n * r;
  }
  out.loss = acc * inv_n;
  return out;
}

// alpha = 1 - (T/T_max)^2, evaluated at the start of 0-based epoch T.
inline double dynamic_alpha(std::size_t epoch, std::size_t max_epochs) {
  if (max_epochs == 0) throw UsageError("dynamic_alpha: max_epochs must be >= 1");
  if (epoch > max_epochs) throw UsageError("dynamic_alpha: epoch beyond max_epochs");
  const double ratio = static_cast<double>(epoch) / static_cast<double>(max_epochs);
  return 1.0 - ratio * ratio;
}

enum class ScheduleMode { dynamic, flat };
enum class ExpertBlend { sum, mean };

// Per-expert losses and the blended total for one step or one epoch. In
// dynamic mode total = alpha*L0 + (1-alpha)*sum_{m>=1} L_m (or the mean of
// the m>=1 terms); in flat mode total = (1/M) sum_m L_m and alpha is NaN.
struct LossBreakdown {
  std::vector<double> per_expert;
  double alpha = 1.0;
  double total = 0.0;
};

// Blending coefficient applied to expert m's loss.
inline double expert_coefficient(std::size_t m, std::size_t num_experts, double alpha,
                                 ScheduleMode schedule, ExpertBlend blend) {
  if (schedule == ScheduleMode::flat) return 1.0 / static_cast<double>(num_experts);
  if (m == 0) return alpha;
  const double rest = 1.0 - alpha;
  return blend == ExpertBlend::sum ? rest : rest / static_cast<double>(num_experts - 1);
}

inline LossBreakdown blend_losses(std::vector<double> per_expert, double alpha,
                                  ScheduleMode schedule, ExpertBlend blend) {
  LossBreakdown out;
  out.per_expert = std::move(per_expert);
  out.alpha = schedule == ScheduleMode::dynamic
                  ? alpha
                  : std::numeric_limits<double>::quiet_NaN();
  double total = 0.0;
  for (std::size_t m = 0; m < out.per_expert.size(); ++m)
    total += expert_coefficient(m, out.per_expert.size(), alpha, schedule, blend) *
             out.per_expert[m];
  out.total = total;
  return out;
}

}  // namespace uvote
