#pragma once

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "uvote/common.hpp"
#include "uvote/model.hpp"

namespace uvote {

enum class Strategy { min_uncertainty, average, oracle };

inline const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::min_uncertainty: return "min_uncertainty";
    case Strategy::average: return "average";
    case Strategy::oracle: return "oracle";
  }
  return "min_uncertainty";
}

inline Strategy strategy_from_string(std::string_view s) {
  if (s == "min_uncertainty") return Strategy::min_uncertainty;
  if (s == "average") return Strategy::average;
  if (s == "oracle") return Strategy::oracle;
  throw ConfigError("unknown strategy: " + std::string(s));
}

// One fused prediction per sample. `chosen_expert` is empty for the average
// strategy, which has no per-sample selection.
struct AggregatedPrediction {
  Strategy strategy = Strategy::min_uncertainty;
  std::vector<double> y_hat;
  std::vector<double> s_hat;
  std::vector<std::size_t> chosen_expert;
};

// min_uncertainty picks the expert with the smallest predicted log scale,
// oracle the one with the smallest true error (targets required), average
// takes the mean prediction and the log of the mean scale. Ties go to the
// lowest expert index.
inline AggregatedPrediction aggregate(const ExpertOutput& outputs, Strategy strategy,
                                      const std::vector<double>* targets = nullptr) {
  const std::size_t n = outputs.batch();
  const std::size_t experts = outputs.num_experts();
  if (experts == 0) throw InputError("aggregate: no experts");
  if (strategy == Strategy::oracle) {
    if (targets == nullptr) throw UsageError("aggregate: oracle strategy requires targets");
    if (targets->size() != n) throw ShapeError("aggregate: target length mismatch");
  } else if (targets != nullptr) {
    throw UsageError("aggregate: targets are only meaningful for the oracle strategy");
  }

  AggregatedPrediction out;
  out.strategy = strategy;
  out.y_hat.resize(n);
  out.s_hat.resize(n);
  if (strategy != Strategy::average) out.chosen_expert.resize(n);

  for (std::size_t i = 0; i < n; ++i) {
    switch (strategy) {
      case Strategy::min_uncertainty: {
        std::size_t best = 0;
        for (std::size_t m = 1; m < experts; ++m)
          if (outputs.s_hat(i, m) < outputs.s_hat(i, best)) best = m;
        out.chosen_expert[i] = best;
        out.y_hat[i] = outputs.y_hat(i, best);
        out.s_hat[i] = outputs.s_hat(i, best);
        break;
      }
      case Strategy::oracle: {
        std::size_t best = 0;
        double best_err = std::abs((*targets)[i] - outputs.y_hat(i, 0));
        for (std::size_t m = 1; m < experts; ++m) {
          const double err = std::abs((*targets)[i] - outputs.y_hat(i, m));
          if (err < best_err) {
            best = m;
            best_err = err;
          }
        }
        out.chosen_expert[i] = best;
        out.y_hat[i] = outputs.y_hat(i, best);
        out.s_hat[i] = outputs.s_hat(i, best);
        break;
      }
      case Strategy::average: {
        if (experts == 1) {  // keep the single-expert case bit-exact
          out.y_hat[i] = outputs.y_hat(i, 0);
          out.s_hat[i] = outputs.s_hat(i, 0);
          break;
        }
        double y_sum = 0.0;
        double scale_sum = 0.0;
        for (std::size_t m = 0; m < experts; ++m) {
          y_sum += outputs.y_hat(i, m);
          scale_sum += std::exp(outputs.s_hat(i, m));
        }
        out.y_hat[i] = y_sum / static_cast<double>(experts);
        out.s_hat[i] = std::log(scale_sum / static_cast<double>(experts));
        break;
      }
    }
  }
  return out;
}

}  // namespace uvote
