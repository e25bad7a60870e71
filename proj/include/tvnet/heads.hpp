#pragma once

#include <random>
#include <vector>

#include "tvnet/config.hpp"
#include "tvnet/data.hpp"
#include "tvnet/tensor.hpp"

namespace tvnet {

struct Model;

// Exactly one variant is populated, selected by the task: forecasting and
// reconstruction use the temporal+channel factorization, imputation the
// channel map alone, classification one affine map over the flattened tokens.
struct HeadParams {
  Tensor temporal_w;  // [L, T]
  Tensor temporal_b;  // [T]
  Tensor channel_w;   // [C_m, C_out]
  Tensor channel_b;   // [C_out]
  Tensor class_w;     // [L*C_m, K]
  Tensor class_b;     // [K]

  static HeadParams init(const TaskConfig& config, std::mt19937_64& rng);
  std::vector<Tensor> parameters() const;
};

// xf: [B, L, C_m] from flatten_temporal
// temporal map L -> T per feature channel, then channel map C_m -> C_out
Tensor forecast_head(const Tensor& xf, const HeadParams& head);
// per-token channel projection only
Tensor imputation_head(const Tensor& xf, const HeadParams& head);
// flatten L*C_m, single affine map to logits
Tensor classification_head(const Tensor& xf, const HeadParams& head);

std::vector<int> argmax_rows(const Tensor& logits);

struct AnomalyResult {
  std::vector<double> scores;  // per test-split timestep
  std::vector<int> labels;     // 1 = flagged
  double threshold = 0.0;
};

// reconstruction-error scoring: threshold is the (1 - anomaly_ratio)
// quantile of scores pooled over the train and validation splits; windows
// are non-overlapping, each truncated at the front to the model input length
AnomalyResult anomaly_pipeline(const data::DatasetBundle& bundle, Model& model);

}  // namespace tvnet
