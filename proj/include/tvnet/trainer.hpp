#pragma once

#include <string>
#include <vector>

#include "tvnet/config.hpp"
#include "tvnet/data.hpp"
#include "tvnet/model.hpp"

namespace tvnet {

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  size_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;

  void init_for(const std::vector<Tensor>& params);
};

// standard update with bias-corrected moments; step counter increments
// before the correction; throws on non-finite gradients
void adam_step(std::vector<Tensor>& params, AdamState& state, double lr);

struct EpochStats {
  size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  Model model;  // best-validation checkpoint
  std::vector<EpochStats> history;
  bool diverged = false;
  size_t best_epoch = 0;
  double best_val = 0.0;
};

// epoch loop with seeded shuffling, per-epoch validation, early stopping
// (patience from config, min-delta 0); returns the best-val checkpoint.
// On a NaN validation loss the run aborts and the last good checkpoint is
// returned with diverged set.
TrainResult train(const TaskConfig& config, const data::DatasetBundle& bundle);

TrainResult train_classification(const TaskConfig& config,
                                 const data::ClassificationSet& train_set,
                                 const data::ClassificationSet& val_set);

// task-matched loss of a whole split (0 train, 1 val, 2 test)
double eval_split_loss(Model& model, const data::DatasetBundle& bundle,
                       int split);

struct ForecastEval {
  double mse = 0.0;
  double mae = 0.0;
  size_t windows = 0;
};
ForecastEval evaluate_forecast(Model& model, const data::DatasetBundle& bundle,
                               int split);

// masked-position reconstruction error with deterministic masks
struct ImputationEval {
  double masked_mse = 0.0;
  size_t windows = 0;
};
ImputationEval evaluate_imputation(Model& model,
                                   const data::DatasetBundle& bundle,
                                   int split);

double evaluate_classification_accuracy(Model& model,
                                        const data::ClassificationSet& set);

// checkpoint file: text manifest (name, dtype, shape, offset, length per
// tensor) followed by raw little-endian payloads in manifest order
void save_checkpoint(Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace tvnet
