#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "tvnet/tensor.hpp"

namespace tvnet {

enum class Task {
  long_forecast,
  short_forecast,
  imputation,
  classification,
  anomaly
};

enum class LossKind { mse, smape, cross_entropy };

std::string to_string(Task t);
std::string to_string(LossKind k);
Task task_from_string(const std::string& s);
LossKind loss_from_string(const std::string& s);

// channel sizing rule: min(max(2^floor(log2 M), d_min), d_max)
size_t channel_width_for(size_t num_variables, size_t d_min, size_t d_max);

struct TaskConfig {
  Task task = Task::long_forecast;

  size_t cm = 64;
  size_t patch_len = 24;
  size_t kernel = 3;
  size_t blocks = 3;

  double lr = 1e-4;
  LossKind loss = LossKind::mse;
  size_t batch_size = 32;
  size_t epochs = 10;
  uint64_t seed = 2024;

  bool use_dynamic = true;
  bool use_inter = true;

  size_t input_len = 96;
  size_t horizon = 96;
  size_t input_channels = 0;  // set from the dataset

  double mask_ratio = 0.25;      // imputation
  double anomaly_ratio = 0.01;   // anomaly
  size_t window_len = 100;       // anomaly sliding window
  size_t num_classes = 2;        // classification

  size_t patience = 3;  // early stopping, min-delta 0

  DType dtype = DType::f64;

  // defaults for a task, given the dataset's variable count
  static TaskConfig defaults_for(Task t, size_t num_variables);

  void validate() const;
};

// JSON round-trip for config files and checkpoint manifests; parsing is
// strict: unknown keys are rejected
std::string config_to_json_string(const TaskConfig& c);
TaskConfig config_from_json_string(const std::string& text);

}  // namespace tvnet
