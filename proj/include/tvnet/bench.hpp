#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tvnet/config.hpp"
#include "tvnet/counters.hpp"

namespace tvnet::bench {

// Closed-form per-block cost model. The *_total fields sum the listed parts
// exactly; bias, residual-add and the exact live parameter count (which
// includes biases and the normalization affine pair) are reported as
// separate audit lines since the headline forms omit them.
struct CostReport {
  // multiply counts per block, same-size-output convention
  unsigned long long flops_conv2d = 0;     // C_m^2 k^2 L
  unsigned long long flops_alpha_gen = 0;  // C_m L
  unsigned long long flops_channel = 0;    // C_m^2 N + C_m^2
  unsigned long long flops_multiply = 0;   // C_m^2 k^2 N
  unsigned long long flops_total = 0;

  unsigned long long params_conv2d = 0;   // C_m^2 k^2
  unsigned long long params_gen = 0;      // C_m N
  unsigned long long params_channel = 0;  // 2 C_m^2
  unsigned long long params_total = 0;

  // audit extras
  unsigned long long flops_bias = 0;      // C_m L per block
  unsigned long long flops_residual = 0;  // C_m L per block
  // learnable elements of one live block: conv2d + both channel convs,
  // their biases, and the normalization scale/shift
  unsigned long long params_block_exact = 0;

  size_t cm = 0, kernel = 0, length = 0, patches = 0, patch_len = 0;
};

CostReport count_costs(size_t cm, size_t kernel, size_t length, size_t patches,
                       size_t patch_len);

struct ScalingRow {
  size_t input_len = 0;
  unsigned long long flops_conv2d = 0;  // closed form, per block
  unsigned long long macs_measured = 0; // instrumented, fwd pass
  unsigned long long params = 0;
  double median_ms = 0.0;
  unsigned long long peak_bytes = 0;
};

// forward+backward timing over synthetic batches for each input length;
// reports medians over `trials` runs and allocator peaks
std::vector<ScalingRow> measure_scaling(const std::vector<size_t>& input_lens,
                                        size_t cm, size_t kernel,
                                        size_t patch_len, size_t batch,
                                        size_t blocks, size_t trials = 5);

std::string scaling_csv(const std::vector<ScalingRow>& rows);
std::string cost_report_csv(const CostReport& r);

}  // namespace tvnet::bench
