#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "tvnet/config.hpp"
#include "tvnet/tensor.hpp"

namespace tvnet::data {

struct Matrix {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<double> v;

  Matrix() = default;
  Matrix(size_t r, size_t c) : rows(r), cols(c), v(r * c, 0.0) {}

  double& at(size_t r, size_t c) { return v[r * cols + c]; }
  double at(size_t r, size_t c) const { return v[r * cols + c]; }
};

// UTF-8 CSV with a header row; a leading timestamp column (first data cell
// not numeric) is dropped; everything else must parse as numbers
Matrix load_csv(const std::string& path);
void write_csv(const std::string& path, const Matrix& m,
               const std::string& channel_prefix = "v");

struct SplitRatio {
  double train = 0.7;
  double val = 0.1;
  double test = 0.2;
};

struct DatasetBundle {
  std::string name;
  std::string frequency;
  Matrix norm;  // z-scored with train statistics
  size_t train_end = 0;  // [0, train_end)
  size_t val_end = 0;    // [train_end, val_end)
  size_t test_end = 0;   // [val_end, test_end)
  std::vector<double> mean;   // per channel, from the train split
  std::vector<double> stdev;  // per channel; zero-variance channels get 1

  size_t channels() const { return norm.cols; }
  size_t split_begin(int split) const;  // 0 train, 1 val, 2 test
  size_t split_end(int split) const;
  size_t split_len(int split) const { return split_end(split) - split_begin(split); }

  double denormalize(double z, size_t channel) const;
};

DatasetBundle split_normalize(Matrix raw, SplitRatio ratio,
                              std::string name = "dataset",
                              std::string frequency = "");

// start offsets of stride-`stride` windows fully inside one split; each
// window covers input_len + horizon rows
std::vector<size_t> window_starts(const DatasetBundle& bundle, int split,
                                  size_t input_len, size_t horizon,
                                  size_t stride = 1);

// rows [start, start+len) of the normalized data as a [1 x len x C] slab,
// appended along the batch axis by the caller
void copy_window(const DatasetBundle& bundle, size_t start, size_t len,
                 std::vector<double>& out);

// exactly round(ratio * n) true entries, deterministic under seed
std::vector<uint8_t> gen_mask(size_t n, double ratio, uint64_t seed);

// replaces a fraction epsilon of positions x_i with x_i + U(-2 x_i, 2 x_i);
// zero-valued positions stay unchanged even when selected
Matrix inject_noise(const Matrix& x, double epsilon, uint64_t seed);

// synthetic generators for desk-scale runs
Matrix synth_sum_of_sines(size_t length, size_t channels, uint64_t seed,
                          double noise_std = 0.0);
Matrix synth_seasonal_multiplicative(size_t length, size_t period,
                                     uint64_t seed);
// amplitude-drifting seasonal series; drift is what the per-patch scale
// path can exploit
Matrix synth_amplitude_drift(size_t length, size_t channels, uint64_t seed);

struct SpikeSeries {
  Matrix m;
  std::vector<size_t> spike_rows;
};
// smooth base series with `spike_count` large deviations inside
// [spike_lo, spike_hi); spike rows avoid positions < margin inside each
// window of `window_len`
SpikeSeries synth_spiked(size_t length, size_t window_len, size_t spike_count,
                         size_t spike_lo, size_t spike_hi, uint64_t seed,
                         size_t margin = 4);

struct ClassificationSet {
  std::vector<Matrix> series;  // each [L x C]
  std::vector<int> labels;
};
ClassificationSet synth_two_class(size_t per_class, size_t length,
                                  size_t channels, uint64_t seed);

}  // namespace tvnet::data
