#include "tvnet/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace tvnet::data {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

bool parse_number(const std::string& s, double& out) {
  const char* begin = s.c_str();
  char* end = nullptr;
  out = std::strtod(begin, &end);
  if (end == begin) return false;
  while (*end == ' ' || *end == '\r' || *end == '\t') ++end;
  return *end == '\0';
}

constexpr double kPi = 3.14159265358979323846;

}  // namespace

Matrix load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open csv: " + path);

  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("empty csv: " + path);
  size_t header_cols = split_line(line).size();
  if (header_cols == 0) throw std::runtime_error("csv header has no columns");

  std::vector<std::vector<double>> rows;
  bool drop_first = false;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
    auto cells = split_line(line);
    if (cells.size() != header_cols)
      throw std::runtime_error("csv row " + std::to_string(line_no) + " has " +
                               std::to_string(cells.size()) + " cells, expected " +
                               std::to_string(header_cols));
    if (rows.empty()) {
      double probe;
      drop_first = header_cols > 1 && !parse_number(cells[0], probe);
    }
    std::vector<double> row;
    row.reserve(header_cols - (drop_first ? 1 : 0));
    for (size_t c = drop_first ? 1 : 0; c < cells.size(); ++c) {
      double val;
      if (!parse_number(cells[c], val))
        throw std::runtime_error("csv row " + std::to_string(line_no) +
                                 " column " + std::to_string(c + 1) +
                                 ": not a number: '" + cells[c] + "'");
      row.push_back(val);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("csv has no data rows: " + path);

  Matrix m(rows.size(), rows[0].size());
  for (size_t r = 0; r < rows.size(); ++r)
    for (size_t c = 0; c < m.cols; ++c) m.at(r, c) = rows[r][c];
  return m;
}

void write_csv(const std::string& path, const Matrix& m,
               const std::string& channel_prefix) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write csv: " + path);
  for (size_t c = 0; c < m.cols; ++c)
    out << (c ? "," : "") << channel_prefix << c;
  out << "\n";
  out.precision(17);
  for (size_t r = 0; r < m.rows; ++r) {
    for (size_t c = 0; c < m.cols; ++c) out << (c ? "," : "") << m.at(r, c);
    out << "\n";
  }
}

size_t DatasetBundle::split_begin(int split) const {
  switch (split) {
    case 0: return 0;
    case 1: return train_end;
    case 2: return val_end;
  }
  throw std::invalid_argument("split must be 0, 1 or 2");
}

size_t DatasetBundle::split_end(int split) const {
  switch (split) {
    case 0: return train_end;
    case 1: return val_end;
    case 2: return test_end;
  }
  throw std::invalid_argument("split must be 0, 1 or 2");
}

double DatasetBundle::denormalize(double z, size_t channel) const {
  return z * stdev[channel] + mean[channel];
}

DatasetBundle split_normalize(Matrix raw, SplitRatio ratio, std::string name,
                              std::string frequency) {
  if (ratio.train + ratio.val + ratio.test > 1.0 + 1e-9)
    throw std::invalid_argument("split ratios sum to more than 1");
  const size_t T = raw.rows;
  const size_t n_train = static_cast<size_t>(std::floor(T * ratio.train));
  const size_t n_val = static_cast<size_t>(std::floor(T * ratio.val));
  size_t n_test = static_cast<size_t>(std::floor(T * ratio.test));
  n_test = std::min(n_test, T - n_train - n_val);
  if (n_train == 0) throw std::invalid_argument("empty train split");

  DatasetBundle b;
  b.name = std::move(name);
  b.frequency = std::move(frequency);
  b.train_end = n_train;
  b.val_end = n_train + n_val;
  b.test_end = n_train + n_val + n_test;

  const size_t C = raw.cols;
  b.mean.assign(C, 0.0);
  b.stdev.assign(C, 0.0);
  for (size_t c = 0; c < C; ++c) {
    double s = 0.0;
    for (size_t r = 0; r < n_train; ++r) s += raw.at(r, c);
    b.mean[c] = s / static_cast<double>(n_train);
    double v = 0.0;
    for (size_t r = 0; r < n_train; ++r) {
      const double d = raw.at(r, c) - b.mean[c];
      v += d * d;
    }
    b.stdev[c] = std::sqrt(v / static_cast<double>(n_train));
    if (b.stdev[c] == 0.0) {
      std::cerr << "warning: channel " << c
                << " has zero train variance; using std = 1\n";
      b.stdev[c] = 1.0;
    }
  }

  b.norm = Matrix(b.test_end, C);
  for (size_t r = 0; r < b.test_end; ++r)
    for (size_t c = 0; c < C; ++c)
      b.norm.at(r, c) = (raw.at(r, c) - b.mean[c]) / b.stdev[c];
  return b;
}

std::vector<size_t> window_starts(const DatasetBundle& bundle, int split,
                                  size_t input_len, size_t horizon,
                                  size_t stride) {
  if (stride == 0) throw std::invalid_argument("window stride 0");
  const size_t begin = bundle.split_begin(split);
  const size_t end = bundle.split_end(split);
  const size_t need = input_len + horizon;
  std::vector<size_t> starts;
  if (end - begin < need) return starts;
  for (size_t s = begin; s + need <= end; s += stride) starts.push_back(s);
  return starts;
}

void copy_window(const DatasetBundle& bundle, size_t start, size_t len,
                 std::vector<double>& out) {
  const size_t C = bundle.norm.cols;
  const double* src = bundle.norm.v.data() + start * C;
  out.insert(out.end(), src, src + len * C);
}

std::vector<uint8_t> gen_mask(size_t n, double ratio, uint64_t seed) {
  if (ratio <= 0.0 || ratio >= 1.0)
    throw std::invalid_argument("gen_mask: ratio must be in (0,1)");
  const size_t k = static_cast<size_t>(
      std::llround(ratio * static_cast<double>(n)));
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  // partial Fisher-Yates: the first k entries are the masked positions
  for (size_t i = 0; i < k && i + 1 < n; ++i) {
    std::uniform_int_distribution<size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  std::vector<uint8_t> mask(n, 0);
  for (size_t i = 0; i < k; ++i) mask[idx[i]] = 1;
  return mask;
}

Matrix inject_noise(const Matrix& x, double epsilon, uint64_t seed) {
  if (epsilon < 0.0 || epsilon > 1.0)
    throw std::invalid_argument("inject_noise: epsilon must be in [0,1]");
  Matrix out = x;
  if (epsilon == 0.0) return out;
  const size_t n = out.v.size();
  const size_t k = static_cast<size_t>(
      std::llround(epsilon * static_cast<double>(n)));
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  for (size_t i = 0; i < k && i + 1 < n; ++i) {
    std::uniform_int_distribution<size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  for (size_t i = 0; i < k; ++i) {
    double& v = out.v[idx[i]];
    if (v == 0.0) continue;  // perturbation range collapses
    const double lo = std::min(-2.0 * v, 2.0 * v);
    const double hi = std::max(-2.0 * v, 2.0 * v);
    std::uniform_real_distribution<double> dist(lo, hi);
    v += dist(rng);
  }
  return out;
}

Matrix synth_sum_of_sines(size_t length, size_t channels, uint64_t seed,
                          double noise_std) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
  std::normal_distribution<double> noise(0.0, noise_std);
  Matrix m(length, channels);
  for (size_t c = 0; c < channels; ++c) {
    const double p1 = phase(rng);
    const double p2 = phase(rng);
    for (size_t t = 0; t < length; ++t) {
      double v = std::sin(2.0 * kPi * t / 24.0 + p1) +
                 0.5 * std::sin(2.0 * kPi * t / 96.0 + p2);
      if (noise_std > 0.0) v += noise(rng);
      m.at(t, c) = v;
    }
  }
  return m;
}

Matrix synth_seasonal_multiplicative(size_t length, size_t period,
                                     uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(0.5, 1.5);
  std::vector<double> indices(period);
  double mean = 0.0;
  for (double& v : indices) {
    v = dist(rng);
    mean += v;
  }
  mean /= static_cast<double>(period);
  for (double& v : indices) v /= mean;  // indices average to 1
  Matrix m(length, 1);
  for (size_t t = 0; t < length; ++t) m.at(t, 0) = 10.0 * indices[t % period];
  return m;
}

Matrix synth_amplitude_drift(size_t length, size_t channels, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
  Matrix m(length, channels);
  for (size_t c = 0; c < channels; ++c) {
    const double p1 = phase(rng);
    const double p2 = phase(rng);
    for (size_t t = 0; t < length; ++t) {
      // seasonal carrier whose amplitude swings on a much longer scale
      const double amp = 1.0 + 0.8 * std::sin(2.0 * kPi * t / 480.0 + p2);
      m.at(t, c) = amp * std::sin(2.0 * kPi * t / 24.0 + p1) +
                   0.3 * std::sin(2.0 * kPi * t / 12.0 + p2);
    }
  }
  return m;
}

SpikeSeries synth_spiked(size_t length, size_t window_len, size_t spike_count,
                         size_t spike_lo, size_t spike_hi, uint64_t seed,
                         size_t margin) {
  if (spike_hi > length || spike_lo >= spike_hi)
    throw std::invalid_argument("synth_spiked: bad spike range");
  std::mt19937_64 rng(seed);
  SpikeSeries out;
  out.m = Matrix(length, 1);
  for (size_t t = 0; t < length; ++t)
    out.m.at(t, 0) = std::sin(2.0 * kPi * t / 20.0);

  std::uniform_int_distribution<size_t> pos(spike_lo, spike_hi - 1);
  std::uniform_real_distribution<double> mag(6.0, 9.0);
  std::uniform_int_distribution<int> sign(0, 1);
  std::vector<uint8_t> used(length, 0);
  size_t placed = 0;
  size_t attempts = 0;
  while (placed < spike_count && attempts < 100000) {
    ++attempts;
    const size_t t = pos(rng);
    if (used[t]) continue;
    // keep spikes inside the reconstructed portion of each window
    if (window_len > 0 && t % window_len < margin) continue;
    used[t] = 1;
    out.m.at(t, 0) += (sign(rng) ? 1.0 : -1.0) * mag(rng);
    out.spike_rows.push_back(t);
    ++placed;
  }
  std::sort(out.spike_rows.begin(), out.spike_rows.end());
  return out;
}

ClassificationSet synth_two_class(size_t per_class, size_t length,
                                  size_t channels, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.1);
  ClassificationSet set;
  for (int cls = 0; cls < 2; ++cls) {
    const double period = cls == 0 ? 16.0 : 8.0;
    for (size_t s = 0; s < per_class; ++s) {
      std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
      const double p = phase(rng);
      Matrix m(length, channels);
      for (size_t c = 0; c < channels; ++c)
        for (size_t t = 0; t < length; ++t)
          m.at(t, c) = std::sin(2.0 * kPi * t / period + p) + noise(rng);
      set.series.push_back(std::move(m));
      set.labels.push_back(cls);
    }
  }
  return set;
}

}  // namespace tvnet::data
