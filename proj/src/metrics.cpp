#include "tvnet/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include "tvnet/ops.hpp"

namespace tvnet::metrics {

namespace {

void check_pair(const std::vector<double>& a, const std::vector<double>& b,
                const char* op) {
  if (a.size() != b.size())
    throw std::invalid_argument(std::string(op) + ": size mismatch");
  if (a.empty()) throw std::invalid_argument(std::string(op) + ": empty input");
}

double lag_autocorrelation(const std::vector<double>& x, size_t lag) {
  const size_t n = x.size();
  if (lag >= n) return 0.0;
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double d = x[i] - mean;
    den += d * d;
    if (i + lag < n) num += d * (x[i + lag] - mean);
  }
  if (den == 0.0) return 0.0;
  return num / den;
}

// multiplicative seasonal indices from a centered-moving-average trend,
// normalized to mean 1
std::vector<double> seasonal_indices(const std::vector<double>& x, size_t p) {
  const size_t n = x.size();
  std::vector<double> trend(n, std::nan(""));
  const size_t half = p / 2;
  if (p % 2 == 1) {
    for (size_t t = half; t + half < n; ++t) {
      double s = 0.0;
      for (size_t j = t - half; j <= t + half; ++j) s += x[j];
      trend[t] = s / static_cast<double>(p);
    }
  } else {
    // 2xP moving average: half weight on both edge terms
    for (size_t t = half; t + half < n; ++t) {
      double s = 0.5 * x[t - half] + 0.5 * x[t + half];
      for (size_t j = t - half + 1; j < t + half; ++j) s += x[j];
      trend[t] = s / static_cast<double>(p);
    }
  }

  std::vector<double> ratio_sum(p, 0.0);
  std::vector<size_t> ratio_count(p, 0);
  for (size_t t = 0; t < n; ++t) {
    if (std::isnan(trend[t]) || trend[t] == 0.0) continue;
    ratio_sum[t % p] += x[t] / trend[t];
    ratio_count[t % p] += 1;
  }
  std::vector<double> idx(p, 1.0);
  double mean_idx = 0.0;
  for (size_t j = 0; j < p; ++j) {
    if (ratio_count[j] == 0)
      throw std::invalid_argument(
          "naive2: insufficient history for seasonal decomposition");
    idx[j] = ratio_sum[j] / static_cast<double>(ratio_count[j]);
    mean_idx += idx[j];
  }
  mean_idx /= static_cast<double>(p);
  if (mean_idx == 0.0)
    throw std::invalid_argument("naive2: degenerate seasonal indices");
  for (double& v : idx) v /= mean_idx;
  return idx;
}

}  // namespace

double mse(const std::vector<double>& pred, const std::vector<double>& actual) {
  check_pair(pred, actual, "mse");
  double s = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - actual[i];
    s += d * d;
  }
  return s / static_cast<double>(pred.size());
}

double mae(const std::vector<double>& pred, const std::vector<double>& actual) {
  check_pair(pred, actual, "mae");
  double s = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) s += std::fabs(pred[i] - actual[i]);
  return s / static_cast<double>(pred.size());
}

double smape(const std::vector<double>& pred,
             const std::vector<double>& actual) {
  check_pair(pred, actual, "smape");
  double s = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const double denom = std::fabs(actual[i]) + std::fabs(pred[i]);
    if (denom == 0.0) continue;  // 0/0 contributes 0
    s += std::fabs(actual[i] - pred[i]) / denom;
  }
  return 200.0 * s / static_cast<double>(pred.size());
}

double mase(const std::vector<double>& pred, const std::vector<double>& actual,
            const std::vector<double>& insample, size_t p) {
  check_pair(pred, actual, "mase");
  if (insample.size() <= p)
    throw std::invalid_argument("mase: in-sample series shorter than lag");
  double denom = 0.0;
  for (size_t j = p; j < insample.size(); ++j)
    denom += std::fabs(insample[j] - insample[j - p]);
  denom /= static_cast<double>(insample.size() - p);
  if (denom == 0.0)
    throw std::invalid_argument("mase: zero seasonal-naive denominator");
  double s = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) s += std::fabs(actual[i] - pred[i]);
  return s / static_cast<double>(pred.size()) / denom;
}

std::vector<double> naive2_forecast(const std::vector<double>& insample,
                                    size_t p, size_t horizon) {
  if (p == 0) throw std::invalid_argument("naive2: periodicity 0");
  const size_t n = insample.size();
  if (n < std::max<size_t>(p * 3, 2))
    throw std::invalid_argument("naive2: insufficient history");

  bool seasonal = false;
  if (p > 1) {
    const double r = lag_autocorrelation(insample, p);
    seasonal = std::fabs(r) > 1.645 / std::sqrt(static_cast<double>(n));
  }

  std::vector<double> out(horizon);
  if (!seasonal) {
    for (double& v : out) v = insample[n - 1];
    return out;
  }

  const std::vector<double> idx = seasonal_indices(insample, p);
  const double last_deseason = insample[n - 1] / idx[(n - 1) % p];
  for (size_t h = 0; h < horizon; ++h) out[h] = last_deseason * idx[(n + h) % p];
  return out;
}

double owa(double smape_model, double mase_model, double smape_naive2,
           double mase_naive2) {
  if (smape_naive2 <= 0.0 || mase_naive2 <= 0.0)
    throw std::invalid_argument("owa: reference metrics must be positive");
  return 0.5 * (smape_model / smape_naive2 + mase_model / mase_naive2);
}

Prf1 prf1(const std::vector<int>& pred_labels,
          const std::vector<int>& true_labels) {
  if (pred_labels.size() != true_labels.size())
    throw std::invalid_argument("prf1: size mismatch");
  size_t tp = 0, fp = 0, fn = 0;
  for (size_t i = 0; i < pred_labels.size(); ++i) {
    const bool ph = pred_labels[i] != 0;
    const bool th = true_labels[i] != 0;
    if (ph && th) ++tp;
    else if (ph) ++fp;
    else if (th) ++fn;
  }
  Prf1 r{0.0, 0.0, 0.0};
  if (tp + fp > 0) r.precision = static_cast<double>(tp) / (tp + fp);
  if (tp + fn > 0) r.recall = static_cast<double>(tp) / (tp + fn);
  if (r.precision + r.recall > 0.0)
    r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

double accuracy(const std::vector<int>& pred_classes,
                const std::vector<int>& true_classes) {
  if (pred_classes.size() != true_classes.size() || pred_classes.empty())
    throw std::invalid_argument("accuracy: size mismatch or empty");
  size_t hit = 0;
  for (size_t i = 0; i < pred_classes.size(); ++i)
    if (pred_classes[i] == true_classes[i]) ++hit;
  return static_cast<double>(hit) / static_cast<double>(pred_classes.size());
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
  return ops::mean(ops::square(ops::sub(pred, target)));
}

Tensor smape_loss(const Tensor& pred, const Tensor& target) {
  constexpr double kEps = 1e-8;
  Tensor num = ops::abs(ops::sub(target, pred));
  Tensor den =
      ops::add_scalar(ops::add(ops::abs(target), ops::abs(pred)), kEps);
  return ops::scale(ops::mean(ops::div(num, den)), 200.0);
}

Tensor masked_mse_loss(const Tensor& pred, const Tensor& target,
                       const Tensor& mask) {
  double count = 0.0;
  for (double v : mask.data()) count += v;
  if (count == 0.0)
    throw std::invalid_argument("masked_mse_loss: mask selects nothing");
  Tensor sq = ops::square(ops::sub(pred, target));
  return ops::scale(ops::sum(ops::mul(sq, mask)), 1.0 / count);
}

}  // namespace tvnet::metrics
