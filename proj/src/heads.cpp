#include "tvnet/heads.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tvnet/model.hpp"
#include "tvnet/ops.hpp"

namespace tvnet {

namespace {

Tensor init_linear_w(size_t d_in, size_t d_out, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(d_in));
  return Tensor::uniform({d_in, d_out}, -bound, bound, rng, true);
}

}  // namespace

HeadParams HeadParams::init(const TaskConfig& config, std::mt19937_64& rng) {
  HeadParams h;
  const size_t L = config.input_len;
  const size_t cm = config.cm;
  const size_t c_out = config.input_channels;
  switch (config.task) {
    case Task::long_forecast:
    case Task::short_forecast:
      h.temporal_w = init_linear_w(L, config.horizon, rng);
      h.temporal_b = Tensor::zeros({config.horizon}, true);
      h.channel_w = init_linear_w(cm, c_out, rng);
      h.channel_b = Tensor::zeros({c_out}, true);
      break;
    case Task::anomaly:
      h.temporal_w = init_linear_w(L, L, rng);
      h.temporal_b = Tensor::zeros({L}, true);
      h.channel_w = init_linear_w(cm, c_out, rng);
      h.channel_b = Tensor::zeros({c_out}, true);
      break;
    case Task::imputation:
      h.channel_w = init_linear_w(cm, c_out, rng);
      h.channel_b = Tensor::zeros({c_out}, true);
      break;
    case Task::classification:
      h.class_w = init_linear_w(L * cm, config.num_classes, rng);
      h.class_b = Tensor::zeros({config.num_classes}, true);
      break;
  }
  return h;
}

std::vector<Tensor> HeadParams::parameters() const {
  std::vector<Tensor> out;
  for (const Tensor& t :
       {temporal_w, temporal_b, channel_w, channel_b, class_w, class_b})
    if (t.defined()) out.push_back(t);
  return out;
}

Tensor forecast_head(const Tensor& xf, const HeadParams& head) {
  if (xf.ndim() != 3)
    throw std::invalid_argument("forecast_head: input must be [B,L,C_m]");
  const size_t B = xf.shape()[0];
  const size_t L = xf.shape()[1];
  const size_t cm = xf.shape()[2];
  const size_t T = head.temporal_w.shape()[1];
  const size_t c_out = head.channel_w.shape()[1];

  Tensor per_channel = ops::reshape(ops::permute(xf, {0, 2, 1}), {B * cm, L});
  Tensor mapped = ops::linear(per_channel, head.temporal_w, head.temporal_b);
  Tensor tokens = ops::permute(ops::reshape(mapped, {B, cm, T}), {0, 2, 1});
  Tensor out = ops::linear(ops::reshape(tokens, {B * T, cm}), head.channel_w,
                           head.channel_b);
  return ops::reshape(out, {B, T, c_out});
}

Tensor imputation_head(const Tensor& xf, const HeadParams& head) {
  if (xf.ndim() != 3)
    throw std::invalid_argument("imputation_head: input must be [B,L,C_m]");
  return ops::linear(xf, head.channel_w, head.channel_b);
}

Tensor classification_head(const Tensor& xf, const HeadParams& head) {
  if (xf.ndim() != 3)
    throw std::invalid_argument("classification_head: input must be [B,L,C_m]");
  const size_t B = xf.shape()[0];
  Tensor flat = ops::reshape(xf, {B, xf.shape()[1] * xf.shape()[2]});
  return ops::linear(flat, head.class_w, head.class_b);
}

std::vector<int> argmax_rows(const Tensor& logits) {
  if (logits.ndim() != 2)
    throw std::invalid_argument("argmax_rows: input must be [B,K]");
  const size_t B = logits.shape()[0];
  const size_t K = logits.shape()[1];
  std::vector<int> out(B, 0);
  const double* p = logits.data().data();
  for (size_t b = 0; b < B; ++b) {
    size_t best = 0;
    for (size_t k = 1; k < K; ++k)
      if (p[b * K + k] > p[b * K + best]) best = k;
    out[b] = static_cast<int>(best);
  }
  return out;
}

namespace {

// reconstruction scores for one split, written into a score array indexed
// from score_offset (uncovered leading rows of each window keep score 0)
void score_split(const data::DatasetBundle& bundle, Model& model, int split,
                 std::vector<double>& scores, size_t score_offset) {
  const size_t W = model.config.window_len;
  const size_t L = model.config.input_len;
  const size_t C = bundle.channels();
  const size_t skip = W - L;
  auto starts = data::window_starts(bundle, split, W, 0, W);

  NoGradGuard no_grad;
  for (size_t start : starts) {
    std::vector<double> buf;
    data::copy_window(bundle, start + skip, L, buf);
    Tensor x = Tensor::from_data({1, L, C}, buf);
    Tensor recon = model.forward(x, false);
    const double* pr = recon.data().data();
    const double* px = x.data().data();
    for (size_t t = 0; t < L; ++t) {
      double s = 0.0;
      for (size_t c = 0; c < C; ++c) {
        const double d = pr[t * C + c] - px[t * C + c];
        s += d * d;
      }
      scores[start + skip + t - score_offset] = s / static_cast<double>(C);
    }
  }
}

}  // namespace

AnomalyResult anomaly_pipeline(const data::DatasetBundle& bundle, Model& model) {
  if (model.config.task != Task::anomaly)
    throw std::invalid_argument("anomaly_pipeline: model task is not anomaly");

  const size_t calib_len = bundle.split_end(1);
  if (calib_len == 0)
    throw std::invalid_argument("anomaly_pipeline: empty calibration set");
  std::vector<double> calib(calib_len, 0.0);
  score_split(bundle, model, 0, calib, 0);
  score_split(bundle, model, 1, calib, 0);

  std::vector<double> sorted = calib;
  std::sort(sorted.begin(), sorted.end());
  const double q = 1.0 - model.config.anomaly_ratio;
  size_t idx =
      static_cast<size_t>(std::floor(q * static_cast<double>(sorted.size())));
  idx = std::min(idx, sorted.size() - 1);
  const double threshold = sorted[idx];

  AnomalyResult result;
  result.threshold = threshold;
  const size_t test_begin = bundle.split_begin(2);
  const size_t test_len = bundle.split_len(2);
  result.scores.assign(test_len, 0.0);
  score_split(bundle, model, 2, result.scores, test_begin);
  result.labels.assign(test_len, 0);
  for (size_t t = 0; t < test_len; ++t)
    result.labels[t] = result.scores[t] > threshold ? 1 : 0;
  return result;
}

}  // namespace tvnet
