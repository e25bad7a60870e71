#include "tvnet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "tvnet/metrics.hpp"
#include "tvnet/ops.hpp"

namespace tvnet {

void AdamState::init_for(const std::vector<Tensor>& params) {
  step = 0;
  m.clear();
  v.clear();
  for (const auto& p : params) {
    m.emplace_back(p.size(), 0.0);
    v.emplace_back(p.size(), 0.0);
  }
}

void adam_step(std::vector<Tensor>& params, AdamState& state, double lr) {
  if (state.m.size() != params.size())
    throw std::invalid_argument("adam_step: state not initialized for params");
  ++state.step;
  const double bc1 =
      1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 =
      1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = params[pi];
    if (!p.has_grad()) continue;
    const auto& g = p.grad();
    auto& md = state.m[pi];
    auto& vd = state.v[pi];
    auto& w = p.data();
    if (md.size() != w.size())
      throw std::invalid_argument("adam_step: moment shape mismatch at param " +
                                  std::to_string(pi));
    for (size_t i = 0; i < w.size(); ++i) {
      if (!std::isfinite(g[i]))
        throw std::runtime_error("adam_step: non-finite gradient in param " +
                                 std::to_string(pi) + " elem " +
                                 std::to_string(i));
      md[i] = state.beta1 * md[i] + (1.0 - state.beta1) * g[i];
      vd[i] = state.beta2 * vd[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double mhat = md[i] / bc1;
      const double vhat = vd[i] / bc2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
    quantize_to_dtype(*p.impl());
  }
}

namespace {

uint64_t derive_seed(uint64_t base, uint64_t a, uint64_t b, uint64_t c) {
  uint64_t h = base;
  for (uint64_t x : {a + 1, b + 1, c + 1}) {
    h ^= x + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  }
  return h;
}

struct Batch {
  Tensor x;
  Tensor y;
  Tensor mask;             // imputation only
  std::vector<int> labels; // classification only
  size_t count = 0;
};

// assembles one batch of windows for forecasting / reconstruction tasks
Batch make_batch(const TaskConfig& config, const data::DatasetBundle& bundle,
                 const std::vector<size_t>& starts, size_t first, size_t count,
                 uint64_t mask_seed) {
  const size_t C = bundle.channels();
  const size_t L = config.input_len;
  Batch batch;
  batch.count = count;
  switch (config.task) {
    case Task::long_forecast:
    case Task::short_forecast: {
      const size_t T = config.horizon;
      std::vector<double> xs, ys;
      xs.reserve(count * L * C);
      ys.reserve(count * T * C);
      for (size_t i = 0; i < count; ++i) {
        const size_t s = starts[first + i];
        data::copy_window(bundle, s, L, xs);
        data::copy_window(bundle, s + L, T, ys);
      }
      batch.x = Tensor::from_data({count, L, C}, std::move(xs));
      batch.y = Tensor::from_data({count, T, C}, std::move(ys));
      break;
    }
    case Task::anomaly: {
      const size_t skip = config.window_len - L;
      std::vector<double> xs;
      xs.reserve(count * L * C);
      for (size_t i = 0; i < count; ++i)
        data::copy_window(bundle, starts[first + i] + skip, L, xs);
      batch.x = Tensor::from_data({count, L, C}, std::move(xs));
      batch.y = batch.x;
      break;
    }
    case Task::imputation: {
      std::vector<double> xs;
      xs.reserve(count * L * C);
      for (size_t i = 0; i < count; ++i)
        data::copy_window(bundle, starts[first + i], L, xs);
      auto mask = data::gen_mask(count * L * C, config.mask_ratio, mask_seed);
      std::vector<double> masked(xs.size());
      std::vector<double> maskd(xs.size());
      for (size_t i = 0; i < xs.size(); ++i) {
        maskd[i] = mask[i] ? 1.0 : 0.0;
        masked[i] = mask[i] ? 0.0 : xs[i];
      }
      batch.y = Tensor::from_data({count, L, C}, std::move(xs));
      batch.x = Tensor::from_data({count, L, C}, std::move(masked));
      batch.mask = Tensor::from_data({count, L, C}, std::move(maskd));
      break;
    }
    case Task::classification:
      throw std::logic_error("make_batch: classification uses its own path");
  }
  return batch;
}

Tensor batch_loss(const TaskConfig& config, Model& model, Batch& batch,
                  bool training) {
  Tensor pred = model.forward(batch.x, training);
  switch (config.loss) {
    case LossKind::mse:
      if (config.task == Task::imputation)
        return metrics::masked_mse_loss(pred, batch.y, batch.mask);
      return metrics::mse_loss(pred, batch.y);
    case LossKind::smape:
      return metrics::smape_loss(pred, batch.y);
    case LossKind::cross_entropy:
      return ops::cross_entropy(pred, batch.labels);
  }
  throw std::logic_error("batch_loss: unknown loss");
}

std::vector<size_t> task_window_starts(const TaskConfig& config,
                                       const data::DatasetBundle& bundle,
                                       int split) {
  switch (config.task) {
    case Task::long_forecast:
    case Task::short_forecast:
      return data::window_starts(bundle, split, config.input_len,
                                 config.horizon, 1);
    case Task::imputation:
      return data::window_starts(bundle, split, config.input_len, 0,
                                 config.input_len);
    case Task::anomaly:
      return data::window_starts(bundle, split, config.window_len, 0,
                                 config.window_len);
    case Task::classification:
      break;
  }
  throw std::logic_error("task_window_starts: bad task");
}

double split_loss(const TaskConfig& config, Model& model,
                  const data::DatasetBundle& bundle, int split) {
  auto starts = task_window_starts(config, bundle, split);
  if (starts.empty())
    throw std::invalid_argument("split " + std::to_string(split) +
                                " too short for the configured windows");
  NoGradGuard no_grad;
  double total = 0.0;
  size_t seen = 0;
  for (size_t first = 0; first < starts.size(); first += config.batch_size) {
    const size_t count = std::min(config.batch_size, starts.size() - first);
    // masks for a fixed split are epoch-independent so losses are comparable
    Batch batch = make_batch(config, bundle, starts, first, count,
                             derive_seed(config.seed, 7, split, first));
    total += batch_loss(config, model, batch, false).value() *
             static_cast<double>(count);
    seen += count;
  }
  return total / static_cast<double>(seen);
}

}  // namespace

double eval_split_loss(Model& model, const data::DatasetBundle& bundle,
                       int split) {
  return split_loss(model.config, model, bundle, split);
}

TrainResult train(const TaskConfig& config, const data::DatasetBundle& bundle) {
  config.validate();
  if (bundle.channels() != config.input_channels)
    throw std::invalid_argument("train: config channels " +
                                std::to_string(config.input_channels) +
                                " do not match dataset " +
                                std::to_string(bundle.channels()));
  DTypeGuard dtype_guard(config.dtype);

  TrainResult result;
  Model model = Model::init(config);
  auto params = model.parameters();
  AdamState adam;
  adam.init_for(params);

  auto train_starts = task_window_starts(config, bundle, 0);
  if (train_starts.empty())
    throw std::invalid_argument("train split too short for windows");

  std::mt19937_64 shuffle_rng(derive_seed(config.seed, 1, 0, 0));
  result.model = model.clone();
  result.best_val = std::numeric_limits<double>::infinity();
  size_t bad_epochs = 0;

  for (size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(train_starts.begin(), train_starts.end(), shuffle_rng);
    double epoch_loss = 0.0;
    size_t seen = 0;
    for (size_t first = 0; first < train_starts.size();
         first += config.batch_size) {
      const size_t count =
          std::min(config.batch_size, train_starts.size() - first);
      Batch batch = make_batch(config, bundle, train_starts, first, count,
                               derive_seed(config.seed, 2, epoch, first));
      Tensor loss = batch_loss(config, model, batch, true);
      const double lv = loss.value();
      if (!std::isfinite(lv)) {
        result.diverged = true;
        return result;
      }
      for (auto& p : params) p.zero_grad();
      loss.backward();
      adam_step(params, adam, config.lr);
      epoch_loss += lv * static_cast<double>(count);
      seen += count;
    }
    epoch_loss /= static_cast<double>(seen);

    double val = split_loss(config, model, bundle, 1);
    result.history.push_back({epoch, epoch_loss, val});
    if (!std::isfinite(val)) {
      result.diverged = true;
      return result;
    }
    if (val < result.best_val) {
      result.best_val = val;
      result.best_epoch = epoch;
      result.model = model.clone();
      bad_epochs = 0;
    } else {
      ++bad_epochs;
      if (bad_epochs >= config.patience) break;
    }
  }
  return result;
}

namespace {

Batch make_class_batch(const data::ClassificationSet& set,
                       const std::vector<size_t>& order, size_t first,
                       size_t count) {
  const size_t L = set.series[0].rows;
  const size_t C = set.series[0].cols;
  std::vector<double> xs;
  xs.reserve(count * L * C);
  Batch batch;
  batch.count = count;
  for (size_t i = 0; i < count; ++i) {
    const auto& m = set.series[order[first + i]];
    xs.insert(xs.end(), m.v.begin(), m.v.end());
    batch.labels.push_back(set.labels[order[first + i]]);
  }
  batch.x = Tensor::from_data({count, L, C}, std::move(xs));
  return batch;
}

double class_split_loss(const TaskConfig& config, Model& model,
                        const data::ClassificationSet& set) {
  NoGradGuard no_grad;
  std::vector<size_t> order(set.series.size());
  std::iota(order.begin(), order.end(), 0);
  double total = 0.0;
  for (size_t first = 0; first < order.size(); first += config.batch_size) {
    const size_t count = std::min(config.batch_size, order.size() - first);
    Batch batch = make_class_batch(set, order, first, count);
    total += batch_loss(config, model, batch, false).value() *
             static_cast<double>(count);
  }
  return total / static_cast<double>(order.size());
}

}  // namespace

TrainResult train_classification(const TaskConfig& config,
                                 const data::ClassificationSet& train_set,
                                 const data::ClassificationSet& val_set) {
  config.validate();
  if (train_set.series.empty())
    throw std::invalid_argument("train_classification: empty training set");
  DTypeGuard dtype_guard(config.dtype);

  TrainResult result;
  Model model = Model::init(config);
  auto params = model.parameters();
  AdamState adam;
  adam.init_for(params);

  std::vector<size_t> order(train_set.series.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 shuffle_rng(derive_seed(config.seed, 1, 0, 0));

  result.model = model.clone();
  result.best_val = std::numeric_limits<double>::infinity();
  size_t bad_epochs = 0;

  for (size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    for (size_t first = 0; first < order.size(); first += config.batch_size) {
      const size_t count = std::min(config.batch_size, order.size() - first);
      Batch batch = make_class_batch(train_set, order, first, count);
      Tensor loss = batch_loss(config, model, batch, true);
      const double lv = loss.value();
      if (!std::isfinite(lv)) {
        result.diverged = true;
        return result;
      }
      for (auto& p : params) p.zero_grad();
      loss.backward();
      adam_step(params, adam, config.lr);
      epoch_loss += lv * static_cast<double>(count);
    }
    epoch_loss /= static_cast<double>(order.size());

    const double val = class_split_loss(config, model, val_set);
    result.history.push_back({epoch, epoch_loss, val});
    if (!std::isfinite(val)) {
      result.diverged = true;
      return result;
    }
    if (val < result.best_val) {
      result.best_val = val;
      result.best_epoch = epoch;
      result.model = model.clone();
      bad_epochs = 0;
    } else {
      ++bad_epochs;
      if (bad_epochs >= config.patience) break;
    }
  }
  return result;
}

ForecastEval evaluate_forecast(Model& model, const data::DatasetBundle& bundle,
                               int split) {
  const TaskConfig& config = model.config;
  auto starts = task_window_starts(config, bundle, split);
  if (starts.empty())
    throw std::invalid_argument("evaluate_forecast: split too short");
  NoGradGuard no_grad;
  double se = 0.0, ae = 0.0;
  size_t n = 0;
  for (size_t first = 0; first < starts.size(); first += config.batch_size) {
    const size_t count = std::min(config.batch_size, starts.size() - first);
    Batch batch = make_batch(config, bundle, starts, first, count, 0);
    Tensor pred = model.forward(batch.x, false);
    const auto& p = pred.data();
    const auto& y = batch.y.data();
    for (size_t i = 0; i < p.size(); ++i) {
      const double d = p[i] - y[i];
      se += d * d;
      ae += std::fabs(d);
    }
    n += p.size();
  }
  ForecastEval ev;
  ev.mse = se / static_cast<double>(n);
  ev.mae = ae / static_cast<double>(n);
  ev.windows = starts.size();
  return ev;
}

ImputationEval evaluate_imputation(Model& model,
                                   const data::DatasetBundle& bundle,
                                   int split) {
  const TaskConfig& config = model.config;
  auto starts = task_window_starts(config, bundle, split);
  if (starts.empty())
    throw std::invalid_argument("evaluate_imputation: split too short");
  NoGradGuard no_grad;
  double se = 0.0;
  size_t masked = 0;
  for (size_t first = 0; first < starts.size(); first += config.batch_size) {
    const size_t count = std::min(config.batch_size, starts.size() - first);
    Batch batch = make_batch(config, bundle, starts, first, count,
                             derive_seed(config.seed, 7, split, first));
    Tensor pred = model.forward(batch.x, false);
    const auto& p = pred.data();
    const auto& y = batch.y.data();
    const auto& m = batch.mask.data();
    for (size_t i = 0; i < p.size(); ++i) {
      if (m[i] == 0.0) continue;
      const double d = p[i] - y[i];
      se += d * d;
      ++masked;
    }
  }
  ImputationEval ev;
  ev.masked_mse = se / static_cast<double>(masked);
  ev.windows = starts.size();
  return ev;
}

double evaluate_classification_accuracy(Model& model,
                                        const data::ClassificationSet& set) {
  NoGradGuard no_grad;
  std::vector<size_t> order(set.series.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<int> pred;
  std::vector<int> truth;
  for (size_t first = 0; first < order.size();
       first += model.config.batch_size) {
    const size_t count =
        std::min(model.config.batch_size, order.size() - first);
    Batch batch = make_class_batch(set, order, first, count);
    Tensor logits = model.forward(batch.x, false);
    auto rows = argmax_rows(logits);
    pred.insert(pred.end(), rows.begin(), rows.end());
    truth.insert(truth.end(), batch.labels.begin(), batch.labels.end());
  }
  return metrics::accuracy(pred, truth);
}

namespace {

const char* dtype_name(DType d) { return d == DType::f32 ? "f32" : "f64"; }

size_t dtype_width(DType d) { return d == DType::f32 ? 4 : 8; }

void append_payload(std::string& payload, const std::vector<double>& values,
                    DType d) {
  if (d == DType::f32) {
    for (double v : values) {
      const float f = static_cast<float>(v);
      payload.append(reinterpret_cast<const char*>(&f), sizeof(float));
    }
  } else {
    payload.append(reinterpret_cast<const char*>(values.data()),
                   values.size() * sizeof(double));
  }
}

}  // namespace

void save_checkpoint(Model& model, const std::string& path) {
  std::ostringstream manifest;
  std::string payload;
  manifest << "tvnet-checkpoint v1\n";
  manifest << "meta " << config_to_json_string(model.config) << "\n";

  auto emit = [&](const std::string& name, const std::vector<size_t>& shape,
                  const std::vector<double>& values, DType d) {
    const size_t offset = payload.size();
    manifest << "tensor " << name << " " << dtype_name(d) << " "
             << shape.size();
    for (size_t s : shape) manifest << " " << s;
    append_payload(payload, values, d);
    manifest << " " << offset << " " << payload.size() - offset << "\n";
  };

  for (auto& [name, t] : model.named_parameters())
    emit(name, t.shape(), t.data(), t.dtype());
  for (auto& [name, buf] : model.named_buffers())
    emit(name, {buf->size()}, *buf, DType::f64);

  manifest << "payload " << payload.size() << "\n";

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  const std::string header = manifest.str();
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);

  std::string line;
  if (!std::getline(in, line) || line != "tvnet-checkpoint v1")
    throw std::runtime_error("checkpoint: bad magic line");
  if (!std::getline(in, line) || line.rfind("meta ", 0) != 0)
    throw std::runtime_error("checkpoint: missing meta line");
  TaskConfig config = config_from_json_string(line.substr(5));

  struct Entry {
    std::string name;
    DType dtype;
    std::vector<size_t> shape;
    size_t offset;
    size_t bytes;
  };
  std::vector<Entry> entries;
  size_t payload_size = 0;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "payload") {
      ls >> payload_size;
      break;
    }
    if (kind != "tensor")
      throw std::runtime_error("checkpoint: unexpected manifest line: " + line);
    Entry e;
    std::string dt;
    size_t ndim;
    ls >> e.name >> dt >> ndim;
    e.dtype = dt == "f32" ? DType::f32 : DType::f64;
    if (dt != "f32" && dt != "f64")
      throw std::runtime_error("checkpoint: bad dtype for tensor " + e.name);
    e.shape.resize(ndim);
    for (auto& s : e.shape) ls >> s;
    ls >> e.offset >> e.bytes;
    if (!ls)
      throw std::runtime_error("checkpoint: malformed manifest entry for " +
                               e.name);
    if (e.bytes != numel(e.shape) * dtype_width(e.dtype))
      throw std::runtime_error("checkpoint: payload length mismatch for " +
                               e.name);
    entries.push_back(std::move(e));
  }

  std::string payload(payload_size, '\0');
  in.read(payload.data(), static_cast<std::streamsize>(payload_size));
  if (static_cast<size_t>(in.gcount()) != payload_size)
    throw std::runtime_error("checkpoint: truncated payload (expected " +
                             std::to_string(payload_size) + " bytes)");

  DTypeGuard dtype_guard(config.dtype);
  Model model = Model::init(config);

  auto named = model.named_parameters();
  auto buffers = model.named_buffers();
  for (const Entry& e : entries) {
    if (e.offset + e.bytes > payload.size())
      throw std::runtime_error("checkpoint: entry past payload end: " + e.name);
    std::vector<double>* dst = nullptr;
    for (auto& [name, t] : named)
      if (name == e.name) {
        if (t.shape() != e.shape)
          throw std::runtime_error("checkpoint: shape mismatch for " + e.name);
        dst = &t.data();
      }
    for (auto& [name, buf] : buffers)
      if (name == e.name) dst = buf;
    if (!dst)
      throw std::runtime_error("checkpoint: unknown tensor " + e.name);
    const size_t n = e.bytes / dtype_width(e.dtype);
    if (dst->size() != n)
      throw std::runtime_error("checkpoint: size mismatch for " + e.name);
    const char* src = payload.data() + e.offset;
    if (e.dtype == DType::f32) {
      for (size_t i = 0; i < n; ++i) {
        float f;
        std::memcpy(&f, src + i * sizeof(float), sizeof(float));
        (*dst)[i] = static_cast<double>(f);
      }
    } else {
      std::memcpy(dst->data(), src, e.bytes);
    }
  }
  return model;
}

}  // namespace tvnet
