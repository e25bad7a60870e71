#include "tvnet/config.hpp"

#include <bit>

#include "json.hpp"

namespace tvnet {

std::string to_string(Task t) {
  switch (t) {
    case Task::long_forecast: return "long_forecast";
    case Task::short_forecast: return "short_forecast";
    case Task::imputation: return "imputation";
    case Task::classification: return "classification";
    case Task::anomaly: return "anomaly";
  }
  return "?";
}

std::string to_string(LossKind k) {
  switch (k) {
    case LossKind::mse: return "mse";
    case LossKind::smape: return "smape";
    case LossKind::cross_entropy: return "cross_entropy";
  }
  return "?";
}

Task task_from_string(const std::string& s) {
  if (s == "long_forecast") return Task::long_forecast;
  if (s == "short_forecast") return Task::short_forecast;
  if (s == "imputation") return Task::imputation;
  if (s == "classification") return Task::classification;
  if (s == "anomaly") return Task::anomaly;
  throw std::invalid_argument("unknown task: " + s);
}

LossKind loss_from_string(const std::string& s) {
  if (s == "mse") return LossKind::mse;
  if (s == "smape") return LossKind::smape;
  if (s == "cross_entropy") return LossKind::cross_entropy;
  throw std::invalid_argument("unknown loss: " + s);
}

size_t channel_width_for(size_t num_variables, size_t d_min, size_t d_max) {
  if (num_variables == 0)
    throw std::invalid_argument("channel_width_for: zero variables");
  const size_t pow2 = std::bit_floor(num_variables);
  return std::min(std::max(pow2, d_min), d_max);
}

TaskConfig TaskConfig::defaults_for(Task t, size_t num_variables) {
  TaskConfig c;
  c.task = t;
  c.input_channels = num_variables;
  switch (t) {
    case Task::long_forecast:
      c.kernel = 3; c.blocks = 3; c.cm = 64; c.patch_len = 24;
      c.lr = 1e-4; c.loss = LossKind::mse; c.batch_size = 32; c.epochs = 10;
      c.input_len = 96; c.horizon = 96;
      break;
    case Task::short_forecast:
      c.kernel = 3; c.blocks = 3; c.cm = 64; c.patch_len = 8;
      c.lr = 1e-3; c.loss = LossKind::smape; c.batch_size = 16; c.epochs = 10;
      c.horizon = 6; c.input_len = 12;  // input length is twice the horizon
      break;
    case Task::imputation:
      c.kernel = 3; c.blocks = 3; c.cm = 64; c.patch_len = 1;
      c.lr = 1e-3; c.loss = LossKind::mse; c.batch_size = 16; c.epochs = 10;
      c.input_len = 96; c.horizon = 0;
      break;
    case Task::classification:
      c.kernel = 3; c.blocks = 3; c.patch_len = 1;
      c.cm = channel_width_for(num_variables, 32, 64);
      c.lr = 1e-3; c.loss = LossKind::cross_entropy;
      c.batch_size = 16; c.epochs = 30;
      c.horizon = 0;
      break;
    case Task::anomaly:
      c.kernel = 3; c.blocks = 5; c.patch_len = 8;
      c.cm = channel_width_for(num_variables, 32, 128);
      c.lr = 1e-4; c.loss = LossKind::mse; c.batch_size = 128; c.epochs = 10;
      c.window_len = 100;
      c.input_len = c.window_len - c.window_len % c.patch_len;
      c.horizon = 0;
      break;
  }
  return c;
}

void TaskConfig::validate() const {
  if (kernel % 2 == 0)
    throw std::invalid_argument("config: kernel size must be odd");
  if (patch_len == 0 || (patch_len > 1 && patch_len % 2 != 0))
    throw std::invalid_argument("config: patch length must be 1 or even");
  if (blocks == 0) throw std::invalid_argument("config: need at least 1 block");
  if (batch_size == 0) throw std::invalid_argument("config: batch size 0");
  if (task == Task::imputation && patch_len != 1)
    throw std::invalid_argument(
        "config: imputation requires patch length 1 so masked and unmasked "
        "tokens are not mixed");
  if (input_len % patch_len != 0)
    throw std::invalid_argument("config: input length " +
                                std::to_string(input_len) +
                                " not divisible by patch length " +
                                std::to_string(patch_len));
  if ((task == Task::long_forecast || task == Task::short_forecast) &&
      horizon == 0)
    throw std::invalid_argument("config: forecasting requires a horizon");
  if (mask_ratio <= 0.0 || mask_ratio >= 1.0) {
    if (task == Task::imputation)
      throw std::invalid_argument("config: mask ratio must be in (0,1)");
  }
  if (anomaly_ratio <= 0.0 || anomaly_ratio >= 1.0) {
    if (task == Task::anomaly)
      throw std::invalid_argument("config: anomaly ratio must be in (0,1)");
  }
}

std::string config_to_json_string(const TaskConfig& c) {
  nlohmann::json j;
  j["task"] = to_string(c.task);
  j["cm"] = c.cm;
  j["patch_len"] = c.patch_len;
  j["kernel"] = c.kernel;
  j["blocks"] = c.blocks;
  j["lr"] = c.lr;
  j["loss"] = to_string(c.loss);
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["seed"] = c.seed;
  j["use_dynamic"] = c.use_dynamic;
  j["use_inter"] = c.use_inter;
  j["input_len"] = c.input_len;
  j["horizon"] = c.horizon;
  j["input_channels"] = c.input_channels;
  j["mask_ratio"] = c.mask_ratio;
  j["anomaly_ratio"] = c.anomaly_ratio;
  j["window_len"] = c.window_len;
  j["num_classes"] = c.num_classes;
  j["patience"] = c.patience;
  j["dtype"] = c.dtype == DType::f32 ? "f32" : "f64";
  return j.dump();
}

TaskConfig config_from_json_string(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config: invalid json: ") +
                                e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config: not a json object");

  static const char* known[] = {
      "task",        "cm",          "patch_len",     "kernel",
      "blocks",      "lr",          "loss",          "batch_size",
      "epochs",      "seed",        "use_dynamic",   "use_inter",
      "input_len",   "horizon",     "input_channels", "mask_ratio",
      "anomaly_ratio", "window_len", "num_classes",  "patience",
      "dtype"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known)
      if (it.key() == k) ok = true;
    if (!ok)
      throw std::invalid_argument("config: unknown key '" + it.key() + "'");
  }

  Task task = Task::long_forecast;
  if (j.contains("task")) task = task_from_string(j["task"].get<std::string>());
  size_t channels = j.contains("input_channels")
                        ? j["input_channels"].get<size_t>()
                        : 1;
  TaskConfig c = TaskConfig::defaults_for(task, std::max<size_t>(channels, 1));
  c.input_channels = channels;

  if (j.contains("cm")) c.cm = j["cm"].get<size_t>();
  if (j.contains("patch_len")) c.patch_len = j["patch_len"].get<size_t>();
  if (j.contains("kernel")) c.kernel = j["kernel"].get<size_t>();
  if (j.contains("blocks")) c.blocks = j["blocks"].get<size_t>();
  if (j.contains("lr")) c.lr = j["lr"].get<double>();
  if (j.contains("loss")) c.loss = loss_from_string(j["loss"].get<std::string>());
  if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<size_t>();
  if (j.contains("epochs")) c.epochs = j["epochs"].get<size_t>();
  if (j.contains("seed")) c.seed = j["seed"].get<uint64_t>();
  if (j.contains("use_dynamic")) c.use_dynamic = j["use_dynamic"].get<bool>();
  if (j.contains("use_inter")) c.use_inter = j["use_inter"].get<bool>();
  if (j.contains("input_len")) c.input_len = j["input_len"].get<size_t>();
  if (j.contains("horizon")) c.horizon = j["horizon"].get<size_t>();
  if (j.contains("mask_ratio")) c.mask_ratio = j["mask_ratio"].get<double>();
  if (j.contains("anomaly_ratio"))
    c.anomaly_ratio = j["anomaly_ratio"].get<double>();
  if (j.contains("window_len")) c.window_len = j["window_len"].get<size_t>();
  if (j.contains("num_classes")) c.num_classes = j["num_classes"].get<size_t>();
  if (j.contains("patience")) c.patience = j["patience"].get<size_t>();
  if (j.contains("dtype")) {
    const std::string d = j["dtype"].get<std::string>();
    if (d == "f32")
      c.dtype = DType::f32;
    else if (d == "f64")
      c.dtype = DType::f64;
    else
      throw std::invalid_argument("config: dtype must be f32 or f64");
  }
  return c;
}

}  // namespace tvnet
