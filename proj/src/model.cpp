#include "tvnet/model.hpp"

#include <stdexcept>

#include "tvnet/ops.hpp"

namespace tvnet {

Model Model::init(const TaskConfig& config) {
  config.validate();
  if (config.input_channels == 0)
    throw std::invalid_argument("model: input_channels not set");
  Model m;
  m.config = config;
  std::mt19937_64 rng(config.seed);
  m.embedding = EmbeddingParams::init(config.input_channels, config.cm,
                                      config.patch_len, rng);
  for (size_t i = 0; i < config.blocks; ++i) {
    BlockParams block = BlockParams::init(config.cm, config.kernel, rng);
    block.use_dynamic = config.use_dynamic;
    block.use_inter = config.use_inter;
    m.blocks.push_back(std::move(block));
  }
  m.head = HeadParams::init(config, rng);
  return m;
}

Tensor Model::forward(const Tensor& x, bool training) {
  Embedded3D emb = embed3d(x, embedding);
  Tensor rep = stack_forward(emb.data, blocks, training);
  Tensor flat = flatten_temporal(rep, embedding.patch_len);
  switch (config.task) {
    case Task::long_forecast:
    case Task::short_forecast:
    case Task::anomaly:
      return forecast_head(flat, head);
    case Task::imputation:
      return imputation_head(flat, head);
    case Task::classification:
      return classification_head(flat, head);
  }
  throw std::logic_error("model: unknown task");
}

std::vector<std::pair<std::string, Tensor>> Model::named_parameters() {
  std::vector<std::pair<std::string, Tensor>> out;
  out.emplace_back("embed.feat_w", embedding.feat_w);
  out.emplace_back("embed.feat_b", embedding.feat_b);
  for (size_t i = 0; i < blocks.size(); ++i) {
    const std::string p = "block" + std::to_string(i) + ".";
    out.emplace_back(p + "base_w", blocks[i].base_w);
    out.emplace_back(p + "base_b", blocks[i].base_b);
    out.emplace_back(p + "intra_w", blocks[i].intra_w);
    out.emplace_back(p + "intra_b", blocks[i].intra_b);
    out.emplace_back(p + "bn_gamma", blocks[i].intra_bn.gamma);
    out.emplace_back(p + "bn_beta", blocks[i].intra_bn.beta);
    out.emplace_back(p + "inter_w", blocks[i].inter_w);
    out.emplace_back(p + "inter_b", blocks[i].inter_b);
  }
  if (head.temporal_w.defined()) {
    out.emplace_back("head.temporal_w", head.temporal_w);
    out.emplace_back("head.temporal_b", head.temporal_b);
  }
  if (head.channel_w.defined()) {
    out.emplace_back("head.channel_w", head.channel_w);
    out.emplace_back("head.channel_b", head.channel_b);
  }
  if (head.class_w.defined()) {
    out.emplace_back("head.class_w", head.class_w);
    out.emplace_back("head.class_b", head.class_b);
  }
  return out;
}

std::vector<std::pair<std::string, std::vector<double>*>>
Model::named_buffers() {
  std::vector<std::pair<std::string, std::vector<double>*>> out;
  for (size_t i = 0; i < blocks.size(); ++i) {
    const std::string p = "block" + std::to_string(i) + ".";
    out.emplace_back(p + "bn_running_mean", &blocks[i].intra_bn.running_mean);
    out.emplace_back(p + "bn_running_var", &blocks[i].intra_bn.running_var);
  }
  return out;
}

std::vector<Tensor> Model::parameters() {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

size_t Model::parameter_count() {
  size_t n = 0;
  for (auto& t : parameters()) n += t.size();
  return n;
}

Model Model::clone() const {
  Model copy;
  copy.config = config;
  copy.embedding.feat_w = embedding.feat_w.detached_copy();
  copy.embedding.feat_b = embedding.feat_b.detached_copy();
  copy.embedding.patch_len = embedding.patch_len;
  for (const auto& b : blocks) {
    BlockParams nb;
    nb.base_w = b.base_w.detached_copy();
    nb.base_b = b.base_b.detached_copy();
    nb.intra_w = b.intra_w.detached_copy();
    nb.intra_b = b.intra_b.detached_copy();
    nb.intra_bn.gamma = b.intra_bn.gamma.detached_copy();
    nb.intra_bn.beta = b.intra_bn.beta.detached_copy();
    nb.intra_bn.running_mean = b.intra_bn.running_mean;
    nb.intra_bn.running_var = b.intra_bn.running_var;
    nb.intra_bn.eps = b.intra_bn.eps;
    nb.intra_bn.momentum = b.intra_bn.momentum;
    nb.inter_w = b.inter_w.detached_copy();
    nb.inter_b = b.inter_b.detached_copy();
    nb.use_dynamic = b.use_dynamic;
    nb.use_inter = b.use_inter;
    nb.cm = b.cm;
    nb.kernel = b.kernel;
    copy.blocks.push_back(std::move(nb));
  }
  auto copy_if = [](const Tensor& t) {
    return t.defined() ? t.detached_copy() : Tensor();
  };
  copy.head.temporal_w = copy_if(head.temporal_w);
  copy.head.temporal_b = copy_if(head.temporal_b);
  copy.head.channel_w = copy_if(head.channel_w);
  copy.head.channel_b = copy_if(head.channel_b);
  copy.head.class_w = copy_if(head.class_w);
  copy.head.class_b = copy_if(head.class_b);
  return copy;
}

void Model::set_ablation(bool use_dynamic, bool use_inter) {
  config.use_dynamic = use_dynamic;
  config.use_inter = use_inter;
  for (auto& b : blocks) {
    b.use_dynamic = use_dynamic;
    b.use_inter = use_inter;
  }
}

}  // namespace tvnet
