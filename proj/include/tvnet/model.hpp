#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tvnet/block.hpp"
#include "tvnet/config.hpp"
#include "tvnet/embedding.hpp"
#include "tvnet/heads.hpp"
#include "tvnet/tensor.hpp"

namespace tvnet {

struct Model {
  TaskConfig config;
  EmbeddingParams embedding;
  std::vector<BlockParams> blocks;
  HeadParams head;

  static Model init(const TaskConfig& config);

  // x: [B, L, C] -> task output (forecast [B,T,C], reconstruction [B,L,C],
  // logits [B,K])
  Tensor forward(const Tensor& x, bool training);

  std::vector<std::pair<std::string, Tensor>> named_parameters();
  std::vector<std::pair<std::string, std::vector<double>*>> named_buffers();

  std::vector<Tensor> parameters();
  size_t parameter_count();

  Model clone() const;
  void set_ablation(bool use_dynamic, bool use_inter);
};

}  // namespace tvnet
