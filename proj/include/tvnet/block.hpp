#pragma once

#include <random>
#include <vector>

#include "tvnet/tensor.hpp"

namespace tvnet {

// Per-channel batch-norm state used inside the scale-generation path.
struct BatchNormState {
  Tensor gamma;  // [C], init 1
  Tensor beta;   // [C], init 0
  std::vector<double> running_mean;  // [C]
  std::vector<double> running_var;   // [C]
  double eps = 1e-5;
  double momentum = 0.1;

  static BatchNormState init(size_t channels);
};

// One residual block: a shared base convolution whose per-(channel, patch)
// output scale is generated from the input. The generation convolutions start
// at exactly zero, so a freshly constructed block scales by 1 everywhere.
struct BlockParams {
  Tensor base_w;  // [C_m, C_m, k, k]
  Tensor base_b;  // [C_m]

  Tensor intra_w;  // [C_m, C_m, 1], zero at construction
  Tensor intra_b;  // [C_m], zero at construction
  BatchNormState intra_bn;

  Tensor inter_w;  // [C_m, C_m, 1], zero at construction
  Tensor inter_b;  // [C_m], zero at construction

  bool use_dynamic = true;
  bool use_inter = true;

  size_t cm = 0;
  size_t kernel = 3;

  static BlockParams init(size_t cm, size_t kernel, std::mt19937_64& rng);

  std::vector<Tensor> parameters() const;
};

// scale factors per (batch, channel, patch): 1 + relu(bn(conv(v_intra)))
// + relu(conv(v_inter)), broadcast over patches; identically 1 when
// use_dynamic is off
Tensor gen_alpha(const Tensor& x, BlockParams& params, bool training);

// convolves each patch as an independent C_m-channel SxP2 image with
// same-padding, then scales output channel c of patch n by alpha[b,c,n]
// (bias included under the scale)
Tensor dynamic_conv(const Tensor& x, const Tensor& alpha, const Tensor& base_w,
                    const Tensor& base_b);

// residual application: dynamic_conv(x, gen_alpha(x)) + x
Tensor block_forward(const Tensor& x, BlockParams& params, bool training);

Tensor stack_forward(const Tensor& x, std::vector<BlockParams>& blocks,
                     bool training);

// Scalar least-squares comparison between a single fixed weight and
// per-instance weights alpha_i * w_base with alpha_i = y_i / (w_base * x_i).
// Returns {fixed-weight error, per-instance-weight error}; the latter is 0
// by construction.
struct WeightClassErrors {
  double fixed;
  double dynamic;
};
WeightClassErrors per_instance_weight_errors(const std::vector<double>& x,
                                             const std::vector<double>& y,
                                             double w_base);

}  // namespace tvnet
