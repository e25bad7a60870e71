#include "tvnet/block.hpp"

#include <cmath>
#include <stdexcept>

#include "tvnet/ops.hpp"

namespace tvnet {

BatchNormState BatchNormState::init(size_t channels) {
  BatchNormState st;
  st.gamma = Tensor::full({channels}, 1.0, true);
  st.beta = Tensor::zeros({channels}, true);
  st.running_mean.assign(channels, 0.0);
  st.running_var.assign(channels, 1.0);
  return st;
}

BlockParams BlockParams::init(size_t cm, size_t kernel, std::mt19937_64& rng) {
  if (kernel % 2 == 0)
    throw std::invalid_argument("block kernel size must be odd");
  BlockParams p;
  const double bound =
      1.0 / std::sqrt(static_cast<double>(cm * kernel * kernel));
  p.base_w = Tensor::uniform({cm, cm, kernel, kernel}, -bound, bound, rng, true);
  p.base_b = Tensor::zeros({cm}, true);
  p.intra_w = Tensor::zeros({cm, cm, 1}, true);
  p.intra_b = Tensor::zeros({cm}, true);
  p.intra_bn = BatchNormState::init(cm);
  p.inter_w = Tensor::zeros({cm, cm, 1}, true);
  p.inter_b = Tensor::zeros({cm}, true);
  p.cm = cm;
  p.kernel = kernel;
  return p;
}

std::vector<Tensor> BlockParams::parameters() const {
  return {base_w,  base_b,  intra_w,       intra_b,
          intra_bn.gamma, intra_bn.beta, inter_w, inter_b};
}

Tensor gen_alpha(const Tensor& x, BlockParams& params, bool training) {
  if (x.ndim() != 5)
    throw std::invalid_argument("gen_alpha: input must be [B,C,N,S,P2]");
  const size_t B = x.shape()[0];
  const size_t C = x.shape()[1];
  const size_t N = x.shape()[2];
  if (C != params.cm)
    throw std::invalid_argument("gen_alpha: channel count mismatch");

  if (!params.use_dynamic) return Tensor::full({B, C, N}, 1.0);

  Tensor v_intra = ops::pool_patch_mean(x);  // [B, C, N]
  Tensor f_intra = ops::relu(ops::batch_norm(
      ops::conv1d(v_intra, params.intra_w, params.intra_b),
      params.intra_bn.gamma, params.intra_bn.beta,
      params.intra_bn.running_mean, params.intra_bn.running_var, training,
      params.intra_bn.eps, params.intra_bn.momentum));

  Tensor alpha = ops::add_scalar(f_intra, 1.0);
  if (params.use_inter) {
    Tensor v_inter = ops::pool_seq_mean(v_intra);  // [B, C, 1]
    Tensor f_inter =
        ops::relu(ops::conv1d(v_inter, params.inter_w, params.inter_b));
    alpha = ops::add(alpha, ops::expand_last(f_inter, N));
  }
  return alpha;
}

Tensor dynamic_conv(const Tensor& x, const Tensor& alpha, const Tensor& base_w,
                    const Tensor& base_b) {
  if (x.ndim() != 5)
    throw std::invalid_argument("dynamic_conv: input must be [B,C,N,S,P2]");
  const size_t B = x.shape()[0];
  const size_t C = x.shape()[1];
  const size_t N = x.shape()[2];
  const size_t S = x.shape()[3];
  const size_t P2 = x.shape()[4];
  const size_t k = base_w.shape()[2];

  // patches become the batch axis of a same-padding 2-D convolution
  Tensor images = ops::reshape(ops::permute(x, {0, 2, 1, 3, 4}), {B * N, C, S, P2});
  Tensor conv = ops::conv2d(images, base_w, base_b, k / 2);
  Tensor back =
      ops::permute(ops::reshape(conv, {B, N, C, S, P2}), {0, 2, 1, 3, 4});
  return ops::mul(back, ops::expand_tail(alpha, {S, P2}));
}

Tensor block_forward(const Tensor& x, BlockParams& params, bool training) {
  Tensor alpha = gen_alpha(x, params, training);
  return ops::add(dynamic_conv(x, alpha, params.base_w, params.base_b), x);
}

Tensor stack_forward(const Tensor& x, std::vector<BlockParams>& blocks,
                     bool training) {
  if (blocks.empty())
    throw std::invalid_argument("stack_forward: need at least one block");
  Tensor cur = x;
  for (auto& block : blocks) cur = block_forward(cur, block, training);
  return cur;
}

WeightClassErrors per_instance_weight_errors(const std::vector<double>& x,
                                             const std::vector<double>& y,
                                             double w_base) {
  if (x.size() != y.size() || x.empty())
    throw std::invalid_argument("per_instance_weight_errors: size mismatch");
  if (w_base == 0.0)
    throw std::invalid_argument("per_instance_weight_errors: w_base is 0");
  double sxy = 0.0, sxx = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    if (x[i] == 0.0)
      throw std::invalid_argument("per_instance_weight_errors: x contains 0");
    sxy += x[i] * y[i];
    sxx += x[i] * x[i];
  }
  const double w_fixed = sxy / sxx;

  WeightClassErrors err{0.0, 0.0};
  for (size_t i = 0; i < x.size(); ++i) {
    const double df = w_fixed * x[i] - y[i];
    err.fixed += df * df;
    const double alpha = y[i] / (w_base * x[i]);
    const double dd = alpha * w_base * x[i] - y[i];
    err.dynamic += dd * dd;
  }
  return err;
}

}  // namespace tvnet
