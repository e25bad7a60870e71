#pragma once

#include <vector>

#include "tvnet/tensor.hpp"

namespace tvnet::ops {

// elementwise (shapes must match exactly; broadcasting is explicit via
// expand_tail / expand_last)
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor add_scalar(const Tensor& a, double c);
Tensor scale(const Tensor& a, double c);
Tensor relu(const Tensor& a);   // subgradient at 0 is 0
Tensor abs(const Tensor& a);    // subgradient at 0 is 0
Tensor square(const Tensor& a);

// structure
Tensor reshape(const Tensor& a, std::vector<size_t> shape);
Tensor permute(const Tensor& a, const std::vector<size_t>& axes);
// gather: out flat index j reads a flat index index_map[j]
Tensor reindex(const Tensor& a, std::vector<size_t> out_shape,
               std::vector<size_t> index_map);
// appends extra trailing axes, repeating each element across them
Tensor expand_tail(const Tensor& a, const std::vector<size_t>& extra);
// repeats a trailing size-1 axis n times: [..,1] -> [..,n]
Tensor expand_last(const Tensor& a, size_t n);

// reductions to a single element
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// x: [..., D_in], w: [D_in, D_out], b: [D_out] or undefined for bias-free
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

// x: [B, C_in, L] or [C_in, L]; w: [C_out, C_in, k]; cross-correlation,
// zero padding
Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& b,
              size_t stride = 1, size_t padding = 0);

// x: [B, C_in, H, W]; w: [C_out, C_in, k, k]; stride fixed at 1; odd k only
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b,
              size_t padding);

// [B, C, N, S, P2] -> [B, C, N]: mean over the trailing SxP2 grid
Tensor pool_patch_mean(const Tensor& x);
// [B, C, N] -> [B, C, 1]: mean over the last axis
Tensor pool_seq_mean(const Tensor& x);

// x: [B, C, N]; per-channel normalization over batch x N
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  std::vector<double>& running_mean,
                  std::vector<double>& running_var, bool training,
                  double eps = 1e-5, double momentum = 0.1);

// logits: [B, K]; mean negative log-likelihood with log-sum-exp stabilization
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels);

}  // namespace tvnet::ops
