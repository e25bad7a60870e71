#pragma once

#include <random>

#include "tvnet/tensor.hpp"

namespace tvnet {

// Per-timestep affine projection C -> C_m plus the patch layout parameters.
// P must be 1 or even; the window sampler guarantees L is divisible by P.
struct EmbeddingParams {
  Tensor feat_w;  // [C, C_m]
  Tensor feat_b;  // [C_m]
  size_t patch_len = 1;

  static EmbeddingParams init(size_t channels, size_t cm, size_t patch_len,
                              std::mt19937_64& rng);
  // C == C_m pass-through projection, used by layout round-trip checks
  static EmbeddingParams identity(size_t cm, size_t patch_len);
};

// [B, C_m, N, S, P2] with S = 2, P2 = P/2 (S = P2 = 1 when P = 1)
struct Embedded3D {
  Tensor data;
  size_t patch_count = 0;
  size_t patch_len = 0;
};

// x: [L, C] or [B, L, C] -> same rank with trailing C_m
Tensor embed_features(const Tensor& x, const EmbeddingParams& params);

// [L, C_m] -> [N, P, C_m], non-overlapping windows in temporal order
Tensor patchify(const Tensor& xp, size_t patch_len);

// [N, P, C_m] -> [N, 2, P/2, C_m]; channel 0 holds odd indices 1,3,...,
// channel 1 holds even indices 0,2,...; P = 1 degenerates to [N,1,1,C_m]
Tensor odd_even_split(const Tensor& patches);

// full pipeline: projection, patching, odd/even split, axis permutation
Embedded3D embed3d(const Tensor& x, const EmbeddingParams& params);

// exact inverse of the patchify+split layout: [B, C_m, N, S, P2] ->
// [B, N*P, C_m] with rows in original temporal order
Tensor flatten_temporal(const Tensor& x3d, size_t patch_len);

}  // namespace tvnet
