#include "tvnet/embedding.hpp"

#include <cmath>
#include <stdexcept>

#include "tvnet/ops.hpp"

namespace tvnet {

namespace {

void check_patch_len(size_t p) {
  if (p == 0 || (p > 1 && p % 2 != 0))
    throw std::invalid_argument("patch length must be 1 or even, got " +
                                std::to_string(p));
}

void check_divisible(size_t L, size_t p) {
  if (L % p != 0)
    throw std::invalid_argument("sequence length " + std::to_string(L) +
                                " not divisible by patch length " +
                                std::to_string(p));
}

// patch-local position of split cell (s, j); channel 0 carries the odd
// indices, channel 1 the even ones
inline size_t local_index(size_t s, size_t j) { return s == 0 ? 2 * j + 1 : 2 * j; }

}  // namespace

EmbeddingParams EmbeddingParams::init(size_t channels, size_t cm,
                                      size_t patch_len, std::mt19937_64& rng) {
  check_patch_len(patch_len);
  EmbeddingParams p;
  const double bound = 1.0 / std::sqrt(static_cast<double>(channels));
  p.feat_w = Tensor::uniform({channels, cm}, -bound, bound, rng, true);
  p.feat_b = Tensor::zeros({cm}, true);
  p.patch_len = patch_len;
  return p;
}

EmbeddingParams EmbeddingParams::identity(size_t cm, size_t patch_len) {
  check_patch_len(patch_len);
  EmbeddingParams p;
  std::vector<double> eye(cm * cm, 0.0);
  for (size_t i = 0; i < cm; ++i) eye[i * cm + i] = 1.0;
  p.feat_w = Tensor::from_data({cm, cm}, std::move(eye));
  p.feat_b = Tensor::zeros({cm});
  p.patch_len = patch_len;
  return p;
}

Tensor embed_features(const Tensor& x, const EmbeddingParams& params) {
  return ops::linear(x, params.feat_w, params.feat_b);
}

Tensor patchify(const Tensor& xp, size_t patch_len) {
  if (xp.ndim() != 2)
    throw std::invalid_argument("patchify: input must be [L, C_m]");
  check_patch_len(patch_len);
  const size_t L = xp.shape()[0];
  const size_t cm = xp.shape()[1];
  check_divisible(L, patch_len);
  return ops::reshape(xp, {L / patch_len, patch_len, cm});
}

Tensor odd_even_split(const Tensor& patches) {
  if (patches.ndim() != 3)
    throw std::invalid_argument("odd_even_split: input must be [N, P, C_m]");
  const size_t N = patches.shape()[0];
  const size_t P = patches.shape()[1];
  const size_t cm = patches.shape()[2];
  check_patch_len(P);
  if (P == 1) return ops::reshape(patches, {N, 1, 1, cm});

  const size_t half = P / 2;
  std::vector<size_t> map(N * 2 * half * cm);
  size_t j = 0;
  for (size_t n = 0; n < N; ++n)
    for (size_t s = 0; s < 2; ++s)
      for (size_t p = 0; p < half; ++p)
        for (size_t c = 0; c < cm; ++c)
          map[j++] = (n * P + local_index(s, p)) * cm + c;
  return ops::reindex(patches, {N, 2, half, cm}, std::move(map));
}

Embedded3D embed3d(const Tensor& x, const EmbeddingParams& params) {
  if (x.ndim() != 3)
    throw std::invalid_argument("embed3d: input must be [B, L, C]");
  const size_t B = x.shape()[0];
  const size_t L = x.shape()[1];
  const size_t P = params.patch_len;
  check_patch_len(P);
  check_divisible(L, P);
  const size_t cm = params.feat_w.shape()[1];
  const size_t N = L / P;
  const size_t S = P == 1 ? 1 : 2;
  const size_t half = P == 1 ? 1 : P / 2;

  Tensor emb = embed_features(x, params);  // [B, L, C_m]

  std::vector<size_t> map(B * cm * N * S * half);
  size_t j = 0;
  for (size_t b = 0; b < B; ++b)
    for (size_t c = 0; c < cm; ++c)
      for (size_t n = 0; n < N; ++n)
        for (size_t s = 0; s < S; ++s)
          for (size_t p = 0; p < half; ++p) {
            const size_t t = P == 1 ? n : n * P + local_index(s, p);
            map[j++] = (b * L + t) * cm + c;
          }

  Embedded3D out;
  out.data = ops::reindex(emb, {B, cm, N, S, half}, std::move(map));
  out.patch_count = N;
  out.patch_len = P;
  return out;
}

Tensor flatten_temporal(const Tensor& x3d, size_t patch_len) {
  if (x3d.ndim() != 5)
    throw std::invalid_argument("flatten_temporal: input must be [B,C,N,S,P2]");
  const size_t B = x3d.shape()[0];
  const size_t cm = x3d.shape()[1];
  const size_t N = x3d.shape()[2];
  const size_t S = x3d.shape()[3];
  const size_t half = x3d.shape()[4];
  const size_t P = patch_len;
  check_patch_len(P);
  if ((P == 1 && (S != 1 || half != 1)) || (P > 1 && (S != 2 || half != P / 2)))
    throw std::invalid_argument("flatten_temporal: grid does not match P");

  const size_t L = N * P;
  std::vector<size_t> map(B * L * cm);
  size_t j = 0;
  for (size_t b = 0; b < B; ++b)
    for (size_t t = 0; t < L; ++t)
      for (size_t c = 0; c < cm; ++c) {
        size_t s = 0, p = 0;
        const size_t n = t / P;
        if (P > 1) {
          const size_t r = t % P;
          s = (r % 2 == 1) ? 0 : 1;
          p = (r % 2 == 1) ? (r - 1) / 2 : r / 2;
        }
        map[j++] = (((b * cm + c) * N + n) * S + s) * half + p;
      }
  return ops::reindex(x3d, {B, L, cm}, std::move(map));
}

}  // namespace tvnet
