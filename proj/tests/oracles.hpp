// Brute-force reference implementations used as independent oracles by the
// unit and acceptance suites. Deliberately written as plain nested loops
// with no shared code with the library kernels.
#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace oracles {

// input [C_in][L], weight [C_out][C_in][k] -> [C_out][L_out]
inline std::vector<double> conv1d_ref(const std::vector<double>& input,
                                      size_t c_in, size_t L,
                                      const std::vector<double>& weight,
                                      size_t c_out, size_t k,
                                      const std::vector<double>& bias,
                                      size_t stride, size_t padding) {
  const size_t l_out = (L + 2 * padding - k) / stride + 1;
  std::vector<double> out(c_out * l_out, 0.0);
  for (size_t co = 0; co < c_out; ++co)
    for (size_t o = 0; o < l_out; ++o) {
      double acc = bias.empty() ? 0.0 : bias[co];
      for (size_t ci = 0; ci < c_in; ++ci)
        for (size_t kk = 0; kk < k; ++kk) {
          const long il = static_cast<long>(o * stride + kk) -
                          static_cast<long>(padding);
          if (il < 0 || il >= static_cast<long>(L)) continue;
          acc += weight[(co * c_in + ci) * k + kk] * input[ci * L + il];
        }
      out[co * l_out + o] = acc;
    }
  return out;
}

// input [B][C_in][H][W], weight [C_out][C_in][k][k], stride 1
inline std::vector<double> conv2d_ref(const std::vector<double>& input,
                                      size_t B, size_t c_in, size_t H, size_t W,
                                      const std::vector<double>& weight,
                                      size_t c_out, size_t k,
                                      const std::vector<double>& bias,
                                      size_t padding) {
  const size_t h_out = H + 2 * padding - k + 1;
  const size_t w_out = W + 2 * padding - k + 1;
  std::vector<double> out(B * c_out * h_out * w_out, 0.0);
  for (size_t b = 0; b < B; ++b)
    for (size_t co = 0; co < c_out; ++co)
      for (size_t oh = 0; oh < h_out; ++oh)
        for (size_t ow = 0; ow < w_out; ++ow) {
          double acc = bias.empty() ? 0.0 : bias[co];
          for (size_t ci = 0; ci < c_in; ++ci)
            for (size_t kh = 0; kh < k; ++kh)
              for (size_t kw = 0; kw < k; ++kw) {
                const long ih = static_cast<long>(oh + kh) -
                                static_cast<long>(padding);
                const long iw = static_cast<long>(ow + kw) -
                                static_cast<long>(padding);
                if (ih < 0 || ih >= static_cast<long>(H) || iw < 0 ||
                    iw >= static_cast<long>(W))
                  continue;
                acc += weight[((co * c_in + ci) * k + kh) * k + kw] *
                       input[((b * c_in + ci) * H + ih) * W + iw];
              }
          out[((b * c_out + co) * h_out + oh) * w_out + ow] = acc;
        }
  return out;
}

// x [M][D_in] * w [D_in][D_out] + b
inline std::vector<double> matmul_ref(const std::vector<double>& x, size_t M,
                                      size_t d_in,
                                      const std::vector<double>& w,
                                      size_t d_out,
                                      const std::vector<double>& bias) {
  std::vector<double> out(M * d_out, 0.0);
  for (size_t m = 0; m < M; ++m)
    for (size_t o = 0; o < d_out; ++o) {
      double acc = bias.empty() ? 0.0 : bias[o];
      for (size_t i = 0; i < d_in; ++i) acc += x[m * d_in + i] * w[i * d_out + o];
      out[m * d_out + o] = acc;
    }
  return out;
}

inline double mse_ref(const std::vector<double>& p,
                      const std::vector<double>& a) {
  double s = 0;
  for (size_t i = 0; i < p.size(); ++i) s += (p[i] - a[i]) * (p[i] - a[i]);
  return s / p.size();
}

inline double mae_ref(const std::vector<double>& p,
                      const std::vector<double>& a) {
  double s = 0;
  for (size_t i = 0; i < p.size(); ++i) s += std::fabs(p[i] - a[i]);
  return s / p.size();
}

inline double smape_ref(const std::vector<double>& p,
                        const std::vector<double>& a) {
  double s = 0;
  for (size_t i = 0; i < p.size(); ++i) {
    const double d = std::fabs(a[i]) + std::fabs(p[i]);
    if (d > 0) s += std::fabs(a[i] - p[i]) / d;
  }
  return 200.0 * s / p.size();
}

inline double mase_ref(const std::vector<double>& p,
                       const std::vector<double>& a,
                       const std::vector<double>& insample, size_t lag) {
  double den = 0;
  for (size_t j = lag; j < insample.size(); ++j)
    den += std::fabs(insample[j] - insample[j - lag]);
  den /= (insample.size() - lag);
  double num = 0;
  for (size_t i = 0; i < p.size(); ++i) num += std::fabs(a[i] - p[i]);
  return num / p.size() / den;
}

inline double accuracy_ref(const std::vector<int>& p,
                           const std::vector<int>& a) {
  size_t hit = 0;
  for (size_t i = 0; i < p.size(); ++i)
    if (p[i] == a[i]) ++hit;
  return static_cast<double>(hit) / p.size();
}

struct Prf1Ref {
  double precision, recall, f1;
};
inline Prf1Ref prf1_ref(const std::vector<int>& p, const std::vector<int>& a) {
  double tp = 0, fp = 0, fn = 0;
  for (size_t i = 0; i < p.size(); ++i) {
    if (p[i] && a[i]) ++tp;
    if (p[i] && !a[i]) ++fp;
    if (!p[i] && a[i]) ++fn;
  }
  Prf1Ref r{0, 0, 0};
  if (tp + fp > 0) r.precision = tp / (tp + fp);
  if (tp + fn > 0) r.recall = tp / (tp + fn);
  if (r.precision + r.recall > 0)
    r.f1 = 2 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

// least-squares scalar weight: min_w sum (w x_i - y_i)^2
inline double best_fixed_weight(const std::vector<double>& x,
                                const std::vector<double>& y) {
  double sxy = 0, sxx = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxy += x[i] * y[i];
    sxx += x[i] * x[i];
  }
  return sxy / sxx;
}

}  // namespace oracles
