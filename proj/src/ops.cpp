#include "tvnet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "tvnet/counters.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tvnet::ops {

namespace {

using Parents = std::vector<std::shared_ptr<TensorImpl>>;

DType out_dtype(const Tensor& a) { return a.dtype(); }

DType out_dtype(const Tensor& a, const Tensor& b) {
  return (a.dtype() == DType::f32 && b.dtype() == DType::f32) ? DType::f32
                                                              : DType::f64;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
}

// grad buffer of a parent, or nullptr when it does not participate
double* grad_of(TensorImpl& node, size_t parent_idx) {
  auto& p = node.parents[parent_idx];
  if (!p->requires_grad) return nullptr;
  p->ensure_grad();
  return p->grad.data();
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  Tensor out = Tensor::make_node(a.shape(), out_dtype(a, b),
                                 {a.impl_ptr(), b.impl_ptr()},
                                 [](TensorImpl& node) {
                                   const size_t n = node.data.size();
                                   if (double* ga = grad_of(node, 0))
                                     for (size_t i = 0; i < n; ++i)
                                       ga[i] += node.grad[i];
                                   if (double* gb = grad_of(node, 1))
                                     for (size_t i = 0; i < n; ++i)
                                       gb[i] += node.grad[i];
                                 });
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* po = out.data().data();
  for (size_t i = 0; i < out.size(); ++i) po[i] = pa[i] + pb[i];
  quantize_to_dtype(*out.impl());
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  Tensor out = Tensor::make_node(a.shape(), out_dtype(a, b),
                                 {a.impl_ptr(), b.impl_ptr()},
                                 [](TensorImpl& node) {
                                   const size_t n = node.data.size();
                                   if (double* ga = grad_of(node, 0))
                                     for (size_t i = 0; i < n; ++i)
                                       ga[i] += node.grad[i];
                                   if (double* gb = grad_of(node, 1))
                                     for (size_t i = 0; i < n; ++i)
                                       gb[i] -= node.grad[i];
                                 });
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* po = out.data().data();
  for (size_t i = 0; i < out.size(); ++i) po[i] = pa[i] - pb[i];
  quantize_to_dtype(*out.impl());
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  Tensor out = Tensor::make_node(
      a.shape(), out_dtype(a, b), {a.impl_ptr(), b.impl_ptr()},
      [](TensorImpl& node) {
        const size_t n = node.data.size();
        const double* da = node.parents[0]->data.data();
        const double* db = node.parents[1]->data.data();
        if (double* ga = grad_of(node, 0))
          for (size_t i = 0; i < n; ++i) ga[i] += node.grad[i] * db[i];
        if (double* gb = grad_of(node, 1))
          for (size_t i = 0; i < n; ++i) gb[i] += node.grad[i] * da[i];
      });
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* po = out.data().data();
  for (size_t i = 0; i < out.size(); ++i) po[i] = pa[i] * pb[i];
  quantize_to_dtype(*out.impl());
  return out;
}

Tensor div(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "div");
  Tensor out = Tensor::make_node(
      a.shape(), out_dtype(a, b), {a.impl_ptr(), b.impl_ptr()},
      [](TensorImpl& node) {
        const size_t n = node.data.size();
        const double* da = node.parents[0]->data.data();
        const double* db = node.parents[1]->data.data();
        if (double* ga = grad_of(node, 0))
          for (size_t i = 0; i < n; ++i) ga[i] += node.grad[i] / db[i];
        if (double* gb = grad_of(node, 1))
          for (size_t i = 0; i < n; ++i)
            gb[i] -= node.grad[i] * da[i] / (db[i] * db[i]);
      });
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* po = out.data().data();
  for (size_t i = 0; i < out.size(); ++i) po[i] = pa[i] / pb[i];
  quantize_to_dtype(*out.impl());
  return out;
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor add_scalar(const Tensor& a, double c) {
  Tensor out = Tensor::make_node(a.shape(), out_dtype(a), {a.impl_ptr()},
                                 [](TensorImpl& node) {
                                   if (double* ga = grad_of(node, 0))
                                     for (size_t i = 0; i < node.data.size(); ++i)
                                       ga[i] += node.grad[i];
                                 });
  const double* pa = a.data().data();
  double* po = out.data().data();
  for (size_t i = 0; i < out.size(); ++i) po[i] = pa[i] + c;
  quantize_to_dtype(*out.impl());
  return out;
}

Tensor scale(const Tensor& a, double c) {
  Tensor out = Tensor::make_node(a.shape(), out_dtype(a), {a.impl_ptr()},
                                 [c](TensorImpl& node) {
                                   if (double* ga = grad_of(node, 0))
                                     for (size_t i = 0; i < node.data.size(); ++i)
                                       ga[i] += c * node.grad[i];
                                 });
  const double* pa = a.data().data();
  double* po = out.data().data();
  for (size_t i = 0; i < out.size(); ++i) po[i] = c * pa[i];
  quantize_to_dtype(*out.impl());
  return out;
}

Tensor relu(const Tensor& a) {
  Tensor out = Tensor::make_node(
      a.shape(), out_dtype(a), {a.impl_ptr()}, [](TensorImpl& node) {
        const double* da = node.parents[0]->data.data();
        if (double* ga = grad_of(node, 0))
          for (size_t i = 0; i < node.data.size(); ++i)
            if (da[i] > 0.0) ga[i] += node.grad[i];
      });
  const double* pa = a.data().data();
  double* po = out.data().data();
  for (size_t i = 0; i < out.size(); ++i) po[i] = pa[i] > 0.0 ? pa[i] : 0.0;
  return out;
}

Tensor abs(const Tensor& a) {
  Tensor out = Tensor::make_node(
      a.shape(), out_dtype(a), {a.impl_ptr()}, [](TensorImpl& node) {
        const double* da = node.parents[0]->data.data();
        if (double* ga = grad_of(node, 0))
          for (size_t i = 0; i < node.data.size(); ++i) {
            if (da[i] > 0.0)
              ga[i] += node.grad[i];
            else if (da[i] < 0.0)
              ga[i] -= node.grad[i];
          }
      });
  const double* pa = a.data().data();
  double* po = out.data().data();
  for (size_t i = 0; i < out.size(); ++i) po[i] = std::fabs(pa[i]);
  return out;
}

Tensor square(const Tensor& a) { return mul(a, a); }

Tensor reshape(const Tensor& a, std::vector<size_t> shape) {
  if (numel(shape) != a.size())
    throw std::invalid_argument("reshape: cannot view " +
                                shape_str(a.shape()) + " as " +
                                shape_str(shape));
  Tensor out = Tensor::make_node(std::move(shape), out_dtype(a), {a.impl_ptr()},
                                 [](TensorImpl& node) {
                                   if (double* ga = grad_of(node, 0))
                                     for (size_t i = 0; i < node.data.size(); ++i)
                                       ga[i] += node.grad[i];
                                 });
  out.data() = a.data();
  return out;
}

Tensor permute(const Tensor& a, const std::vector<size_t>& axes) {
  const auto& in_shape = a.shape();
  const size_t nd = in_shape.size();
  if (axes.size() != nd) throw std::invalid_argument("permute: rank mismatch");
  std::vector<bool> seen(nd, false);
  std::vector<size_t> out_shape(nd);
  for (size_t i = 0; i < nd; ++i) {
    if (axes[i] >= nd || seen[axes[i]])
      throw std::invalid_argument("permute: invalid axis list");
    seen[axes[i]] = true;
    out_shape[i] = in_shape[axes[i]];
  }

  std::vector<size_t> in_strides(nd, 1);
  for (size_t i = nd; i-- > 1;) in_strides[i - 1] = in_strides[i] * in_shape[i];
  std::vector<size_t> out_strides_in(nd);  // input stride walked per out axis
  for (size_t i = 0; i < nd; ++i) out_strides_in[i] = in_strides[axes[i]];

  const size_t n = a.size();
  std::vector<size_t> index_map(n);
  std::vector<size_t> counter(nd, 0);
  size_t src = 0;
  for (size_t j = 0; j < n; ++j) {
    index_map[j] = src;
    for (size_t axis = nd; axis-- > 0;) {
      ++counter[axis];
      src += out_strides_in[axis];
      if (counter[axis] < out_shape[axis]) break;
      src -= counter[axis] * out_strides_in[axis];
      counter[axis] = 0;
    }
  }
  return reindex(a, std::move(out_shape), std::move(index_map));
}

Tensor reindex(const Tensor& a, std::vector<size_t> out_shape,
               std::vector<size_t> index_map) {
  if (index_map.size() != numel(out_shape))
    throw std::invalid_argument("reindex: map size does not match out shape");
  auto map = std::make_shared<std::vector<size_t>>(std::move(index_map));
  Tensor out = Tensor::make_node(
      std::move(out_shape), out_dtype(a), {a.impl_ptr()},
      [map](TensorImpl& node) {
        if (double* ga = grad_of(node, 0))
          for (size_t j = 0; j < node.data.size(); ++j)
            ga[(*map)[j]] += node.grad[j];
      });
  const double* pa = a.data().data();
  double* po = out.data().data();
  const size_t n = out.size();
  const size_t limit = a.size();
  for (size_t j = 0; j < n; ++j) {
    if ((*map)[j] >= limit)
      throw std::out_of_range("reindex: map entry out of range");
    po[j] = pa[(*map)[j]];
  }
  return out;
}

Tensor expand_tail(const Tensor& a, const std::vector<size_t>& extra) {
  std::vector<size_t> out_shape = a.shape();
  out_shape.insert(out_shape.end(), extra.begin(), extra.end());
  const size_t rep = numel(extra);
  Tensor out = Tensor::make_node(
      std::move(out_shape), out_dtype(a), {a.impl_ptr()},
      [rep](TensorImpl& node) {
        if (double* ga = grad_of(node, 0)) {
          const size_t n_in = node.parents[0]->data.size();
          for (size_t i = 0; i < n_in; ++i) {
            double s = 0.0;
            for (size_t r = 0; r < rep; ++r) s += node.grad[i * rep + r];
            ga[i] += s;
          }
        }
      });
  const double* pa = a.data().data();
  double* po = out.data().data();
  for (size_t i = 0; i < a.size(); ++i)
    for (size_t r = 0; r < rep; ++r) po[i * rep + r] = pa[i];
  return out;
}

Tensor expand_last(const Tensor& a, size_t n) {
  if (a.ndim() == 0 || a.shape().back() != 1)
    throw std::invalid_argument("expand_last: trailing axis must have size 1");
  std::vector<size_t> inner_shape(a.shape().begin(), a.shape().end() - 1);
  return expand_tail(reshape(a, inner_shape), {n});
}

Tensor sum(const Tensor& a) {
  Tensor out = Tensor::make_node({1}, out_dtype(a), {a.impl_ptr()},
                                 [](TensorImpl& node) {
                                   if (double* ga = grad_of(node, 0)) {
                                     const double g = node.grad[0];
                                     const size_t n = node.parents[0]->data.size();
                                     for (size_t i = 0; i < n; ++i) ga[i] += g;
                                   }
                                 });
  double s = 0.0;
  for (double x : a.data()) s += x;
  out.data()[0] = s;
  quantize_to_dtype(*out.impl());
  return out;
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw std::invalid_argument("mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (w.ndim() != 2) throw std::invalid_argument("linear: weight must be 2-D");
  const size_t d_in = w.shape()[0];
  const size_t d_out = w.shape()[1];
  if (x.ndim() == 0 || x.shape().back() != d_in)
    throw std::invalid_argument("linear: input trailing dim " +
                                shape_str(x.shape()) + " does not match weight " +
                                shape_str(w.shape()));
  const bool has_bias = b.defined();
  if (has_bias && (b.ndim() != 1 || b.shape()[0] != d_out))
    throw std::invalid_argument("linear: bias shape mismatch");

  const size_t rows = x.size() / d_in;
  std::vector<size_t> out_shape = x.shape();
  out_shape.back() = d_out;

  Parents parents = {x.impl_ptr(), w.impl_ptr()};
  if (has_bias) parents.push_back(b.impl_ptr());

  DType dt = out_dtype(x, w);
  if (has_bias && b.dtype() == DType::f64) dt = DType::f64;

  Tensor out = Tensor::make_node(
      std::move(out_shape), dt, std::move(parents),
      [rows, d_in, d_out, has_bias](TensorImpl& node) {
        const double* dx = node.parents[0]->data.data();
        const double* dw = node.parents[1]->data.data();
        const double* g = node.grad.data();
        if (double* gx = grad_of(node, 0)) {
          for (size_t m = 0; m < rows; ++m)
            for (size_t i = 0; i < d_in; ++i) {
              double s = 0.0;
              const double* wrow = dw + i * d_out;
              const double* grow = g + m * d_out;
              for (size_t o = 0; o < d_out; ++o) s += grow[o] * wrow[o];
              gx[m * d_in + i] += s;
            }
        }
        if (double* gw = grad_of(node, 1)) {
          for (size_t m = 0; m < rows; ++m) {
            const double* grow = g + m * d_out;
            const double* xrow = dx + m * d_in;
            for (size_t i = 0; i < d_in; ++i) {
              const double xv = xrow[i];
              double* gwrow = gw + i * d_out;
              for (size_t o = 0; o < d_out; ++o) gwrow[o] += xv * grow[o];
            }
          }
        }
        if (has_bias) {
          if (double* gb = grad_of(node, 2)) {
            for (size_t m = 0; m < rows; ++m) {
              const double* grow = g + m * d_out;
              for (size_t o = 0; o < d_out; ++o) gb[o] += grow[o];
            }
          }
        }
      });

  const double* px = x.data().data();
  const double* pw = w.data().data();
  double* po = out.data().data();
  for (size_t m = 0; m < rows; ++m) {
    double* orow = po + m * d_out;
    if (has_bias)
      std::memcpy(orow, b.data().data(), d_out * sizeof(double));
    else
      std::fill(orow, orow + d_out, 0.0);
    const double* xrow = px + m * d_in;
    for (size_t i = 0; i < d_in; ++i) {
      const double xv = xrow[i];
      const double* wrow = pw + i * d_out;
      for (size_t o = 0; o < d_out; ++o) orow[o] += xv * wrow[o];
    }
  }
  op_counter().linear_macs +=
      static_cast<unsigned long long>(rows) * d_in * d_out;
  quantize_to_dtype(*out.impl());
  return out;
}

Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& b, size_t stride,
              size_t padding) {
  if (stride < 1) throw std::invalid_argument("conv1d: stride must be >= 1");
  if (w.ndim() != 3) throw std::invalid_argument("conv1d: weight must be 3-D");
  const bool batched = x.ndim() == 3;
  if (!batched && x.ndim() != 2)
    throw std::invalid_argument("conv1d: input must be [C,L] or [B,C,L]");
  const size_t B = batched ? x.shape()[0] : 1;
  const size_t c_in = batched ? x.shape()[1] : x.shape()[0];
  const size_t L = batched ? x.shape()[2] : x.shape()[1];
  const size_t c_out = w.shape()[0];
  const size_t k = w.shape()[2];
  if (w.shape()[1] != c_in)
    throw std::invalid_argument("conv1d: weight C_in " +
                                std::to_string(w.shape()[1]) +
                                " does not match input C_in " +
                                std::to_string(c_in));
  if (L + 2 * padding < k)
    throw std::invalid_argument("conv1d: kernel larger than padded input");
  const bool has_bias = b.defined();
  if (has_bias && (b.ndim() != 1 || b.shape()[0] != c_out))
    throw std::invalid_argument("conv1d: bias shape mismatch");
  const size_t l_out = (L + 2 * padding - k) / stride + 1;

  std::vector<size_t> out_shape =
      batched ? std::vector<size_t>{B, c_out, l_out}
              : std::vector<size_t>{c_out, l_out};

  Parents parents = {x.impl_ptr(), w.impl_ptr()};
  if (has_bias) parents.push_back(b.impl_ptr());

  const long pad = static_cast<long>(padding);
  Tensor out = Tensor::make_node(
      std::move(out_shape), out_dtype(x, w), std::move(parents),
      [B, c_in, c_out, L, k, stride, pad, l_out, has_bias](TensorImpl& node) {
        const double* dx = node.parents[0]->data.data();
        const double* dw = node.parents[1]->data.data();
        const double* g = node.grad.data();
        double* gx = grad_of(node, 0);
        double* gw = grad_of(node, 1);
        double* gb = has_bias ? grad_of(node, 2) : nullptr;
        for (size_t img = 0; img < B; ++img) {
          const double* xb = dx + img * c_in * L;
          const double* gbase = g + img * c_out * l_out;
          for (size_t co = 0; co < c_out; ++co) {
            const double* grow = gbase + co * l_out;
            if (gb) {
              double s = 0.0;
              for (size_t o = 0; o < l_out; ++o) s += grow[o];
              gb[co] += s;
            }
            for (size_t ci = 0; ci < c_in; ++ci) {
              for (size_t kk = 0; kk < k; ++kk) {
                const double wv = dw[(co * c_in + ci) * k + kk];
                double acc_w = 0.0;
                for (size_t o = 0; o < l_out; ++o) {
                  const long il =
                      static_cast<long>(o * stride + kk) - pad;
                  if (il < 0 || il >= static_cast<long>(L)) continue;
                  const double gv = grow[o];
                  acc_w += gv * xb[ci * L + il];
                  if (gx) gx[img * c_in * L + ci * L + il] += gv * wv;
                }
                if (gw) gw[(co * c_in + ci) * k + kk] += acc_w;
              }
            }
          }
        }
      });

  const double* px = x.data().data();
  const double* pw = w.data().data();
  double* po = out.data().data();
  for (size_t img = 0; img < B; ++img) {
    const double* xb = px + img * c_in * L;
    double* ob = po + img * c_out * l_out;
    for (size_t co = 0; co < c_out; ++co) {
      double* orow = ob + co * l_out;
      const double bias = has_bias ? b.data()[co] : 0.0;
      for (size_t o = 0; o < l_out; ++o) {
        double acc = bias;
        const long start = static_cast<long>(o * stride) - pad;
        for (size_t ci = 0; ci < c_in; ++ci) {
          const double* xrow = xb + ci * L;
          const double* wrow = pw + (co * c_in + ci) * k;
          for (size_t kk = 0; kk < k; ++kk) {
            const long il = start + static_cast<long>(kk);
            if (il < 0 || il >= static_cast<long>(L)) continue;
            acc += wrow[kk] * xrow[il];
          }
        }
        orow[o] = acc;
      }
    }
  }
  op_counter().conv1d_macs +=
      static_cast<unsigned long long>(B) * c_out * l_out * c_in * k;
  quantize_to_dtype(*out.impl());
  return out;
}

namespace {

struct Conv2dGeom {
  size_t B, c_in, c_out, H, W, k, H_out, W_out;
  long pad;
};

// valid output range [o_lo, o_hi) for a kernel tap so the input index stays
// in bounds: i = o + tap - pad in [0, extent)
inline void tap_range(size_t tap, long pad, size_t extent, size_t out_extent,
                      size_t& o_lo, size_t& o_hi) {
  const long lo = pad - static_cast<long>(tap);
  const long hi = static_cast<long>(extent) + pad - static_cast<long>(tap);
  o_lo = static_cast<size_t>(std::max(0L, lo));
  o_hi = static_cast<size_t>(
      std::min(static_cast<long>(out_extent), std::max(0L, hi)));
}

unsigned long long conv2d_inbounds_macs(const Conv2dGeom& geo) {
  unsigned long long taps = 0;
  for (size_t kh = 0; kh < geo.k; ++kh) {
    size_t oh_lo, oh_hi;
    tap_range(kh, geo.pad, geo.H, geo.H_out, oh_lo, oh_hi);
    for (size_t kw = 0; kw < geo.k; ++kw) {
      size_t ow_lo, ow_hi;
      tap_range(kw, geo.pad, geo.W, geo.W_out, ow_lo, ow_hi);
      taps += static_cast<unsigned long long>(oh_hi - oh_lo) *
              (ow_hi - ow_lo);
    }
  }
  return taps * geo.B * geo.c_out * geo.c_in;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b,
              size_t padding) {
  if (x.ndim() != 4)
    throw std::invalid_argument("conv2d: input must be [B,C,H,W]");
  if (w.ndim() != 4 || w.shape()[2] != w.shape()[3])
    throw std::invalid_argument("conv2d: weight must be [C_out,C_in,k,k]");
  Conv2dGeom geo;
  geo.B = x.shape()[0];
  geo.c_in = x.shape()[1];
  geo.H = x.shape()[2];
  geo.W = x.shape()[3];
  geo.c_out = w.shape()[0];
  geo.k = w.shape()[2];
  geo.pad = static_cast<long>(padding);
  if (w.shape()[1] != geo.c_in)
    throw std::invalid_argument("conv2d: weight C_in " +
                                std::to_string(w.shape()[1]) +
                                " does not match input C_in " +
                                std::to_string(geo.c_in));
  if (geo.k % 2 == 0)
    throw std::invalid_argument("conv2d: even kernel size rejected");
  if (geo.H + 2 * padding < geo.k || geo.W + 2 * padding < geo.k)
    throw std::invalid_argument("conv2d: kernel larger than padded input");
  const bool has_bias = b.defined();
  if (has_bias && (b.ndim() != 1 || b.shape()[0] != geo.c_out))
    throw std::invalid_argument("conv2d: bias shape mismatch");
  geo.H_out = geo.H + 2 * padding - geo.k + 1;
  geo.W_out = geo.W + 2 * padding - geo.k + 1;

  Parents parents = {x.impl_ptr(), w.impl_ptr()};
  if (has_bias) parents.push_back(b.impl_ptr());

  Tensor out = Tensor::make_node(
      {geo.B, geo.c_out, geo.H_out, geo.W_out}, out_dtype(x, w),
      std::move(parents), [geo, has_bias](TensorImpl& node) {
        const double* dx = node.parents[0]->data.data();
        const double* dw = node.parents[1]->data.data();
        const double* g = node.grad.data();
        double* gx = grad_of(node, 0);
        double* gw = grad_of(node, 1);
        double* gb = has_bias ? grad_of(node, 2) : nullptr;
        const size_t in_img = geo.c_in * geo.H * geo.W;
        const size_t out_img = geo.c_out * geo.H_out * geo.W_out;
        const size_t in_ch = geo.H * geo.W;
        const size_t out_ch = geo.H_out * geo.W_out;

        if (gx) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
          for (long long img = 0; img < static_cast<long long>(geo.B); ++img) {
            const double* gimg = g + img * out_img;
            double* gximg = gx + img * in_img;
            for (size_t co = 0; co < geo.c_out; ++co) {
              const double* gch = gimg + co * out_ch;
              for (size_t ci = 0; ci < geo.c_in; ++ci) {
                double* gxch = gximg + ci * in_ch;
                const double* wch =
                    dw + (co * geo.c_in + ci) * geo.k * geo.k;
                for (size_t kh = 0; kh < geo.k; ++kh) {
                  size_t oh_lo, oh_hi;
                  tap_range(kh, geo.pad, geo.H, geo.H_out, oh_lo, oh_hi);
                  for (size_t kw = 0; kw < geo.k; ++kw) {
                    size_t ow_lo, ow_hi;
                    tap_range(kw, geo.pad, geo.W, geo.W_out, ow_lo, ow_hi);
                    const double wv = wch[kh * geo.k + kw];
                    for (size_t oh = oh_lo; oh < oh_hi; ++oh) {
                      const size_t ih = oh + kh - geo.pad;
                      const size_t iw0 = ow_lo + kw - geo.pad;
                      const double* grow = gch + oh * geo.W_out + ow_lo;
                      double* gxrow = gxch + ih * geo.W + iw0;
                      const size_t len = ow_hi - ow_lo;
                      for (size_t j = 0; j < len; ++j)
                        gxrow[j] += wv * grow[j];
                    }
                  }
                }
              }
            }
          }
        }

        if (gw || gb) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
          for (long long co = 0; co < static_cast<long long>(geo.c_out); ++co) {
            if (gb) {
              double s = 0.0;
              for (size_t img = 0; img < geo.B; ++img) {
                const double* gch = g + img * out_img + co * out_ch;
                for (size_t o = 0; o < out_ch; ++o) s += gch[o];
              }
              gb[co] += s;
            }
            if (!gw) continue;
            for (size_t ci = 0; ci < geo.c_in; ++ci) {
              double* gwch = gw + (co * geo.c_in + ci) * geo.k * geo.k;
              for (size_t kh = 0; kh < geo.k; ++kh) {
                size_t oh_lo, oh_hi;
                tap_range(kh, geo.pad, geo.H, geo.H_out, oh_lo, oh_hi);
                for (size_t kw = 0; kw < geo.k; ++kw) {
                  size_t ow_lo, ow_hi;
                  tap_range(kw, geo.pad, geo.W, geo.W_out, ow_lo, ow_hi);
                  double acc = 0.0;
                  for (size_t img = 0; img < geo.B; ++img) {
                    const double* gch = g + img * out_img + co * out_ch;
                    const double* xch = dx + img * in_img + ci * in_ch;
                    for (size_t oh = oh_lo; oh < oh_hi; ++oh) {
                      const size_t ih = oh + kh - geo.pad;
                      const size_t iw0 = ow_lo + kw - geo.pad;
                      const double* grow = gch + oh * geo.W_out + ow_lo;
                      const double* xrow = xch + ih * geo.W + iw0;
                      const size_t len = ow_hi - ow_lo;
                      for (size_t j = 0; j < len; ++j)
                        acc += grow[j] * xrow[j];
                    }
                  }
                  gwch[kh * geo.k + kw] += acc;
                }
              }
            }
          }
        }
      });

  const double* px = x.data().data();
  const double* pw = w.data().data();
  double* po = out.data().data();
  const size_t in_img = geo.c_in * geo.H * geo.W;
  const size_t out_img = geo.c_out * geo.H_out * geo.W_out;
  const size_t in_ch = geo.H * geo.W;
  const size_t out_ch = geo.H_out * geo.W_out;

#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (long long img = 0; img < static_cast<long long>(geo.B); ++img) {
    const double* ximg = px + img * in_img;
    double* oimg = po + img * out_img;
    for (size_t co = 0; co < geo.c_out; ++co) {
      double* och = oimg + co * out_ch;
      const double bias = has_bias ? b.data()[co] : 0.0;
      std::fill(och, och + out_ch, bias);
      for (size_t ci = 0; ci < geo.c_in; ++ci) {
        const double* xch = ximg + ci * in_ch;
        const double* wch = pw + (co * geo.c_in + ci) * geo.k * geo.k;
        for (size_t kh = 0; kh < geo.k; ++kh) {
          size_t oh_lo, oh_hi;
          tap_range(kh, geo.pad, geo.H, geo.H_out, oh_lo, oh_hi);
          for (size_t kw = 0; kw < geo.k; ++kw) {
            size_t ow_lo, ow_hi;
            tap_range(kw, geo.pad, geo.W, geo.W_out, ow_lo, ow_hi);
            const double wv = wch[kh * geo.k + kw];
            for (size_t oh = oh_lo; oh < oh_hi; ++oh) {
              const size_t ih = oh + kh - geo.pad;
              const size_t iw0 = ow_lo + kw - geo.pad;
              double* orow = och + oh * geo.W_out + ow_lo;
              const double* xrow = xch + ih * geo.W + iw0;
              const size_t len = ow_hi - ow_lo;
              for (size_t j = 0; j < len; ++j) orow[j] += wv * xrow[j];
            }
          }
        }
      }
    }
  }

  auto& counter = op_counter();
  counter.conv2d_macs_inbounds += conv2d_inbounds_macs(geo);
  counter.conv2d_macs_padded += static_cast<unsigned long long>(geo.B) *
                                geo.c_out * geo.H_out * geo.W_out * geo.c_in *
                                geo.k * geo.k;
  quantize_to_dtype(*out.impl());
  return out;
}

Tensor pool_patch_mean(const Tensor& x) {
  if (x.ndim() != 5)
    throw std::invalid_argument("pool_patch_mean: input must be [B,C,N,S,P2]");
  const size_t B = x.shape()[0], C = x.shape()[1], N = x.shape()[2];
  const size_t cell = x.shape()[3] * x.shape()[4];
  if (cell == 0) throw std::invalid_argument("pool_patch_mean: empty grid");
  Tensor out = Tensor::make_node(
      {B, C, N}, out_dtype(x), {x.impl_ptr()}, [cell](TensorImpl& node) {
        if (double* ga = grad_of(node, 0)) {
          const double inv = 1.0 / static_cast<double>(cell);
          for (size_t i = 0; i < node.data.size(); ++i) {
            const double g = node.grad[i] * inv;
            for (size_t r = 0; r < cell; ++r) ga[i * cell + r] += g;
          }
        }
      });
  const double* px = x.data().data();
  double* po = out.data().data();
  const double inv = 1.0 / static_cast<double>(cell);
  for (size_t i = 0; i < out.size(); ++i) {
    double s = 0.0;
    for (size_t r = 0; r < cell; ++r) s += px[i * cell + r];
    po[i] = s * inv;
  }
  quantize_to_dtype(*out.impl());
  return out;
}

Tensor pool_seq_mean(const Tensor& x) {
  if (x.ndim() != 3)
    throw std::invalid_argument("pool_seq_mean: input must be [B,C,N]");
  const size_t B = x.shape()[0], C = x.shape()[1], N = x.shape()[2];
  if (N == 0) throw std::invalid_argument("pool_seq_mean: empty axis");
  Tensor out = Tensor::make_node(
      {B, C, 1}, out_dtype(x), {x.impl_ptr()}, [N](TensorImpl& node) {
        if (double* ga = grad_of(node, 0)) {
          const double inv = 1.0 / static_cast<double>(N);
          for (size_t i = 0; i < node.data.size(); ++i) {
            const double g = node.grad[i] * inv;
            for (size_t r = 0; r < N; ++r) ga[i * N + r] += g;
          }
        }
      });
  const double* px = x.data().data();
  double* po = out.data().data();
  const double inv = 1.0 / static_cast<double>(N);
  for (size_t i = 0; i < B * C; ++i) {
    double s = 0.0;
    for (size_t r = 0; r < N; ++r) s += px[i * N + r];
    po[i] = s * inv;
  }
  quantize_to_dtype(*out.impl());
  return out;
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  std::vector<double>& running_mean,
                  std::vector<double>& running_var, bool training, double eps,
                  double momentum) {
  if (x.ndim() != 3)
    throw std::invalid_argument("batch_norm: input must be [B,C,N]");
  const size_t B = x.shape()[0], C = x.shape()[1], N = x.shape()[2];
  if (gamma.size() != C || beta.size() != C || running_mean.size() != C ||
      running_var.size() != C)
    throw std::invalid_argument("batch_norm: state size does not match C");
  const size_t n = B * N;
  if (n == 0) throw std::invalid_argument("batch_norm: empty input");

  const double* px = x.data().data();

  // normalized values and the per-channel scale are reused by the backward
  auto xhat = std::make_shared<std::vector<double>>(x.size());
  auto inv_std = std::make_shared<std::vector<double>>(C);

  std::vector<double> mu(C, 0.0);
  if (training) {
    for (size_t c = 0; c < C; ++c) {
      double s = 0.0;
      for (size_t bi = 0; bi < B; ++bi)
        for (size_t t = 0; t < N; ++t) s += px[(bi * C + c) * N + t];
      mu[c] = s / static_cast<double>(n);
      double v = 0.0;
      for (size_t bi = 0; bi < B; ++bi)
        for (size_t t = 0; t < N; ++t) {
          const double d = px[(bi * C + c) * N + t] - mu[c];
          v += d * d;
        }
      v /= static_cast<double>(n);
      if (v < 0.0) v = 0.0;
      (*inv_std)[c] = 1.0 / std::sqrt(v + eps);

      const double unbiased =
          n > 1 ? v * static_cast<double>(n) / static_cast<double>(n - 1) : v;
      running_mean[c] = (1.0 - momentum) * running_mean[c] + momentum * mu[c];
      running_var[c] = (1.0 - momentum) * running_var[c] + momentum * unbiased;
    }
  } else {
    for (size_t c = 0; c < C; ++c) {
      mu[c] = running_mean[c];
      double v = running_var[c];
      if (v < 0.0) v = 0.0;
      (*inv_std)[c] = 1.0 / std::sqrt(v + eps);
    }
  }

  Tensor out = Tensor::make_node(
      x.shape(), out_dtype(x), {x.impl_ptr(), gamma.impl_ptr(), beta.impl_ptr()},
      [B, C, N, n, training, xhat, inv_std](TensorImpl& node) {
        const double* dgamma = node.parents[1]->data.data();
        const double* g = node.grad.data();
        double* gx = grad_of(node, 0);
        double* gg = grad_of(node, 1);
        double* gb = grad_of(node, 2);
        for (size_t c = 0; c < C; ++c) {
          double sum_g = 0.0, sum_gx = 0.0;
          for (size_t bi = 0; bi < B; ++bi)
            for (size_t t = 0; t < N; ++t) {
              const size_t i = (bi * C + c) * N + t;
              sum_g += g[i];
              sum_gx += g[i] * (*xhat)[i];
            }
          if (gg) gg[c] += sum_gx;
          if (gb) gb[c] += sum_g;
          if (gx) {
            const double scale_c = dgamma[c] * (*inv_std)[c];
            if (training) {
              const double mg = sum_g / static_cast<double>(n);
              const double mgx = sum_gx / static_cast<double>(n);
              for (size_t bi = 0; bi < B; ++bi)
                for (size_t t = 0; t < N; ++t) {
                  const size_t i = (bi * C + c) * N + t;
                  gx[i] += scale_c * (g[i] - mg - (*xhat)[i] * mgx);
                }
            } else {
              for (size_t bi = 0; bi < B; ++bi)
                for (size_t t = 0; t < N; ++t) {
                  const size_t i = (bi * C + c) * N + t;
                  gx[i] += scale_c * g[i];
                }
            }
          }
        }
      });

  double* po = out.data().data();
  const double* pg = gamma.data().data();
  const double* pb = beta.data().data();
  for (size_t bi = 0; bi < B; ++bi)
    for (size_t c = 0; c < C; ++c)
      for (size_t t = 0; t < N; ++t) {
        const size_t i = (bi * C + c) * N + t;
        const double xh = (px[i] - mu[c]) * (*inv_std)[c];
        (*xhat)[i] = xh;
        po[i] = pg[c] * xh + pb[c];
      }
  quantize_to_dtype(*out.impl());
  return out;
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  if (logits.ndim() != 2)
    throw std::invalid_argument("cross_entropy: logits must be [B,K]");
  const size_t B = logits.shape()[0];
  const size_t K = logits.shape()[1];
  if (labels.size() != B)
    throw std::invalid_argument("cross_entropy: label count mismatch");
  for (int lbl : labels)
    if (lbl < 0 || static_cast<size_t>(lbl) >= K)
      throw std::invalid_argument("cross_entropy: label out of range");

  auto softmax = std::make_shared<std::vector<double>>(logits.size());
  auto labels_copy = std::make_shared<std::vector<int>>(labels);

  Tensor out = Tensor::make_node(
      {1}, out_dtype(logits), {logits.impl_ptr()},
      [B, K, softmax, labels_copy](TensorImpl& node) {
        if (double* gl = grad_of(node, 0)) {
          const double g = node.grad[0] / static_cast<double>(B);
          for (size_t bi = 0; bi < B; ++bi)
            for (size_t kidx = 0; kidx < K; ++kidx) {
              double p = (*softmax)[bi * K + kidx];
              if (kidx == static_cast<size_t>((*labels_copy)[bi])) p -= 1.0;
              gl[bi * K + kidx] += g * p;
            }
        }
      });

  const double* pz = logits.data().data();
  double loss = 0.0;
  for (size_t bi = 0; bi < B; ++bi) {
    const double* row = pz + bi * K;
    double zmax = row[0];
    for (size_t kidx = 1; kidx < K; ++kidx) zmax = std::max(zmax, row[kidx]);
    double denom = 0.0;
    for (size_t kidx = 0; kidx < K; ++kidx)
      denom += std::exp(row[kidx] - zmax);
    const double lse = std::log(denom) + zmax;
    for (size_t kidx = 0; kidx < K; ++kidx)
      (*softmax)[bi * K + kidx] = std::exp(row[kidx] - lse);
    loss += lse - row[labels[bi]];
  }
  out.data()[0] = loss / static_cast<double>(B);
  quantize_to_dtype(*out.impl());
  return out;
}

}  // namespace tvnet::ops
