#pragma once

// Layer forward/backward kernels. Each op has a fast path (im2col + Eigen
// GEMM, OpenMP over the batch) and, for convolution, a naive serial
// reference used by the tests and the benchmark.

#include <Eigen/Dense>
#include <algorithm>
#include <random>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "treepose/tensor.hpp"

namespace treepose {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Convolution parameters: weights (outCh, inCh, kH, kW), one bias per
/// output channel. Velocity buffers back the SGD momentum update.
template <class T>
struct ConvParamsT {
  TensorT<T> weights;
  TensorT<T> bias;
  int stride = 1;
  int pad = 0;
  std::string name;
  std::string lr_group = "new";
  std::vector<T> vel_w, vel_b;

  ConvParamsT() = default;
  ConvParamsT(int out_ch, int in_ch, int k, int stride_, int pad_,
              std::string name_ = "", std::string group = "new")
      : weights({out_ch, in_ch, k, k}),
        bias({out_ch}),
        stride(stride_),
        pad(pad_),
        name(std::move(name_)),
        lr_group(std::move(group)) {}

  int out_ch() const { return weights.dim(0); }
  int in_ch() const { return weights.dim(1); }
  int kh() const { return weights.dim(2); }
  int kw() const { return weights.dim(3); }

  void ensure_grad() {
    weights.ensure_grad();
    bias.ensure_grad();
  }
  void zero_grad() {
    weights.zero_grad();
    bias.zero_grad();
  }
};

using ConvParams = ConvParamsT<float>;

inline int conv_out_extent(int in, int k, int stride, int pad) {
  int out = (in + 2 * pad - k) / stride + 1;
  if (out < 1) throw ConfigError("convolution output extent < 1");
  return out;
}

template <class T>
std::vector<int> conv_out_shape(const TensorT<T>& x, const ConvParamsT<T>& p) {
  if (x.shape.size() != 4) throw ConfigError("conv2d expects a rank-4 input");
  if (x.c() != p.in_ch())
    throw ConfigError("conv2d channel mismatch: input " +
                      std::to_string(x.c()) + " vs kernel " +
                      std::to_string(p.in_ch()) + " (" + p.name + ")");
  return {x.n(), p.out_ch(), conv_out_extent(x.h(), p.kh(), p.stride, p.pad),
          conv_out_extent(x.w(), p.kw(), p.stride, p.pad)};
}

// ---------------------------------------------------------------------------
// Reference kernels (serial, quadruple loop). Kept as the oracle the fast
// path is tested against.
// ---------------------------------------------------------------------------

template <class T>
TensorT<T> conv2d_forward_ref(const TensorT<T>& x, const ConvParamsT<T>& p) {
  TensorT<T> y(conv_out_shape(x, p));
  for (int n = 0; n < x.n(); ++n)
    for (int oc = 0; oc < p.out_ch(); ++oc)
      for (int oy = 0; oy < y.h(); ++oy)
        for (int ox = 0; ox < y.w(); ++ox) {
          T acc = p.bias.data[oc];
          for (int ic = 0; ic < p.in_ch(); ++ic)
            for (int ky = 0; ky < p.kh(); ++ky)
              for (int kx = 0; kx < p.kw(); ++kx) {
                int iy = oy * p.stride - p.pad + ky;
                int ix = ox * p.stride - p.pad + kx;
                if (iy < 0 || iy >= x.h() || ix < 0 || ix >= x.w()) continue;
                acc += x.at(n, ic, iy, ix) * p.weights.at(oc, ic, ky, kx);
              }
          y.at(n, oc, oy, ox) = acc;
        }
  return y;
}

template <class T>
void conv2d_backward_ref(const TensorT<T>& x, ConvParamsT<T>& p,
                         const TensorT<T>& dy, TensorT<T>* dx) {
  p.ensure_grad();
  for (int n = 0; n < x.n(); ++n)
    for (int oc = 0; oc < p.out_ch(); ++oc)
      for (int oy = 0; oy < dy.h(); ++oy)
        for (int ox = 0; ox < dy.w(); ++ox) {
          T g = dy.at(n, oc, oy, ox);
          p.bias.grad[oc] += g;
          for (int ic = 0; ic < p.in_ch(); ++ic)
            for (int ky = 0; ky < p.kh(); ++ky)
              for (int kx = 0; kx < p.kw(); ++kx) {
                int iy = oy * p.stride - p.pad + ky;
                int ix = ox * p.stride - p.pad + kx;
                if (iy < 0 || iy >= x.h() || ix < 0 || ix >= x.w()) continue;
                p.weights.grad[p.weights.index(oc, ic, ky, kx)] +=
                    g * x.at(n, ic, iy, ix);
                if (dx) dx->grad[x.index(n, ic, iy, ix)] += g * p.weights.at(oc, ic, ky, kx);
              }
        }
}

// ---------------------------------------------------------------------------
// Fast kernels: im2col + GEMM per sample, batch loop parallelized.
// ---------------------------------------------------------------------------

template <class T>
void im2col(const TensorT<T>& x, int n, const ConvParamsT<T>& p, int oh,
            int ow, T* col) {
  // col layout: (in_ch*kh*kw) rows x (oh*ow) cols, row-major.
  const int H = x.h(), W = x.w();
  const T* xs = x.data.data() + x.index(n, 0, 0, 0);
  std::size_t r = 0;
  for (int ic = 0; ic < p.in_ch(); ++ic) {
    const T* xc = xs + static_cast<std::size_t>(ic) * H * W;
    for (int ky = 0; ky < p.kh(); ++ky)
      for (int kx = 0; kx < p.kw(); ++kx, ++r) {
        T* dst = col + r * static_cast<std::size_t>(oh) * ow;
        for (int oy = 0; oy < oh; ++oy) {
          int iy = oy * p.stride - p.pad + ky;
          if (iy < 0 || iy >= H) {
            std::fill(dst + static_cast<std::size_t>(oy) * ow,
                      dst + static_cast<std::size_t>(oy + 1) * ow, T(0));
            continue;
          }
          const T* src = xc + static_cast<std::size_t>(iy) * W;
          for (int ox = 0; ox < ow; ++ox) {
            int ix = ox * p.stride - p.pad + kx;
            dst[static_cast<std::size_t>(oy) * ow + ox] =
                (ix >= 0 && ix < W) ? src[ix] : T(0);
          }
        }
      }
  }
}

template <class T>
void col2im_add(const T* col, int n, const ConvParamsT<T>& p, int oh, int ow,
                TensorT<T>& x) {
  const int H = x.h(), W = x.w();
  T* xs = x.grad.data() + x.index(n, 0, 0, 0);
  std::size_t r = 0;
  for (int ic = 0; ic < p.in_ch(); ++ic) {
    T* xc = xs + static_cast<std::size_t>(ic) * H * W;
    for (int ky = 0; ky < p.kh(); ++ky)
      for (int kx = 0; kx < p.kw(); ++kx, ++r) {
        const T* src = col + r * static_cast<std::size_t>(oh) * ow;
        for (int oy = 0; oy < oh; ++oy) {
          int iy = oy * p.stride - p.pad + ky;
          if (iy < 0 || iy >= H) continue;
          for (int ox = 0; ox < ow; ++ox) {
            int ix = ox * p.stride - p.pad + kx;
            if (ix >= 0 && ix < W)
              xc[static_cast<std::size_t>(iy) * W + ix] +=
                  src[static_cast<std::size_t>(oy) * ow + ox];
          }
        }
      }
  }
}

template <class T>
TensorT<T> conv2d_forward(const TensorT<T>& x, const ConvParamsT<T>& p) {
  TensorT<T> y(conv_out_shape(x, p));
  const int oh = y.h(), ow = y.w();
  const std::size_t kdim =
      static_cast<std::size_t>(p.in_ch()) * p.kh() * p.kw();
  const std::size_t pix = static_cast<std::size_t>(oh) * ow;
  Eigen::Map<const RowMat<T>> W(p.weights.data.data(), p.out_ch(),
                                static_cast<Eigen::Index>(kdim));
#pragma omp parallel
  {
    std::vector<T> col(kdim * pix);
#pragma omp for schedule(static)
    for (int n = 0; n < x.n(); ++n) {
      im2col(x, n, p, oh, ow, col.data());
      Eigen::Map<const RowMat<T>> C(col.data(), static_cast<Eigen::Index>(kdim),
                                    static_cast<Eigen::Index>(pix));
      Eigen::Map<RowMat<T>> Y(y.data.data() + y.index(n, 0, 0, 0), p.out_ch(),
                              static_cast<Eigen::Index>(pix));
      Y.noalias() = W * C;
      for (int oc = 0; oc < p.out_ch(); ++oc)
        Y.row(oc).array() += p.bias.data[oc];
    }
  }
  check_finite(y, "conv2d forward");
  return y;
}

/// Backward pass: accumulates dL/dW and dL/db into p, and dL/dx into x.grad
/// when accumulate_dx is set. Parallel over the batch with per-thread weight
/// partials reduced in thread order (deterministic for a fixed thread count).
template <class T>
void conv2d_backward(TensorT<T>& x, ConvParamsT<T>& p, const TensorT<T>& dy,
                     bool accumulate_dx) {
  p.ensure_grad();
  if (accumulate_dx) x.ensure_grad();
  const int oh = dy.h(), ow = dy.w();
  const std::size_t kdim =
      static_cast<std::size_t>(p.in_ch()) * p.kh() * p.kw();
  const std::size_t pix = static_cast<std::size_t>(oh) * ow;
  Eigen::Map<const RowMat<T>> W(p.weights.data.data(), p.out_ch(),
                                static_cast<Eigen::Index>(kdim));

#ifdef _OPENMP
  const int nthreads = omp_get_max_threads();
#else
  const int nthreads = 1;
#endif
  std::vector<std::vector<T>> wpart(nthreads), bpart(nthreads);

#pragma omp parallel
  {
#ifdef _OPENMP
    const int tid = omp_get_thread_num();
#else
    const int tid = 0;
#endif
    wpart[tid].assign(p.weights.data.size(), T(0));
    bpart[tid].assign(p.bias.data.size(), T(0));
    std::vector<T> col(kdim * pix), dcol(kdim * pix);
    Eigen::Map<RowMat<T>> Wg(wpart[tid].data(), p.out_ch(),
                             static_cast<Eigen::Index>(kdim));
#pragma omp for schedule(static)
    for (int n = 0; n < x.n(); ++n) {
      im2col(x, n, p, oh, ow, col.data());
      Eigen::Map<const RowMat<T>> C(col.data(), static_cast<Eigen::Index>(kdim),
                                    static_cast<Eigen::Index>(pix));
      Eigen::Map<const RowMat<T>> dY(dy.data.data() + dy.index(n, 0, 0, 0),
                                     p.out_ch(),
                                     static_cast<Eigen::Index>(pix));
      Wg.noalias() += dY * C.transpose();
      for (int oc = 0; oc < p.out_ch(); ++oc)
        bpart[tid][oc] += dY.row(oc).sum();
      if (accumulate_dx) {
        Eigen::Map<RowMat<T>> dC(dcol.data(), static_cast<Eigen::Index>(kdim),
                                 static_cast<Eigen::Index>(pix));
        dC.noalias() = W.transpose() * dY;
        col2im_add(dcol.data(), n, p, oh, ow, x);
      }
    }
  }
  for (int t = 0; t < nthreads; ++t) {
    for (std::size_t i = 0; i < p.weights.grad.size(); ++i)
      p.weights.grad[i] += wpart[t][i];
    for (std::size_t i = 0; i < p.bias.grad.size(); ++i)
      p.bias.grad[i] += bpart[t][i];
  }
}

// ---------------------------------------------------------------------------
// Pointwise / structural ops.
// ---------------------------------------------------------------------------

template <class T>
TensorT<T> relu_forward(const TensorT<T>& x) {
  TensorT<T> y(x.shape);
  for (std::size_t i = 0; i < x.data.size(); ++i)
    y.data[i] = x.data[i] > T(0) ? x.data[i] : T(0);
  return y;
}

/// Gradient is masked where the pre-activation was <= 0.
template <class T>
void relu_backward(TensorT<T>& x, const TensorT<T>& dy) {
  x.ensure_grad();
  for (std::size_t i = 0; i < x.data.size(); ++i)
    if (x.data[i] > T(0)) x.grad[i] += dy.data[i];
}

template <class T>
struct PoolResult {
  TensorT<T> y;
  std::vector<std::size_t> argmax;  // flat input index per output element
};

/// 2x2 stride-2 max pooling. Odd extents are extended by replicating the
/// last row/column; ties go to the first element in row-major window order.
template <class T>
PoolResult<T> maxpool2_forward(const TensorT<T>& x) {
  if (x.shape.size() != 4) throw ConfigError("maxpool2 expects rank-4 input");
  const int oh = (x.h() + 1) / 2, ow = (x.w() + 1) / 2;
  PoolResult<T> r;
  r.y = TensorT<T>({x.n(), x.c(), oh, ow});
  r.argmax.resize(r.y.numel());
  std::size_t o = 0;
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < x.c(); ++c)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox, ++o) {
          T best = -std::numeric_limits<T>::infinity();
          std::size_t besti = 0;
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
              int iy = std::min(2 * oy + dy, x.h() - 1);
              int ix = std::min(2 * ox + dx, x.w() - 1);
              std::size_t idx = x.index(n, c, iy, ix);
              if (x.data[idx] > best) {
                best = x.data[idx];
                besti = idx;
              }
            }
          r.y.data[o] = best;
          r.argmax[o] = besti;
        }
  return r;
}

template <class T>
void maxpool2_backward(TensorT<T>& x, const PoolResult<T>& r,
                       const TensorT<T>& dy) {
  x.ensure_grad();
  for (std::size_t o = 0; o < dy.data.size(); ++o)
    x.grad[r.argmax[o]] += dy.data[o];
}

template <class T>
TensorT<T> concat_channels(const std::vector<const TensorT<T>*>& xs) {
  if (xs.empty()) throw ConfigError("concat_channels: empty input list");
  int totc = 0;
  for (auto* t : xs) {
    if (t->n() != xs[0]->n() || t->h() != xs[0]->h() || t->w() != xs[0]->w())
      throw ConfigError("concat_channels: mismatched batch/spatial shapes");
    totc += t->c();
  }
  TensorT<T> y({xs[0]->n(), totc, xs[0]->h(), xs[0]->w()});
  const std::size_t plane = static_cast<std::size_t>(y.h()) * y.w();
  for (int n = 0; n < y.n(); ++n) {
    std::size_t off = y.index(n, 0, 0, 0);
    for (auto* t : xs) {
      std::copy_n(t->data.data() + t->index(n, 0, 0, 0),
                  static_cast<std::size_t>(t->c()) * plane, y.data.data() + off);
      off += static_cast<std::size_t>(t->c()) * plane;
    }
  }
  return y;
}

template <class T>
void concat_channels_backward(std::vector<TensorT<T>*>& xs,
                              const TensorT<T>& dy) {
  const std::size_t plane = static_cast<std::size_t>(dy.h()) * dy.w();
  for (auto* t : xs) t->ensure_grad();
  for (int n = 0; n < dy.n(); ++n) {
    std::size_t off = dy.index(n, 0, 0, 0);
    for (auto* t : xs) {
      const std::size_t cnt = static_cast<std::size_t>(t->c()) * plane;
      T* dst = t->grad.data() + t->index(n, 0, 0, 0);
      const T* src = dy.data.data() + off;
      for (std::size_t i = 0; i < cnt; ++i) dst[i] += src[i];
      off += cnt;
    }
  }
}

/// Channel slice [c0, c1) as a fresh tensor (test/debug helper).
template <class T>
TensorT<T> slice_channels(const TensorT<T>& x, int c0, int c1) {
  TensorT<T> y({x.n(), c1 - c0, x.h(), x.w()});
  const std::size_t plane = static_cast<std::size_t>(x.h()) * x.w();
  for (int n = 0; n < x.n(); ++n)
    std::copy_n(x.data.data() + x.index(n, c0, 0, 0),
                static_cast<std::size_t>(c1 - c0) * plane,
                y.data.data() + y.index(n, 0, 0, 0));
  return y;
}

template <class T>
struct DropoutResult {
  TensorT<T> y;
  std::vector<uint8_t> keep;  // per (n, c)
  T scale = T(1);
};

/// Channel dropout: whole channels zeroed with probability p, survivors
/// scaled by 1/(1-p). Identity when not training.
template <class T>
DropoutResult<T> channel_dropout_forward(const TensorT<T>& x, double p,
                                         bool training, std::mt19937& rng) {
  if (p < 0.0 || p >= 1.0) throw ConfigError("dropout probability must be in [0,1)");
  DropoutResult<T> r;
  if (!training || p == 0.0) {
    r.y = x;
    r.keep.assign(static_cast<std::size_t>(x.n()) * x.c(), 1);
    return r;
  }
  r.scale = T(1.0 / (1.0 - p));
  r.y = TensorT<T>(x.shape);
  r.keep.resize(static_cast<std::size_t>(x.n()) * x.c());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t plane = static_cast<std::size_t>(x.h()) * x.w();
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < x.c(); ++c) {
      bool keep = u(rng) >= p;
      r.keep[static_cast<std::size_t>(n) * x.c() + c] = keep;
      if (keep) {
        const T* src = x.data.data() + x.index(n, c, 0, 0);
        T* dst = r.y.data.data() + r.y.index(n, c, 0, 0);
        for (std::size_t i = 0; i < plane; ++i) dst[i] = src[i] * r.scale;
      }
    }
  return r;
}

template <class T>
void channel_dropout_backward(TensorT<T>& x, const DropoutResult<T>& r,
                              const TensorT<T>& dy) {
  x.ensure_grad();
  const std::size_t plane = static_cast<std::size_t>(x.h()) * x.w();
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < x.c(); ++c) {
      if (!r.keep[static_cast<std::size_t>(n) * x.c() + c]) continue;
      const T* src = dy.data.data() + dy.index(n, c, 0, 0);
      T* dst = x.grad.data() + x.index(n, c, 0, 0);
      for (std::size_t i = 0; i < plane; ++i) dst[i] += src[i] * r.scale;
    }
}

}  // namespace treepose
