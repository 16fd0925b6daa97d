#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "ctct/tensor.hpp"

namespace ctct {

// ---------------------------------------------------------------------------
// conv2d: direct cross-correlation via im2col + GEMM. x [Cin,H,W],
// w [Cout,Cin,kh,kw], b [Cout] -> y [Cout,H',W'].
// ---------------------------------------------------------------------------

template <typename T>
struct Conv2dCache {
  Mat<T> cols;  // [Cin*kh*kw, H'*W']
  int cin = 0, h = 0, w = 0, hp = 0, wp = 0, kh = 0, kw = 0, pad = 0, stride = 1;
};

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int pad,
                         int stride, Conv2dCache<T>* cache) {
  if (x.shape.size() != 3 || w.shape.size() != 4 || b.shape.size() != 1)
    throw Error(ErrorKind::ShapeError, "conv2d rank mismatch");
  int cin = x.shape[0], h = x.shape[1], wd = x.shape[2];
  int cout = w.shape[0], kh = w.shape[2], kw = w.shape[3];
  if (w.shape[1] != cin || b.shape[0] != cout)
    throw Error(ErrorKind::ShapeError, "conv2d channel mismatch");
  int hn = h + 2 * pad - kh, wn = wd + 2 * pad - kw;
  if (hn < 0 || wn < 0 || hn % stride || wn % stride)
    throw Error(ErrorKind::ShapeError, "conv2d shape arithmetic invalid for input " +
                                           x.shape_str() + " kernel " + std::to_string(kh) + "x" +
                                           std::to_string(kw));
  int hp = hn / stride + 1, wp = wn / stride + 1;

  Mat<T> cols = Mat<T>::Zero(cin * kh * kw, hp * wp);
  for (int c = 0; c < cin; ++c)
    for (int ky = 0; ky < kh; ++ky)
      for (int kx = 0; kx < kw; ++kx) {
        int row = (c * kh + ky) * kw + kx;
        for (int oy = 0; oy < hp; ++oy) {
          int sy = oy * stride + ky - pad;
          if (sy < 0 || sy >= h) continue;
          for (int ox = 0; ox < wp; ++ox) {
            int sx = ox * stride + kx - pad;
            if (sx < 0 || sx >= wd) continue;
            cols(row, oy * wp + ox) = x.at3(c, sy, sx);
          }
        }
      }

  Tensor<T> y({cout, hp, wp});
  auto wm = w.as_matrix(cout, cin * kh * kw);
  auto ym = y.as_matrix(cout, hp * wp);
  ym.noalias() = wm * cols;
  for (int co = 0; co < cout; ++co) ym.row(co).array() += b[co];

  if (cache) {
    cache->cols = std::move(cols);
    cache->cin = cin;
    cache->h = h;
    cache->w = wd;
    cache->hp = hp;
    cache->wp = wp;
    cache->kh = kh;
    cache->kw = kw;
    cache->pad = pad;
    cache->stride = stride;
  }
  return y;
}

template <typename T>
struct Conv2dGrads {
  Tensor<T> dx, dw, db;
};

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& dy, const Tensor<T>& w,
                               const Conv2dCache<T>& cc) {
  int cout = w.shape[0];
  Conv2dGrads<T> g;
  g.dw = Tensor<T>(w.shape);
  g.db = Tensor<T>({cout});
  g.dx = Tensor<T>({cc.cin, cc.h, cc.w});

  auto dym = dy.as_matrix(cout, cc.hp * cc.wp);
  auto wm = w.as_matrix(cout, cc.cin * cc.kh * cc.kw);
  g.dw.as_matrix(cout, cc.cin * cc.kh * cc.kw).noalias() = dym * cc.cols.transpose();
  for (int co = 0; co < cout; ++co) g.db[co] = dym.row(co).sum();

  Mat<T> dcols = wm.transpose() * dym;  // [Cin*kh*kw, H'*W']
  for (int c = 0; c < cc.cin; ++c)
    for (int ky = 0; ky < cc.kh; ++ky)
      for (int kx = 0; kx < cc.kw; ++kx) {
        int row = (c * cc.kh + ky) * cc.kw + kx;
        for (int oy = 0; oy < cc.hp; ++oy) {
          int sy = oy * cc.stride + ky - cc.pad;
          if (sy < 0 || sy >= cc.h) continue;
          for (int ox = 0; ox < cc.wp; ++ox) {
            int sx = ox * cc.stride + kx - cc.pad;
            if (sx < 0 || sx >= cc.w) continue;
            g.dx.at3(c, sy, sx) += dcols(row, oy * cc.wp + ox);
          }
        }
      }
  return g;
}

// ---------------------------------------------------------------------------
// maxpool2d, stride = window, pad-free. Gradient routes to the argmax; ties
// break to the first element in row-major window order.
// ---------------------------------------------------------------------------

template <typename T>
struct MaxPoolCache {
  std::vector<int> argmax;  // flat input index per output element
  std::vector<int> in_shape;
};

template <typename T>
Tensor<T> maxpool2d_forward(const Tensor<T>& x, int wh, int ww, MaxPoolCache<T>* cache) {
  if (x.shape.size() != 3) throw Error(ErrorKind::ShapeError, "maxpool expects [C,H,W]");
  int c = x.shape[0], h = x.shape[1], w = x.shape[2];
  if (h % wh || w % ww)
    throw Error(ErrorKind::ShapeError, "maxpool dims " + x.shape_str() + " not divisible by " +
                                           std::to_string(wh) + "x" + std::to_string(ww));
  int hp = h / wh, wp = w / ww;
  Tensor<T> y({c, hp, wp});
  std::vector<int> argmax(y.numel());
  for (int ch = 0; ch < c; ++ch)
    for (int oy = 0; oy < hp; ++oy)
      for (int ox = 0; ox < wp; ++ox) {
        T best = x.at3(ch, oy * wh, ox * ww);
        int best_idx = (ch * h + oy * wh) * w + ox * ww;
        for (int ky = 0; ky < wh; ++ky)
          for (int kx = 0; kx < ww; ++kx) {
            T v = x.at3(ch, oy * wh + ky, ox * ww + kx);
            if (v > best) {
              best = v;
              best_idx = (ch * h + oy * wh + ky) * w + ox * ww + kx;
            }
          }
        y.at3(ch, oy, ox) = best;
        argmax[(static_cast<size_t>(ch) * hp + oy) * wp + ox] = best_idx;
      }
  if (cache) {
    cache->argmax = std::move(argmax);
    cache->in_shape = x.shape;
  }
  return y;
}

template <typename T>
Tensor<T> maxpool2d_backward(const Tensor<T>& dy, const MaxPoolCache<T>& cache) {
  Tensor<T> dx(cache.in_shape);
  for (size_t i = 0; i < dy.numel(); ++i) dx[cache.argmax[i]] += dy[i];
  return dx;
}

// ---------------------------------------------------------------------------
// relu
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& x) {
  Tensor<T> y = x;
  for (T& v : y.data) v = std::max(v, T(0));
  return y;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& dy, const Tensor<T>& x) {
  Tensor<T> dx = dy;
  for (size_t i = 0; i < dx.numel(); ++i)
    if (x[i] <= T(0)) dx[i] = T(0);
  return dx;
}

// ---------------------------------------------------------------------------
// batchnorm over [N,C,spatial...]; stats per channel across N and spatial.
// N = 1 is permitted (eps guards zero variance). Inference uses running stats.
// ---------------------------------------------------------------------------

template <typename T>
struct BatchNormCache {
  std::vector<T> xhat;     // normalized input, same layout as x
  std::vector<T> inv_std;  // per channel
  int n = 0, c = 0, s = 0;
  bool train = true;
};

template <typename T>
Tensor<T> batchnorm_forward(const Tensor<T>& x, int n, int c, int s, const Tensor<T>& gamma,
                            const Tensor<T>& beta, T eps, bool train, Tensor<T>& running_mean,
                            Tensor<T>& running_var, T momentum, BatchNormCache<T>* cache) {
  if (static_cast<size_t>(n) * c * s != x.numel())
    throw Error(ErrorKind::ShapeError, "batchnorm extent mismatch");
  Tensor<T> y(x.shape);
  if (cache) {
    cache->xhat.assign(x.numel(), T(0));
    cache->inv_std.assign(c, T(0));
    cache->n = n;
    cache->c = c;
    cache->s = s;
    cache->train = train;
  }
  const T m = static_cast<T>(n) * static_cast<T>(s);
  for (int ch = 0; ch < c; ++ch) {
    T mean, var;
    if (train) {
      T sum = 0, sq = 0;
      for (int b = 0; b < n; ++b)
        for (int i = 0; i < s; ++i) {
          T v = x[(static_cast<size_t>(b) * c + ch) * s + i];
          sum += v;
          sq += v * v;
        }
      mean = sum / m;
      var = sq / m - mean * mean;
      if (var < 0) var = 0;  // cancellation guard
      running_mean[ch] = momentum * running_mean[ch] + (1 - momentum) * mean;
      running_var[ch] = momentum * running_var[ch] + (1 - momentum) * var;
    } else {
      mean = running_mean[ch];
      var = running_var[ch];
    }
    T inv_std = T(1) / std::sqrt(var + eps);
    if (cache) cache->inv_std[ch] = inv_std;
    for (int b = 0; b < n; ++b)
      for (int i = 0; i < s; ++i) {
        size_t idx = (static_cast<size_t>(b) * c + ch) * s + i;
        T xh = (x[idx] - mean) * inv_std;
        if (cache) cache->xhat[idx] = xh;
        y[idx] = gamma[ch] * xh + beta[ch];
      }
  }
  return y;
}

template <typename T>
struct BatchNormGrads {
  Tensor<T> dx, dgamma, dbeta;
};

template <typename T>
BatchNormGrads<T> batchnorm_backward(const Tensor<T>& dy, const Tensor<T>& gamma,
                                     const BatchNormCache<T>& cc) {
  BatchNormGrads<T> g;
  g.dx = Tensor<T>(dy.shape);
  g.dgamma = Tensor<T>({cc.c});
  g.dbeta = Tensor<T>({cc.c});
  const T m = static_cast<T>(cc.n) * static_cast<T>(cc.s);
  for (int ch = 0; ch < cc.c; ++ch) {
    T sum_dy = 0, sum_dy_xhat = 0;
    for (int b = 0; b < cc.n; ++b)
      for (int i = 0; i < cc.s; ++i) {
        size_t idx = (static_cast<size_t>(b) * cc.c + ch) * cc.s + i;
        sum_dy += dy[idx];
        sum_dy_xhat += dy[idx] * cc.xhat[idx];
      }
    g.dgamma[ch] = sum_dy_xhat;
    g.dbeta[ch] = sum_dy;
    for (int b = 0; b < cc.n; ++b)
      for (int i = 0; i < cc.s; ++i) {
        size_t idx = (static_cast<size_t>(b) * cc.c + ch) * cc.s + i;
        if (cc.train) {
          g.dx[idx] = gamma[ch] * cc.inv_std[ch] / m *
                      (m * dy[idx] - sum_dy - cc.xhat[idx] * sum_dy_xhat);
        } else {
          g.dx[idx] = gamma[ch] * cc.inv_std[ch] * dy[idx];
        }
      }
  }
  return g;
}

// ---------------------------------------------------------------------------
// feature_columns: [C,1,W] feature map -> [W,C] sequence, column t = timestep t
// ---------------------------------------------------------------------------

template <typename T>
Mat<T> feature_columns(const Tensor<T>& map) {
  if (map.shape.size() != 3 || map.shape[1] != 1)
    throw Error(ErrorKind::NonUnitHeight,
                "feature_columns requires height-1 map, got " + map.shape_str());
  int c = map.shape[0], w = map.shape[2];
  Mat<T> seq(w, c);
  for (int t = 0; t < w; ++t)
    for (int ch = 0; ch < c; ++ch) seq(t, ch) = map.at3(ch, 0, t);
  return seq;
}

template <typename T>
Tensor<T> feature_columns_backward(const Mat<T>& dseq) {
  int w = static_cast<int>(dseq.rows()), c = static_cast<int>(dseq.cols());
  Tensor<T> dmap({c, 1, w});
  for (int t = 0; t < w; ++t)
    for (int ch = 0; ch < c; ++ch) dmap.at3(ch, 0, t) = dseq(t, ch);
  return dmap;
}

// ---------------------------------------------------------------------------
// linear over a sequence: y [T,K] = x [T,D] * W^T + b, W [K,D], b [K]
// ---------------------------------------------------------------------------

template <typename T>
Mat<T> linear_forward(const Mat<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  int k = w.shape[0], d = w.shape[1];
  if (x.cols() != d || b.shape[0] != k)
    throw Error(ErrorKind::ShapeError, "linear dimension mismatch");
  Mat<T> y = x * w.as_matrix(k, d).transpose();
  for (int t = 0; t < y.rows(); ++t) y.row(t) += b.as_matrix(1, k).row(0);
  return y;
}

template <typename T>
struct LinearGrads {
  Mat<T> dx;
  Tensor<T> dw, db;
};

template <typename T>
LinearGrads<T> linear_backward(const Mat<T>& dy, const Mat<T>& x, const Tensor<T>& w) {
  int k = w.shape[0], d = w.shape[1];
  LinearGrads<T> g;
  g.dw = Tensor<T>(w.shape);
  g.db = Tensor<T>({k});
  g.dw.as_matrix(k, d).noalias() = dy.transpose() * x;
  g.db.as_matrix(1, k).noalias() = dy.colwise().sum();
  g.dx = dy * w.as_matrix(k, d);
  return g;
}

// ---------------------------------------------------------------------------
// row-wise log-softmax with max subtraction
// ---------------------------------------------------------------------------

template <typename T>
Mat<T> log_softmax(const Mat<T>& logits) {
  Mat<T> y = logits;
  for (int t = 0; t < y.rows(); ++t) {
    T mx = y.row(t).maxCoeff();
    T lse = std::log((y.row(t).array() - mx).exp().sum()) + mx;
    y.row(t).array() -= lse;
  }
  return y;
}

template <typename T>
Mat<T> log_softmax_backward(const Mat<T>& dy, const Mat<T>& logprobs) {
  Mat<T> dx = dy;
  for (int t = 0; t < dx.rows(); ++t) {
    T s = dy.row(t).sum();
    dx.row(t).array() -= logprobs.row(t).array().exp() * s;
  }
  return dx;
}

}  // namespace ctct
