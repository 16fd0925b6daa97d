#pragma once

#include "ctct/tensor.hpp"

namespace ctct {

// Standard LSTM cell, no peepholes. Gate rows in wx/wh/b order: input,
// forget, candidate, output. wx [4h,D], wh [4h,h], b [4h].

template <typename T>
struct LstmParams {
  Tensor<T> wx, wh, b;

  int hidden() const { return wh.shape[1]; }
  int input_dim() const { return wx.shape[1]; }
};

template <typename T>
struct LstmGrads {
  Mat<T> dx;
  Tensor<T> dwx, dwh, db;
};

template <typename T>
struct LstmCache {
  Mat<T> x;                    // [T,D]
  Mat<T> h, c;                 // [T,h]
  Mat<T> gi, gf, gg, go;       // activated gates, [T,h]
};

namespace detail {
template <typename T>
T sigmoid(T v) {
  return T(1) / (T(1) + std::exp(-v));
}
}  // namespace detail

template <typename T>
Mat<T> lstm_forward(const Mat<T>& x, const LstmParams<T>& p, LstmCache<T>* cache) {
  const int steps = static_cast<int>(x.rows());
  const int h = p.hidden();
  if (x.cols() != p.input_dim()) throw Error(ErrorKind::ShapeError, "lstm input dim mismatch");
  auto wx = p.wx.as_matrix(4 * h, p.input_dim());
  auto wh = p.wh.as_matrix(4 * h, h);
  auto b = p.b.as_matrix(4 * h, 1);

  Mat<T> hs = Mat<T>::Zero(steps, h), cs = Mat<T>::Zero(steps, h);
  Mat<T> gi(steps, h), gf(steps, h), gg(steps, h), go(steps, h);
  Eigen::Matrix<T, Eigen::Dynamic, 1> prev_h = Eigen::Matrix<T, Eigen::Dynamic, 1>::Zero(h);
  Eigen::Matrix<T, Eigen::Dynamic, 1> prev_c = Eigen::Matrix<T, Eigen::Dynamic, 1>::Zero(h);

  // preactivations for every step in one GEMM
  Mat<T> pre_x = x * wx.transpose();  // [T, 4h]
  for (int t = 0; t < steps; ++t) {
    Eigen::Matrix<T, Eigen::Dynamic, 1> a =
        pre_x.row(t).transpose() + wh * prev_h + b;
    for (int j = 0; j < h; ++j) {
      T i = detail::sigmoid(a(j));
      T f = detail::sigmoid(a(h + j));
      T g = std::tanh(a(2 * h + j));
      T o = detail::sigmoid(a(3 * h + j));
      T c = f * prev_c(j) + i * g;
      gi(t, j) = i;
      gf(t, j) = f;
      gg(t, j) = g;
      go(t, j) = o;
      cs(t, j) = c;
      hs(t, j) = o * std::tanh(c);
    }
    prev_h = hs.row(t).transpose();
    prev_c = cs.row(t).transpose();
  }
  if (cache) {
    cache->x = x;
    cache->h = hs;
    cache->c = cs;
    cache->gi = std::move(gi);
    cache->gf = std::move(gf);
    cache->gg = std::move(gg);
    cache->go = std::move(go);
  }
  return hs;
}

// Exact BPTT through the unrolled cell.
template <typename T>
LstmGrads<T> lstm_backward(const Mat<T>& dh_out, const LstmParams<T>& p,
                           const LstmCache<T>& cc) {
  const int steps = static_cast<int>(cc.x.rows());
  const int h = p.hidden();
  const int d = p.input_dim();
  auto wh = p.wh.as_matrix(4 * h, h);

  LstmGrads<T> g;
  g.dx = Mat<T>::Zero(steps, d);
  g.dwx = Tensor<T>(p.wx.shape);
  g.dwh = Tensor<T>(p.wh.shape);
  g.db = Tensor<T>(p.b.shape);
  auto dwh = g.dwh.as_matrix(4 * h, h);
  auto db = g.db.as_matrix(4 * h, 1);

  Mat<T> da_all = Mat<T>::Zero(steps, 4 * h);  // preactivation grads
  Eigen::Matrix<T, Eigen::Dynamic, 1> dh_next = Eigen::Matrix<T, Eigen::Dynamic, 1>::Zero(h);
  Eigen::Matrix<T, Eigen::Dynamic, 1> dc_next = Eigen::Matrix<T, Eigen::Dynamic, 1>::Zero(h);

  for (int t = steps - 1; t >= 0; --t) {
    Eigen::Matrix<T, Eigen::Dynamic, 1> da(4 * h);
    for (int j = 0; j < h; ++j) {
      T dh = dh_out(t, j) + dh_next(j);
      T c = cc.c(t, j);
      T tc = std::tanh(c);
      T o = cc.go(t, j), i = cc.gi(t, j), f = cc.gf(t, j), gg = cc.gg(t, j);
      T dc = dh * o * (1 - tc * tc) + dc_next(j);
      T prev_c = t > 0 ? cc.c(t - 1, j) : T(0);
      da(j) = dc * gg * i * (1 - i);                 // input gate
      da(h + j) = dc * prev_c * f * (1 - f);         // forget gate
      da(2 * h + j) = dc * i * (1 - gg * gg);        // candidate
      da(3 * h + j) = dh * tc * o * (1 - o);         // output gate
      dc_next(j) = dc * f;
    }
    da_all.row(t) = da.transpose();
    dh_next = wh.transpose() * da;
    db += da;
    if (t > 0) dwh += da * cc.h.row(t - 1);
  }
  g.dwx.as_matrix(4 * h, d).noalias() = da_all.transpose() * cc.x;
  g.dx.noalias() = da_all * p.wx.as_matrix(4 * h, d);
  return g;
}

// Bidirectional layer: forward pass plus a pass over the reversed sequence,
// outputs concatenated per timestep to [T, 2h].

template <typename T>
struct BlstmParams {
  LstmParams<T> fw, bw;
};

template <typename T>
struct BlstmCache {
  LstmCache<T> fw, bw;
};

template <typename T>
Mat<T> blstm_forward(const Mat<T>& x, const BlstmParams<T>& p, BlstmCache<T>* cache) {
  const int steps = static_cast<int>(x.rows());
  const int h = p.fw.hidden();
  Mat<T> hf = lstm_forward(x, p.fw, cache ? &cache->fw : nullptr);
  Mat<T> xr = x.colwise().reverse();
  Mat<T> hb = lstm_forward(xr, p.bw, cache ? &cache->bw : nullptr);
  Mat<T> y(steps, 2 * h);
  for (int t = 0; t < steps; ++t) {
    y.row(t).head(h) = hf.row(t);
    y.row(t).tail(h) = hb.row(steps - 1 - t);
  }
  return y;
}

template <typename T>
struct BlstmGrads {
  Mat<T> dx;
  LstmGrads<T> fw, bw;
};

template <typename T>
BlstmGrads<T> blstm_backward(const Mat<T>& dy, const BlstmParams<T>& p,
                             const BlstmCache<T>& cc) {
  const int steps = static_cast<int>(dy.rows());
  const int h = p.fw.hidden();
  Mat<T> dhf(steps, h), dhb(steps, h);
  for (int t = 0; t < steps; ++t) {
    dhf.row(t) = dy.row(t).head(h);
    dhb.row(steps - 1 - t) = dy.row(t).tail(h);
  }
  BlstmGrads<T> g;
  g.fw = lstm_backward(dhf, p.fw, cc.fw);
  g.bw = lstm_backward(dhb, p.bw, cc.bw);
  g.dx = g.fw.dx + Mat<T>(g.bw.dx.colwise().reverse());
  return g;
}

}  // namespace ctct
