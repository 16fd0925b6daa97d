#include <cmath>

#include "ctct/adadelta.hpp"
#include "ctct/gradcheck.hpp"
#include "ctct/layers.hpp"
#include "ctct/lstm.hpp"
#include "ctct/model.hpp"
#include "ctct/rng.hpp"
#include "doctest.h"

using namespace ctct;

namespace {

void randomize(Tensor<double>& t, Rng& rng, double lo = -1, double hi = 1) {
  for (double& v : t.data) v = rng.uniform(lo, hi);
}

Image random_image(int h, int w, uint64_t seed) {
  Rng rng(seed);
  Image img(h, w);
  for (float& v : img.pixels) v = static_cast<float>(rng.next_double());
  return img;
}

ModelConfig tiny_hybrid_config(int classes) {
  ModelConfig cfg;
  cfg.input_height = 16;
  cfg.stack = ModelConfig::parse_stack("conv:6:3:1,bn,pool:2:2,conv:8:3:1,pool:2:2,pool:2:1,conv:8:2:0");
  cfg.rnn_layers = 1;
  cfg.rnn_size = 8;  // h = 4 per direction
  cfg.num_classes = classes;
  return cfg;
}

}  // namespace

TEST_CASE("conv2d identity kernel") {
  Tensor<double> x({1, 3, 4});
  Rng rng(1);
  randomize(x, rng);
  Tensor<double> w({1, 1, 1, 1});
  w[0] = 1.0;
  Tensor<double> b({1});
  Tensor<double> y = conv2d_forward(x, w, b, 0, 1, static_cast<Conv2dCache<double>*>(nullptr));
  CHECK(y.shape == x.shape);
  for (size_t i = 0; i < x.numel(); ++i) CHECK(y[i] == doctest::Approx(x[i]));
}

TEST_CASE("conv2d all-ones kernel sums the window") {
  Tensor<double> x({1, 2, 2}, {1, 2, 3, 4});
  Tensor<double> w({1, 1, 2, 2}, {1, 1, 1, 1});
  Tensor<double> b({1});
  Tensor<double> y = conv2d_forward(x, w, b, 0, 1, static_cast<Conv2dCache<double>*>(nullptr));
  CHECK(y.shape == std::vector<int>{1, 1, 1});
  CHECK(y[0] == doctest::Approx(10.0));
}

TEST_CASE("conv2d gradients match finite differences") {
  Rng rng(7);
  Tensor<double> x({2, 5, 6}), w({3, 2, 3, 3}), b({3});
  randomize(x, rng);
  randomize(w, rng, -0.5, 0.5);
  randomize(b, rng, -0.1, 0.1);

  auto loss_of = [&](const Tensor<double>& xx, const Tensor<double>& ww,
                     const Tensor<double>& bb) {
    Tensor<double> y = conv2d_forward(xx, ww, bb, 1, 1, static_cast<Conv2dCache<double>*>(nullptr));
    double s = 0;
    for (size_t i = 0; i < y.numel(); ++i) s += y[i] * y[i];  // quadratic head
    return 0.5 * s;
  };
  Conv2dCache<double> cache;
  Tensor<double> y = conv2d_forward(x, w, b, 1, 1, &cache);
  Conv2dGrads<double> g = conv2d_backward(y, w, cache);  // dL/dy = y

  const double eps = 1e-6;
  double max_rel = 0;
  auto check_tensor = [&](Tensor<double>& t, const Tensor<double>& analytic) {
    for (size_t i = 0; i < t.numel(); i += std::max<size_t>(1, t.numel() / 40)) {
      double saved = t[i];
      t[i] = saved + eps;
      double up = loss_of(x, w, b);
      t[i] = saved - eps;
      double down = loss_of(x, w, b);
      t[i] = saved;
      max_rel = std::max(max_rel, grad_rel_err(analytic[i], (up - down) / (2 * eps)));
    }
  };
  check_tensor(x, g.dx);
  check_tensor(w, g.dw);
  check_tensor(b, g.db);
  CHECK(max_rel <= 1e-6);
}

TEST_CASE("conv2d is linear in its input") {
  Rng rng(21);
  Tensor<double> x1({1, 4, 6}), x2({1, 4, 6}), w({2, 1, 3, 3}), b({2});
  randomize(x1, rng);
  randomize(x2, rng);
  randomize(w, rng);
  const double a = 1.7, c = -0.6;
  Tensor<double> mix({1, 4, 6});
  for (size_t i = 0; i < mix.numel(); ++i) mix[i] = a * x1[i] + c * x2[i];
  auto f = [&](const Tensor<double>& in) {
    return conv2d_forward(in, w, b, 1, 1, static_cast<Conv2dCache<double>*>(nullptr));
  };
  Tensor<double> lhs = f(mix), r1 = f(x1), r2 = f(x2);
  for (size_t i = 0; i < lhs.numel(); ++i)
    CHECK(std::abs(lhs[i] - (a * r1[i] + c * r2[i])) <= 1e-9);
}

TEST_CASE("maxpool square and rectangular windows") {
  Tensor<double> x({1, 2, 2}, {1, 2, 3, 4});
  Tensor<double> sq = maxpool2d_forward(x, 2, 2, static_cast<MaxPoolCache<double>*>(nullptr));
  CHECK(sq.shape == std::vector<int>{1, 1, 1});
  CHECK(sq[0] == 4.0);

  Tensor<double> rect = maxpool2d_forward(x, 2, 1, static_cast<MaxPoolCache<double>*>(nullptr));
  CHECK(rect.shape == std::vector<int>{1, 1, 2});  // width preserved
  CHECK(rect[0] == 3.0);
  CHECK(rect[1] == 4.0);

  CHECK_THROWS_AS(maxpool2d_forward(Tensor<double>({1, 3, 2}), 2, 2,
                                    static_cast<MaxPoolCache<double>*>(nullptr)),
                  Error);
}

TEST_CASE("rectangular pooling keeps one timestep per input column") {
  // the wider-features property: 2x1 windows halve height only
  Rng rng(3);
  Tensor<double> x({4, 8, 30});
  randomize(x, rng);
  Tensor<double> y = maxpool2d_forward(x, 2, 1, static_cast<MaxPoolCache<double>*>(nullptr));
  CHECK(y.shape == std::vector<int>{4, 4, 30});
}

TEST_CASE("maxpool output bounded by input max and backward routes to argmax") {
  Rng rng(5);
  Tensor<double> x({2, 4, 6});
  randomize(x, rng);
  MaxPoolCache<double> cache;
  Tensor<double> y = maxpool2d_forward(x, 2, 2, &cache);
  double in_max = *std::max_element(x.data.begin(), x.data.end());
  double out_max = *std::max_element(y.data.begin(), y.data.end());
  CHECK(out_max == doctest::Approx(in_max));
  for (double v : y.data) CHECK(v <= in_max + 1e-12);

  Tensor<double> dy(y.shape);
  for (double& v : dy.data) v = 1.0;
  Tensor<double> dx = maxpool2d_backward(dy, cache);
  double total = 0;
  for (double v : dx.data) total += v;
  CHECK(total == doctest::Approx(static_cast<double>(y.numel())));
  // gradient lands only on window maxima
  for (size_t i = 0; i < dx.numel(); ++i)
    if (dx[i] != 0)
      CHECK(std::find(cache.argmax.begin(), cache.argmax.end(), static_cast<int>(i)) !=
            cache.argmax.end());
}

TEST_CASE("batchnorm degenerate cases") {
  Tensor<double> gamma({2}), beta({2}), rmean({2}), rvar({2});
  gamma.data = {1, 1};
  beta.data = {0.5, -0.25};
  Tensor<double> x({4, 2, 3});
  for (double& v : x.data) v = 3.7;  // constant input

  Tensor<double> y = batchnorm_forward(x, 4, 2, 3, gamma, beta, 1e-5, true, rmean, rvar, 0.9,
                                       static_cast<BatchNormCache<double>*>(nullptr));
  for (int b = 0; b < 4; ++b)
    for (int i = 0; i < 3; ++i) {
      CHECK(y[(b * 2 + 0) * 3 + i] == doctest::Approx(0.5));   // zero variance -> beta
      CHECK(y[(b * 2 + 1) * 3 + i] == doctest::Approx(-0.25));
    }

  gamma.data = {0, 0};
  Rng rng(2);
  randomize(x, rng);
  y = batchnorm_forward(x, 4, 2, 3, gamma, beta, 1e-5, true, rmean, rvar, 0.9,
                        static_cast<BatchNormCache<double>*>(nullptr));
  for (int b = 0; b < 4; ++b)
    for (int i = 0; i < 3; ++i) CHECK(y[(b * 2 + 0) * 3 + i] == doctest::Approx(0.5));
}

TEST_CASE("batchnorm standardizes batch statistics") {
  Rng rng(9);
  const int n = 8, c = 3, s = 5;
  Tensor<double> x({n, c, s}), gamma({c}), beta({c}), rmean({c}), rvar({c});
  for (double& v : gamma.data) v = 1;
  for (double& v : x.data) v = rng.uniform(-3, 3);
  Tensor<double> y = batchnorm_forward(x, n, c, s, gamma, beta, 1e-5, true, rmean, rvar, 0.9,
                                       static_cast<BatchNormCache<double>*>(nullptr));
  for (int ch = 0; ch < c; ++ch) {
    double mean = 0, var = 0;
    for (int b = 0; b < n; ++b)
      for (int i = 0; i < s; ++i) mean += y[(b * c + ch) * s + i];
    mean /= n * s;
    for (int b = 0; b < n; ++b)
      for (int i = 0; i < s; ++i) {
        double d = y[(b * c + ch) * s + i] - mean;
        var += d * d;
      }
    var /= n * s;
    CHECK(std::abs(mean) <= 1e-6);
    CHECK(std::abs(var - 1.0) <= 1e-3);
  }
}

TEST_CASE("batchnorm backward matches finite differences") {
  Rng rng(13);
  const int n = 2, c = 2, s = 4;
  Tensor<double> x({n, c, s}), gamma({c}), beta({c}), rmean({c}), rvar({c});
  randomize(x, rng);
  gamma.data = {1.3, 0.7};
  beta.data = {0.1, -0.2};

  auto loss_of = [&]() {
    Tensor<double> rm = rmean, rv = rvar;
    Tensor<double> y = batchnorm_forward(x, n, c, s, gamma, beta, 1e-5, true, rm, rv, 0.9,
                                         static_cast<BatchNormCache<double>*>(nullptr));
    double l = 0;
    for (size_t i = 0; i < y.numel(); ++i) l += std::sin(static_cast<double>(i)) * y[i];
    return l;
  };
  BatchNormCache<double> cache;
  Tensor<double> rm = rmean, rv = rvar;
  Tensor<double> y = batchnorm_forward(x, n, c, s, gamma, beta, 1e-5, true, rm, rv, 0.9, &cache);
  Tensor<double> dy(y.shape);
  for (size_t i = 0; i < dy.numel(); ++i) dy[i] = std::sin(static_cast<double>(i));
  BatchNormGrads<double> g = batchnorm_backward(dy, gamma, cache);

  const double eps = 1e-6;
  double max_rel = 0;
  auto fd = [&](Tensor<double>& t, const Tensor<double>& analytic) {
    for (size_t i = 0; i < t.numel(); ++i) {
      double saved = t[i];
      t[i] = saved + eps;
      double up = loss_of();
      t[i] = saved - eps;
      double down = loss_of();
      t[i] = saved;
      max_rel = std::max(max_rel, grad_rel_err(analytic[i], (up - down) / (2 * eps)));
    }
  };
  fd(x, g.dx);
  fd(gamma, g.dgamma);
  fd(beta, g.dbeta);
  CHECK(max_rel <= 1e-6);
}

TEST_CASE("feature_columns transposes the height-1 map") {
  Tensor<double> map({2, 1, 3}, {1, 2, 3, 4, 5, 6});
  Mat<double> seq = feature_columns(map);
  REQUIRE(seq.rows() == 3);
  REQUIRE(seq.cols() == 2);
  CHECK(seq(0, 0) == 1);
  CHECK(seq(0, 1) == 4);
  CHECK(seq(1, 0) == 2);
  CHECK(seq(1, 1) == 5);
  CHECK(seq(2, 0) == 3);
  CHECK(seq(2, 1) == 6);

  Tensor<double> one({5, 1, 1});
  CHECK(feature_columns(one).rows() == 1);

  CHECK_THROWS_AS(feature_columns(Tensor<double>({2, 2, 3})), Error);
}

TEST_CASE("blstm zero network emits zeros") {
  BlstmParams<double> p;
  p.fw = {Tensor<double>({8, 3}), Tensor<double>({8, 2}), Tensor<double>({8})};
  p.bw = {Tensor<double>({8, 3}), Tensor<double>({8, 2}), Tensor<double>({8})};
  Mat<double> x = Mat<double>::Random(5, 3);
  Mat<double> y = blstm_forward(x, p, static_cast<BlstmCache<double>*>(nullptr));
  CHECK(y.rows() == 5);
  CHECK(y.cols() == 4);
  CHECK(y.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("blstm reversal symmetry") {
  Rng rng(17);
  const int h = 3, d = 4, steps = 6;
  BlstmParams<double> p;
  p.fw = {Tensor<double>({4 * h, d}), Tensor<double>({4 * h, h}), Tensor<double>({4 * h})};
  p.bw = p.fw;
  // identical weights in both directions so reversal swaps the halves exactly
  randomize(p.fw.wx, rng);
  randomize(p.fw.wh, rng);
  randomize(p.fw.b, rng);
  p.bw = p.fw;

  Mat<double> x = Mat<double>::Random(steps, d);
  Mat<double> y = blstm_forward(x, p, static_cast<BlstmCache<double>*>(nullptr));
  Mat<double> xr = x.colwise().reverse();
  Mat<double> yr = blstm_forward(xr, p, static_cast<BlstmCache<double>*>(nullptr));
  for (int t = 0; t < steps; ++t)
    for (int j = 0; j < h; ++j) {
      CHECK(yr(t, j) == doctest::Approx(y(steps - 1 - t, h + j)));
      CHECK(yr(t, h + j) == doctest::Approx(y(steps - 1 - t, j)));
    }
}

TEST_CASE("blstm BPTT gradients match finite differences") {
  Rng rng(23);
  const int h = 2, d = 3, steps = 4;
  BlstmParams<double> p;
  for (LstmParams<double>* lp : {&p.fw, &p.bw}) {
    lp->wx = Tensor<double>({4 * h, d});
    lp->wh = Tensor<double>({4 * h, h});
    lp->b = Tensor<double>({4 * h});
    randomize(lp->wx, rng);
    randomize(lp->wh, rng);
    randomize(lp->b, rng, -0.2, 0.2);
  }
  Mat<double> x(steps, d);
  for (int t = 0; t < steps; ++t)
    for (int j = 0; j < d; ++j) x(t, j) = rng.uniform(-1, 1);
  Mat<double> dy(steps, 2 * h);
  for (int t = 0; t < steps; ++t)
    for (int j = 0; j < 2 * h; ++j) dy(t, j) = rng.uniform(-1, 1);

  auto loss_of = [&]() {
    Mat<double> y = blstm_forward(x, p, static_cast<BlstmCache<double>*>(nullptr));
    return (y.array() * dy.array()).sum();
  };
  BlstmCache<double> cache;
  blstm_forward(x, p, &cache);
  BlstmGrads<double> g = blstm_backward(dy, p, cache);

  const double eps = 1e-6;
  double max_rel = 0;
  auto fd = [&](double& v, double analytic) {
    double saved = v;
    v = saved + eps;
    double up = loss_of();
    v = saved - eps;
    double down = loss_of();
    v = saved;
    max_rel = std::max(max_rel, grad_rel_err(analytic, (up - down) / (2 * eps)));
  };
  for (size_t i = 0; i < p.fw.wx.numel(); ++i) fd(p.fw.wx[i], g.fw.dwx[i]);
  for (size_t i = 0; i < p.fw.wh.numel(); ++i) fd(p.fw.wh[i], g.fw.dwh[i]);
  for (size_t i = 0; i < p.fw.b.numel(); ++i) fd(p.fw.b[i], g.fw.db[i]);
  for (size_t i = 0; i < p.bw.wx.numel(); ++i) fd(p.bw.wx[i], g.bw.dwx[i]);
  for (int t = 0; t < steps; ++t)
    for (int j = 0; j < d; ++j) fd(x(t, j), g.dx(t, j));
  CHECK(max_rel <= 1e-5);
}

TEST_CASE("log_softmax basics") {
  const int k = 7;
  Mat<double> uniform = Mat<double>::Constant(1, k, 0.42);
  Mat<double> lp = log_softmax(uniform);
  for (int j = 0; j < k; ++j) CHECK(lp(0, j) == doctest::Approx(-std::log(double(k))));

  Mat<double> logits = Mat<double>::Random(4, k);
  Mat<double> shifted = logits;
  shifted.array() += 123.456;
  Mat<double> a = log_softmax(logits), b = log_softmax(shifted);
  CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-9);

  for (int t = 0; t < a.rows(); ++t)
    CHECK(std::abs(a.row(t).array().exp().sum() - 1.0) <= 1e-12);
}

TEST_CASE("linear gradients match finite differences tightly") {
  Rng rng(31);
  Tensor<double> w({4, 3}), b({4});
  randomize(w, rng);
  randomize(b, rng);
  Mat<double> x = Mat<double>::Random(5, 3);
  Mat<double> dy = Mat<double>::Random(5, 4);

  auto loss_of = [&]() { return (linear_forward(x, w, b).array() * dy.array()).sum(); };
  LinearGrads<double> g = linear_backward(dy, x, w);

  const double eps = 1e-6;
  double max_rel = 0;
  auto fd = [&](double& v, double analytic) {
    double saved = v;
    v = saved + eps;
    double up = loss_of();
    v = saved - eps;
    double down = loss_of();
    v = saved;
    max_rel = std::max(max_rel, grad_rel_err(analytic, (up - down) / (2 * eps)));
  };
  for (size_t i = 0; i < w.numel(); ++i) fd(w[i], g.dw[i]);
  for (size_t i = 0; i < b.numel(); ++i) fd(b[i], g.db[i]);
  CHECK(max_rel <= 1e-7);
}

TEST_CASE("default hybrid config maps 32x100 to 24 timesteps") {
  ModelConfig cfg;
  cfg.stack = ModelConfig::parse_stack(kDefaultCnnStack);
  cfg.num_classes = 5;
  cfg.validate();
  CHECK(cfg.timesteps_for_width(100) == 24);
  CHECK(cfg.conv_output_channels() == 512);

  ModelConfig rnn = cfg;
  rnn.variant = "rnn-only";
  CHECK(rnn.timesteps_for_width(100) == 100);
}

TEST_CASE("model_forward emits log-distributions and is deterministic") {
  ModelConfig cfg = tiny_hybrid_config(4);
  Model<double> model(cfg);
  model.init_params(77);
  Image img = random_image(16, 24, 5);
  Mat<double> lp = model.forward(img, true, nullptr);
  CHECK(lp.cols() == 4);
  CHECK(lp.rows() == cfg.timesteps_for_width(24));
  for (int t = 0; t < lp.rows(); ++t) {
    double mx = lp.row(t).maxCoeff();
    double lse = std::log((lp.row(t).array() - mx).exp().sum()) + mx;
    CHECK(std::abs(lse) <= 1e-9);
  }

  Model<double> model2(cfg);
  model2.init_params(77);
  Mat<double> lp2 = model2.forward(img, true, nullptr);
  CHECK((lp - lp2).cwiseAbs().maxCoeff() == 0.0);

  ModelConfig rcfg = cfg;
  rcfg.variant = "rnn-only";
  Model<double> rnn(rcfg);
  rnn.init_params(77);
  Mat<double> rl = rnn.forward(img, true, nullptr);
  CHECK(rl.rows() == img.width);
}

TEST_CASE("adadelta update rules") {
  const double rho = 0.95, eps = 1e-6;

  // zero gradient: parameter frozen, E[g^2] decays
  Tensor<double> x({3}, {1.0, -2.0, 0.5});
  Tensor<double> g({3});
  Tensor<double> eg2({3}, {0.4, 0.1, 0.0});
  Tensor<double> edx2({3}, {0.2, 0.0, 0.3});
  Tensor<double> x0 = x, eg2_0 = eg2, edx2_0 = edx2;
  adadelta_tensor_step(x, g, eg2, edx2, rho, eps, true);
  for (int i = 0; i < 3; ++i) {
    CHECK(x[i] == x0[i]);
    CHECK(eg2[i] == doctest::Approx(rho * eg2_0[i]));
    CHECK(edx2[i] == doctest::Approx(rho * edx2_0[i]));
  }

  // first step from zero state, hand-evaluated
  Tensor<double> xs({1}, {2.0});
  Tensor<double> gs({1}, {0.7});
  Tensor<double> z1({1}), z2({1});
  adadelta_tensor_step(xs, gs, z1, z2, rho, eps, true);
  double expected_dx = -std::sqrt(eps) / std::sqrt((1 - rho) * 0.7 * 0.7 + eps) * 0.7;
  CHECK(xs[0] == doctest::Approx(2.0 + expected_dx));

  // update always opposes the gradient sign
  Rng rng(41);
  Tensor<double> xr({20}), gr({20}), e1({20}), e2({20});
  randomize(xr, rng);
  randomize(e1, rng, 0, 1);
  randomize(e2, rng, 0, 1);
  randomize(gr, rng);
  Tensor<double> before = xr;
  adadelta_tensor_step(xr, gr, e1, e2, rho, eps, true);
  for (int i = 0; i < 20; ++i)
    if (gr[i] != 0) CHECK((xr[i] - before[i]) * gr[i] < 0);

  Tensor<double> bad({1}, {std::nan("")});
  CHECK_THROWS_AS(adadelta_tensor_step(xs, bad, z1, z2, rho, eps, true), Error);
}

TEST_CASE("end-to-end gradient check on tiny hybrid model") {
  Model<double> model(tiny_hybrid_config(4));
  model.init_params(3);
  Image img = random_image(16, 24, 11);
  std::vector<int> target = {1, 3, 2};
  GradCheckReport rep = grad_check_model(model, img, target, 1e-5, 250, 1);
  INFO(rep.summary());
  CHECK(rep.coords_checked >= 200);
  CHECK(rep.max_rel_err <= 1e-4);
}

TEST_CASE("gradient check on rnn-only variant") {
  ModelConfig cfg = tiny_hybrid_config(4);
  cfg.variant = "rnn-only";
  Model<double> model(cfg);
  model.init_params(4);
  Image img = random_image(16, 12, 13);
  std::vector<int> target = {2, 1};
  GradCheckReport rep = grad_check_model(model, img, target, 1e-5, 200, 2);
  INFO(rep.summary());
  CHECK(rep.max_rel_err <= 1e-5);
}

TEST_CASE("corrupted backward is detected (negative control)") {
  Model<double> model(tiny_hybrid_config(4));
  model.init_params(3);
  Image img = random_image(16, 24, 11);
  GradCheckReport rep = grad_check_model(model, img, {1, 3, 2}, 1e-5, 250, 1, /*corrupt=*/true);
  CHECK(rep.max_rel_err > 1e-1);
}
