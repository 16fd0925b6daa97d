#pragma once

// Implementation of ModelConfig and Model<T>. Included from model.hpp.

#include <sstream>

namespace ctct {

inline std::vector<StackItem> ModelConfig::parse_stack(const std::string& text) {
  std::vector<StackItem> stack;
  std::istringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (tok.empty()) continue;
    std::vector<std::string> parts;
    std::istringstream ts(tok);
    std::string p;
    while (std::getline(ts, p, ':')) parts.push_back(p);
    StackItem item;
    try {
      if (parts[0] == "conv" && parts.size() == 4) {
        item.kind = StackItem::Kind::Conv;
        item.channels = std::stoi(parts[1]);
        item.kernel = std::stoi(parts[2]);
        item.pad = std::stoi(parts[3]);
      } else if (parts[0] == "pool" && parts.size() == 3) {
        item.kind = StackItem::Kind::Pool;
        item.pool_h = std::stoi(parts[1]);
        item.pool_w = std::stoi(parts[2]);
      } else if (parts[0] == "bn" && parts.size() == 1) {
        item.kind = StackItem::Kind::BatchNorm;
      } else {
        throw std::invalid_argument(tok);
      }
    } catch (const std::exception&) {
      throw Error(ErrorKind::InvalidConfig, "bad cnn_stack token '" + tok + "'");
    }
    stack.push_back(item);
  }
  if (stack.empty()) throw Error(ErrorKind::InvalidConfig, "empty cnn_stack");
  return stack;
}

inline std::string ModelConfig::stack_string() const {
  std::string out;
  for (const StackItem& it : stack) {
    if (!out.empty()) out += ",";
    switch (it.kind) {
      case StackItem::Kind::Conv:
        out += "conv:" + std::to_string(it.channels) + ":" + std::to_string(it.kernel) + ":" +
               std::to_string(it.pad);
        break;
      case StackItem::Kind::Pool:
        out += "pool:" + std::to_string(it.pool_h) + ":" + std::to_string(it.pool_w);
        break;
      case StackItem::Kind::BatchNorm:
        out += "bn";
        break;
    }
  }
  return out;
}

inline const std::set<std::string>& ModelConfig::known_keys() {
  static const std::set<std::string> keys = {"input_height", "variant",   "cnn_stack",
                                             "rnn_layers",   "rnn_size", "rnn_per_direction",
                                             "bn_eps",       "bn_momentum"};
  return keys;
}

inline ModelConfig ModelConfig::from_config(const KeyValueConfig& cfg, int num_classes) {
  ModelConfig mc;
  mc.input_height = static_cast<int>(cfg.get_int("input_height", 32));
  mc.variant = cfg.get_string("variant", "hybrid");
  mc.stack = parse_stack(cfg.get_string("cnn_stack", kDefaultCnnStack));
  mc.rnn_layers = static_cast<int>(cfg.get_int("rnn_layers", 2));
  mc.rnn_size = static_cast<int>(cfg.get_int("rnn_size", 512));
  mc.rnn_per_direction = cfg.get_bool("rnn_per_direction", false);
  mc.bn_eps = cfg.get_double("bn_eps", 1e-5);
  mc.bn_momentum = cfg.get_double("bn_momentum", 0.9);
  mc.num_classes = num_classes;
  mc.validate();
  return mc;
}

inline void ModelConfig::to_config(KeyValueConfig& cfg) const {
  cfg.set("input_height", std::to_string(input_height));
  cfg.set("variant", variant);
  cfg.set("cnn_stack", stack_string());
  cfg.set("rnn_layers", std::to_string(rnn_layers));
  cfg.set("rnn_size", std::to_string(rnn_size));
  cfg.set("rnn_per_direction", rnn_per_direction ? "true" : "false");
  cfg.set("bn_eps", std::to_string(bn_eps));
  cfg.set("bn_momentum", std::to_string(bn_momentum));
}

inline std::pair<int, int> ModelConfig::conv_output_shape(int in_h, int in_w) const {
  int h = in_h, w = in_w;
  for (const StackItem& it : stack) {
    switch (it.kind) {
      case StackItem::Kind::Conv:
        h = h + 2 * it.pad - it.kernel + 1;
        w = w + 2 * it.pad - it.kernel + 1;
        break;
      case StackItem::Kind::Pool:
        if (h % it.pool_h || w % it.pool_w)
          throw Error(ErrorKind::ShapeError, "pool input " + std::to_string(h) + "x" +
                                                 std::to_string(w) + " not divisible by window");
        h /= it.pool_h;
        w /= it.pool_w;
        break;
      case StackItem::Kind::BatchNorm:
        break;
    }
    if (h < 1 || w < 1)
      throw Error(ErrorKind::ShapeError, "conv stack collapses the feature map");
  }
  return {h, w};
}

inline int ModelConfig::conv_output_channels() const {
  int c = 1;
  for (const StackItem& it : stack)
    if (it.kind == StackItem::Kind::Conv) c = it.channels;
  return c;
}

inline int ModelConfig::width_multiple() const {
  int m = 1;
  for (const StackItem& it : stack)
    if (it.kind == StackItem::Kind::Pool) m *= it.pool_w;
  return m;
}

inline int ModelConfig::min_input_width() const {
  if (variant == "rnn-only") return 1;
  int m = width_multiple();
  for (int w = m; w <= 64 * m; w += m) {
    try {
      conv_output_shape(input_height, w);
      return w;
    } catch (const Error&) {
    }
  }
  throw Error(ErrorKind::InvalidConfig, "conv stack admits no input width");
}

inline int ModelConfig::timesteps_for_width(int w) const {
  if (variant == "rnn-only") return w;
  int m = width_multiple();
  int padded = std::max(((w + m - 1) / m) * m, min_input_width());
  return conv_output_shape(input_height, padded).second;
}

inline void ModelConfig::validate() const {
  if (variant != "hybrid" && variant != "rnn-only")
    throw Error(ErrorKind::InvalidConfig, "variant must be hybrid or rnn-only");
  if (num_classes < 2) throw Error(ErrorKind::InvalidConfig, "need at least one label class");
  if (rnn_layers < 1 || rnn_size < 2 || input_height < 1)
    throw Error(ErrorKind::InvalidConfig, "bad rnn/input configuration");
  hidden_per_direction();  // throws on odd concatenated size
  if (variant == "hybrid") {
    bool after_conv = false;
    for (const StackItem& it : stack) {
      if (it.kind == StackItem::Kind::BatchNorm && !after_conv)
        throw Error(ErrorKind::InvalidConfig, "bn must follow a conv layer");
      after_conv = it.kind == StackItem::Kind::Conv;
    }
    int h = conv_output_shape(input_height, min_input_width()).first;
    if (h != 1)
      throw Error(ErrorKind::InvalidConfig,
                  "conv stack maps input height " + std::to_string(input_height) + " to " +
                      std::to_string(h) + ", need exactly 1");
  }
}

// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> Model<T>::image_to_tensor(const Image& img) const {
  if (img.height != cfg_.input_height)
    throw Error(ErrorKind::ShapeError, "input height " + std::to_string(img.height) +
                                           " != configured " + std::to_string(cfg_.input_height));
  int w = img.width;
  if (cfg_.variant == "hybrid") {
    int m = cfg_.width_multiple();
    int min_w = cfg_.min_input_width();
    w = std::max(((w + m - 1) / m) * m, min_w);
  }
  // normalization (x - 0.5) / 0.5; padding columns sit at normalized zero
  Tensor<T> x({1, img.height, w});
  for (int y = 0; y < img.height; ++y)
    for (int c = 0; c < img.width; ++c)
      x.at3(0, y, c) = (static_cast<T>(img.at(y, c)) - T(0.5)) / T(0.5);
  return x;
}

template <typename T>
void Model<T>::init_params(uint64_t seed) {
  params_.clear();
  Rng rng(seed);
  auto xavier = [&](Tensor<T>& t, int fan_in, int fan_out) {
    double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (T& v : t.data) v = static_cast<T>(rng.uniform(-limit, limit));
  };

  if (cfg_.variant == "hybrid") {
    int cin = 1, conv_idx = 0, last_conv = 0;
    for (const StackItem& it : cfg_.stack) {
      if (it.kind == StackItem::Kind::Conv) {
        ++conv_idx;
        last_conv = conv_idx;
        std::string base = "conv" + std::to_string(conv_idx);
        Tensor<T> w({it.channels, cin, it.kernel, it.kernel});
        xavier(w, cin * it.kernel * it.kernel, it.channels * it.kernel * it.kernel);
        params_[base + "/w"] = std::move(w);
        params_[base + "/b"] = Tensor<T>({it.channels});
        cin = it.channels;
      } else if (it.kind == StackItem::Kind::BatchNorm) {
        std::string base = "bn" + std::to_string(last_conv);
        Tensor<T> gamma({cin});
        for (T& v : gamma.data) v = T(1);
        params_[base + "/gamma"] = std::move(gamma);
        params_[base + "/beta"] = Tensor<T>({cin});
        params_[base + "/mean"] = Tensor<T>({cin});
        Tensor<T> var({cin});
        for (T& v : var.data) v = T(1);
        params_[base + "/var"] = std::move(var);
      }
    }
  }

  int d = cfg_.variant == "hybrid" ? cfg_.conv_output_channels() : cfg_.input_height;
  int h = cfg_.hidden_per_direction();
  for (int layer = 1; layer <= cfg_.rnn_layers; ++layer) {
    for (const char* dir : {"fw", "bw"}) {
      std::string base = "blstm" + std::to_string(layer) + "/" + dir + "/";
      Tensor<T> wx({4 * h, d});
      xavier(wx, d, 4 * h);
      params_[base + "wx"] = std::move(wx);
      Tensor<T> wh({4 * h, h});
      xavier(wh, h, 4 * h);
      params_[base + "wh"] = std::move(wh);
      Tensor<T> b({4 * h});
      for (int j = h; j < 2 * h; ++j) b[j] = T(1);  // forget gate bias
      params_[base + "b"] = std::move(b);
    }
    d = 2 * h;
  }

  Tensor<T> fw({cfg_.num_classes, d});
  xavier(fw, d, cfg_.num_classes);
  params_["fc/w"] = std::move(fw);
  params_["fc/b"] = Tensor<T>({cfg_.num_classes});
}

template <typename T>
std::vector<std::string> Model<T>::trainable_names() const {
  std::vector<std::string> names;
  for (const auto& [name, t] : params_) {
    if (name.size() > 5 && name.compare(name.size() - 5, 5, "/mean") == 0) continue;
    if (name.size() > 4 && name.compare(name.size() - 4, 4, "/var") == 0) continue;
    names.push_back(name);
  }
  return names;
}

template <typename T>
BlstmParams<T> Model<T>::blstm_params(int layer) const {
  auto get = [&](const std::string& n) -> const Tensor<T>& {
    auto it = params_.find(n);
    if (it == params_.end()) throw Error(ErrorKind::BadCheckpoint, "missing parameter " + n);
    return it->second;
  };
  std::string base = "blstm" + std::to_string(layer) + "/";
  BlstmParams<T> p;
  p.fw = {get(base + "fw/wx"), get(base + "fw/wh"), get(base + "fw/b")};
  p.bw = {get(base + "bw/wx"), get(base + "bw/wh"), get(base + "bw/b")};
  return p;
}

template <typename T>
Mat<T> Model<T>::forward(const Image& img, bool train, ModelCache<T>* cache,
                         std::map<std::string, Tensor<T>>* activations) const {
  auto get = [&](const std::string& n) -> const Tensor<T>& {
    auto it = params_.find(n);
    if (it == params_.end()) throw Error(ErrorKind::BadCheckpoint, "missing parameter " + n);
    return it->second;
  };
  auto* self = const_cast<Model<T>*>(this);  // bn running stats update in train mode
  Tensor<T> x = image_to_tensor(img);
  if (cache) cache->input = x;
  if (activations) (*activations)["input"] = x;

  Mat<T> seq;
  if (cfg_.variant == "hybrid") {
    int conv_idx = 0, pool_idx = 0, last_conv = 0;
    for (size_t i = 0; i < cfg_.stack.size(); ++i) {
      const StackItem& it = cfg_.stack[i];
      if (it.kind == StackItem::Kind::Conv) {
        ++conv_idx;
        last_conv = conv_idx;
        std::string base = "conv" + std::to_string(conv_idx);
        Conv2dCache<T> cc;
        x = conv2d_forward(x, get(base + "/w"), get(base + "/b"), it.pad, 1,
                           cache ? &cc : nullptr);
        if (cache) cache->conv.push_back(std::move(cc));
        bool bn_next = i + 1 < cfg_.stack.size() &&
                       cfg_.stack[i + 1].kind == StackItem::Kind::BatchNorm;
        if (!bn_next) {
          if (cache) cache->conv_pre_relu.push_back(x);
          x = relu_forward(x);
          if (activations) (*activations)[base] = x;
        }
      } else if (it.kind == StackItem::Kind::BatchNorm) {
        std::string base = "bn" + std::to_string(last_conv);
        BatchNormCache<T> bc;
        int c = x.shape[0], s = x.shape[1] * x.shape[2];
        x = batchnorm_forward(x, 1, c, s, get(base + "/gamma"), get(base + "/beta"),
                              static_cast<T>(cfg_.bn_eps), train,
                              self->params_[base + "/mean"], self->params_[base + "/var"],
                              static_cast<T>(cfg_.bn_momentum), cache ? &bc : nullptr);
        if (cache) cache->bn.push_back(std::move(bc));
        if (activations) (*activations)[base] = x;
        if (cache) cache->conv_pre_relu.push_back(x);
        x = relu_forward(x);
        if (activations) (*activations)["conv" + std::to_string(last_conv)] = x;
      } else {
        ++pool_idx;
        MaxPoolCache<T> pc;
        x = maxpool2d_forward(x, it.pool_h, it.pool_w, cache ? &pc : nullptr);
        if (cache) cache->pool.push_back(std::move(pc));
        if (activations) (*activations)["pool" + std::to_string(pool_idx)] = x;
      }
    }
    seq = feature_columns(x);
  } else {
    // raw pixel columns straight into the recurrent stack
    int h = x.shape[1], w = x.shape[2];
    seq = Mat<T>(w, h);
    for (int t = 0; t < w; ++t)
      for (int r = 0; r < h; ++r) seq(t, r) = x.at3(0, r, t);
  }

  for (int layer = 1; layer <= cfg_.rnn_layers; ++layer) {
    if (cache) cache->blstm_in.push_back(seq);
    BlstmCache<T> bc;
    BlstmParams<T> p = blstm_params(layer);
    seq = blstm_forward(seq, p, cache ? &bc : nullptr);
    if (cache) cache->blstm.push_back(std::move(bc));
    if (activations) {
      Tensor<T> act({static_cast<int>(seq.cols()), 1, static_cast<int>(seq.rows())});
      for (int t = 0; t < seq.rows(); ++t)
        for (int c = 0; c < seq.cols(); ++c) act.at3(c, 0, t) = seq(t, c);
      (*activations)["blstm" + std::to_string(layer)] = act;
    }
  }

  if (cache) cache->fc_in = seq;
  Mat<T> logits = linear_forward(seq, get("fc/w"), get("fc/b"));
  Mat<T> logprobs = log_softmax(logits);
  if (cache) {
    cache->logits = logits;
    cache->logprobs = logprobs;
  }
  return logprobs;
}

template <typename T>
ParamMap<T> Model<T>::backward(const Mat<T>& dlogits, const ModelCache<T>& cache) const {
  auto get = [&](const std::string& n) -> const Tensor<T>& { return params_.at(n); };
  ParamMap<T> grads;

  LinearGrads<T> lg = linear_backward(dlogits, cache.fc_in, get("fc/w"));
  grads["fc/w"] = std::move(lg.dw);
  grads["fc/b"] = std::move(lg.db);
  Mat<T> dseq = std::move(lg.dx);

  for (int layer = cfg_.rnn_layers; layer >= 1; --layer) {
    BlstmParams<T> p = blstm_params(layer);
    BlstmGrads<T> bg = blstm_backward(dseq, p, cache.blstm[layer - 1]);
    std::string base = "blstm" + std::to_string(layer) + "/";
    grads[base + "fw/wx"] = std::move(bg.fw.dwx);
    grads[base + "fw/wh"] = std::move(bg.fw.dwh);
    grads[base + "fw/b"] = std::move(bg.fw.db);
    grads[base + "bw/wx"] = std::move(bg.bw.dwx);
    grads[base + "bw/wh"] = std::move(bg.bw.dwh);
    grads[base + "bw/b"] = std::move(bg.bw.db);
    dseq = std::move(bg.dx);
  }

  if (cfg_.variant == "rnn-only") return grads;

  Tensor<T> dx = feature_columns_backward(dseq);

  int conv_total = 0;
  for (const StackItem& it : cfg_.stack)
    if (it.kind == StackItem::Kind::Conv) ++conv_total;

  int conv_idx = conv_total;
  int pool_idx = static_cast<int>(cache.pool.size());
  int bn_idx = static_cast<int>(cache.bn.size());
  int relu_idx = static_cast<int>(cache.conv_pre_relu.size());

  for (int i = static_cast<int>(cfg_.stack.size()) - 1; i >= 0; --i) {
    const StackItem& it = cfg_.stack[i];
    if (it.kind == StackItem::Kind::Pool) {
      dx = maxpool2d_backward(dx, cache.pool[--pool_idx]);
    } else if (it.kind == StackItem::Kind::BatchNorm) {
      // relu sat on top of this bn
      dx = relu_backward(dx, cache.conv_pre_relu[--relu_idx]);
      int last_conv = 0, ci = 0;
      for (int j = 0; j <= i; ++j)
        if (cfg_.stack[j].kind == StackItem::Kind::Conv) last_conv = ++ci;
      std::string base = "bn" + std::to_string(last_conv);
      BatchNormGrads<T> bg = batchnorm_backward(dx, get(base + "/gamma"), cache.bn[--bn_idx]);
      grads[base + "/gamma"] = std::move(bg.dgamma);
      grads[base + "/beta"] = std::move(bg.dbeta);
      dx = std::move(bg.dx);
    } else {
      bool bn_next =
          i + 1 < static_cast<int>(cfg_.stack.size()) &&
          cfg_.stack[i + 1].kind == StackItem::Kind::BatchNorm;
      if (!bn_next) dx = relu_backward(dx, cache.conv_pre_relu[--relu_idx]);
      std::string base = "conv" + std::to_string(conv_idx--);
      Conv2dGrads<T> cg = conv2d_backward(dx, get(base + "/w"), cache.conv[conv_idx]);
      grads[base + "/w"] = std::move(cg.dw);
      grads[base + "/b"] = std::move(cg.db);
      dx = std::move(cg.dx);
    }
  }
  return grads;
}

template <typename T>
std::vector<std::string> Model<T>::activation_names() const {
  std::vector<std::string> names = {"input"};
  if (cfg_.variant == "hybrid") {
    int conv_idx = 0, pool_idx = 0, last_conv = 0;
    for (const StackItem& it : cfg_.stack) {
      if (it.kind == StackItem::Kind::Conv)
        names.push_back("conv" + std::to_string(last_conv = ++conv_idx));
      else if (it.kind == StackItem::Kind::Pool)
        names.push_back("pool" + std::to_string(++pool_idx));
      else
        names.push_back("bn" + std::to_string(last_conv));
    }
  }
  for (int layer = 1; layer <= cfg_.rnn_layers; ++layer)
    names.push_back("blstm" + std::to_string(layer));
  return names;
}

}  // namespace ctct
