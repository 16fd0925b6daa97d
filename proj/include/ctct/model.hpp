#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ctct/config.hpp"
#include "ctct/ctc.hpp"
#include "ctct/image.hpp"
#include "ctct/layers.hpp"
#include "ctct/lstm.hpp"
#include "ctct/rng.hpp"
#include "ctct/tensor.hpp"

namespace ctct {

// One element of the convolutional stack description.
struct StackItem {
  enum class Kind { Conv, Pool, BatchNorm } kind;
  int channels = 0;  // conv
  int kernel = 3;    // conv, square
  int pad = 1;       // conv
  int pool_h = 2, pool_w = 2;
};

// Default stack: 7 conv layers (VGG-style 3x3 stages plus a final 2x2 valid
// collapse), square pools after stages 1-2 and rectangular 2x1 pools after
// conv4 and conv5, batch norm after conv3 and conv4.
inline const char* kDefaultCnnStack =
    "conv:64:3:1,pool:2:2,conv:128:3:1,pool:2:2,conv:256:3:1,bn,conv:256:3:1,bn,"
    "pool:2:1,conv:512:3:1,pool:2:1,conv:512:3:1,conv:512:2:0";

struct ModelConfig {
  int input_height = 32;
  std::string variant = "hybrid";  // hybrid | rnn-only
  std::vector<StackItem> stack;
  int rnn_layers = 2;
  int rnn_size = 512;              // concatenated BLSTM output width by default
  bool rnn_per_direction = false;  // when true, rnn_size is per direction
  int num_classes = 0;             // label count + 1, set from the label map
  double bn_eps = 1e-5;
  double bn_momentum = 0.9;

  static std::vector<StackItem> parse_stack(const std::string& text);
  static ModelConfig from_config(const KeyValueConfig& cfg, int num_classes);
  void to_config(KeyValueConfig& cfg) const;
  std::string stack_string() const;

  int hidden_per_direction() const {
    if (rnn_per_direction) return rnn_size;
    if (rnn_size % 2)
      throw Error(ErrorKind::InvalidConfig, "concatenated rnn_size must be even");
    return rnn_size / 2;
  }
  int blstm_output_dim() const { return 2 * hidden_per_direction(); }

  // Height/width of the conv output for a given input; throws when the
  // arithmetic collapses. Hybrid configs must map input_height to height 1.
  std::pair<int, int> conv_output_shape(int in_h, int in_w) const;
  int conv_output_channels() const;
  // Widths are padded up to this multiple before the conv stack.
  int width_multiple() const;
  int min_input_width() const;
  int timesteps_for_width(int w) const;
  void validate() const;

  static const std::set<std::string>& known_keys();
};

template <typename T>
using ParamMap = std::map<std::string, Tensor<T>>;

// Full forward cache plus optional named activation capture.
template <typename T>
struct ModelCache {
  Tensor<T> input;  // normalized [1,H,W]
  std::vector<Conv2dCache<T>> conv;
  std::vector<Tensor<T>> conv_pre_relu;
  std::vector<MaxPoolCache<T>> pool;
  std::vector<BatchNormCache<T>> bn;
  std::vector<BlstmCache<T>> blstm;
  std::vector<Mat<T>> blstm_in;
  Mat<T> fc_in;
  Mat<T> logits;
  Mat<T> logprobs;
};

template <typename T>
class Model {
 public:
  explicit Model(ModelConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

  const ModelConfig& config() const { return cfg_; }
  ParamMap<T>& params() { return params_; }
  const ParamMap<T>& params() const { return params_; }

  // Uniform Xavier weights, zero biases, LSTM forget bias 1.
  void init_params(uint64_t seed);

  // Parameter names that receive gradients (bn running stats excluded).
  std::vector<std::string> trainable_names() const;

  // img intensities in [0,1], height must equal cfg.input_height. Returns
  // per-timestep log-probabilities [T, num_classes].
  Mat<T> forward(const Image& img, bool train, ModelCache<T>* cache,
                 std::map<std::string, Tensor<T>>* activations = nullptr) const;

  // Gradient of the loss w.r.t. pre-softmax logits in, parameter grads out.
  ParamMap<T> backward(const Mat<T>& dlogits, const ModelCache<T>& cache) const;

  // Activation layer names available to dump-activations.
  std::vector<std::string> activation_names() const;

 private:
  Tensor<T> image_to_tensor(const Image& img) const;
  BlstmParams<T> blstm_params(int layer) const;

  ModelConfig cfg_;
  ParamMap<T> params_;
};

}  // namespace ctct

#include "ctct/model_impl.hpp"
