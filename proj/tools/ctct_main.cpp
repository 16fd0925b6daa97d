// ctct: synthetic scene-text rendering, CRNN+CTC training and evaluation.
//
// Subcommands: render, train, eval, decode, gradcheck, dump-activations.
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric error.
// CTCT_NUMERIC=f32|f64 selects the training/inference scalar type.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "ctct/adadelta.hpp"
#include "ctct/atlas.hpp"
#include "ctct/checkpoint.hpp"
#include "ctct/config.hpp"
#include "ctct/ctc.hpp"
#include "ctct/error.hpp"
#include "ctct/eval.hpp"
#include "ctct/gradcheck.hpp"
#include "ctct/labelmap.hpp"
#include "ctct/model.hpp"
#include "ctct/pgm.hpp"
#include "ctct/render.hpp"
#include "ctct/rng.hpp"
#include "ctct/unicode.hpp"

namespace fs = std::filesystem;
using namespace ctct;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kDataError = 2, kNumericError = 3 };

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::InvalidConfig:
      return kUsage;
    case ErrorKind::NumericError:
      return kNumericError;
    default:
      return kDataError;
  }
}

bool use_f64() {
  const char* env = std::getenv("CTCT_NUMERIC");
  if (!env || std::string(env) == "f32") return false;
  if (std::string(env) == "f64") return true;
  throw Error(ErrorKind::InvalidConfig, "CTCT_NUMERIC must be f32 or f64");
}

KeyValueConfig load_config_or_empty(const std::string& path) {
  if (path.empty()) return {};
  return KeyValueConfig::parse_file(path);
}

// `builtin:<glyphs>` renders procedural block glyphs for the given
// codepoints; anything else is an atlas directory.
GlyphAtlas load_atlas_arg(const std::string& arg) {
  if (arg.rfind("builtin:", 0) == 0) {
    std::vector<uint32_t> cps = nfc(utf8_decode(arg.substr(8)));
    if (cps.empty()) throw Error(ErrorKind::InvalidConfig, "builtin atlas needs glyphs");
    return GlyphAtlas::procedural(cps);
  }
  return GlyphAtlas::load(arg);
}

std::string hex_cp(uint32_t cp) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "U+%04X", cp);
  return buf;
}

std::string labels_to_config(const LabelMap& labels) {
  std::string out;
  for (uint32_t cp : labels.codepoints()) {
    if (!out.empty()) out += ",";
    out += hex_cp(cp);
  }
  return out;
}

LabelMap labels_from_config(const KeyValueConfig& cfg) {
  std::vector<uint32_t> cps;
  for (const std::string& tok : cfg.get_list("labels", "")) {
    if (tok.rfind("U+", 0) != 0)
      throw Error(ErrorKind::BadCheckpoint, "bad label token '" + tok + "'");
    cps.push_back(static_cast<uint32_t>(std::stoul(tok.substr(2), nullptr, 16)));
  }
  if (cps.empty()) throw Error(ErrorKind::BadCheckpoint, "checkpoint has no label map");
  return LabelMap(std::move(cps));
}

template <typename T>
CheckpointTensor to_ckpt_tensor(const std::string& name, const Tensor<T>& t) {
  CheckpointTensor out;
  out.name = name;
  for (int e : t.shape) out.shape.push_back(static_cast<uint64_t>(e));
  out.data.reserve(t.numel());
  for (const T& v : t.data) out.data.push_back(static_cast<float>(v));
  return out;
}

template <typename T>
Tensor<T> from_ckpt_tensor(const CheckpointTensor& t) {
  std::vector<int> shape;
  for (uint64_t e : t.shape) shape.push_back(static_cast<int>(e));
  Tensor<T> out(shape);
  for (size_t i = 0; i < t.data.size(); ++i) out[i] = static_cast<T>(t.data[i]);
  return out;
}

template <typename T>
void load_model_params(Model<T>& model, const Checkpoint& ckpt) {
  model.init_params(0);  // establishes the expected names and shapes
  for (auto& [name, tensor] : model.params()) {
    const CheckpointTensor* src = ckpt.find(name);
    if (!src) throw Error(ErrorKind::BadCheckpoint, "checkpoint missing tensor " + name);
    Tensor<T> loaded = from_ckpt_tensor<T>(*src);
    if (loaded.shape != tensor.shape)
      throw Error(ErrorKind::BadCheckpoint, "checkpoint tensor " + name + " has shape " +
                                                loaded.shape_str() + ", expected " +
                                                tensor.shape_str());
    tensor = std::move(loaded);
  }
}

Image load_input_image(const std::string& path, int input_height) {
  Image img = load_pgm(path);
  if (img.height != input_height) img = resize_fixed_height(img, input_height);
  return img;
}

// ---------------------------------------------------------------------------
// render

struct RenderArgs {
  std::string config, vocab, atlas, bg_dir, out;
  int count = 0, threads = 1;
  uint64_t seed = 0;
  std::string punctuation;
};

int cmd_render(const RenderArgs& a) {
  KeyValueConfig cfg = load_config_or_empty(a.config);
  cfg.require_known_keys(RenderRanges::known_keys());
  RenderRanges ranges = RenderRanges::from_config(cfg);

  Vocabulary vocab = load_vocabulary(a.vocab);
  LabelMap labels = LabelMap::build(vocab, a.punctuation);
  GlyphAtlas atlas = load_atlas_arg(a.atlas);
  atlas.require_coverage(vocab);
  std::vector<Image> pool;
  if (!a.bg_dir.empty()) pool = load_background_pool(a.bg_dir);

  fs::create_directories(a.out);
  DatasetManifest m =
      generate_dataset(vocab, labels, atlas, pool, ranges, a.count, a.seed, a.out, a.threads);
  std::printf("rendered\t%zu\nmanifest\t%s\n", m.records.size(),
              (fs::path(a.out) / "manifest.tsv").string().c_str());
  return kOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string config, manifest, out, resume;
  long long epochs = -1, batch = -1, ckpt_every = -1;
  long long seed = -1;  // mandatory via flag or config file
  std::string punctuation;
  double clip = -1;  // <0: defer to config
  bool checked = false;
};

const std::set<std::string>& train_keys() {
  static std::set<std::string> keys = [] {
    std::set<std::string> k = ModelConfig::known_keys();
    k.insert({"epochs", "batch", "seed", "ckpt_every", "rho", "eps", "punctuation", "clip"});
    return k;
  }();
  return keys;
}

template <typename T>
int run_train(const TrainArgs& a) {
  KeyValueConfig cfg = load_config_or_empty(a.config);
  cfg.require_known_keys(train_keys());
  // precedence: flag > file > default
  long long epochs = a.epochs >= 0 ? a.epochs : cfg.get_int("epochs", 10);
  long long batch = a.batch >= 0 ? a.batch : cfg.get_int("batch", 32);
  long long ckpt_every = a.ckpt_every >= 0 ? a.ckpt_every : cfg.get_int("ckpt_every", 1);
  std::string punct = !a.punctuation.empty() ? a.punctuation : cfg.get_string("punctuation", "");
  T rho = static_cast<T>(cfg.get_double("rho", 0.95));
  T eps = static_cast<T>(cfg.get_double("eps", 1e-6));
  double clip = a.clip >= 0 ? a.clip : cfg.get_double("clip", 0.0);  // 0 disables
  if (a.seed < 0 && !cfg.has("seed"))
    throw Error(ErrorKind::InvalidConfig, "train needs an explicit --seed");
  uint64_t seed = a.seed >= 0 ? static_cast<uint64_t>(a.seed)
                              : static_cast<uint64_t>(cfg.get_int("seed"));
  if (epochs < 1 || batch < 1 || ckpt_every < 1)
    throw Error(ErrorKind::InvalidConfig, "epochs, batch and ckpt_every must be >= 1");

  DatasetManifest manifest = load_manifest(a.manifest);
  std::string manifest_dir = fs::path(a.manifest).parent_path().string();
  if (manifest.records.empty()) throw Error(ErrorKind::EmptyCorpus, "manifest has no records");

  long long start_epoch = 0;
  LabelMap labels;
  Model<T> model{[&] {
    if (!a.resume.empty()) {
      Checkpoint ckpt = load_checkpoint(a.resume);
      labels = labels_from_config(ckpt.config);
      return ModelConfig::from_config(ckpt.config, labels.num_classes());
    }
    std::string words;
    for (const ManifestRecord& rec : manifest.records) words += rec.text + "\n";
    labels = LabelMap::build(vocabulary_from_lines(words, a.manifest), punct);
    return ModelConfig::from_config(cfg, labels.num_classes());
  }()};

  AdadeltaState<T> opt;
  if (!a.resume.empty()) {
    Checkpoint ckpt = load_checkpoint(a.resume);
    load_model_params(model, ckpt);
    start_epoch = ckpt.config.get_int("trained_epochs", 0);
    for (const CheckpointTensor& t : ckpt.tensors) {
      if (t.name.rfind("opt/eg2/", 0) == 0)
        opt.eg2[t.name.substr(8)] = from_ckpt_tensor<T>(t);
      else if (t.name.rfind("opt/edx2/", 0) == 0)
        opt.edx2[t.name.substr(9)] = from_ckpt_tensor<T>(t);
    }
  } else {
    model.init_params(seed);
  }

  const int input_height = model.config().input_height;
  std::vector<Image> images;
  std::vector<std::vector<int>> targets;
  images.reserve(manifest.records.size());
  for (const ManifestRecord& rec : manifest.records) {
    images.push_back(load_input_image((fs::path(manifest_dir) / rec.path).string(), input_height));
    targets.push_back(labels.encode(rec.text));
  }

  fs::create_directories(a.out);
  std::ofstream log(fs::path(a.out) / "loss.log", std::ios::app);
  if (!log) throw Error(ErrorKind::IoError, "cannot open loss log in " + a.out);

  auto save = [&](const std::string& name, long long trained_epochs) {
    Checkpoint ckpt;
    model.config().to_config(ckpt.config);
    ckpt.config.set("labels", labels_to_config(labels));
    ckpt.config.set("trained_epochs", std::to_string(trained_epochs));
    ckpt.config.set("seed", std::to_string(seed));
    for (const auto& [pname, tensor] : model.params())
      ckpt.tensors.push_back(to_ckpt_tensor(pname, tensor));
    for (const auto& [pname, tensor] : opt.eg2)
      ckpt.tensors.push_back(to_ckpt_tensor("opt/eg2/" + pname, tensor));
    for (const auto& [pname, tensor] : opt.edx2)
      ckpt.tensors.push_back(to_ckpt_tensor("opt/edx2/" + pname, tensor));
    save_checkpoint(ckpt, (fs::path(a.out) / name).string());
  };

  const size_t n = images.size();
  long long skipped = 0;
  for (long long epoch = start_epoch; epoch < epochs; ++epoch) {
    // seeded per-epoch shuffle; resume at an epoch boundary replays it exactly
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    Rng shuffle_rng(split_seed(seed, 0x5AFEul + static_cast<uint64_t>(epoch)));
    for (size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.next_below(i)]);

    long long batch_idx = 0;
    for (size_t pos = 0; pos < n; pos += batch, ++batch_idx) {
      size_t end = std::min(n, pos + static_cast<size_t>(batch));
      ParamMap<T> acc;
      double loss_sum = 0;
      int used = 0;
      for (size_t bi = pos; bi < end; ++bi) {
        size_t idx = order[bi];
        ModelCache<T> cache;
        model.forward(images[idx], true, &cache);
        CtcResult<T> res;
        try {
          res = ctc_loss(cache.logprobs, targets[idx]);
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::InfeasibleTarget) throw;
          ++skipped;
          continue;
        }
        if (a.checked && !std::isfinite(static_cast<double>(res.nll)))
          throw Error(ErrorKind::NumericError, "non-finite loss");
        loss_sum += static_cast<double>(res.nll);
        ParamMap<T> grads = model.backward(res.grad_logits, cache);
        if (acc.empty()) {
          acc = std::move(grads);
        } else {
          for (auto& [gname, g] : grads) {
            Tensor<T>& dst = acc[gname];
            for (size_t i = 0; i < g.numel(); ++i) dst[i] += g[i];
          }
        }
        ++used;
      }
      if (!used) continue;
      for (auto& [gname, g] : acc)
        for (T& v : g.data) v /= static_cast<T>(used);
      if (clip > 0) {
        // global-norm clipping tames the occasional CTC gradient spike
        double sq = 0;
        for (const auto& [gname, g] : acc)
          for (const T& v : g.data) sq += static_cast<double>(v) * static_cast<double>(v);
        double norm = std::sqrt(sq);
        if (norm > clip) {
          T scale = static_cast<T>(clip / norm);
          for (auto& [gname, g] : acc)
            for (T& v : g.data) v *= scale;
        }
      }
      adadelta_step(model.params(), acc, opt, rho, eps, a.checked);
      log << epoch << '\t' << batch_idx << '\t' << (loss_sum / used) << '\n';
      log.flush();
    }
    if ((epoch + 1) % ckpt_every == 0 || epoch + 1 == epochs) {
      save("ckpt_" + std::to_string(epoch + 1) + ".bin", epoch + 1);
      save("ckpt_last.bin", epoch + 1);
    }
  }
  if (skipped) std::fprintf(stderr, "skipped %lld infeasible samples\n", skipped);
  std::printf("trained_epochs\t%lld\n", epochs);
  return kOk;
}

// ---------------------------------------------------------------------------
// eval / decode

struct EvalArgs {
  std::string ckpt, manifest;
  std::string decoder = "greedy";
  int beam = 8;
};

template <typename T>
int run_eval(const EvalArgs& a) {
  if (a.decoder != "greedy" && a.decoder != "beam")
    throw Error(ErrorKind::InvalidConfig, "decoder must be greedy or beam");
  Checkpoint ckpt = load_checkpoint(a.ckpt);
  LabelMap labels = labels_from_config(ckpt.config);
  Model<T> model(ModelConfig::from_config(ckpt.config, labels.num_classes()));
  load_model_params(model, ckpt);

  DatasetManifest manifest = load_manifest(a.manifest);
  std::string dir = fs::path(a.manifest).parent_path().string();
  int height = model.config().input_height;
  EvalReport rep = evaluate_manifest(manifest, dir, [&](const Image& raw) {
    Image img = raw.height == height ? raw : resize_fixed_height(raw, height);
    Mat<T> lp = model.forward(img, false, nullptr);
    std::vector<int> ids = a.decoder == "beam" ? beam_decode(lp, a.beam) : greedy_decode(lp);
    return labels.decode(ids);
  });
  std::fputs(rep.to_table().c_str(), stdout);
  std::fputs(rep.to_machine_lines().c_str(), stdout);
  return kOk;
}

struct DecodeArgs {
  std::string ckpt, image;
  int beam = 0;  // 0 = greedy
};

template <typename T>
int run_decode(const DecodeArgs& a) {
  Checkpoint ckpt = load_checkpoint(a.ckpt);
  LabelMap labels = labels_from_config(ckpt.config);
  Model<T> model(ModelConfig::from_config(ckpt.config, labels.num_classes()));
  load_model_params(model, ckpt);
  Image img = load_input_image(a.image, model.config().input_height);
  Mat<T> lp = model.forward(img, false, nullptr);
  std::vector<int> ids = a.beam > 0 ? beam_decode(lp, a.beam) : greedy_decode(lp);
  std::printf("%s\n", labels.decode(ids).c_str());
  return kOk;
}

// ---------------------------------------------------------------------------
// gradcheck

struct GradcheckArgs {
  std::string config;
  uint64_t seed = 1;
  int coords = 250;
  double eps = 1e-5;
};

int cmd_gradcheck(const GradcheckArgs& a) {
  // always f64: the tolerances are unreachable in f32
  ModelConfig mc;
  if (!a.config.empty()) {
    KeyValueConfig cfg = KeyValueConfig::parse_file(a.config);
    cfg.require_known_keys(ModelConfig::known_keys());
    mc = ModelConfig::from_config(cfg, 4);
  } else {
    mc.input_height = 16;
    mc.stack = ModelConfig::parse_stack(
        "conv:6:3:1,bn,pool:2:2,conv:8:3:1,pool:2:2,pool:2:1,conv:8:2:0");
    mc.rnn_layers = 1;
    mc.rnn_size = 8;
    mc.num_classes = 4;
  }
  Model<double> model(mc);
  model.init_params(a.seed);
  Rng rng(split_seed(a.seed, 1));
  Image img(mc.input_height, 24);
  for (float& v : img.pixels) v = static_cast<float>(rng.next_double());
  std::vector<int> target = {1, 3, 2};

  GradCheckReport rep = grad_check_model(model, img, target, a.eps, a.coords, a.seed);
  std::printf("gradcheck\t%s\n", rep.summary().c_str());
  GradCheckReport neg =
      grad_check_model(model, img, target, a.eps, a.coords, a.seed, /*corrupt=*/true);
  std::printf("negative_control\t%s\n", neg.summary().c_str());
  bool ok = rep.max_rel_err <= 1e-4 && neg.max_rel_err > 1e-1;
  std::printf("status\t%s\n", ok ? "pass" : "fail");
  return ok ? kOk : kNumericError;
}

// ---------------------------------------------------------------------------
// dump-activations

struct DumpArgs {
  std::string ckpt, image, layer, out;
};

template <typename T>
int run_dump(const DumpArgs& a) {
  Checkpoint ckpt = load_checkpoint(a.ckpt);
  LabelMap labels = labels_from_config(ckpt.config);
  Model<T> model(ModelConfig::from_config(ckpt.config, labels.num_classes()));
  load_model_params(model, ckpt);

  std::vector<std::string> names = model.activation_names();
  if (std::find(names.begin(), names.end(), a.layer) == names.end()) {
    std::string valid;
    for (const std::string& n : names) valid += (valid.empty() ? "" : ", ") + n;
    std::fprintf(stderr, "unknown layer '%s'; valid layers: %s\n", a.layer.c_str(),
                 valid.c_str());
    return kUsage;
  }

  Image img = load_input_image(a.image, model.config().input_height);
  std::map<std::string, Tensor<T>> acts;
  model.forward(img, false, nullptr, &acts);
  const Tensor<T>& act = acts.at(a.layer);
  int channels = act.shape[0], h = act.shape[1], w = act.shape[2];

  fs::create_directories(a.out);
  for (int c = 0; c < channels; ++c) {
    T lo = act.at3(c, 0, 0), hi = lo;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        lo = std::min(lo, act.at3(c, y, x));
        hi = std::max(hi, act.at3(c, y, x));
      }
    Image out(h, w);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        out.at(y, x) = hi > lo ? static_cast<float>((act.at3(c, y, x) - lo) / (hi - lo)) : 0.0f;
    char name[64];
    std::snprintf(name, sizeof(name), "%s_%03d.pgm", a.layer.c_str(), c);
    save_pgm(out, (fs::path(a.out) / name).string());
  }
  std::printf("channels\t%d\n", channels);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scene-text CRNN+CTC toolkit"};
  app.require_subcommand(1);

  RenderArgs render_args;
  CLI::App* render = app.add_subcommand("render", "render a synthetic word-image dataset");
  render->add_option("--config", render_args.config, "render ranges config file");
  render->add_option("--vocab", render_args.vocab, "word list, one per line")->required();
  render->add_option("--atlas", render_args.atlas, "atlas dir or builtin:<glyphs>")->required();
  render->add_option("--bg-dir", render_args.bg_dir, "background PGM pool directory");
  render->add_option("--count", render_args.count, "image count")
      ->required()
      ->check(CLI::PositiveNumber);
  render->add_option("--seed", render_args.seed, "base seed")->required();
  render->add_option("--out", render_args.out, "output directory")->required();
  render->add_option("--threads", render_args.threads, "worker threads")
      ->check(CLI::PositiveNumber);
  render->add_option("--punctuation", render_args.punctuation, "extra label codepoints");

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "train a model on a rendered dataset");
  train->add_option("--config", train_args.config, "model + training config file");
  train->add_option("--manifest", train_args.manifest, "dataset manifest.tsv")->required();
  train->add_option("--out", train_args.out, "checkpoint + log directory")->required();
  train->add_option("--resume", train_args.resume, "checkpoint to resume from");
  train->add_option("--epochs", train_args.epochs, "training epochs");
  train->add_option("--batch", train_args.batch, "minibatch size");
  train->add_option("--seed", train_args.seed, "training seed (mandatory here or in config)");
  train->add_option("--ckpt-every", train_args.ckpt_every, "checkpoint cadence in epochs");
  train->add_option("--punctuation", train_args.punctuation, "extra label codepoints");
  train->add_option("--clip", train_args.clip, "global gradient-norm clip (0 disables)");
  train->add_flag("--checked", train_args.checked, "fail fast on non-finite numerics");

  EvalArgs eval_args;
  CLI::App* evalc = app.add_subcommand("eval", "evaluate a checkpoint on a manifest");
  evalc->add_option("--ckpt", eval_args.ckpt, "checkpoint file")->required();
  evalc->add_option("--manifest", eval_args.manifest, "dataset manifest.tsv")->required();
  evalc->add_option("--decoder", eval_args.decoder, "greedy | beam");
  evalc->add_option("--beam", eval_args.beam, "beam width")->check(CLI::PositiveNumber);

  DecodeArgs decode_args;
  CLI::App* decode = app.add_subcommand("decode", "transcribe a single image");
  decode->add_option("--ckpt", decode_args.ckpt, "checkpoint file")->required();
  decode->add_option("--image", decode_args.image, "input PGM")->required();
  decode->add_option("--beam", decode_args.beam, "beam width (0 = greedy)");

  GradcheckArgs gc_args;
  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient check");
  gradcheck->add_option("--config", gc_args.config, "model config file");
  gradcheck->add_option("--seed", gc_args.seed, "seed");
  gradcheck->add_option("--coords", gc_args.coords, "coordinates to sample")
      ->check(CLI::PositiveNumber);
  gradcheck->add_option("--eps", gc_args.eps, "finite-difference step");

  DumpArgs dump_args;
  CLI::App* dump = app.add_subcommand("dump-activations", "write per-channel activation PGMs");
  dump->add_option("--ckpt", dump_args.ckpt, "checkpoint file")->required();
  dump->add_option("--image", dump_args.image, "input PGM")->required();
  dump->add_option("--layer", dump_args.layer, "activation layer name")->required();
  dump->add_option("--out", dump_args.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    bool f64 = use_f64();
    if (render->parsed()) return cmd_render(render_args);
    if (train->parsed()) return f64 ? run_train<double>(train_args) : run_train<float>(train_args);
    if (evalc->parsed()) return f64 ? run_eval<double>(eval_args) : run_eval<float>(eval_args);
    if (decode->parsed())
      return f64 ? run_decode<double>(decode_args) : run_decode<float>(decode_args);
    if (gradcheck->parsed()) return cmd_gradcheck(gc_args);
    if (dump->parsed()) return f64 ? run_dump<double>(dump_args) : run_dump<float>(dump_args);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kDataError;
  }
  return kUsage;
}
