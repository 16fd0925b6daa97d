#include "ctct/render.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

#include "ctct/error.hpp"
#include "ctct/pgm.hpp"
#include "ctct/unicode.hpp"

namespace fs = std::filesystem;

namespace ctct {

const std::set<std::string>& RenderRanges::known_keys() {
  static const std::set<std::string> keys = {
      "scale_min",     "scale_max",     "stroke_min",  "stroke_max",      "kerning_min",
      "kerning_max",   "skew_min",      "skew_max",    "rotation_min",    "rotation_max",
      "jitter_max",    "fg_min",        "fg_max",      "bg_min",          "bg_max",
      "fg_texture_prob", "bg_crop_prob", "alpha_min",  "alpha_max",       "noise_min",
      "noise_max",     "margin",        "max_width"};
  return keys;
}

RenderRanges RenderRanges::from_config(const KeyValueConfig& cfg) {
  RenderRanges r;
  r.scale_min = cfg.get_double("scale_min", r.scale_min);
  r.scale_max = cfg.get_double("scale_max", r.scale_max);
  r.stroke_min = cfg.get_double("stroke_min", r.stroke_min);
  r.stroke_max = cfg.get_double("stroke_max", r.stroke_max);
  r.kerning_min = cfg.get_double("kerning_min", r.kerning_min);
  r.kerning_max = cfg.get_double("kerning_max", r.kerning_max);
  r.skew_min = cfg.get_double("skew_min", r.skew_min);
  r.skew_max = cfg.get_double("skew_max", r.skew_max);
  r.rotation_min = cfg.get_double("rotation_min", r.rotation_min);
  r.rotation_max = cfg.get_double("rotation_max", r.rotation_max);
  r.jitter_max = cfg.get_double("jitter_max", r.jitter_max);
  r.fg_min = cfg.get_double("fg_min", r.fg_min);
  r.fg_max = cfg.get_double("fg_max", r.fg_max);
  r.bg_min = cfg.get_double("bg_min", r.bg_min);
  r.bg_max = cfg.get_double("bg_max", r.bg_max);
  r.fg_texture_prob = cfg.get_double("fg_texture_prob", r.fg_texture_prob);
  r.bg_crop_prob = cfg.get_double("bg_crop_prob", r.bg_crop_prob);
  r.alpha_min = cfg.get_double("alpha_min", r.alpha_min);
  r.alpha_max = cfg.get_double("alpha_max", r.alpha_max);
  r.noise_min = cfg.get_double("noise_min", r.noise_min);
  r.noise_max = cfg.get_double("noise_max", r.noise_max);
  r.margin = static_cast<int>(cfg.get_int("margin", r.margin));
  r.max_width = static_cast<int>(cfg.get_int("max_width", r.max_width));
  r.validate();
  return r;
}

void RenderRanges::validate() const {
  auto check = [](double lo, double hi, const char* name) {
    if (lo > hi)
      throw Error(ErrorKind::InvalidConfig, std::string("inverted range for ") + name);
  };
  check(scale_min, scale_max, "scale");
  check(stroke_min, stroke_max, "stroke");
  check(kerning_min, kerning_max, "kerning");
  check(skew_min, skew_max, "skew");
  check(rotation_min, rotation_max, "rotation");
  check(fg_min, fg_max, "fg");
  check(bg_min, bg_max, "bg");
  check(alpha_min, alpha_max, "alpha");
  check(noise_min, noise_max, "noise");
  if (jitter_max < 0) throw Error(ErrorKind::InvalidConfig, "jitter_max must be >= 0");
  if (margin < 0 || max_width < 8) throw Error(ErrorKind::InvalidConfig, "bad margin/max_width");
}

RenderSpec sample_render_spec(Rng& rng, const RenderRanges& r) {
  r.validate();
  RenderSpec s;
  s.scale = rng.uniform(r.scale_min, r.scale_max);
  s.stroke = rng.uniform(r.stroke_min, r.stroke_max);
  s.kerning = rng.uniform(r.kerning_min, r.kerning_max);
  s.skew_deg = rng.uniform(r.skew_min, r.skew_max);
  s.rot_deg = rng.uniform(r.rotation_min, r.rotation_max);
  for (double& j : s.corner_jitter) j = rng.uniform(-r.jitter_max, r.jitter_max);
  s.fg_color = rng.uniform(r.fg_min, r.fg_max);
  s.fg_texture = rng.next_double() < r.fg_texture_prob;
  s.bg_crop = rng.next_double() < r.bg_crop_prob;
  s.bg_color = rng.uniform(r.bg_min, r.bg_max);
  s.alpha_gain = rng.uniform(r.alpha_min, r.alpha_max);
  s.noise_sigma = rng.uniform(r.noise_min, r.noise_max);
  s.pool_choice = rng.next_u64();
  s.crop_x = rng.next_double();
  s.crop_y = rng.next_double();
  s.noise_seed = rng.next_u64();
  return s;
}

namespace {

// Crop of the given size from a pool image at a fractional origin; the pool
// image is stretched up first when it is smaller than the crop.
Image pool_crop(const Image& src, int h, int w, double fx, double fy) {
  const Image* use = &src;
  Image scaled;
  if (src.height < h || src.width < w) {
    scaled = resize_bilinear(src, std::max(h, src.height), std::max(w, src.width));
    use = &scaled;
  }
  int oy = static_cast<int>(fy * (use->height - h));
  int ox = static_cast<int>(fx * (use->width - w));
  Image out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out.at(y, x) = use->at(oy + y, ox + x);
  return out;
}

}  // namespace

RenderOut render_word(const std::string& word, const RenderSpec& spec, const GlyphAtlas& atlas,
                      const std::vector<Image>& bg_pool, const LabelMap& labels,
                      const RenderRanges& ranges) {
  std::vector<uint32_t> cps = utf8_decode(word);
  if (cps.empty()) throw Error(ErrorKind::EmptyVocabulary, "cannot render empty word");

  // layout pass
  double pen = ranges.margin;
  struct Placed {
    const Glyph* g;
    int x, y, w, h;
  };
  std::vector<Placed> layout;
  for (uint32_t cp : cps) {
    const Glyph& g = atlas.glyph(cp);
    int gw = std::max(1, static_cast<int>(std::lround(g.mask.width * spec.scale)));
    int gh = std::max(1, static_cast<int>(std::lround(g.mask.height * spec.scale)));
    int gy = ranges.margin + static_cast<int>(std::lround(g.voffset * spec.scale));
    layout.push_back({&g, static_cast<int>(std::lround(pen)), gy, gw, gh});
    pen += g.advance * spec.scale + spec.kerning;
  }
  int canvas_w = static_cast<int>(std::lround(pen)) + ranges.margin;
  int canvas_h =
      static_cast<int>(std::lround(atlas.line_height() * spec.scale)) + 2 * ranges.margin;
  if (canvas_w > ranges.max_width)
    throw Error(ErrorKind::WordTooWide, "'" + word + "' renders " + std::to_string(canvas_w) +
                                            " px wide (cap " + std::to_string(ranges.max_width) +
                                            ")");

  // foreground alpha mask
  Image alpha(canvas_h, canvas_w, 0.f);
  for (const Placed& p : layout) {
    Image scaled = resize_bilinear(p.g->mask, p.h, p.w);
    for (int y = 0; y < p.h; ++y) {
      int cy = p.y + y;
      if (cy < 0 || cy >= canvas_h) continue;
      for (int x = 0; x < p.w; ++x) {
        int cx = p.x + x;
        if (cx < 0 || cx >= canvas_w) continue;
        alpha.at(cy, cx) = std::max(alpha.at(cy, cx), scaled.at(y, x));
      }
    }
  }
  double gamma = 1.0 / std::max(0.05, spec.stroke);
  for (float& v : alpha.pixels)
    v = static_cast<float>(
        std::min(1.0, std::pow(static_cast<double>(v), gamma) * spec.alpha_gain));

  // geometric distortion: shear, then rotation, then corner jitter
  double cxm = (canvas_w - 1) / 2.0, cym = (canvas_h - 1) / 2.0;
  Homography h = Homography::shear_x(std::tan(spec.skew_deg * M_PI / 180.0), cym);
  h = Homography::rotation_deg(spec.rot_deg, cxm, cym).compose(h);
  h = Homography::from_corner_offsets(canvas_w, canvas_h, spec.corner_jitter).compose(h);
  alpha = warp_perspective(alpha, h, 0.f);

  // layers
  Image fg(canvas_h, canvas_w, static_cast<float>(spec.fg_color));
  bool have_pool = !bg_pool.empty();
  if (spec.fg_texture && have_pool) {
    const Image& tex = bg_pool[spec.pool_choice % bg_pool.size()];
    Image crop = pool_crop(tex, canvas_h, canvas_w, spec.crop_y, spec.crop_x);
    for (size_t i = 0; i < fg.pixels.size(); ++i) fg.pixels[i] *= crop.pixels[i];
  }
  Image bg;
  if (spec.bg_crop && have_pool) {
    const Image& src = bg_pool[spec.pool_choice % bg_pool.size()];
    bg = pool_crop(src, canvas_h, canvas_w, spec.crop_x, spec.crop_y);
  } else {
    bg = Image(canvas_h, canvas_w, static_cast<float>(spec.bg_color));
  }

  Image out = alpha_composite(fg, alpha, bg);

  if (spec.noise_sigma > 0) {
    Rng noise(spec.noise_seed);
    for (float& v : out.pixels)
      v = static_cast<float>(v + spec.noise_sigma * noise.next_gaussian());
  }
  for (float& v : out.pixels) v = std::min(1.f, std::max(0.f, v));

  return {std::move(out), labels.encode(word)};
}

void save_manifest(const DatasetManifest& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write manifest " + path);
  char hex[32];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(m.config_hash));
  out << "# base_seed = " << m.base_seed << "\n";
  out << "# config_hash = " << hex << "\n";
  for (const ManifestRecord& r : m.records) out << r.path << "\t" << r.text << "\n";
  if (!out) throw Error(ErrorKind::IoError, "manifest write failed: " + path);
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open manifest " + path);
  DatasetManifest m;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::string t = trim(line.substr(1));
      size_t eq = t.find('=');
      if (eq != std::string::npos) {
        std::string key = trim(t.substr(0, eq)), val = trim(t.substr(eq + 1));
        if (key == "base_seed") m.base_seed = std::stoull(val);
        if (key == "config_hash") m.config_hash = std::stoull(val, nullptr, 16);
      }
      continue;
    }
    size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw Error(ErrorKind::UnsupportedFormat,
                  path + ":" + std::to_string(lineno) + ": expected <path>\\t<text>");
    ManifestRecord r;
    r.path = line.substr(0, tab);
    r.text = nfc_utf8(trim(line.substr(tab + 1)));
    if (r.text.empty())
      throw Error(ErrorKind::UnsupportedFormat,
                  path + ":" + std::to_string(lineno) + ": empty ground truth");
    m.records.push_back(std::move(r));
  }
  return m;
}

std::vector<Image> load_background_pool(const std::string& dir) {
  std::vector<Image> pool;
  if (dir.empty() || !fs::exists(dir)) return pool;
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".pgm") names.push_back(e.path().string());
  std::sort(names.begin(), names.end());
  for (const std::string& n : names) pool.push_back(load_pgm(n));
  return pool;
}

DatasetManifest generate_dataset(const Vocabulary& vocab, const LabelMap& labels,
                                 const GlyphAtlas& atlas, const std::vector<Image>& bg_pool,
                                 const RenderRanges& ranges, int count, uint64_t base_seed,
                                 const std::string& out_dir, int threads) {
  if (count < 1) throw Error(ErrorKind::InvalidConfig, "count must be >= 1");
  atlas.require_coverage(vocab);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!fs::is_directory(out_dir))
    throw Error(ErrorKind::IoError, "cannot create output directory " + out_dir);

  DatasetManifest manifest;
  manifest.base_seed = base_seed;
  {
    KeyValueConfig snap;  // config snapshot feeding the manifest hash
    snap.set("scale", std::to_string(ranges.scale_min) + ".." + std::to_string(ranges.scale_max));
    snap.set("noise", std::to_string(ranges.noise_min) + ".." + std::to_string(ranges.noise_max));
    snap.set("max_width", std::to_string(ranges.max_width));
    snap.set("words", std::to_string(vocab.words.size()));
    manifest.config_hash = snap.hash();
  }
  manifest.records.resize(count);

  auto render_one = [&](int i) {
    Rng rng(split_seed(base_seed, static_cast<uint64_t>(i)));
    // resample from the same stream if a draw renders wider than the cap
    for (int attempt = 0;; ++attempt) {
      const std::string& word = vocab.words[rng.next_below(vocab.words.size())];
      RenderSpec spec = sample_render_spec(rng, ranges);
      try {
        RenderOut r = render_word(word, spec, atlas, bg_pool, labels, ranges);
        char name[32];
        std::snprintf(name, sizeof(name), "img_%06d.pgm", i);
        save_pgm(r.image, (fs::path(out_dir) / name).string());
        manifest.records[i] = {name, word};
        return;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::WordTooWide || attempt >= 100) throw;
      }
    }
  };

  if (threads <= 1) {
    for (int i = 0; i < count; ++i) render_one(i);
  } else {
    std::vector<std::thread> workers;
    std::atomic<int> next{0};
    std::atomic<bool> failed{false};
    for (int t = 0; t < threads; ++t)
      workers.emplace_back([&] {
        for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
          if (failed.load()) return;
          try {
            render_one(i);
          } catch (...) {
            failed.store(true);
            return;
          }
        }
      });
    for (auto& w : workers) w.join();
    if (failed.load()) throw Error(ErrorKind::IoError, "dataset generation failed in a worker");
  }

  save_manifest(manifest, (fs::path(out_dir) / "manifest.tsv").string());
  return manifest;
}

}  // namespace ctct
