#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ctct/atlas.hpp"
#include "ctct/config.hpp"
#include "ctct/image.hpp"
#include "ctct/labelmap.hpp"
#include "ctct/rng.hpp"

namespace ctct {

// Full parameterization of one synthetic rendering. A spec plus the atlas,
// background pool and word determine the output image bit-for-bit.
struct RenderSpec {
  double scale = 1.0;            // glyph scale factor
  double stroke = 1.0;           // stroke weight; >1 bolder (mask gamma 1/stroke)
  double kerning = 0.0;          // extra pen advance per glyph, px
  double skew_deg = 0.0;         // horizontal shear angle
  double rot_deg = 0.0;          // rotation about canvas center
  std::array<double, 8> corner_jitter{};  // TL,TR,BR,BL (dx,dy) px
  double fg_color = 0.0;
  bool fg_texture = false;       // multiply foreground by a pool crop
  bool bg_crop = false;          // background from pool crop vs uniform color
  double bg_color = 1.0;
  double alpha_gain = 1.0;       // blend alpha profile: multiplier on the mask
  double noise_sigma = 0.0;
  uint64_t pool_choice = 0;      // selects pool image for bg / texture
  double crop_x = 0.0, crop_y = 0.0;  // fractional crop origin in the pool image
  uint64_t noise_seed = 0;
};

// Uniform sampling ranges for every RenderSpec field.
struct RenderRanges {
  double scale_min = 0.8, scale_max = 1.2;
  double stroke_min = 0.8, stroke_max = 1.4;
  double kerning_min = -1.0, kerning_max = 3.0;
  double skew_min = -8.0, skew_max = 8.0;
  double rotation_min = -4.0, rotation_max = 4.0;
  double jitter_max = 2.0;  // corner offsets drawn from [-jitter_max, jitter_max]
  double fg_min = 0.0, fg_max = 0.35;
  double bg_min = 0.6, bg_max = 1.0;
  double fg_texture_prob = 0.0;
  double bg_crop_prob = 0.5;
  double alpha_min = 0.8, alpha_max = 1.0;
  double noise_min = 0.0, noise_max = 0.04;
  int margin = 4;           // canvas margin around the rendered word, px
  int max_width = 512;      // pre-resize width cap

  static RenderRanges from_config(const KeyValueConfig& cfg);
  void validate() const;  // throws Error{InvalidConfig} on inverted ranges
  static const std::set<std::string>& known_keys();
};

RenderSpec sample_render_spec(Rng& rng, const RenderRanges& ranges);

struct RenderOut {
  Image image;
  std::vector<int> labels;
};

RenderOut render_word(const std::string& word, const RenderSpec& spec, const GlyphAtlas& atlas,
                      const std::vector<Image>& bg_pool, const LabelMap& labels,
                      const RenderRanges& ranges);

struct ManifestRecord {
  std::string path;  // relative to the manifest's directory
  std::string text;  // ground truth, NFC UTF-8
};

struct DatasetManifest {
  uint64_t base_seed = 0;
  uint64_t config_hash = 0;
  std::vector<ManifestRecord> records;
};

void save_manifest(const DatasetManifest& m, const std::string& path);
DatasetManifest load_manifest(const std::string& path);

// Renders `count` images into out_dir (img_NNNNNN.pgm + manifest.tsv).
// Image i draws everything from seed split_seed(base_seed, i), so worker
// count and generation order never change the outputs.
DatasetManifest generate_dataset(const Vocabulary& vocab, const LabelMap& labels,
                                 const GlyphAtlas& atlas, const std::vector<Image>& bg_pool,
                                 const RenderRanges& ranges, int count, uint64_t base_seed,
                                 const std::string& out_dir, int threads = 1);

// Loads every PGM in a directory (sorted by filename); empty dir -> empty pool.
std::vector<Image> load_background_pool(const std::string& dir);

}  // namespace ctct
