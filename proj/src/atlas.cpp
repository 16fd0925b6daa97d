#include "ctct/atlas.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "ctct/config.hpp"
#include "ctct/error.hpp"
#include "ctct/pgm.hpp"
#include "ctct/rng.hpp"
#include "ctct/unicode.hpp"

namespace fs = std::filesystem;

namespace ctct {

namespace {
std::string cp_tag(uint32_t cp) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "U+%04X", cp);
  return buf;
}
}  // namespace

void GlyphAtlas::add(uint32_t cp, Glyph glyph) { glyphs_[cp] = std::move(glyph); }

const Glyph& GlyphAtlas::glyph(uint32_t cp) const {
  auto it = glyphs_.find(cp);
  if (it == glyphs_.end())
    throw Error(ErrorKind::MissingGlyph, "atlas has no glyph for " + cp_tag(cp));
  return it->second;
}

int GlyphAtlas::line_height() const {
  int h = 1;
  for (const auto& [cp, g] : glyphs_) h = std::max(h, g.voffset + g.mask.height);
  return h;
}

void GlyphAtlas::require_coverage(const Vocabulary& vocab) const {
  for (const std::string& w : vocab.words)
    for (uint32_t cp : utf8_decode(w))
      if (!contains(cp))
        throw Error(ErrorKind::MissingGlyph,
                    "atlas does not cover " + cp_tag(cp) + " (word '" + w + "')");
}

GlyphAtlas GlyphAtlas::load(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "atlas.idx", std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + dir + "/atlas.idx");
  GlyphAtlas atlas;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::istringstream ss(t);
    std::string cp_field, bitmap, adv, voff;
    if (!std::getline(ss, cp_field, '\t') || !std::getline(ss, bitmap, '\t') ||
        !std::getline(ss, adv, '\t') || !std::getline(ss, voff, '\t'))
      throw Error(ErrorKind::UnsupportedFormat,
                  dir + "/atlas.idx:" + std::to_string(lineno) + ": expected 4 tab fields");
    if (cp_field.size() < 3 || cp_field[0] != 'U' || cp_field[1] != '+')
      throw Error(ErrorKind::UnsupportedFormat,
                  dir + "/atlas.idx:" + std::to_string(lineno) + ": bad codepoint field");
    uint32_t cp = static_cast<uint32_t>(std::stoul(cp_field.substr(2), nullptr, 16));
    Glyph g;
    g.mask = load_pgm((fs::path(dir) / bitmap).string());
    g.advance = std::stoi(adv);
    g.voffset = std::stoi(voff);
    atlas.add(cp, std::move(g));
  }
  if (atlas.glyphs_.empty()) throw Error(ErrorKind::UnsupportedFormat, dir + ": empty atlas");
  return atlas;
}

void GlyphAtlas::save(const std::string& dir) const {
  fs::create_directories(dir);
  std::ofstream idx(fs::path(dir) / "atlas.idx", std::ios::binary);
  if (!idx) throw Error(ErrorKind::IoError, "cannot write " + dir + "/atlas.idx");
  for (const auto& [cp, g] : glyphs_) {
    char name[32];
    std::snprintf(name, sizeof(name), "glyph_%04X.pgm", cp);
    save_pgm(g.mask, (fs::path(dir) / name).string());
    idx << cp_tag(cp) << "\t" << name << "\t" << g.advance << "\t" << g.voffset << "\n";
  }
}

GlyphAtlas GlyphAtlas::procedural(const std::vector<uint32_t>& codepoints, int glyph_height) {
  GlyphAtlas atlas;
  std::set<uint64_t> used_patterns;
  const int rows = 4, cols = 3;
  for (uint32_t cp : codepoints) {
    // distinct cell pattern per codepoint; resalt on collision within the atlas
    uint64_t pattern = 0;
    for (uint64_t salt = 0;; ++salt) {
      uint64_t s = split_seed(0xA71A5ull ^ cp, salt);
      pattern = s & ((1ull << (rows * cols)) - 1);
      int on = __builtin_popcountll(pattern);
      if (on >= 3 && on <= rows * cols - 2 && !used_patterns.count(pattern)) break;
    }
    used_patterns.insert(pattern);

    int cell = glyph_height / rows;
    int w = cols * cell;
    Image mask(glyph_height, w, 0.f);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c)
        if (pattern & (1ull << (r * cols + c)))
          for (int y = r * cell; y < (r + 1) * cell; ++y)
            for (int x = c * cell; x < (c + 1) * cell; ++x) mask.at(y, x) = 1.f;
    // one-pixel smoothing so bilinear warps do not alias to pure checkerboard
    Image soft = resize_bilinear(resize_bilinear(mask, glyph_height / 2, w / 2), glyph_height, w);
    Glyph g;
    g.mask = soft;
    g.advance = w + 2;
    g.voffset = 0;
    atlas.add(cp, std::move(g));
  }
  return atlas;
}

}  // namespace ctct
