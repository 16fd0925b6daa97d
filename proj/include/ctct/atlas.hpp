#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "ctct/image.hpp"
#include "ctct/labelmap.hpp"

namespace ctct {

struct Glyph {
  Image mask;       // alpha mask, 1 = ink
  int advance = 0;  // pen advance in pixels
  int voffset = 0;  // vertical offset of the bitmap top from the line top
};

// Pre-rendered per-codepoint alpha masks with advance metrics. Directory
// format: `atlas.idx` lines `U+XXXX\t<bitmap.pgm>\t<advance>\t<voffset>`
// plus the referenced PGM files.
class GlyphAtlas {
 public:
  void add(uint32_t cp, Glyph glyph);
  bool contains(uint32_t cp) const { return glyphs_.count(cp) != 0; }
  const Glyph& glyph(uint32_t cp) const;  // throws Error{MissingGlyph}
  const std::map<uint32_t, Glyph>& glyphs() const { return glyphs_; }

  // Tallest bitmap accounting for vertical offsets; the nominal line height.
  int line_height() const;

  // Throws Error{MissingGlyph} naming the first uncovered codepoint.
  void require_coverage(const Vocabulary& vocab) const;

  static GlyphAtlas load(const std::string& dir);
  void save(const std::string& dir) const;

  // Deterministic procedural glyphs for the given codepoints; each glyph is a
  // distinct block-pattern bitmap derived from its codepoint. Substitutes for
  // real font rendering in tests and toy datasets.
  static GlyphAtlas procedural(const std::vector<uint32_t>& codepoints, int glyph_height = 24);

 private:
  std::map<uint32_t, Glyph> glyphs_;
};

}  // namespace ctct
