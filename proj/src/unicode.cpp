#include "ctct/unicode.hpp"

#include <algorithm>

#include "ctct/error.hpp"

namespace ctct {

struct CombiningClassEntry {
  uint32_t cp;
  uint8_t ccc;
};
struct DecompEntry {
  uint32_t cp, first, second;  // second == 0 for singleton decompositions
};
struct ComposeEntry {
  uint32_t first, second, composite;
};

#include "unicode_tables.inc"

namespace {

constexpr uint32_t kHangulSBase = 0xAC00;
constexpr uint32_t kHangulLBase = 0x1100;
constexpr uint32_t kHangulVBase = 0x1161;
constexpr uint32_t kHangulTBase = 0x11A7;
constexpr uint32_t kHangulLCount = 19, kHangulVCount = 21, kHangulTCount = 28;
constexpr uint32_t kHangulNCount = kHangulVCount * kHangulTCount;
constexpr uint32_t kHangulSCount = kHangulLCount * kHangulNCount;

const DecompEntry* find_decomp(uint32_t cp) {
  auto* begin = std::begin(kDecomp);
  auto* end = std::end(kDecomp);
  auto* it = std::lower_bound(begin, end, cp, [](const DecompEntry& e, uint32_t c) {
    return e.cp < c;
  });
  return (it != end && it->cp == cp) ? it : nullptr;
}

uint32_t find_composite(uint32_t a, uint32_t b) {
  auto* begin = std::begin(kCompose);
  auto* end = std::end(kCompose);
  auto* it = std::lower_bound(begin, end, std::pair<uint32_t, uint32_t>(a, b),
                              [](const ComposeEntry& e, std::pair<uint32_t, uint32_t> k) {
                                return std::pair(e.first, e.second) < k;
                              });
  return (it != end && it->first == a && it->second == b) ? it->composite : 0;
}

void decompose_into(uint32_t cp, std::vector<uint32_t>& out) {
  if (cp >= kHangulSBase && cp < kHangulSBase + kHangulSCount) {
    uint32_t idx = cp - kHangulSBase;
    out.push_back(kHangulLBase + idx / kHangulNCount);
    out.push_back(kHangulVBase + (idx % kHangulNCount) / kHangulTCount);
    uint32_t t = idx % kHangulTCount;
    if (t) out.push_back(kHangulTBase + t);
    return;
  }
  if (const DecompEntry* d = find_decomp(cp)) {
    decompose_into(d->first, out);
    if (d->second) decompose_into(d->second, out);
    return;
  }
  out.push_back(cp);
}

}  // namespace

int combining_class(uint32_t cp) {
  auto* begin = std::begin(kCombiningClass);
  auto* end = std::end(kCombiningClass);
  auto* it = std::lower_bound(begin, end, cp,
                              [](const CombiningClassEntry& e, uint32_t c) { return e.cp < c; });
  return (it != end && it->cp == cp) ? it->ccc : 0;
}

std::vector<uint32_t> utf8_decode(const std::string& s) {
  std::vector<uint32_t> out;
  size_t i = 0, n = s.size();
  auto fail = [&](const char* what) -> void {
    throw Error(ErrorKind::InvalidUtf8, std::string(what) + " at byte " + std::to_string(i));
  };
  while (i < n) {
    uint8_t b0 = static_cast<uint8_t>(s[i]);
    uint32_t cp;
    int extra;
    if (b0 < 0x80) {
      cp = b0;
      extra = 0;
    } else if ((b0 & 0xE0) == 0xC0) {
      cp = b0 & 0x1F;
      extra = 1;
    } else if ((b0 & 0xF0) == 0xE0) {
      cp = b0 & 0x0F;
      extra = 2;
    } else if ((b0 & 0xF8) == 0xF0) {
      cp = b0 & 0x07;
      extra = 3;
    } else {
      fail("invalid lead byte");
      return out;
    }
    if (i + extra >= n) fail("truncated sequence");
    for (int k = 1; k <= extra; ++k) {
      uint8_t b = static_cast<uint8_t>(s[i + k]);
      if ((b & 0xC0) != 0x80) fail("invalid continuation byte");
      cp = (cp << 6) | (b & 0x3F);
    }
    static const uint32_t kMin[4] = {0, 0x80, 0x800, 0x10000};
    if (cp < kMin[extra]) fail("overlong encoding");
    if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) fail("invalid codepoint");
    out.push_back(cp);
    i += extra + 1;
  }
  return out;
}

std::string utf8_encode_cp(uint32_t cp) {
  std::string out;
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
  return out;
}

std::string utf8_encode(const std::vector<uint32_t>& cps) {
  std::string out;
  for (uint32_t cp : cps) out += utf8_encode_cp(cp);
  return out;
}

std::vector<uint32_t> nfc(const std::vector<uint32_t>& cps) {
  // 1. full canonical decomposition
  std::vector<uint32_t> buf;
  buf.reserve(cps.size());
  for (uint32_t cp : cps) decompose_into(cp, buf);

  // 2. canonical ordering (stable sort of nonzero-ccc runs)
  for (size_t i = 1; i < buf.size(); ++i) {
    int cc = combining_class(buf[i]);
    if (cc == 0) continue;
    size_t j = i;
    while (j > 0 && combining_class(buf[j - 1]) > cc) {
      std::swap(buf[j - 1], buf[j]);
      --j;
    }
  }

  // 3. canonical composition
  std::vector<uint32_t> out;
  out.reserve(buf.size());
  int last_starter = -1;
  int prev_ccc = -1;  // ccc of last codepoint appended after the starter
  for (uint32_t cp : buf) {
    int cc = combining_class(cp);
    if (last_starter >= 0 && prev_ccc < cc) {
      uint32_t starter = out[last_starter];
      uint32_t comp = 0;
      // Hangul LV / LVT composition
      if (starter >= kHangulLBase && starter < kHangulLBase + kHangulLCount &&
          cp >= kHangulVBase && cp < kHangulVBase + kHangulVCount) {
        comp = kHangulSBase +
               ((starter - kHangulLBase) * kHangulVCount + (cp - kHangulVBase)) * kHangulTCount;
      } else if (starter >= kHangulSBase && starter < kHangulSBase + kHangulSCount &&
                 (starter - kHangulSBase) % kHangulTCount == 0 && cp > kHangulTBase &&
                 cp < kHangulTBase + kHangulTCount) {
        comp = starter + (cp - kHangulTBase);
      } else {
        comp = find_composite(starter, cp);
      }
      if (comp) {
        out[last_starter] = comp;
        continue;
      }
    }
    if (cc == 0) {
      last_starter = static_cast<int>(out.size());
      prev_ccc = -1;
    } else {
      prev_ccc = cc;
    }
    out.push_back(cp);
  }
  return out;
}

std::string nfc_utf8(const std::string& s) { return utf8_encode(nfc(utf8_decode(s))); }

}  // namespace ctct
