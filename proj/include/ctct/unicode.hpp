#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ctct {

// UTF-8 decode; throws Error{InvalidUtf8} on malformed input (overlong forms,
// surrogates, truncated sequences all rejected).
std::vector<uint32_t> utf8_decode(const std::string& s);

std::string utf8_encode(const std::vector<uint32_t>& cps);
std::string utf8_encode_cp(uint32_t cp);

// Canonical composition (NFC) over codepoints, including Hangul.
std::vector<uint32_t> nfc(const std::vector<uint32_t>& cps);

// Convenience: decode, normalize, re-encode.
std::string nfc_utf8(const std::string& s);

int combining_class(uint32_t cp);

}  // namespace ctct
