#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace ctct {

// Word list, NFC-normalized. No empty words, no control characters.
struct Vocabulary {
  std::vector<std::string> words;
};

Vocabulary load_vocabulary(const std::string& path);
Vocabulary vocabulary_from_lines(const std::string& text, const std::string& origin = "<text>");

// Codepoint <-> class-id bijection. Id 0 is the CTC blank and never maps to
// a codepoint; ids 1..L are assigned in ascending codepoint order.
class LabelMap {
 public:
  static constexpr int kBlank = 0;

  LabelMap() = default;
  explicit LabelMap(std::vector<uint32_t> sorted_codepoints);

  // Covers every codepoint in the vocabulary plus the given punctuation string.
  static LabelMap build(const Vocabulary& vocab, const std::string& punctuation);

  int num_labels() const { return static_cast<int>(codepoints_.size()); }       // L
  int num_classes() const { return num_labels() + 1; }                          // L + 1
  bool contains(uint32_t cp) const { return to_id_.count(cp) != 0; }
  int id_of(uint32_t cp) const;              // throws Error{MissingGlyph}
  uint32_t codepoint_of(int id) const;       // ids 1..L
  const std::vector<uint32_t>& codepoints() const { return codepoints_; }

  // Maps a UTF-8 word (assumed NFC) to label ids; throws on unmapped codepoints.
  std::vector<int> encode(const std::string& word) const;
  std::string decode(const std::vector<int>& ids) const;

 private:
  std::vector<uint32_t> codepoints_;  // index i holds codepoint of id i+1
  std::map<uint32_t, int> to_id_;
};

}  // namespace ctct
