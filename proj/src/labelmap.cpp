#include "ctct/labelmap.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "ctct/config.hpp"
#include "ctct/error.hpp"
#include "ctct/unicode.hpp"

namespace ctct {

namespace {
std::string cp_hex(uint32_t cp) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04X", cp);
  return buf;
}
}  // namespace

Vocabulary vocabulary_from_lines(const std::string& text, const std::string& origin) {
  Vocabulary vocab;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string word = trim(line);
    if (word.empty()) continue;
    std::vector<uint32_t> cps = utf8_decode(word);  // throws on invalid UTF-8
    for (uint32_t cp : cps) {
      if (cp < 0x20 || cp == 0x7F)
        throw Error(ErrorKind::InvalidUtf8,
                    origin + ":" + std::to_string(lineno) + ": control character in word");
    }
    vocab.words.push_back(utf8_encode(nfc(cps)));
  }
  if (vocab.words.empty()) throw Error(ErrorKind::EmptyVocabulary, origin + ": no usable words");
  return vocab;
}

Vocabulary load_vocabulary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open vocabulary " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return vocabulary_from_lines(ss.str(), path);
}

LabelMap::LabelMap(std::vector<uint32_t> sorted_codepoints)
    : codepoints_(std::move(sorted_codepoints)) {
  for (size_t i = 0; i < codepoints_.size(); ++i)
    to_id_[codepoints_[i]] = static_cast<int>(i) + 1;
}

LabelMap LabelMap::build(const Vocabulary& vocab, const std::string& punctuation) {
  std::set<uint32_t> cps;
  for (const std::string& w : vocab.words)
    for (uint32_t cp : utf8_decode(w)) cps.insert(cp);
  for (uint32_t cp : utf8_decode(punctuation)) cps.insert(cp);
  return LabelMap(std::vector<uint32_t>(cps.begin(), cps.end()));
}

int LabelMap::id_of(uint32_t cp) const {
  auto it = to_id_.find(cp);
  if (it == to_id_.end())
    throw Error(ErrorKind::MissingGlyph, "codepoint U+" + cp_hex(cp) + " not in label map");
  return it->second;
}

uint32_t LabelMap::codepoint_of(int id) const {
  if (id < 1 || id > num_labels())
    throw Error(ErrorKind::ShapeError, "label id " + std::to_string(id) + " out of range");
  return codepoints_[id - 1];
}

std::vector<int> LabelMap::encode(const std::string& word) const {
  std::vector<int> out;
  for (uint32_t cp : utf8_decode(word)) out.push_back(id_of(cp));
  return out;
}

std::string LabelMap::decode(const std::vector<int>& ids) const {
  std::string out;
  for (int id : ids) out += utf8_encode_cp(codepoint_of(id));
  return out;
}

}  // namespace ctct
