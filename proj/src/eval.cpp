#include "ctct/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <sstream>

#include "ctct/error.hpp"
#include "ctct/pgm.hpp"
#include "ctct/unicode.hpp"

namespace fs = std::filesystem;

namespace ctct {

long levenshtein(const std::string& a, const std::string& b) {
  std::vector<uint32_t> u = nfc(utf8_decode(a));
  std::vector<uint32_t> v = nfc(utf8_decode(b));
  size_t n = u.size(), m = v.size();
  std::vector<long> prev(m + 1), cur(m + 1);
  std::iota(prev.begin(), prev.end(), 0L);
  for (size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<long>(i);
    for (size_t j = 1; j <= m; ++j) {
      long sub = prev[j - 1] + (u[i - 1] == v[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

EvalReport aggregate(std::vector<EvalPair> pairs) {
  if (pairs.empty()) throw Error(ErrorKind::EmptyCorpus, "no evaluation pairs");
  EvalReport rep;
  rep.pairs = std::move(pairs);
  for (const EvalPair& p : rep.pairs) {
    if (p.ground_truth.empty()) throw Error(ErrorKind::EmptyCorpus, "empty ground truth");
    long d = levenshtein(p.recognized, p.ground_truth);
    rep.distances.push_back(d);
    rep.total_distance += d;
    rep.n_characters += static_cast<long>(nfc(utf8_decode(p.ground_truth)).size());
    if (nfc_utf8(p.recognized) == nfc_utf8(p.ground_truth)) ++rep.n_correct;
  }
  rep.n_words = static_cast<long>(rep.pairs.size());
  rep.crr = static_cast<double>(rep.n_characters - rep.total_distance) / rep.n_characters;
  rep.wrr = static_cast<double>(rep.n_correct) / rep.n_words;
  return rep;
}

double crr(const std::vector<EvalPair>& pairs) { return aggregate(pairs).crr; }
double wrr(const std::vector<EvalPair>& pairs) { return aggregate(pairs).wrr; }

std::string EvalReport::to_table() const {
  char buf[256];
  std::ostringstream out;
  out << "words        " << n_words << "\n";
  out << "characters   " << n_characters << "\n";
  out << "edit_dist    " << total_distance << "\n";
  std::snprintf(buf, sizeof(buf), "CRR          %.4f\nWRR          %.4f\n", crr, wrr);
  out << buf;
  return out.str();
}

std::string EvalReport::to_machine_lines() const {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "n_words\t%ld\nn_characters\t%ld\ntotal_distance\t%ld\ncrr\t%f\nwrr\t%f\n",
                n_words, n_characters, total_distance, crr, wrr);
  return buf;
}

EvalReport evaluate_manifest(const DatasetManifest& manifest, const std::string& manifest_dir,
                             const Recognizer& recognize) {
  if (manifest.records.empty()) throw Error(ErrorKind::EmptyCorpus, "manifest has no records");
  std::vector<EvalPair> pairs;
  pairs.reserve(manifest.records.size());
  for (const ManifestRecord& rec : manifest.records) {
    Image img = load_pgm((fs::path(manifest_dir) / rec.path).string());
    pairs.push_back({recognize(img), rec.text});
  }
  return aggregate(std::move(pairs));
}

}  // namespace ctct
