#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ctct/image.hpp"
#include "ctct/render.hpp"

namespace ctct {

struct EvalPair {
  std::string recognized;    // RT
  std::string ground_truth;  // GT, nonempty
};

struct EvalReport {
  long n_words = 0;
  long n_characters = 0;  // total GT codepoints
  long total_distance = 0;
  long n_correct = 0;
  double crr = 0.0;  // (nCharacters - sum distance) / nCharacters; can go negative
  double wrr = 0.0;
  std::vector<EvalPair> pairs;
  std::vector<long> distances;  // per pair

  std::string to_table() const;
  std::string to_machine_lines() const;  // `metric\tvalue` lines
};

// Codepoint-level edit distance with unit insert/delete/substitute costs.
// Inputs are compared after NFC normalization.
long levenshtein(const std::string& a, const std::string& b);

double crr(const std::vector<EvalPair>& pairs);  // throws Error{EmptyCorpus}
double wrr(const std::vector<EvalPair>& pairs);  // throws Error{EmptyCorpus}

EvalReport aggregate(std::vector<EvalPair> pairs);

// Runs `recognize` on every manifest image (paths relative to manifest_dir)
// and aggregates CRR/WRR. `recognize` receives the raw loaded image.
using Recognizer = std::function<std::string(const Image&)>;
EvalReport evaluate_manifest(const DatasetManifest& manifest, const std::string& manifest_dir,
                             const Recognizer& recognize);

}  // namespace ctct
