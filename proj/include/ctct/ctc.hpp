#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "ctct/tensor.hpp"

namespace ctct {

// Log-space negative-infinity sentinel; large enough that exp underflows to 0
// and sums never overflow.
inline constexpr double kLogZero = -1e30;

inline double log_add(double a, double b) {
  if (a <= kLogZero / 2) return b;
  if (b <= kLogZero / 2) return a;
  double m = std::max(a, b);
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

// The B mapping: merge adjacent repeats, then delete blanks (id 0).
std::vector<int> collapse(const std::vector<int>& path);

// |target| plus one slot per adjacent equal pair; the minimum T that can emit
// the target.
int ctc_required_length(const std::vector<int>& target);

template <typename T>
struct CtcResult {
  T nll = 0;           // negative log-likelihood, nats
  Mat<T> grad_logits;  // [T, L+1] gradient w.r.t. pre-softmax logits
};

// Log-space forward-backward over the blank-augmented target. `logprobs` rows
// must be log-distributions. Throws Error{InfeasibleTarget} when the target
// cannot fit in T frames.
template <typename T>
CtcResult<T> ctc_loss(const Mat<T>& logprobs, const std::vector<int>& target) {
  const int steps = static_cast<int>(logprobs.rows());
  const int classes = static_cast<int>(logprobs.cols());
  if (target.empty()) throw Error(ErrorKind::InfeasibleTarget, "empty training target");
  for (int id : target)
    if (id < 1 || id >= classes)
      throw Error(ErrorKind::ShapeError, "target id " + std::to_string(id) + " out of range");
  if (ctc_required_length(target) > steps)
    throw Error(ErrorKind::InfeasibleTarget,
                "target needs " + std::to_string(ctc_required_length(target)) + " frames, have " +
                    std::to_string(steps));

  const int s_len = 2 * static_cast<int>(target.size()) + 1;
  auto lab = [&](int s) { return (s % 2) ? target[s / 2] : 0; };
  auto can_skip = [&](int s) {  // diagonal transition s-2 -> s
    return s >= 2 && lab(s) != 0 && lab(s) != lab(s - 2);
  };

  Mat<double> alpha = Mat<double>::Constant(steps, s_len, kLogZero);
  Mat<double> beta = Mat<double>::Constant(steps, s_len, kLogZero);
  alpha(0, 0) = logprobs(0, 0);
  if (s_len > 1) alpha(0, 1) = logprobs(0, lab(1));
  for (int t = 1; t < steps; ++t)
    for (int s = 0; s < s_len; ++s) {
      double a = alpha(t - 1, s);
      if (s >= 1) a = log_add(a, alpha(t - 1, s - 1));
      if (can_skip(s)) a = log_add(a, alpha(t - 1, s - 2));
      alpha(t, s) = a + logprobs(t, lab(s));
    }

  // beta excludes the emission at t, so alpha + beta counts each frame once
  beta(steps - 1, s_len - 1) = 0;
  if (s_len > 1) beta(steps - 1, s_len - 2) = 0;
  for (int t = steps - 2; t >= 0; --t)
    for (int s = s_len - 1; s >= 0; --s) {
      double b = beta(t + 1, s) + logprobs(t + 1, lab(s));
      if (s + 1 < s_len) b = log_add(b, beta(t + 1, s + 1) + logprobs(t + 1, lab(s + 1)));
      if (s + 2 < s_len && can_skip(s + 2))
        b = log_add(b, beta(t + 1, s + 2) + logprobs(t + 1, lab(s + 2)));
      beta(t, s) = b;
    }

  double logp = alpha(steps - 1, s_len - 1);
  if (s_len > 1) logp = log_add(logp, alpha(steps - 1, s_len - 2));
  if (logp <= kLogZero / 2)
    throw Error(ErrorKind::NumericError, "ctc probability underflow to zero");

  CtcResult<T> res;
  res.nll = static_cast<T>(-logp);
  res.grad_logits = Mat<T>(steps, classes);
  for (int t = 0; t < steps; ++t) {
    std::vector<double> occ(classes, kLogZero);  // log posterior mass per class
    for (int s = 0; s < s_len; ++s)
      occ[lab(s)] = log_add(occ[lab(s)], alpha(t, s) + beta(t, s));
    for (int k = 0; k < classes; ++k) {
      double softmax = std::exp(static_cast<double>(logprobs(t, k)));
      double post = occ[k] <= kLogZero / 2 ? 0.0 : std::exp(occ[k] - logp);
      res.grad_logits(t, k) = static_cast<T>(softmax - post);
    }
  }
  return res;
}

// Independent oracle: sums per-frame probability products over every
// (L+1)^T frame path whose collapse equals `target`. Enumerable instances
// only ((L+1)^T <= 1e7).
template <typename T>
double brute_force_prob(const Mat<T>& logprobs, const std::vector<int>& target) {
  const int steps = static_cast<int>(logprobs.rows());
  const int classes = static_cast<int>(logprobs.cols());
  double paths = std::pow(static_cast<double>(classes), steps);
  if (paths > 1e7)
    throw Error(ErrorKind::InstanceTooLarge, "brute_force_prob instance exceeds 1e7 paths");

  double total = 0.0;
  std::vector<int> path(steps, 0);
  // odometer enumeration of all frame paths
  while (true) {
    if (collapse(path) == target) {
      double lp = 0.0;
      for (int t = 0; t < steps; ++t) lp += static_cast<double>(logprobs(t, path[t]));
      total += std::exp(lp);
    }
    int t = steps - 1;
    while (t >= 0 && path[t] == classes - 1) path[t--] = 0;
    if (t < 0) break;
    ++path[t];
  }
  return total;
}

// Per-frame argmax (ties to the lowest id) followed by collapse.
template <typename T>
std::vector<int> greedy_decode(const Mat<T>& logprobs) {
  std::vector<int> path(logprobs.rows());
  for (int t = 0; t < logprobs.rows(); ++t) {
    int best = 0;
    for (int k = 1; k < logprobs.cols(); ++k)
      if (logprobs(t, k) > logprobs(t, best)) best = k;
    path[t] = best;
  }
  return collapse(path);
}

// Prefix beam search over collapsed prefixes, no language model. Keeps
// separate blank / non-blank ending masses per prefix. width = 1 is not
// guaranteed to match greedy (greedy scores frame paths, not prefixes).
template <typename T>
std::vector<int> beam_decode(const Mat<T>& logprobs, int width) {
  if (width < 1) throw Error(ErrorKind::InvalidConfig, "beam width must be >= 1");
  const int steps = static_cast<int>(logprobs.rows());
  const int classes = static_cast<int>(logprobs.cols());

  struct Mass {
    double pb = kLogZero;   // ending in blank
    double pnb = kLogZero;  // ending in the prefix's last label
  };
  std::map<std::vector<int>, Mass> beams;
  beams[{}] = {0.0, kLogZero};

  for (int t = 0; t < steps; ++t) {
    std::map<std::vector<int>, Mass> next;
    for (const auto& [prefix, mass] : beams) {
      double total = log_add(mass.pb, mass.pnb);
      // blank extends the same prefix
      {
        Mass& m = next[prefix];
        m.pb = log_add(m.pb, total + static_cast<double>(logprobs(t, 0)));
      }
      for (int k = 1; k < classes; ++k) {
        double lp = static_cast<double>(logprobs(t, k));
        if (!prefix.empty() && prefix.back() == k) {
          // repeat merges unless a blank separated it
          Mass& same = next[prefix];
          same.pnb = log_add(same.pnb, mass.pnb + lp);
          std::vector<int> ext = prefix;
          ext.push_back(k);
          Mass& m = next[ext];
          m.pnb = log_add(m.pnb, mass.pb + lp);
        } else {
          std::vector<int> ext = prefix;
          ext.push_back(k);
          Mass& m = next[ext];
          m.pnb = log_add(m.pnb, total + lp);
        }
      }
    }
    // prune to the top `width` prefixes
    std::vector<std::pair<double, std::vector<int>>> scored;
    scored.reserve(next.size());
    for (const auto& [prefix, mass] : next)
      scored.emplace_back(log_add(mass.pb, mass.pnb), prefix);
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;  // deterministic tie-break
    });
    if (static_cast<int>(scored.size()) > width) scored.resize(width);
    std::map<std::vector<int>, Mass> pruned;
    for (const auto& [score, prefix] : scored) pruned[prefix] = next[prefix];
    beams = std::move(pruned);
  }

  const std::vector<int>* best = nullptr;
  double best_score = kLogZero * 2;
  for (const auto& [prefix, mass] : beams) {
    double s = log_add(mass.pb, mass.pnb);
    if (s > best_score) {
      best_score = s;
      best = &prefix;
    }
  }
  return best ? *best : std::vector<int>{};
}

inline std::vector<int> collapse(const std::vector<int>& path) {
  std::vector<int> out;
  int prev = -1;
  for (int id : path) {
    if (id != prev && id != 0) out.push_back(id);
    prev = id;
  }
  return out;
}

inline int ctc_required_length(const std::vector<int>& target) {
  int r = static_cast<int>(target.size());
  for (size_t i = 1; i < target.size(); ++i)
    if (target[i] == target[i - 1]) ++r;
  return r;
}

}  // namespace ctct
