#pragma once

#include <functional>
#include <string>

#include "ctct/model.hpp"
#include "ctct/rng.hpp"
#include "ctct/tensor.hpp"

namespace ctct {

struct GradCheckReport {
  double max_rel_err = 0;
  double mean_rel_err = 0;
  int coords_checked = 0;
  std::string worst_coord;

  std::string summary() const {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "checked %d coords, max rel err %.3e (%s), mean %.3e",
                  coords_checked, max_rel_err, worst_coord.c_str(), mean_rel_err);
    return buf;
  }
};

inline double grad_rel_err(double analytic, double numeric) {
  double denom = std::max(std::abs(analytic) + std::abs(numeric), 1e-6);
  return std::abs(analytic - numeric) / denom;
}

// Central-difference check of analytic parameter gradients on a random
// coordinate subsample. `loss` must re-evaluate the loss from the current
// parameter values; 64-bit numerics required for the stated tolerances.
inline GradCheckReport finite_diff_check(ParamMap<double>& params,
                                         const ParamMap<double>& analytic,
                                         const std::function<double()>& loss, double eps,
                                         int coords, uint64_t seed) {
  // flat list of (name, index) coordinates across all checked tensors
  std::vector<std::pair<const std::string*, size_t>> all;
  for (const auto& [name, g] : analytic) {
    for (size_t i = 0; i < g.numel(); ++i) all.emplace_back(&name, i);
  }
  Rng rng(seed);
  GradCheckReport rep;
  int n = std::min<int>(coords, static_cast<int>(all.size()));
  // sample without replacement via partial Fisher-Yates
  for (int k = 0; k < n; ++k) {
    size_t j = k + rng.next_below(all.size() - k);
    std::swap(all[k], all[j]);
    const std::string& name = *all[k].first;
    size_t idx = all[k].second;
    double& x = params.at(name)[idx];
    double saved = x;
    x = saved + eps;
    double up = loss();
    x = saved - eps;
    double down = loss();
    x = saved;
    double numeric = (up - down) / (2 * eps);
    double rel = grad_rel_err(analytic.at(name)[idx], numeric);
    rep.mean_rel_err += rel;
    if (rel > rep.max_rel_err) {
      rep.max_rel_err = rel;
      rep.worst_coord = name + "[" + std::to_string(idx) + "]";
    }
    ++rep.coords_checked;
  }
  if (rep.coords_checked) rep.mean_rel_err /= rep.coords_checked;
  return rep;
}

// End-to-end check: model forward + CTC loss vs finite differences over a
// parameter subsample. `corrupt` flips the sign of one analytic gradient
// tensor, the negative control for the checker itself.
inline GradCheckReport grad_check_model(Model<double>& model, const Image& img,
                                        const std::vector<int>& target, double eps = 1e-5,
                                        int coords = 200, uint64_t seed = 1,
                                        bool corrupt = false) {
  auto loss = [&]() {
    Mat<double> logprobs = model.forward(img, true, nullptr);
    return static_cast<double>(ctc_loss(logprobs, target).nll);
  };
  ModelCache<double> cache;
  model.forward(img, true, &cache);
  CtcResult<double> res = ctc_loss(cache.logprobs, target);
  ParamMap<double> grads = model.backward(res.grad_logits, cache);
  if (corrupt && !grads.empty())
    for (double& v : grads.begin()->second.data) v = -v;
  return finite_diff_check(model.params(), grads, loss, eps, coords, seed);
}

}  // namespace ctct
