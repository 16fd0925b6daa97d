#pragma once

#include "ctct/model.hpp"
#include "ctct/tensor.hpp"

namespace ctct {

// Zeiler's update rules:
//   E[g^2]  <- rho E[g^2] + (1-rho) g^2
//   dx       = -sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps) * g
//   E[dx^2] <- rho E[dx^2] + (1-rho) dx^2
//   x       <- x + dx

template <typename T>
struct AdadeltaState {
  ParamMap<T> eg2;   // running squared gradient
  ParamMap<T> edx2;  // running squared update

  void ensure_shapes(const ParamMap<T>& params, const std::vector<std::string>& names) {
    for (const std::string& n : names) {
      if (!eg2.count(n)) eg2[n] = Tensor<T>(params.at(n).shape);
      if (!edx2.count(n)) edx2[n] = Tensor<T>(params.at(n).shape);
    }
  }
};

template <typename T>
void adadelta_tensor_step(Tensor<T>& x, const Tensor<T>& g, Tensor<T>& eg2, Tensor<T>& edx2,
                          T rho, T eps, bool checked) {
  if (rho <= 0 || rho >= 1 || eps <= 0)
    throw Error(ErrorKind::InvalidConfig, "adadelta needs 0 < rho < 1 and eps > 0");
  if (x.numel() != g.numel() || x.numel() != eg2.numel() || x.numel() != edx2.numel())
    throw Error(ErrorKind::ShapeError, "adadelta state shape mismatch");
  if (checked && !g.all_finite())
    throw Error(ErrorKind::NumericError, "non-finite gradient in adadelta_step");
  for (size_t i = 0; i < x.numel(); ++i) {
    eg2[i] = rho * eg2[i] + (1 - rho) * g[i] * g[i];
    T dx = -std::sqrt(edx2[i] + eps) / std::sqrt(eg2[i] + eps) * g[i];
    edx2[i] = rho * edx2[i] + (1 - rho) * dx * dx;
    x[i] += dx;
  }
}

// Applies one step to every parameter that has a gradient entry.
template <typename T>
void adadelta_step(ParamMap<T>& params, const ParamMap<T>& grads, AdadeltaState<T>& state,
                   T rho, T eps, bool checked = false) {
  for (const auto& [name, g] : grads) {
    auto it = params.find(name);
    if (it == params.end())
      throw Error(ErrorKind::ShapeError, "gradient for unknown parameter " + name);
    if (!state.eg2.count(name)) state.eg2[name] = Tensor<T>(it->second.shape);
    if (!state.edx2.count(name)) state.edx2[name] = Tensor<T>(it->second.shape);
    adadelta_tensor_step(it->second, g, state.eg2[name], state.edx2[name], rho, eps, checked);
  }
}

}  // namespace ctct
