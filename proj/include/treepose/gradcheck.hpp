#pragma once

#include <functional>
#include <random>

#include "treepose/ops.hpp"

namespace treepose {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst;  // tensor name of the worst coordinate
  bool passed(double tol) const { return max_rel_error < tol; }
};

/// One parameter view for finite-difference checking: a value array and the
/// matching analytic gradient array (grad must be populated before the call).
template <class T>
struct CheckedParam {
  std::string name;
  T* values = nullptr;
  const T* grads = nullptr;
  std::size_t count = 0;
};

/// Central finite differences against analytic gradients on a sample of
/// coordinates. `loss` must be a deterministic forward pass.
template <class T>
GradCheckReport grad_check(const std::function<double()>& loss,
                           std::vector<CheckedParam<T>> params, double epsilon,
                           std::size_t samples_per_tensor, uint64_t seed) {
  std::mt19937_64 rng(seed);
  GradCheckReport rep;
  for (auto& pr : params) {
    std::vector<std::size_t> idx;
    if (pr.count <= samples_per_tensor) {
      idx.resize(pr.count);
      for (std::size_t i = 0; i < pr.count; ++i) idx[i] = i;
    } else {
      std::uniform_int_distribution<std::size_t> u(0, pr.count - 1);
      for (std::size_t i = 0; i < samples_per_tensor; ++i) idx.push_back(u(rng));
    }
    for (std::size_t i : idx) {
      const T saved = pr.values[i];
      pr.values[i] = saved + static_cast<T>(epsilon);
      const double lp = loss();
      pr.values[i] = saved - static_cast<T>(epsilon);
      const double lm = loss();
      pr.values[i] = saved;
      if (!std::isfinite(lp) || !std::isfinite(lm))
        throw NumericError("grad_check: non-finite loss");
      const double numeric = (lp - lm) / (2.0 * epsilon);
      const double analytic = static_cast<double>(pr.grads[i]);
      const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-8});
      const double rel = std::abs(numeric - analytic) / denom;
      if (rel > rep.max_rel_error) {
        rep.max_rel_error = rel;
        rep.worst = pr.name + "[" + std::to_string(i) + "]";
      }
      ++rep.checked;
    }
  }
  return rep;
}

}  // namespace treepose
