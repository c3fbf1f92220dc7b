#pragma once

#include <map>
#include <vector>

#include "treepose/ops.hpp"

namespace treepose {

/// SGD with momentum over per-group learning rates (pretrained/new split of
/// the training schedule). velocity = mu*velocity - rate*grad; w += velocity.
/// Gradients are zeroed after the step.
template <class T>
void sgd_step(std::vector<ConvParamsT<T>*>& params,
              const std::map<std::string, double>& lr_groups, double momentum) {
  for (auto* p : params) {
    auto it = lr_groups.find(p->lr_group);
    if (it == lr_groups.end())
      throw ConfigError("no learning rate for group '" + p->lr_group + "'");
    const T lr = static_cast<T>(it->second);
    const T mu = static_cast<T>(momentum);
    if (p->weights.grad.empty() || p->bias.grad.empty())
      throw NumericError("sgd_step: missing gradient buffer for " + p->name);
    if (p->vel_w.size() != p->weights.data.size())
      p->vel_w.assign(p->weights.data.size(), T(0));
    if (p->vel_b.size() != p->bias.data.size())
      p->vel_b.assign(p->bias.data.size(), T(0));
    for (std::size_t i = 0; i < p->weights.data.size(); ++i) {
      p->vel_w[i] = mu * p->vel_w[i] - lr * p->weights.grad[i];
      p->weights.data[i] += p->vel_w[i];
    }
    for (std::size_t i = 0; i < p->bias.data.size(); ++i) {
      p->vel_b[i] = mu * p->vel_b[i] - lr * p->bias.grad[i];
      p->bias.data[i] += p->vel_b[i];
    }
    p->zero_grad();
    check_finite(p->weights, "sgd_step weights");
  }
}

}  // namespace treepose
