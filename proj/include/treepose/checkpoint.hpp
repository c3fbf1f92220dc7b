#pragma once

#include <string>
#include <vector>

#include "treepose/model.hpp"

namespace treepose {

struct NamedTensor {
  std::string name;
  std::vector<int> dims;
  std::vector<float> values;
};

/// Little-endian binary: magic "SPL1", version u32, tensor count u32, then
/// per tensor: name length u16, name bytes, rank u8, dims u32 each, raw
/// 32-bit values. Written to a temp file and renamed on success.
void save_checkpoint(const std::string& path,
                     const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> load_checkpoint(const std::string& path);

template <class T>
std::vector<NamedTensor> model_tensors(PoseModelT<T>& m) {
  std::vector<NamedTensor> out;
  for (auto* p : m.params()) {
    NamedTensor w{p->name + ".weight", p->weights.shape, {}};
    w.values.reserve(p->weights.data.size());
    for (auto v : p->weights.data) w.values.push_back(static_cast<float>(v));
    out.push_back(std::move(w));
    NamedTensor b{p->name + ".bias", p->bias.shape, {}};
    for (auto v : p->bias.data) b.values.push_back(static_cast<float>(v));
    out.push_back(std::move(b));
  }
  return out;
}

template <class T>
void load_into_model(PoseModelT<T>& m, const std::vector<NamedTensor>& ts) {
  auto find = [&](const std::string& name) -> const NamedTensor& {
    for (const auto& t : ts)
      if (t.name == name) return t;
    throw DataError("checkpoint is missing tensor '" + name + "'");
  };
  for (auto* p : m.params()) {
    for (auto [tensor, name] :
         {std::pair<TensorT<T>*, std::string>{&p->weights, p->name + ".weight"},
          {&p->bias, p->name + ".bias"}}) {
      const NamedTensor& t = find(name);
      if (t.dims != tensor->shape)
        throw DataError("checkpoint tensor '" + name + "' has shape " +
                        shape_str(t.dims) + " but the model expects " +
                        shape_str(tensor->shape));
      for (std::size_t i = 0; i < t.values.size(); ++i)
        tensor->data[i] = static_cast<T>(t.values[i]);
    }
  }
}

}  // namespace treepose
