#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace treepose {

// Error taxonomy shared across the library. The CLI maps these to exit codes.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Dense row-major tensor, canonical layout (batch, channel, row, col).
/// Gradient buffer is allocated lazily by ensure_grad().
template <class T>
struct TensorT {
  std::vector<int> shape;
  std::vector<T> data;
  std::vector<T> grad;

  TensorT() = default;
  explicit TensorT(std::vector<int> s) : shape(std::move(s)) {
    data.assign(numel(), T(0));
  }
  TensorT(std::vector<int> s, T fill) : shape(std::move(s)) {
    data.assign(numel(), fill);
  }

  std::size_t numel() const {
    std::size_t n = 1;
    for (int e : shape) {
      if (e <= 0) throw ConfigError("tensor extent must be positive");
      n *= static_cast<std::size_t>(e);
    }
    return n;
  }

  int dim(int i) const { return shape.at(static_cast<std::size_t>(i)); }
  // 4-D accessors; only valid for rank-4 tensors.
  int n() const { return shape[0]; }
  int c() const { return shape[1]; }
  int h() const { return shape[2]; }
  int w() const { return shape[3]; }

  std::size_t index(int in, int ic, int iy, int ix) const {
    return ((static_cast<std::size_t>(in) * shape[1] + ic) * shape[2] + iy) *
               shape[3] +
           ix;
  }
  T& at(int in, int ic, int iy, int ix) { return data[index(in, ic, iy, ix)]; }
  T at(int in, int ic, int iy, int ix) const {
    return data[index(in, ic, iy, ix)];
  }

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
  }
  void zero_grad() {
    if (!grad.empty()) std::fill(grad.begin(), grad.end(), T(0));
  }

  bool same_shape(const TensorT& o) const { return shape == o.shape; }
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

template <class T>
void check_finite(const TensorT<T>& t, const char* where) {
  for (T v : t.data) {
    if (!std::isfinite(static_cast<double>(v)))
      throw NumericError(std::string("non-finite value in ") + where);
  }
}

inline std::string shape_str(const std::vector<int>& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

}  // namespace treepose
