#pragma once

#include <random>

#include "treepose/tensor.hpp"

namespace treepose {

/// Per-pixel class labels over K*M+1 classes (background last) plus the
/// binary supervision mask.
struct LabelTensor {
  int n = 0, h = 0, w = 0;
  int num_classes = 0;
  std::vector<int> cls;
  std::vector<uint8_t> mask;

  std::size_t size() const {
    return static_cast<std::size_t>(n) * h * w;
  }
  std::size_t index(int in, int iy, int ix) const {
    return (static_cast<std::size_t>(in) * h + iy) * w + ix;
  }
  int background() const { return num_classes - 1; }
};

/// Keeps every positive pixel and an independent keep_ratio fraction of the
/// background pixels. Resampled per epoch by the trainer.
inline void sample_negative_mask(LabelTensor& labels, double keep_ratio,
                                 uint64_t seed) {
  if (keep_ratio <= 0.0 || keep_ratio > 1.0)
    throw ConfigError("keep_ratio must be in (0,1]");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  labels.mask.assign(labels.size(), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels.cls[i] != labels.background())
      labels.mask[i] = 1;
    else
      labels.mask[i] = u(rng) < keep_ratio ? 1 : 0;
  }
}

/// Masked pixel-wise softmax cross-entropy, normalized by the number of
/// supervised pixels. Fills dscores (same shape as scores) when non-null.
template <class T>
double masked_loss(const TensorT<T>& scores, const LabelTensor& labels,
                   TensorT<T>* dscores = nullptr) {
  if (scores.n() != labels.n || scores.h() != labels.h ||
      scores.w() != labels.w || scores.c() != labels.num_classes)
    throw ConfigError("masked_loss: score/label shape mismatch");
  const int C = scores.c();
  std::size_t supervised = 0;
  for (auto m : labels.mask) supervised += m;
  if (supervised == 0) throw DataError("masked_loss: no supervised pixels");
  if (dscores) {
    *dscores = TensorT<T>(scores.shape);
  }
  const double inv = 1.0 / static_cast<double>(supervised);
  double loss = 0.0;
  std::vector<double> probs(C);
  for (int n = 0; n < scores.n(); ++n)
    for (int y = 0; y < scores.h(); ++y)
      for (int x = 0; x < scores.w(); ++x) {
        if (!labels.mask[labels.index(n, y, x)]) continue;
        double mx = -1e300;
        for (int c = 0; c < C; ++c)
          mx = std::max(mx, static_cast<double>(scores.at(n, c, y, x)));
        double z = 0.0;
        for (int c = 0; c < C; ++c) {
          probs[c] = std::exp(static_cast<double>(scores.at(n, c, y, x)) - mx);
          z += probs[c];
        }
        const int t = labels.cls[labels.index(n, y, x)];
        loss -= std::log(probs[t] / z);
        if (dscores)
          for (int c = 0; c < C; ++c)
            dscores->at(n, c, y, x) =
                static_cast<T>((probs[c] / z - (c == t ? 1.0 : 0.0)) * inv);
      }
  loss *= inv;
  if (!std::isfinite(loss)) throw NumericError("masked_loss: non-finite loss");
  return loss;
}

}  // namespace treepose
