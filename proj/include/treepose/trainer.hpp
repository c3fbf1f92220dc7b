#pragma once

#include <ostream>

#include "treepose/decode.hpp"
#include "treepose/metrics.hpp"
#include "treepose/model.hpp"

namespace treepose {

struct TrainConfig {
  int epochs = 8;
  int batch_size = 8;
  double lr_backbone = 0.01;  // backbone and new layers get separate rates
  double lr_new = 0.01;
  double momentum = 0.9;
  uint64_t seed = 1;
  double val_fraction = 0.05;  // used when no explicit validation set is given
  bool augment_hflip = false;
  double augment_rotate = 0.0;  // uniform rotation half-width in radians
};

struct EpochStats {
  double train_loss = 0.0;
  double val_pcp = 0.0;
};

struct TrainResult {
  std::vector<EpochStats> epochs;
  PairwiseParams pairwise;  // estimated from the training set
};

/// Mini-batch SGD over the masked objective. Deterministic under a fixed
/// seed. Throws NumericError if the loss goes non-finite.
TrainResult train_model(PoseModel& model, const std::vector<PoseSample>& train_set,
                        const std::vector<PoseSample>& val_set,
                        const TrainConfig& tc, std::ostream* log = nullptr);

/// Batched eval-mode forward + decode over a dataset.
std::vector<PoseEstimate> predict_all(PoseModel& model,
                                      const std::vector<PoseSample>& samples,
                                      const PairwiseParams& pairwise,
                                      DecodeMode mode);

}  // namespace treepose
