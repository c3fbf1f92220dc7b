#pragma once

#include "treepose/decode.hpp"
#include "treepose/trainer.hpp"

namespace treepose {

struct InferConfig {
  std::string mode = "tree_dp";
  double pairwise_weight = 0.01;
};

/// Parsed key=value configuration with sections [model], [train], [data],
/// [infer]. Unknown keys are rejected; dump() prints every effective value.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  SkeletonSpec data;
  InferConfig infer;

  static RunConfig from_file(const std::string& path);
  static RunConfig from_text(const std::string& text);
  void set(const std::string& section, const std::string& key,
           const std::string& value);
  std::string dump() const;
  void validate() const;
};

std::string backbone_to_string(const std::vector<BackboneLayerSpec>& bb);
std::vector<BackboneLayerSpec> backbone_from_string(const std::string& s);

}  // namespace treepose
