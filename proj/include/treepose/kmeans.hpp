#pragma once

#include <array>

#include "treepose/synth.hpp"

namespace treepose {

/// Per-joint appearance-mixture model: k centroids over the joint's relative
/// position to its parent, normalized by head scale.
struct MixtureModel {
  int k = 1;
  // centroids[joint][cluster] = (dx, dy); root entry stays empty.
  std::vector<std::vector<std::array<double, 2>>> centroids;
};

/// Head scale of one sample: head-neck distance when both joints exist,
/// otherwise 1.
double head_scale(const PoseSample& s, const JointTree& tree);

/// Seeded k-means (k-means++ init, capped Lloyd iterations) per non-root
/// joint; fills every sample's mixture labels with the nearest centroid.
MixtureModel cluster_mixtures(std::vector<PoseSample>& samples,
                              const JointTree& tree, int k, uint64_t seed);

/// Nearest-centroid assignment for one sample (ties to the lowest index).
void assign_mixtures(PoseSample& s, const JointTree& tree,
                     const MixtureModel& mm);

}  // namespace treepose
