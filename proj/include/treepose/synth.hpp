#pragma once

#include <optional>
#include <random>

#include "treepose/loss.hpp"
#include "treepose/model.hpp"
#include "treepose/pgm.hpp"
#include "treepose/tree.hpp"

namespace treepose {

struct EdgeSpec {
  double len_min = 6, len_max = 9;
  double angle_mean = 0.0;    // relative to the parent edge direction
  double angle_spread = 0.3;  // uniform half-width, < pi
};

/// Generator parameters for stick-figure samples. Lengths are in input
/// pixels for a 64-pixel canvas and scale with input_size.
struct SkeletonSpec {
  std::string tree_id = "desk14";
  std::vector<EdgeSpec> edges;  // indexed by child joint; root entry unused
  double root_x_min = 0.34, root_x_max = 0.66;  // canvas fractions
  double root_y_min = 0.34, root_y_max = 0.48;
  double base_rotation_spread = 0.25;  // jitter of the whole figure
  double thickness_min = 1.4, thickness_max = 2.4;
  double fg_min = 150, fg_max = 255;
  double bg_min = 0, bg_max = 50;
  double noise_sigma = 8.0;
  int distractor_min = 0, distractor_max = 3;
  double multi_figure_prob = 0.0;
  int rejection_budget = 1000;

  void validate(const JointTree& tree) const;
};

/// Plausible default proportions for the desk14 tree (scaled by canvas).
SkeletonSpec default_skeleton_spec(const std::string& tree_id = "desk14");

struct PoseSample {
  GrayImage image;
  std::vector<double> joint_x, joint_y;  // input-pixel coordinates
  std::vector<uint8_t> visible;
  std::vector<int> mixture;  // per joint, 0 until clustering fills it
};

/// Joint coordinates only (image left empty); deterministic under seed.
PoseSample sample_pose(const SkeletonSpec& spec, const JointTree& tree,
                       int input_size, uint64_t seed);

/// Renders limbs as anti-aliased segments with noise, distractors and an
/// optional unlabeled second figure; builds the label tensor at score-map
/// resolution (positive disks of cfg.label_radius, nearest joint wins ties).
void render_sample(PoseSample& sample, const SkeletonSpec& spec,
                   const JointTree& tree, int input_size, uint64_t seed);
LabelTensor make_label(const PoseSample& sample, const JointTree& tree,
                       const ModelConfig& cfg);

/// Image tensor in [0,1], shape (1, 1, size, size).
Tensor image_to_tensor(const GrayImage& img);

PoseSample hflip(const PoseSample& s, const JointTree& tree);
PoseSample rotate(const PoseSample& s, double theta);

}  // namespace treepose
