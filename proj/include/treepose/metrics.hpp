#pragma once

#include <map>

#include "treepose/decode.hpp"

namespace treepose {

struct PcpResult {
  std::map<std::string, double> group_pcp;  // percent correct per limb group
  double mean = 0.0;                        // mean over groups
  int skipped_zero_length = 0;
};

/// Strict PCP: a limb counts only if BOTH endpoint errors are <= 0.5 times
/// the ground-truth limb length. Coordinates are input pixels.
PcpResult pcp_strict(const std::vector<PoseEstimate>& estimates,
                     const std::vector<PoseSample>& ground_truth,
                     const std::vector<Limb>& limbs);

/// PDJ: per joint and threshold, the fraction of samples with error
/// <= t * pose scale (scale = diagonal of the ground-truth joint box).
/// Rows are thresholds, columns joints.
std::vector<std::vector<double>> pdj_curve(
    const std::vector<PoseEstimate>& estimates,
    const std::vector<PoseSample>& ground_truth,
    const std::vector<double>& thresholds);

double pose_scale(const PoseSample& gt);

}  // namespace treepose
