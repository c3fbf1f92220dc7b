#pragma once

#include "treepose/synth.hpp"

namespace treepose {

/// Quadratic distance-descriptor parameters, indexed by child joint:
/// mean child-minus-parent offsets (score-map units) and the fixed
/// non-negative weights on [dx^2, dy^2].
struct PairwiseParams {
  std::vector<double> x_r, y_r;
  std::vector<double> w_x, w_y;

  static PairwiseParams zeros(int joints) {
    PairwiseParams p;
    p.x_r.assign(joints, 0.0);
    p.y_r.assign(joints, 0.0);
    p.w_x.assign(joints, 0.0);
    p.w_y.assign(joints, 0.0);
    return p;
  }
};

/// Mean relative offsets over a training set, weights fixed at [0.01, 0.01].
PairwiseParams estimate_pairwise_params(const std::vector<PoseSample>& train_set,
                                        const JointTree& tree, int downsample,
                                        double weight = 0.01);

struct PoseEstimate {
  std::vector<int> cell_x, cell_y;       // score-map cells
  std::vector<double> px, py;            // input pixels (cell centers)
  std::vector<double> peak;              // unary value at the chosen cell
  double objective = 0.0;                // sum of unaries - sum of pairwise
};

enum class DecodeMode { Argmax, TreeDP, GDT };

DecodeMode decode_mode_from_string(const std::string& s);

/// Per-joint unaries are the max over that joint's mixture channels of
/// scores(sample_index, k*M+m, ., .). Argmax ignores the pairwise terms;
/// TreeDP is exact leaf-to-root max-sum; GDT computes the same optimum with
/// separable generalized distance transforms. All ties break to the smallest
/// row-major linear index.
PoseEstimate decode(const Tensor& scores, int sample_index, int mixtures,
                    int downsample, const PairwiseParams& params,
                    const JointTree& tree, DecodeMode mode);

/// Re-evaluates the decoded objective from scratch (self-consistency check).
double evaluate_objective(const Tensor& scores, int sample_index, int mixtures,
                          const PairwiseParams& params, const JointTree& tree,
                          const std::vector<int>& cell_x,
                          const std::vector<int>& cell_y);

}  // namespace treepose
