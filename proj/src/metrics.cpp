#include "treepose/metrics.hpp"

#include <cmath>

namespace treepose {

namespace {

double dist(double ax, double ay, double bx, double by) {
  return std::hypot(ax - bx, ay - by);
}

}  // namespace

PcpResult pcp_strict(const std::vector<PoseEstimate>& estimates,
                     const std::vector<PoseSample>& ground_truth,
                     const std::vector<Limb>& limbs) {
  if (estimates.size() != ground_truth.size())
    throw DataError("pcp_strict: estimate/ground-truth count mismatch");
  std::map<std::string, std::pair<long, long>> tally;  // correct, total
  PcpResult res;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    const auto& est = estimates[i];
    const auto& gt = ground_truth[i];
    for (const auto& limb : limbs) {
      const double len = dist(gt.joint_x[limb.joint_a], gt.joint_y[limb.joint_a],
                              gt.joint_x[limb.joint_b], gt.joint_y[limb.joint_b]);
      if (len <= 0.0) {
        ++res.skipped_zero_length;
        continue;
      }
      const double ea =
          dist(est.px[limb.joint_a], est.py[limb.joint_a],
               gt.joint_x[limb.joint_a], gt.joint_y[limb.joint_a]);
      const double eb =
          dist(est.px[limb.joint_b], est.py[limb.joint_b],
               gt.joint_x[limb.joint_b], gt.joint_y[limb.joint_b]);
      auto& t = tally[limb.group];
      ++t.second;
      if (ea <= 0.5 * len && eb <= 0.5 * len) ++t.first;
    }
  }
  double sum = 0.0;
  for (const auto& [group, t] : tally) {
    const double pcp =
        t.second ? 100.0 * static_cast<double>(t.first) / t.second : 0.0;
    res.group_pcp[group] = pcp;
    sum += pcp;
  }
  res.mean = tally.empty() ? 0.0 : sum / static_cast<double>(tally.size());
  return res;
}

double pose_scale(const PoseSample& gt) {
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (std::size_t k = 0; k < gt.joint_x.size(); ++k) {
    xmin = std::min(xmin, gt.joint_x[k]);
    xmax = std::max(xmax, gt.joint_x[k]);
    ymin = std::min(ymin, gt.joint_y[k]);
    ymax = std::max(ymax, gt.joint_y[k]);
  }
  return std::hypot(xmax - xmin, ymax - ymin);
}

std::vector<std::vector<double>> pdj_curve(
    const std::vector<PoseEstimate>& estimates,
    const std::vector<PoseSample>& ground_truth,
    const std::vector<double>& thresholds) {
  if (estimates.size() != ground_truth.size())
    throw DataError("pdj_curve: estimate/ground-truth count mismatch");
  for (std::size_t i = 1; i < thresholds.size(); ++i)
    if (thresholds[i] < thresholds[i - 1])
      throw ConfigError("pdj_curve: thresholds must be ascending");
  const std::size_t K =
      ground_truth.empty() ? 0 : ground_truth[0].joint_x.size();
  std::vector<std::vector<double>> out(thresholds.size(),
                                       std::vector<double>(K, 0.0));
  if (estimates.empty()) return out;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    const double scale = pose_scale(ground_truth[i]);
    for (std::size_t k = 0; k < K; ++k) {
      const double err =
          dist(estimates[i].px[k], estimates[i].py[k],
               ground_truth[i].joint_x[k], ground_truth[i].joint_y[k]);
      for (std::size_t t = 0; t < thresholds.size(); ++t)
        if (err <= thresholds[t] * scale) out[t][k] += 1.0;
    }
  }
  for (auto& row : out)
    for (auto& v : row) v /= static_cast<double>(estimates.size());
  return out;
}

}  // namespace treepose
