#include "treepose/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace treepose {

double head_scale(const PoseSample& s, const JointTree& tree) {
  int head = -1, neck = -1;
  for (int k = 0; k < tree.size(); ++k) {
    if (tree.joint_names[k] == "head") head = k;
    if (tree.joint_names[k] == "neck") neck = k;
  }
  if (head < 0 || neck < 0) return 1.0;
  const double dx = s.joint_x[head] - s.joint_x[neck];
  const double dy = s.joint_y[head] - s.joint_y[neck];
  const double d = std::sqrt(dx * dx + dy * dy);
  return d > 0 ? d : 1.0;
}

namespace {

using Pt = std::array<double, 2>;

double d2(const Pt& a, const Pt& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1];
  return dx * dx + dy * dy;
}

int nearest(const Pt& p, const std::vector<Pt>& cs) {
  int best = 0;
  double bd = d2(p, cs[0]);
  for (int i = 1; i < static_cast<int>(cs.size()); ++i) {
    const double d = d2(p, cs[i]);
    if (d < bd) {
      bd = d;
      best = i;
    }
  }
  return best;
}

std::vector<Pt> lloyd(const std::vector<Pt>& pts, int k, std::mt19937_64& rng) {
  std::set<Pt> distinct(pts.begin(), pts.end());
  if (static_cast<int>(distinct.size()) < k)
    throw DataError("cluster_mixtures: k exceeds the number of distinct points");
  // k-means++ seeding.
  std::vector<Pt> cs;
  std::uniform_int_distribution<std::size_t> first(0, pts.size() - 1);
  cs.push_back(pts[first(rng)]);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  while (static_cast<int>(cs.size()) < k) {
    std::vector<double> w(pts.size());
    double total = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      double bd = d2(pts[i], cs[0]);
      for (const auto& c : cs) bd = std::min(bd, d2(pts[i], c));
      w[i] = bd;
      total += bd;
    }
    double r = u01(rng) * total;
    std::size_t pick = 0;
    for (; pick + 1 < pts.size(); ++pick) {
      r -= w[pick];
      if (r <= 0) break;
    }
    cs.push_back(pts[pick]);
  }
  for (int iter = 0; iter < 100; ++iter) {
    std::vector<Pt> sums(k, {0, 0});
    std::vector<int> counts(k, 0);
    for (const auto& p : pts) {
      const int a = nearest(p, cs);
      sums[a][0] += p[0];
      sums[a][1] += p[1];
      ++counts[a];
    }
    bool moved = false;
    for (int i = 0; i < k; ++i) {
      if (!counts[i]) continue;  // empty cluster keeps its centroid
      Pt next = {sums[i][0] / counts[i], sums[i][1] / counts[i]};
      if (next != cs[i]) moved = true;
      cs[i] = next;
    }
    if (!moved) break;
  }
  return cs;
}

}  // namespace

MixtureModel cluster_mixtures(std::vector<PoseSample>& samples,
                              const JointTree& tree, int k, uint64_t seed) {
  if (samples.empty()) throw DataError("cluster_mixtures: empty dataset");
  if (k < 1) throw ConfigError("cluster_mixtures: k must be >= 1");
  MixtureModel mm;
  mm.k = k;
  mm.centroids.resize(tree.size());
  std::mt19937_64 rng(seed);
  for (int j = 0; j < tree.size(); ++j) {
    if (tree.parent[j] < 0) continue;
    std::vector<Pt> pts;
    pts.reserve(samples.size());
    for (const auto& s : samples) {
      const double hs = head_scale(s, tree);
      pts.push_back({(s.joint_x[j] - s.joint_x[tree.parent[j]]) / hs,
                     (s.joint_y[j] - s.joint_y[tree.parent[j]]) / hs});
    }
    mm.centroids[j] =
        k == 1 ? std::vector<Pt>{pts[0]} : lloyd(pts, k, rng);
    if (k == 1) {
      // Single mixture: centroid is just the mean.
      Pt mean = {0, 0};
      for (const auto& p : pts) {
        mean[0] += p[0];
        mean[1] += p[1];
      }
      mean[0] /= pts.size();
      mean[1] /= pts.size();
      mm.centroids[j][0] = mean;
    }
  }
  for (auto& s : samples) assign_mixtures(s, tree, mm);
  return mm;
}

void assign_mixtures(PoseSample& s, const JointTree& tree,
                     const MixtureModel& mm) {
  s.mixture.assign(tree.size(), 0);
  const double hs = head_scale(s, tree);
  for (int j = 0; j < tree.size(); ++j) {
    if (tree.parent[j] < 0 || mm.centroids[j].empty()) continue;
    const Pt p = {(s.joint_x[j] - s.joint_x[tree.parent[j]]) / hs,
                  (s.joint_y[j] - s.joint_y[tree.parent[j]]) / hs};
    s.mixture[j] = nearest(p, mm.centroids[j]);
  }
}

}  // namespace treepose
