#include "treepose/decode.hpp"

#include <algorithm>
#include <cmath>

namespace treepose {

PairwiseParams estimate_pairwise_params(const std::vector<PoseSample>& train_set,
                                        const JointTree& tree, int downsample,
                                        double weight) {
  if (train_set.empty())
    throw DataError("estimate_pairwise_params: empty dataset");
  PairwiseParams p = PairwiseParams::zeros(tree.size());
  for (int j = 0; j < tree.size(); ++j) {
    if (tree.parent[j] < 0) continue;
    double sx = 0, sy = 0;
    for (const auto& s : train_set) {
      sx += (s.joint_x[j] - s.joint_x[tree.parent[j]]) / downsample;
      sy += (s.joint_y[j] - s.joint_y[tree.parent[j]]) / downsample;
    }
    p.x_r[j] = sx / static_cast<double>(train_set.size());
    p.y_r[j] = sy / static_cast<double>(train_set.size());
    p.w_x[j] = weight;
    p.w_y[j] = weight;
  }
  return p;
}

DecodeMode decode_mode_from_string(const std::string& s) {
  if (s == "argmax") return DecodeMode::Argmax;
  if (s == "tree_dp") return DecodeMode::TreeDP;
  if (s == "gdt") return DecodeMode::GDT;
  throw ConfigError("unknown decode mode: " + s);
}

namespace {

using Grid = std::vector<double>;  // row-major S*S

Grid unary_of(const Tensor& scores, int n, int joint, int M) {
  const int S = scores.h();
  Grid u(static_cast<std::size_t>(S) * S);
  for (int y = 0; y < S; ++y)
    for (int x = 0; x < S; ++x) {
      double best = scores.at(n, joint * M, y, x);
      for (int m = 1; m < M; ++m)
        best = std::max(best,
                        static_cast<double>(scores.at(n, joint * M + m, y, x)));
      u[static_cast<std::size_t>(y) * S + x] = best;
    }
  return u;
}

// msg(lp) = max_lc value(lc) - wx*(xc-xp-xr)^2 - wy*(yc-yp-yr)^2, with the
// argmax per parent location. Naive O(S^4) version.
void edge_message_naive(const Grid& value, int S, double xr, double yr,
                        double wx, double wy, Grid& msg,
                        std::vector<int>& arg) {
  msg.assign(value.size(), 0.0);
  arg.assign(value.size(), 0);
  for (int yp = 0; yp < S; ++yp)
    for (int xp = 0; xp < S; ++xp) {
      double best = -1e300;
      int besti = 0;
      for (int yc = 0; yc < S; ++yc)
        for (int xc = 0; xc < S; ++xc) {
          const double dx = xc - xp - xr, dy = yc - yp - yr;
          const double v = value[static_cast<std::size_t>(yc) * S + xc] -
                           wx * dx * dx - wy * dy * dy;
          if (v > best) {
            best = v;
            besti = yc * S + xc;
          }
        }
      msg[static_cast<std::size_t>(yp) * S + xp] = best;
      arg[static_cast<std::size_t>(yp) * S + xp] = besti;
    }
}

// 1-D generalized distance transform: out[j] = max_i f[i] - w*(j + r - i)^2
// via the lower envelope of parabolas (evaluated at u = j + r).
void dt1d(const double* f, int n, double w, double r, double* out, int* arg) {
  if (w == 0.0) {
    double best = f[0];
    int besti = 0;
    for (int i = 1; i < n; ++i)
      if (f[i] > best) {
        best = f[i];
        besti = i;
      }
    for (int j = 0; j < n; ++j) {
      out[j] = best;
      arg[j] = besti;
    }
    return;
  }
  std::vector<int> v(n);
  std::vector<double> z(n + 1);
  int k = 0;
  v[0] = 0;
  z[0] = -1e300;
  z[1] = 1e300;
  auto g = [&](int i) { return -f[i]; };  // minimize g + w*(u-i)^2
  for (int q = 1; q < n; ++q) {
    double s;
    while (true) {
      const int p = v[k];
      s = ((g(q) + w * q * q) - (g(p) + w * p * p)) / (2.0 * w * (q - p));
      if (s <= z[k]) {
        --k;
      } else {
        break;
      }
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = 1e300;
  }
  k = 0;
  for (int j = 0; j < n; ++j) {
    const double u = j + r;
    while (z[k + 1] < u) ++k;
    const int i = v[k];
    out[j] = f[i] - w * (u - i) * (u - i);
    arg[j] = i;
  }
}

void edge_message_gdt(const Grid& value, int S, double xr, double yr,
                      double wx, double wy, Grid& msg, std::vector<int>& arg) {
  Grid tmp(value.size());
  std::vector<int> argx(value.size());
  // Rows: tmp(yc, xp) = max_xc value(yc, xc) - wx*(xp + xr - xc)^2.
  for (int yc = 0; yc < S; ++yc)
    dt1d(value.data() + static_cast<std::size_t>(yc) * S, S, wx, xr,
         tmp.data() + static_cast<std::size_t>(yc) * S,
         argx.data() + static_cast<std::size_t>(yc) * S);
  // Columns: msg(yp, xp) = max_yc tmp(yc, xp) - wy*(yp + yr - yc)^2.
  msg.assign(value.size(), 0.0);
  arg.assign(value.size(), 0);
  std::vector<int> argy(S);
  std::vector<double> col(S), colout(S);
  for (int xp = 0; xp < S; ++xp) {
    for (int yc = 0; yc < S; ++yc)
      col[yc] = tmp[static_cast<std::size_t>(yc) * S + xp];
    dt1d(col.data(), S, wy, yr, colout.data(), argy.data());
    for (int yp = 0; yp < S; ++yp) {
      msg[static_cast<std::size_t>(yp) * S + xp] = colout[yp];
      const int yc = argy[yp];
      arg[static_cast<std::size_t>(yp) * S + xp] =
          yc * S + argx[static_cast<std::size_t>(yc) * S + xp];
    }
  }
}

}  // namespace

PoseEstimate decode(const Tensor& scores, int sample_index, int mixtures,
                    int downsample, const PairwiseParams& params,
                    const JointTree& tree, DecodeMode mode) {
  const int K = tree.size();
  const int S = scores.h();
  if (scores.c() < K * mixtures)
    throw ConfigError("decode: score channel count below K*M");
  PoseEstimate est;
  est.cell_x.assign(K, 0);
  est.cell_y.assign(K, 0);
  est.px.assign(K, 0);
  est.py.assign(K, 0);
  est.peak.assign(K, 0);

  std::vector<Grid> unary(K);
  for (int k = 0; k < K; ++k)
    unary[k] = unary_of(scores, sample_index, k, mixtures);

  auto first_argmax = [&](const Grid& g) {
    int best = 0;
    for (std::size_t i = 1; i < g.size(); ++i)
      if (g[i] > g[best]) best = static_cast<int>(i);
    return best;
  };

  if (mode == DecodeMode::Argmax) {
    est.objective = 0.0;
    for (int k = 0; k < K; ++k) {
      const int i = first_argmax(unary[k]);
      est.cell_x[k] = i % S;
      est.cell_y[k] = i / S;
      est.peak[k] = unary[k][i];
      est.objective += unary[k][i];
    }
  } else {
    // Leaf-to-root max-sum. value[k] accumulates the joint's unary plus the
    // incoming child messages; arg[k] stores the best child cell per parent
    // cell for backtracking.
    std::vector<Grid> value = unary;
    std::vector<Grid> msg(K);
    std::vector<std::vector<int>> arg(K);
    for (int k : tree.upward_order) {
      for (int c : tree.children[k]) {
        if (mode == DecodeMode::TreeDP)
          edge_message_naive(value[c], S, params.x_r[c], params.y_r[c],
                             params.w_x[c], params.w_y[c], msg[c], arg[c]);
        else
          edge_message_gdt(value[c], S, params.x_r[c], params.y_r[c],
                           params.w_x[c], params.w_y[c], msg[c], arg[c]);
        for (std::size_t i = 0; i < value[k].size(); ++i)
          value[k][i] += msg[c][i];
      }
    }
    const int ri = first_argmax(value[tree.root]);
    est.objective = value[tree.root][ri];
    std::vector<int> cell(K, -1);
    cell[tree.root] = ri;
    for (int k : tree.downward_order)
      for (int c : tree.children[k]) cell[c] = arg[c][cell[k]];
    for (int k = 0; k < K; ++k) {
      est.cell_x[k] = cell[k] % S;
      est.cell_y[k] = cell[k] / S;
      est.peak[k] = unary[k][cell[k]];
    }
  }
  for (int k = 0; k < K; ++k) {
    est.px[k] = (est.cell_x[k] + 0.5) * downsample;
    est.py[k] = (est.cell_y[k] + 0.5) * downsample;
  }
  return est;
}

double evaluate_objective(const Tensor& scores, int sample_index, int mixtures,
                          const PairwiseParams& params, const JointTree& tree,
                          const std::vector<int>& cell_x,
                          const std::vector<int>& cell_y) {
  double obj = 0.0;
  for (int k = 0; k < tree.size(); ++k) {
    double best = scores.at(sample_index, k * mixtures, cell_y[k], cell_x[k]);
    for (int m = 1; m < mixtures; ++m)
      best = std::max(best, static_cast<double>(scores.at(
                                sample_index, k * mixtures + m, cell_y[k],
                                cell_x[k])));
    obj += best;
    if (tree.parent[k] >= 0) {
      const double dx = cell_x[k] - cell_x[tree.parent[k]] - params.x_r[k];
      const double dy = cell_y[k] - cell_y[tree.parent[k]] - params.y_r[k];
      obj -= params.w_x[k] * dx * dx + params.w_y[k] * dy * dy;
    }
  }
  return obj;
}

}  // namespace treepose
