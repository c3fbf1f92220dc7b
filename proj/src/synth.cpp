#include "treepose/synth.hpp"

#include <algorithm>
#include <cmath>

namespace treepose {

void SkeletonSpec::validate(const JointTree& tree) const {
  if (edges.size() < static_cast<std::size_t>(tree.size()) &&
      tree_id.find("-interp") == std::string::npos)
    throw ConfigError("skeleton spec has too few edge entries");
  for (const auto& e : edges) {
    if (e.len_min <= 0 || e.len_max < e.len_min)
      throw ConfigError("edge length range must be positive and ordered");
    if (e.angle_spread < 0 || e.angle_spread >= M_PI)
      throw ConfigError("angle spread must lie in [0, pi)");
  }
}

SkeletonSpec default_skeleton_spec(const std::string& tree_id) {
  const JointTree base = tree_by_id("desk14");
  SkeletonSpec s;
  s.tree_id = tree_id;
  s.edges.assign(base.size(), EdgeSpec{});
  auto set = [&](const char* name, double lmin, double lmax, double mean,
                 double spread) {
    s.edges[base.index_of(name)] = {lmin, lmax, mean, spread};
  };
  // Angles are relative to the parent edge; root children hang off the
  // downward body axis.
  set("head", 6, 8, M_PI, 0.25);
  set("l_shoulder", 6, 9, M_PI / 2, 0.2);
  set("r_shoulder", 6, 9, -M_PI / 2, 0.2);
  set("l_hip", 8, 11, 0.30, 0.12);
  set("r_hip", 8, 11, -0.30, 0.12);
  set("l_elbow", 7, 10, -M_PI / 2, 0.9);
  set("r_elbow", 7, 10, M_PI / 2, 0.9);
  set("l_wrist", 6, 9, 0.0, 1.0);
  set("r_wrist", 6, 9, 0.0, 1.0);
  set("l_knee", 8, 11, -0.30, 0.45);
  set("r_knee", 8, 11, 0.30, 0.45);
  set("l_ankle", 7, 10, 0.0, 0.5);
  set("r_ankle", 7, 10, 0.0, 0.5);
  return s;
}

namespace {

struct BasePose {
  std::vector<double> x, y;
};

// Walk the base tree from the root, sampling each edge's length and angle.
BasePose sample_base(const SkeletonSpec& spec, const JointTree& base,
                     int input_size, std::mt19937_64& rng, bool& in_bounds) {
  const double scale = input_size / 64.0;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  BasePose p;
  p.x.assign(base.size(), 0.0);
  p.y.assign(base.size(), 0.0);
  std::vector<double> abs_angle(base.size(), 0.0);

  p.x[base.root] = (spec.root_x_min +
                    u01(rng) * (spec.root_x_max - spec.root_x_min)) *
                   input_size;
  p.y[base.root] = (spec.root_y_min +
                    u01(rng) * (spec.root_y_max - spec.root_y_min)) *
                   input_size;
  const double theta0 =
      (u01(rng) * 2.0 - 1.0) * spec.base_rotation_spread;
  abs_angle[base.root] = theta0;

  for (int k : base.downward_order) {
    if (k == base.root) continue;
    const EdgeSpec& e = spec.edges[k];
    const double len =
        (e.len_min + u01(rng) * (e.len_max - e.len_min)) * scale;
    const double ang = abs_angle[base.parent[k]] + e.angle_mean +
                       (u01(rng) * 2.0 - 1.0) * e.angle_spread;
    abs_angle[k] = ang;
    // angle 0 points down the image; positive x is to the right.
    p.x[k] = p.x[base.parent[k]] + len * std::sin(ang);
    p.y[k] = p.y[base.parent[k]] + len * std::cos(ang);
  }
  in_bounds = true;
  for (int k = 0; k < base.size(); ++k)
    if (p.x[k] < 2.0 || p.x[k] > input_size - 3.0 || p.y[k] < 2.0 ||
        p.y[k] > input_size - 3.0)
      in_bounds = false;
  return p;
}

const JointTree& base_tree_of(const SkeletonSpec& spec, const JointTree& tree) {
  static thread_local JointTree base;
  if (spec.tree_id.find("-interp") == std::string::npos) return tree;
  base = tree_by_id(spec.tree_id.substr(0, spec.tree_id.find("-interp")));
  return base;
}

}  // namespace

PoseSample sample_pose(const SkeletonSpec& spec, const JointTree& tree,
                       int input_size, uint64_t seed) {
  const JointTree& base = base_tree_of(spec, tree);
  spec.validate(base);
  std::mt19937_64 rng(seed);
  for (int attempt = 0; attempt < spec.rejection_budget; ++attempt) {
    bool ok = false;
    BasePose p = sample_base(spec, base, input_size, rng, ok);
    if (!ok) continue;
    PoseSample s;
    s.joint_x.assign(tree.size(), 0.0);
    s.joint_y.assign(tree.size(), 0.0);
    s.visible.assign(tree.size(), 1);
    s.mixture.assign(tree.size(), 0);
    // Coordinates are kept on a 1/64-pixel grid so mirroring about the
    // canvas is exact in floating point.
    auto quant = [](double v) { return std::round(v * 64.0) / 64.0; };
    for (int k = 0; k < base.size(); ++k) {
      s.joint_x[k] = quant(p.x[k]);
      s.joint_y[k] = quant(p.y[k]);
    }
    // Interpolated trees append one midpoint per base edge, in child order.
    if (tree.size() > base.size()) {
      int mid = base.size();
      for (int c = 0; c < base.size(); ++c) {
        if (base.parent[c] < 0) continue;
        s.joint_x[mid] = 0.5 * (s.joint_x[c] + s.joint_x[base.parent[c]]);
        s.joint_y[mid] = 0.5 * (s.joint_y[c] + s.joint_y[base.parent[c]]);
        ++mid;
      }
    }
    return s;
  }
  throw DataError("sample_pose: rejection budget exceeded; spec is infeasible "
                  "for this canvas");
}

namespace {

struct Canvas {
  int size;
  std::vector<double> px;  // working buffer, 0..255

  void blend(double x0, double y0, double x1, double y1, double half_width,
             double intensity) {
    const int xa = std::max(0, static_cast<int>(std::floor(
                                   std::min(x0, x1) - half_width - 1)));
    const int xb = std::min(size - 1, static_cast<int>(std::ceil(
                                          std::max(x0, x1) + half_width + 1)));
    const int ya = std::max(0, static_cast<int>(std::floor(
                                   std::min(y0, y1) - half_width - 1)));
    const int yb = std::min(size - 1, static_cast<int>(std::ceil(
                                          std::max(y0, y1) + half_width + 1)));
    const double dx = x1 - x0, dy = y1 - y0;
    const double len2 = dx * dx + dy * dy;
    for (int y = ya; y <= yb; ++y)
      for (int x = xa; x <= xb; ++x) {
        double t = len2 > 0 ? ((x - x0) * dx + (y - y0) * dy) / len2 : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        const double ddx = x - (x0 + t * dx), ddy = y - (y0 + t * dy);
        const double dist = std::sqrt(ddx * ddx + ddy * ddy);
        const double alpha = std::clamp(half_width + 0.5 - dist, 0.0, 1.0);
        double& p = px[static_cast<std::size_t>(y) * size + x];
        p = p + (intensity - p) * alpha;
      }
  }
};

void draw_figure(Canvas& cv, const std::vector<double>& jx,
                 const std::vector<double>& jy, const JointTree& tree,
                 const std::vector<uint8_t>& limb_kept, double half_width,
                 double intensity) {
  for (int c = 0; c < tree.size(); ++c) {
    if (tree.parent[c] < 0 || !limb_kept[c]) continue;
    cv.blend(jx[tree.parent[c]], jy[tree.parent[c]], jx[c], jy[c], half_width,
             intensity);
  }
  // A blob at the head makes that end of the figure distinct.
  for (int c = 0; c < tree.size(); ++c)
    if (tree.joint_names[c] == "head" && limb_kept[c])
      cv.blend(jx[c], jy[c], jx[c], jy[c], half_width * 1.8, intensity);
}

}  // namespace

void render_sample(PoseSample& sample, const SkeletonSpec& spec,
                   const JointTree& tree, int input_size, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double scale = input_size / 64.0;

  Canvas cv{input_size, {}};
  const double bg = spec.bg_min + u01(rng) * (spec.bg_max - spec.bg_min);
  cv.px.assign(static_cast<std::size_t>(input_size) * input_size, bg);

  // Distractor segments first, then figures on top.
  const int ndis =
      spec.distractor_min +
      static_cast<int>(u01(rng) * (spec.distractor_max - spec.distractor_min + 1));
  for (int i = 0; i < ndis; ++i) {
    const double x0 = u01(rng) * input_size, y0 = u01(rng) * input_size;
    const double ang = u01(rng) * 2 * M_PI;
    const double len = (8 + u01(rng) * 12) * scale;
    const double hw =
        0.5 * (spec.thickness_min +
               u01(rng) * (spec.thickness_max - spec.thickness_min));
    const double inten = spec.fg_min + u01(rng) * (spec.fg_max - spec.fg_min);
    cv.blend(x0, y0, x0 + len * std::cos(ang), y0 + len * std::sin(ang), hw,
             inten);
  }

  if (u01(rng) < spec.multi_figure_prob) {
    // Partial second figure, never labeled.
    PoseSample other = sample_pose(spec, tree, input_size, rng());
    std::vector<uint8_t> kept(tree.size(), 0);
    for (int c = 0; c < tree.size(); ++c)
      if (tree.parent[c] >= 0) kept[c] = u01(rng) < 0.7 ? 1 : 0;
    const double hw =
        0.5 * (spec.thickness_min +
               u01(rng) * (spec.thickness_max - spec.thickness_min));
    const double inten = spec.fg_min + u01(rng) * (spec.fg_max - spec.fg_min);
    draw_figure(cv, other.joint_x, other.joint_y, tree, kept, hw, inten);
  }

  {
    std::vector<uint8_t> kept(tree.size(), 1);
    const double hw =
        0.5 * (spec.thickness_min +
               u01(rng) * (spec.thickness_max - spec.thickness_min));
    const double inten = spec.fg_min + u01(rng) * (spec.fg_max - spec.fg_min);
    draw_figure(cv, sample.joint_x, sample.joint_y, tree, kept, hw, inten);
  }

  sample.image.width = input_size;
  sample.image.height = input_size;
  sample.image.pixels.resize(cv.px.size());
  for (std::size_t i = 0; i < cv.px.size(); ++i) {
    const double v = cv.px[i] + gauss(rng) * spec.noise_sigma;
    sample.image.pixels[i] =
        static_cast<uint8_t>(std::clamp(std::lround(v), 0l, 255l));
  }
}

LabelTensor make_label(const PoseSample& sample, const JointTree& tree,
                       const ModelConfig& cfg) {
  const int S = cfg.score_map_size();
  const int K = tree.size();
  LabelTensor lt;
  lt.n = 1;
  lt.h = S;
  lt.w = S;
  lt.num_classes = cfg.num_classes(K);
  lt.cls.assign(lt.size(), lt.background());
  lt.mask.assign(lt.size(), 1);
  const double ds = cfg.downsample;
  for (int y = 0; y < S; ++y)
    for (int x = 0; x < S; ++x) {
      double best = 1e300;
      int best_k = -1;
      for (int k = 0; k < K; ++k) {
        if (!sample.visible[k]) continue;
        const double jx = sample.joint_x[k] / ds, jy = sample.joint_y[k] / ds;
        const double dx = (x + 0.5) - jx, dy = (y + 0.5) - jy;
        const double d = std::sqrt(dx * dx + dy * dy);
        if (d < best) {
          best = d;
          best_k = k;
        }
      }
      if (best_k >= 0 && best <= cfg.label_radius)
        lt.cls[lt.index(0, y, x)] =
            best_k * cfg.mixtures + sample.mixture[best_k];
    }
  return lt;
}

Tensor image_to_tensor(const GrayImage& img) {
  Tensor t({1, 1, img.height, img.width});
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    t.data[i] = static_cast<float>(img.pixels[i]) / 255.0f;
  return t;
}

PoseSample hflip(const PoseSample& s, const JointTree& tree) {
  PoseSample out = s;
  const int W = s.image.width;
  if (W > 0) {
    for (int y = 0; y < s.image.height; ++y)
      for (int x = 0; x < W; ++x)
        out.image.pixels[static_cast<std::size_t>(y) * W + x] =
            s.image.pixels[static_cast<std::size_t>(y) * W + (W - 1 - x)];
  }
  const auto mirror = tree.mirror_map();
  const double w1 = (tree.size() > 0 && s.image.width > 0)
                        ? s.image.width - 1.0
                        : 0.0;
  for (int k = 0; k < tree.size(); ++k) {
    out.joint_x[k] = w1 - s.joint_x[mirror[k]];
    out.joint_y[k] = s.joint_y[mirror[k]];
    out.visible[k] = s.visible[mirror[k]];
    out.mixture[k] = s.mixture[mirror[k]];
  }
  return out;
}

PoseSample rotate(const PoseSample& s, double theta) {
  PoseSample out = s;
  const int W = s.image.width, H = s.image.height;
  const double cx = (W - 1) / 2.0, cy = (H - 1) / 2.0;
  const double c = std::cos(theta), sn = std::sin(theta);
  // Inverse mapping with bilinear sampling; outside pixels read as 0.
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const double sx = c * (x - cx) + sn * (y - cy) + cx;
      const double sy = -sn * (x - cx) + c * (y - cy) + cy;
      double v = 0.0;
      const int x0 = static_cast<int>(std::floor(sx));
      const int y0 = static_cast<int>(std::floor(sy));
      const double fx = sx - x0, fy = sy - y0;
      for (int dy = 0; dy <= 1; ++dy)
        for (int dx = 0; dx <= 1; ++dx) {
          const int xi = x0 + dx, yi = y0 + dy;
          if (xi < 0 || xi >= W || yi < 0 || yi >= H) continue;
          const double wgt = (dx ? fx : 1 - fx) * (dy ? fy : 1 - fy);
          v += wgt * s.image.pixels[static_cast<std::size_t>(yi) * W + xi];
        }
      out.image.pixels[static_cast<std::size_t>(y) * W + x] =
          static_cast<uint8_t>(std::clamp(std::lround(v), 0l, 255l));
    }
  for (std::size_t k = 0; k < s.joint_x.size(); ++k) {
    const double jx = s.joint_x[k], jy = s.joint_y[k];
    out.joint_x[k] = c * (jx - cx) - sn * (jy - cy) + cx;
    out.joint_y[k] = sn * (jx - cx) + c * (jy - cy) + cy;
    out.visible[k] = s.visible[k] && out.joint_x[k] >= 0 &&
                     out.joint_x[k] <= W - 1 && out.joint_y[k] >= 0 &&
                     out.joint_y[k] <= H - 1;
  }
  return out;
}

}  // namespace treepose
