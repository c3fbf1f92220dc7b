#pragma once

#include <map>
#include <random>

#include "treepose/message_passing.hpp"
#include "treepose/optim.hpp"

namespace treepose {

enum class Variant { Baseline, SingleDirection, BiDirection };

inline Variant variant_from_string(const std::string& s) {
  if (s == "baseline") return Variant::Baseline;
  if (s == "single-direction") return Variant::SingleDirection;
  if (s == "bi-direction") return Variant::BiDirection;
  throw ConfigError("unknown variant: " + s);
}
inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::Baseline: return "baseline";
    case Variant::SingleDirection: return "single-direction";
    default: return "bi-direction";
  }
}

struct BackboneLayerSpec {
  enum Kind { Conv, Pool } kind = Conv;
  int out_ch = 0;
  int kernel = 3;
};

struct ModelConfig {
  int input_size = 64;
  int image_channels = 1;
  std::vector<BackboneLayerSpec> backbone = {
      {BackboneLayerSpec::Conv, 8, 3},  {BackboneLayerSpec::Pool, 0, 2},
      {BackboneLayerSpec::Conv, 16, 3}, {BackboneLayerSpec::Pool, 0, 2},
      {BackboneLayerSpec::Conv, 32, 3}, {BackboneLayerSpec::Conv, 48, 3}};
  int downsample = 4;
  int c7 = 8;           // feature channels per joint per direction
  std::string tree_id = "desk14";
  int stack_depth = 2;  // convolutions per transform stack
  int kernel_size = 5;  // transform kernel extent
  int mixtures = 1;
  double dropout = 0.0;
  double neg_keep_ratio = 0.25;
  double label_radius = 1.0;  // positive disk radius, score-map units
  Variant variant = Variant::BiDirection;

  int score_map_size() const { return input_size / downsample; }

  void validate() const {
    if (input_size <= 0 || input_size % downsample != 0)
      throw ConfigError("input_size must be a positive multiple of downsample");
    int pool = 1;
    for (const auto& l : backbone)
      if (l.kind == BackboneLayerSpec::Pool) pool *= 2;
    if (pool != downsample)
      throw ConfigError("downsample must equal the product of pool strides (" +
                        std::to_string(pool) + ")");
    if (backbone.empty() || backbone.back().kind != BackboneLayerSpec::Conv)
      throw ConfigError("backbone must end in a convolution");
    if (c7 < 1 || stack_depth < 1 || mixtures < 1)
      throw ConfigError("c7, stack_depth and mixtures must be >= 1");
    if (kernel_size % 2 == 0)
      throw ConfigError("transform kernel size must be odd");
    if (dropout < 0.0 || dropout >= 1.0)
      throw ConfigError("dropout must be in [0,1)");
    if (neg_keep_ratio <= 0.0 || neg_keep_ratio > 1.0)
      throw ConfigError("neg_keep_ratio must be in (0,1]");
  }

  int num_classes(int num_joints) const { return num_joints * mixtures + 1; }
};

/// Workspace of one forward pass; holds everything backward needs.
template <class T>
struct ForwardTraceT {
  TensorT<T> input;
  std::vector<TensorT<T>> bb_in;            // input of each backbone layer
  std::vector<TensorT<T>> bb_pre;           // conv outputs (pre-relu)
  std::vector<PoolResult<T>> bb_pool;       // pool layers (empty y otherwise)
  DropoutResult<T> drop;
  TensorT<T> shared;                        // post-dropout trunk features
  BranchFeaturesT<T> up, down;
  std::vector<TensorT<T>> bankA_pre, bankB_pre;
  BranchTrace<T> up_trace, down_trace;
  std::vector<TensorT<T>> feats;            // per-joint concatenated features
  TensorT<T> scores;
};

template <class T>
struct PoseModelT {
  ModelConfig cfg;
  JointTree tree;
  std::vector<ConvParamsT<T>> backbone;     // conv layers only, in order
  std::vector<ConvParamsT<T>> bankA, bankB; // per joint, 1x1
  ConvParamsT<T> bg;                        // background predictor, 1x1
  std::vector<KernelStackT<T>> up_stacks, down_stacks;  // indexed by child joint
  std::vector<ConvParamsT<T>> pred;         // per joint, 1x1, M outputs

  explicit PoseModelT(const ModelConfig& config)
      : cfg(config), tree(tree_by_id(config.tree_id)) {
    build();
  }
  PoseModelT(const ModelConfig& config, const JointTree& t)
      : cfg(config), tree(t) {
    build();
  }

  void build() {
    cfg.validate();
    const int K = tree.size();
    int ch = cfg.image_channels;
    int ci = 0;
    for (const auto& l : cfg.backbone) {
      if (l.kind == BackboneLayerSpec::Conv) {
        backbone.emplace_back(l.out_ch, ch, l.kernel, 1, (l.kernel - 1) / 2,
                              "backbone.conv" + std::to_string(ci++),
                              "backbone");
        ch = l.out_ch;
      }
    }
    const int c6 = ch;
    for (int k = 0; k < K; ++k) {
      bankA.emplace_back(cfg.c7, c6, 1, 1, 0, "bankA." + tree.joint_names[k]);
      bankB.emplace_back(cfg.c7, c6, 1, 1, 0, "bankB." + tree.joint_names[k]);
      pred.emplace_back(cfg.mixtures, 2 * cfg.c7, 1, 1, 0,
                        "pred." + tree.joint_names[k]);
    }
    bg = ConvParamsT<T>(1, c6, 1, 1, 0, "bg");
    if (cfg.variant != Variant::Baseline) {
      up_stacks.resize(K);
      if (cfg.variant == Variant::BiDirection) down_stacks.resize(K);
      for (int k = 0; k < K; ++k) {
        if (tree.parent[k] < 0) continue;
        up_stacks[k] = KernelStackT<T>::make(cfg.c7, cfg.stack_depth,
                                             cfg.kernel_size,
                                             "up." + tree.joint_names[k]);
        if (cfg.variant == Variant::BiDirection)
          down_stacks[k] = KernelStackT<T>::make(cfg.c7, cfg.stack_depth,
                                                 cfg.kernel_size,
                                                 "down." + tree.joint_names[k]);
      }
    }
  }

  /// Fan-in-scaled uniform init for feature/prediction convs; transform
  /// kernels start at zero so training begins exactly at the baseline.
  void init_params(std::mt19937& rng) {
    for (auto* p : params()) {
      const bool transform = p->name.rfind("up.", 0) == 0 ||
                             p->name.rfind("down.", 0) == 0;
      std::fill(p->bias.data.begin(), p->bias.data.end(), T(0));
      const double fan_in =
          static_cast<double>(p->in_ch()) * p->kh() * p->kw();
      // Transform kernels start near neutral but not exactly at zero:
      // with two zero stages the inter-stage relu sits on its flat side
      // and the weight gradients vanish identically.
      const double limit =
          (transform ? 0.1 : 1.0) * std::sqrt(3.0 / fan_in);
      std::uniform_real_distribution<double> u(-limit, limit);
      for (auto& w : p->weights.data) w = static_cast<T>(u(rng));
    }
  }

  std::vector<ConvParamsT<T>*> params() {
    std::vector<ConvParamsT<T>*> out;
    for (auto& p : backbone) out.push_back(&p);
    for (auto& p : bankA) out.push_back(&p);
    for (auto& p : bankB) out.push_back(&p);
    out.push_back(&bg);
    for (auto& s : up_stacks)
      for (auto& p : s.convs) out.push_back(&p);
    for (auto& s : down_stacks)
      for (auto& p : s.convs) out.push_back(&p);
    for (auto& p : pred) out.push_back(&p);
    return out;
  }

  /// Full pipeline: backbone -> per-joint banks -> message passing (per
  /// variant) -> branch concat -> per-joint 1x1 prediction + background.
  /// Returns score maps of shape (n, K*M+1, S, S).
  TensorT<T> forward(const TensorT<T>& image, bool training, std::mt19937& rng,
                     ForwardTraceT<T>& tr) {
    if (image.h() != cfg.input_size || image.w() != cfg.input_size ||
        image.c() != cfg.image_channels)
      throw ConfigError("forward: image shape " + shape_str(image.shape) +
                        " does not match config");
    const int K = tree.size();
    tr = ForwardTraceT<T>{};
    tr.input = image;

    // Backbone trunk.
    TensorT<T> cur = image;
    std::size_t ci = 0;
    tr.bb_pool.resize(cfg.backbone.size());
    for (const auto& l : cfg.backbone) {
      tr.bb_in.push_back(cur);
      if (l.kind == BackboneLayerSpec::Conv) {
        TensorT<T> pre = conv2d_forward(cur, backbone[ci++]);
        tr.bb_pre.push_back(pre);
        cur = relu_forward(pre);
      } else {
        tr.bb_pre.emplace_back();
        auto pr = maxpool2_forward(cur);
        cur = pr.y;
        tr.bb_pool[tr.bb_in.size() - 1] = std::move(pr);
      }
    }
    tr.drop = channel_dropout_forward(cur, cfg.dropout, training, rng);
    tr.shared = tr.drop.y;

    // Per-joint feature banks (Eq.-2 analogue), both directions.
    tr.up.original.resize(K);
    tr.down.original.resize(K);
    tr.bankA_pre.resize(K);
    tr.bankB_pre.resize(K);
    for (int k = 0; k < K; ++k) {
      tr.bankA_pre[k] = conv2d_forward(tr.shared, bankA[k]);
      tr.up.original[k] = relu_forward(tr.bankA_pre[k]);
      tr.bankB_pre[k] = conv2d_forward(tr.shared, bankB[k]);
      tr.down.original[k] = relu_forward(tr.bankB_pre[k]);
    }

    // Message passing.
    if (cfg.variant == Variant::Baseline) {
      tr.up.refined = tr.up.original;
      tr.down.refined = tr.down.original;
    } else {
      pass_messages(tr.up, tree, Direction::Upward, up_stacks, &tr.up_trace);
      if (cfg.variant == Variant::BiDirection)
        pass_messages(tr.down, tree, Direction::Downward, down_stacks,
                      &tr.down_trace);
      else
        tr.down.refined = tr.down.original;
    }

    tr.feats = concat_branches(tr.up, tr.down);

    // Score maps: per-joint mixtures then one background channel.
    const int S = cfg.score_map_size();
    TensorT<T> scores({image.n(), K * cfg.mixtures + 1, S, S});
    const std::size_t plane = static_cast<std::size_t>(S) * S;
    for (int k = 0; k < K; ++k) {
      TensorT<T> z = conv2d_forward(tr.feats[k], pred[k]);
      for (int n = 0; n < z.n(); ++n)
        std::copy_n(z.data.data() + z.index(n, 0, 0, 0),
                    static_cast<std::size_t>(cfg.mixtures) * plane,
                    scores.data.data() + scores.index(n, k * cfg.mixtures, 0, 0));
    }
    TensorT<T> zb = conv2d_forward(tr.shared, bg);
    for (int n = 0; n < zb.n(); ++n)
      std::copy_n(zb.data.data() + zb.index(n, 0, 0, 0), plane,
                  scores.data.data() + scores.index(n, K * cfg.mixtures, 0, 0));
    tr.scores = scores;
    return scores;
  }

  /// Accumulates parameter gradients given dL/dscores.
  void backward(ForwardTraceT<T>& tr, const TensorT<T>& dscores) {
    const int K = tree.size();
    const int S = cfg.score_map_size();
    const int M = cfg.mixtures;
    const std::size_t plane = static_cast<std::size_t>(S) * S;
    const int N = tr.input.n();

    tr.shared.ensure_grad();

    // Background channel.
    {
      TensorT<T> dzb({N, 1, S, S});
      for (int n = 0; n < N; ++n)
        std::copy_n(dscores.data.data() + dscores.index(n, K * M, 0, 0), plane,
                    dzb.data.data() + dzb.index(n, 0, 0, 0));
      conv2d_backward(tr.shared, bg, dzb, true);
    }

    // Prediction banks -> per-joint feature gradients, split into branches.
    std::vector<TensorT<T>> dup(K), ddown(K);
    for (int k = 0; k < K; ++k) {
      TensorT<T> dz({N, M, S, S});
      for (int n = 0; n < N; ++n)
        std::copy_n(dscores.data.data() + dscores.index(n, k * M, 0, 0),
                    static_cast<std::size_t>(M) * plane,
                    dz.data.data() + dz.index(n, 0, 0, 0));
      tr.feats[k].zero_grad();
      tr.feats[k].ensure_grad();
      conv2d_backward(tr.feats[k], pred[k], dz, true);
      dup[k] = TensorT<T>({N, cfg.c7, S, S});
      ddown[k] = TensorT<T>({N, cfg.c7, S, S});
      for (int n = 0; n < N; ++n) {
        std::copy_n(tr.feats[k].grad.data() + tr.feats[k].index(n, 0, 0, 0),
                    static_cast<std::size_t>(cfg.c7) * plane,
                    dup[k].data.data() + dup[k].index(n, 0, 0, 0));
        std::copy_n(
            tr.feats[k].grad.data() + tr.feats[k].index(n, cfg.c7, 0, 0),
            static_cast<std::size_t>(cfg.c7) * plane,
            ddown[k].data.data() + ddown[k].index(n, 0, 0, 0));
      }
    }

    // Message passing backward -> gradients w.r.t. original bank features.
    std::vector<TensorT<T>> dA(K), dB(K);
    for (int k = 0; k < K; ++k) {
      dA[k] = TensorT<T>({N, cfg.c7, S, S});
      dB[k] = TensorT<T>({N, cfg.c7, S, S});
    }
    if (cfg.variant == Variant::Baseline) {
      dA = std::move(dup);
      dB = std::move(ddown);
    } else {
      pass_messages_backward(tr.up, tree, Direction::Upward, up_stacks,
                             tr.up_trace, dup, dA);
      if (cfg.variant == Variant::BiDirection)
        pass_messages_backward(tr.down, tree, Direction::Downward, down_stacks,
                               tr.down_trace, ddown, dB);
      else
        dB = std::move(ddown);
    }

    // Banks back to the shared trunk.
    for (int k = 0; k < K; ++k) {
      TensorT<T> dpre(dA[k].shape);
      for (std::size_t i = 0; i < dpre.data.size(); ++i)
        dpre.data[i] =
            tr.bankA_pre[k].data[i] > T(0) ? dA[k].data[i] : T(0);
      conv2d_backward(tr.shared, bankA[k], dpre, true);
      for (std::size_t i = 0; i < dpre.data.size(); ++i)
        dpre.data[i] =
            tr.bankB_pre[k].data[i] > T(0) ? dB[k].data[i] : T(0);
      conv2d_backward(tr.shared, bankB[k], dpre, true);
    }

    // Dropout and backbone.
    TensorT<T> dshared(tr.shared.shape);
    dshared.data = tr.shared.grad;
    TensorT<T>& trunk_out = tr.drop.y;  // same object as shared
    (void)trunk_out;
    TensorT<T> dtrunk;
    {
      // Undo dropout scaling/masking onto the trunk output gradient.
      TensorT<T>& trunk = tr.bb_in.empty() ? tr.input : tr.bb_in.back();
      (void)trunk;
      dtrunk = TensorT<T>(tr.shared.shape);
      if (tr.drop.keep.empty() || tr.drop.scale == T(1)) {
        dtrunk.data = dshared.data;
      } else {
        const std::size_t pl =
            static_cast<std::size_t>(tr.shared.h()) * tr.shared.w();
        for (int n = 0; n < tr.shared.n(); ++n)
          for (int c = 0; c < tr.shared.c(); ++c) {
            if (!tr.drop.keep[static_cast<std::size_t>(n) * tr.shared.c() + c])
              continue;
            const T* src = dshared.data.data() + dshared.index(n, c, 0, 0);
            T* dst = dtrunk.data.data() + dtrunk.index(n, c, 0, 0);
            for (std::size_t i = 0; i < pl; ++i) dst[i] = src[i] * tr.drop.scale;
          }
      }
    }

    TensorT<T> d = std::move(dtrunk);
    std::size_t ci = backbone.size();
    for (int li = static_cast<int>(cfg.backbone.size()) - 1; li >= 0; --li) {
      TensorT<T>& x = tr.bb_in[li];
      x.zero_grad();
      x.ensure_grad();
      if (cfg.backbone[li].kind == BackboneLayerSpec::Conv) {
        --ci;
        // d is w.r.t. relu output; mask to pre-activation first.
        TensorT<T> dpre(d.shape);
        for (std::size_t i = 0; i < d.data.size(); ++i)
          dpre.data[i] = tr.bb_pre[li].data[i] > T(0) ? d.data[i] : T(0);
        conv2d_backward(x, backbone[ci], dpre, true);
      } else {
        maxpool2_backward(x, tr.bb_pool[li], d);
      }
      d = TensorT<T>(x.shape);
      d.data = x.grad;
    }
    tr.input.ensure_grad();
    for (std::size_t i = 0; i < d.data.size(); ++i) tr.input.grad[i] += d.data[i];
  }
};

using PoseModel = PoseModelT<float>;

}  // namespace treepose
