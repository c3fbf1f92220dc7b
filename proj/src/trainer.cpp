#include "treepose/trainer.hpp"

#include <algorithm>
#include <numeric>

#include "treepose/loss.hpp"
#include "treepose/optim.hpp"

namespace treepose {

namespace {

Tensor batch_images(const std::vector<const PoseSample*>& batch, int size) {
  Tensor t({static_cast<int>(batch.size()), 1, size, size});
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& px = batch[i]->image.pixels;
    for (std::size_t j = 0; j < px.size(); ++j)
      t.data[i * px.size() + j] = static_cast<float>(px[j]) / 255.0f;
  }
  return t;
}

LabelTensor batch_labels(const std::vector<const PoseSample*>& batch,
                         const JointTree& tree, const ModelConfig& cfg) {
  LabelTensor all;
  all.n = static_cast<int>(batch.size());
  all.h = cfg.score_map_size();
  all.w = all.h;
  all.num_classes = cfg.num_classes(tree.size());
  all.cls.resize(all.size());
  all.mask.assign(all.size(), 1);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    LabelTensor one = make_label(*batch[i], tree, cfg);
    std::copy(one.cls.begin(), one.cls.end(),
              all.cls.begin() + static_cast<long>(i) * all.h * all.w);
  }
  return all;
}

}  // namespace

TrainResult train_model(PoseModel& model,
                        const std::vector<PoseSample>& train_set,
                        const std::vector<PoseSample>& val_set,
                        const TrainConfig& tc, std::ostream* log) {
  if (train_set.empty()) throw DataError("train: empty dataset");
  TrainResult result;
  result.pairwise = estimate_pairwise_params(train_set, model.tree,
                                             model.cfg.downsample);
  const auto limbs = default_limbs(model.tree);
  auto params = model.params();
  const std::map<std::string, double> lr = {{"backbone", tc.lr_backbone},
                                            {"new", tc.lr_new}};
  std::mt19937 forward_rng(static_cast<uint32_t>(tc.seed * 2654435761u + 7));

  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    std::mt19937_64 erng(tc.seed ^ (0x9e3779b97f4a7c15ull * (epoch + 1)));
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), erng);

    double loss_sum = 0.0;
    int batches = 0;
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(tc.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(tc.batch_size));
      std::vector<PoseSample> augmented;
      augmented.reserve(2 * (end - start));  // batch holds pointers into it
      std::vector<const PoseSample*> batch;
      for (std::size_t i = start; i < end; ++i) {
        const PoseSample* s = &train_set[order[i]];
        if (tc.augment_hflip && u01(erng) < 0.5) {
          augmented.push_back(hflip(*s, model.tree));
          s = &augmented.back();
        }
        if (tc.augment_rotate > 0.0) {
          augmented.push_back(
              rotate(*s, (u01(erng) * 2.0 - 1.0) * tc.augment_rotate));
          s = &augmented.back();
        }
        batch.push_back(s);
      }
      Tensor images = batch_images(batch, model.cfg.input_size);
      LabelTensor labels = batch_labels(batch, model.tree, model.cfg);
      sample_negative_mask(labels, model.cfg.neg_keep_ratio,
                           tc.seed + 1315423911ull * (epoch + 1) + batches);

      ForwardTraceT<float> trace;
      Tensor scores = model.forward(images, true, forward_rng, trace);
      Tensor dscores;
      const double loss = masked_loss(scores, labels, &dscores);
      model.backward(trace, dscores);
      sgd_step(params, lr, tc.momentum);
      loss_sum += loss;
      ++batches;
    }
    EpochStats st;
    st.train_loss = loss_sum / std::max(1, batches);
    if (!val_set.empty()) {
      auto ests = predict_all(model, val_set, result.pairwise, DecodeMode::GDT);
      st.val_pcp = pcp_strict(ests, val_set, limbs).mean;
    }
    result.epochs.push_back(st);
    if (log)
      (*log) << "epoch " << epoch << " train_loss " << st.train_loss
             << " val_pcp " << st.val_pcp << "\n";
  }
  return result;
}

std::vector<PoseEstimate> predict_all(PoseModel& model,
                                      const std::vector<PoseSample>& samples,
                                      const PairwiseParams& pairwise,
                                      DecodeMode mode) {
  std::vector<PoseEstimate> out;
  std::mt19937 rng(0);
  const std::size_t chunk = 16;
  for (std::size_t start = 0; start < samples.size(); start += chunk) {
    const std::size_t end = std::min(samples.size(), start + chunk);
    std::vector<const PoseSample*> batch;
    for (std::size_t i = start; i < end; ++i) batch.push_back(&samples[i]);
    Tensor images = batch_images(batch, model.cfg.input_size);
    ForwardTraceT<float> trace;
    Tensor scores = model.forward(images, false, rng, trace);
    for (std::size_t i = 0; i < batch.size(); ++i)
      out.push_back(decode(scores, static_cast<int>(i), model.cfg.mixtures,
                           model.cfg.downsample, pairwise, model.tree, mode));
  }
  return out;
}

}  // namespace treepose
