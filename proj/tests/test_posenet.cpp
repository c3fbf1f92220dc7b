#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "treepose/checkpoint.hpp"
#include "treepose/loss.hpp"
#include "treepose/model.hpp"

using namespace treepose;

namespace {

ModelConfig tiny_config(Variant v = Variant::BiDirection) {
  ModelConfig cfg;
  cfg.input_size = 16;
  cfg.backbone = {{BackboneLayerSpec::Conv, 4, 3},
                  {BackboneLayerSpec::Pool, 0, 2},
                  {BackboneLayerSpec::Conv, 6, 3},
                  {BackboneLayerSpec::Pool, 0, 2},
                  {BackboneLayerSpec::Conv, 6, 3}};
  cfg.downsample = 4;
  cfg.c7 = 3;
  cfg.stack_depth = 2;
  cfg.kernel_size = 3;
  cfg.variant = v;
  return cfg;
}

std::string temp_path(const std::string& stem) {
  return (std::filesystem::temp_directory_path() / stem).string();
}

}  // namespace

TEST_CASE("masked loss matches a hand-computed two-class case") {
  // One pixel, two classes, scores (1, 0), target class 0:
  // loss = -log(e / (e + 1)).
  TensorT<double> scores({1, 2, 1, 1});
  scores.data = {1.0, 0.0};
  LabelTensor lab;
  lab.n = lab.h = lab.w = 1;
  lab.num_classes = 2;
  lab.cls = {0};
  lab.mask = {1};
  TensorT<double> d;
  const double loss = masked_loss(scores, lab, &d);
  const double expect = -std::log(std::exp(1.0) / (std::exp(1.0) + 1.0));
  CHECK(loss == doctest::Approx(expect).epsilon(1e-12));
  const double p0 = std::exp(1.0) / (std::exp(1.0) + 1.0);
  CHECK(d.data[0] == doctest::Approx(p0 - 1.0).epsilon(1e-12));
  CHECK(d.data[1] == doctest::Approx(1.0 - p0).epsilon(1e-12));
}

TEST_CASE("uniform scores give ln(C) and masked pixels contribute nothing") {
  TensorT<double> scores({2, 15, 4, 4}, 0.7);
  LabelTensor lab;
  lab.n = 2;
  lab.h = lab.w = 4;
  lab.num_classes = 15;
  lab.cls.assign(lab.size(), 14);
  lab.mask.assign(lab.size(), 1);
  lab.cls[3] = 2;
  CHECK(masked_loss<double>(scores, lab) ==
        doctest::Approx(std::log(15.0)).epsilon(1e-12));

  // Put garbage behind the mask; the loss must not move.
  lab.mask[5] = 0;
  scores.data[scores.index(0, 3, 1, 1)] = 1e6;  // pixel 5 of sample 0
  CHECK(masked_loss<double>(scores, lab) ==
        doctest::Approx(std::log(15.0)).epsilon(1e-12));
}

TEST_CASE("masked loss rejects empty supervision and shape mismatch") {
  TensorT<double> scores({1, 3, 2, 2});
  LabelTensor lab;
  lab.n = 1;
  lab.h = lab.w = 2;
  lab.num_classes = 3;
  lab.cls.assign(4, 0);
  lab.mask.assign(4, 0);
  CHECK_THROWS_AS(masked_loss<double>(scores, lab), DataError);
  lab.num_classes = 4;
  lab.mask.assign(4, 1);
  CHECK_THROWS_AS(masked_loss<double>(scores, lab), ConfigError);
}

TEST_CASE("negative sampling keeps all positives and ~ratio of background") {
  LabelTensor lab;
  lab.n = 1;
  lab.h = lab.w = 100;
  lab.num_classes = 3;
  lab.cls.assign(lab.size(), 2);
  for (int i = 0; i < 500; ++i) lab.cls[i * 17 % lab.size()] = 1;
  sample_negative_mask(lab, 0.25, 99);
  std::size_t pos_kept = 0, neg_kept = 0, neg_total = 0;
  for (std::size_t i = 0; i < lab.size(); ++i) {
    if (lab.cls[i] != 2) {
      CHECK(lab.mask[i] == 1);
      ++pos_kept;
    } else {
      ++neg_total;
      neg_kept += lab.mask[i];
    }
  }
  CHECK(pos_kept > 0);
  // ~9500 negatives at p=0.25: a +/-5 sigma window is ~[2165, 2590].
  const double mean = 0.25 * static_cast<double>(neg_total);
  const double sigma = std::sqrt(0.25 * 0.75 * static_cast<double>(neg_total));
  CHECK(static_cast<double>(neg_kept) > mean - 5 * sigma);
  CHECK(static_cast<double>(neg_kept) < mean + 5 * sigma);
}

TEST_CASE("model forward is deterministic and shapes are as configured") {
  ModelConfig cfg = tiny_config();
  PoseModel m(cfg);
  std::mt19937 rng(1);
  m.init_params(rng);
  Tensor x({2, 1, 16, 16});
  std::mt19937 xr(2);
  std::uniform_real_distribution<float> u(0, 1);
  for (auto& v : x.data) v = u(xr);
  std::mt19937 r1(0), r2(0);
  ForwardTraceT<float> t1, t2;
  Tensor s1 = m.forward(x, false, r1, t1);
  Tensor s2 = m.forward(x, false, r2, t2);
  CHECK(s1.shape == std::vector<int>{2, 15, 4, 4});
  CHECK(s1.data == s2.data);
  CHECK_THROWS_AS(
      [&] {
        Tensor bad({1, 1, 8, 8});
        ForwardTraceT<float> t;
        m.forward(bad, false, r1, t);
      }(),
      ConfigError);
}

TEST_CASE("zero transform kernels reproduce the baseline bit-for-bit") {
  ModelConfig cfg = tiny_config(Variant::BiDirection);
  PoseModel structured(cfg);
  std::mt19937 rng(5);
  structured.init_params(rng);
  for (auto* p : structured.params())
    if (p->name.rfind("up.", 0) == 0 || p->name.rfind("down.", 0) == 0) {
      std::fill(p->weights.data.begin(), p->weights.data.end(), 0.0f);
      std::fill(p->bias.data.begin(), p->bias.data.end(), 0.0f);
    }

  ModelConfig bcfg = cfg;
  bcfg.variant = Variant::Baseline;
  PoseModel baseline(bcfg);
  // Share every non-transform parameter.
  for (std::size_t i = 0; i < baseline.backbone.size(); ++i) {
    baseline.backbone[i].weights.data = structured.backbone[i].weights.data;
    baseline.backbone[i].bias.data = structured.backbone[i].bias.data;
  }
  for (int k = 0; k < baseline.tree.size(); ++k) {
    baseline.bankA[k].weights.data = structured.bankA[k].weights.data;
    baseline.bankA[k].bias.data = structured.bankA[k].bias.data;
    baseline.bankB[k].weights.data = structured.bankB[k].weights.data;
    baseline.bankB[k].bias.data = structured.bankB[k].bias.data;
    baseline.pred[k].weights.data = structured.pred[k].weights.data;
    baseline.pred[k].bias.data = structured.pred[k].bias.data;
  }
  baseline.bg.weights.data = structured.bg.weights.data;
  baseline.bg.bias.data = structured.bg.bias.data;

  Tensor x({1, 1, 16, 16});
  std::mt19937 xr(6);
  std::uniform_real_distribution<float> u(0, 1);
  for (auto& v : x.data) v = u(xr);
  std::mt19937 r(0);
  ForwardTraceT<float> t1, t2;
  Tensor s_struct = structured.forward(x, false, r, t1);
  Tensor s_base = baseline.forward(x, false, r, t2);
  CHECK(s_struct.data == s_base.data);
}

TEST_CASE("checkpoint round-trips bit-exactly") {
  ModelConfig cfg = tiny_config();
  PoseModel m(cfg);
  std::mt19937 rng(7);
  m.init_params(rng);
  // Perturb the transform kernels too so zeros do not mask bugs.
  for (auto* p : m.params())
    for (auto& w : p->weights.data) w += 0.001f;

  const std::string path = temp_path("tp_test_ckpt.spl");
  save_checkpoint(path, model_tensors(m));

  PoseModel m2(cfg);
  load_into_model(m2, load_checkpoint(path));
  auto ps1 = m.params();
  auto ps2 = m2.params();
  REQUIRE(ps1.size() == ps2.size());
  for (std::size_t i = 0; i < ps1.size(); ++i) {
    CHECK(ps1[i]->weights.data == ps2[i]->weights.data);
    CHECK(ps1[i]->bias.data == ps2[i]->bias.data);
  }
  std::remove(path.c_str());
}

TEST_CASE("checkpoint loading rejects a mismatched architecture") {
  PoseModel m(tiny_config());
  std::mt19937 rng(8);
  m.init_params(rng);
  const std::string path = temp_path("tp_test_ckpt2.spl");
  save_checkpoint(path, model_tensors(m));

  ModelConfig other = tiny_config();
  other.c7 = 4;
  PoseModel m2(other);
  CHECK_THROWS_AS(load_into_model(m2, load_checkpoint(path)), DataError);
  std::remove(path.c_str());
}

TEST_CASE("checkpoint loader detects truncation and bad magic") {
  PoseModel m(tiny_config());
  std::mt19937 rng(9);
  m.init_params(rng);
  const std::string path = temp_path("tp_test_ckpt3.spl");
  save_checkpoint(path, model_tensors(m));

  std::ifstream is(path, std::ios::binary);
  std::vector<char> bytes((std::istreambuf_iterator<char>(is)), {});
  is.close();

  const std::string cut = temp_path("tp_test_cut.spl");
  {
    std::ofstream os(cut, std::ios::binary);
    os.write(bytes.data(), static_cast<long>(bytes.size() / 2));
  }
  CHECK_THROWS_AS(load_checkpoint(cut), DataError);

  bytes[0] = 'X';
  const std::string bad = temp_path("tp_test_bad.spl");
  {
    std::ofstream os(bad, std::ios::binary);
    os.write(bytes.data(), static_cast<long>(bytes.size()));
  }
  CHECK_THROWS_AS(load_checkpoint(bad), DataError);
  std::remove(path.c_str());
  std::remove(cut.c_str());
  std::remove(bad.c_str());
}

TEST_CASE("model config validation catches inconsistent settings") {
  ModelConfig cfg = tiny_config();
  cfg.downsample = 8;  // pools only give x4
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny_config();
  cfg.kernel_size = 4;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny_config();
  cfg.dropout = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("single-direction variant builds no downward stacks") {
  ModelConfig cfg = tiny_config(Variant::SingleDirection);
  PoseModel m(cfg);
  CHECK(m.down_stacks.empty());
  CHECK(!m.up_stacks.empty());
  ModelConfig b = tiny_config(Variant::Baseline);
  PoseModel mb(b);
  CHECK(mb.up_stacks.empty());
}
