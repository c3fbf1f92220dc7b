#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "treepose/dataset.hpp"
#include "treepose/kmeans.hpp"
#include "treepose/pgm.hpp"
#include "treepose/synth.hpp"

using namespace treepose;

namespace {

std::string temp_dir(const std::string& stem) {
  auto p = std::filesystem::temp_directory_path() / stem;
  std::filesystem::remove_all(p);
  return p.string();
}

}  // namespace

TEST_CASE("sampling is deterministic under a fixed seed") {
  SkeletonSpec spec = default_skeleton_spec();
  JointTree t = tree_by_id("desk14");
  PoseSample a = sample_pose(spec, t, 64, 1234);
  PoseSample b = sample_pose(spec, t, 64, 1234);
  CHECK(a.joint_x == b.joint_x);
  CHECK(a.joint_y == b.joint_y);
  PoseSample c = sample_pose(spec, t, 64, 1235);
  CHECK(a.joint_x != c.joint_x);

  render_sample(a, spec, t, 64, 77);
  render_sample(b, spec, t, 64, 77);
  CHECK(a.image.pixels == b.image.pixels);
}

TEST_CASE("all sampled joints stay inside the canvas margin") {
  SkeletonSpec spec = default_skeleton_spec();
  JointTree t = tree_by_id("desk14");
  for (uint64_t seed = 0; seed < 300; ++seed) {
    PoseSample s = sample_pose(spec, t, 64, seed);
    for (int k = 0; k < t.size(); ++k) {
      CHECK(s.joint_x[k] >= 2.0);
      CHECK(s.joint_x[k] <= 61.0);
      CHECK(s.joint_y[k] >= 2.0);
      CHECK(s.joint_y[k] <= 61.0);
    }
  }
}

TEST_CASE("edge lengths follow the configured uniform range") {
  // A spec whose poses never leave the canvas, so rejection sampling cannot
  // bias the length distribution: one short edge hanging off a centered root.
  SkeletonSpec spec = default_skeleton_spec();
  for (auto& e : spec.edges) e = {4.0, 6.0, 0.0, 0.2};
  spec.root_x_min = spec.root_x_max = 0.5;
  spec.root_y_min = 0.30;
  spec.root_y_max = 0.32;
  spec.base_rotation_spread = 0.05;
  // Shrink every limb so even the longest chain stays inside 64px.
  for (auto& e : spec.edges) {
    e.len_min = 2.0;
    e.len_max = 4.0;
    e.angle_spread = 0.1;
  }
  JointTree t = tree_by_id("desk14");
  const int child = t.index_of("head");
  const int parent = t.parent[child];
  double sum = 0, mn = 1e9, mx = 0;
  const int N = 4000;
  for (int i = 0; i < N; ++i) {
    PoseSample s = sample_pose(spec, t, 64, 100000 + i);
    const double dx = s.joint_x[child] - s.joint_x[parent];
    const double dy = s.joint_y[child] - s.joint_y[parent];
    const double len = std::sqrt(dx * dx + dy * dy);
    sum += len;
    mn = std::min(mn, len);
    mx = std::max(mx, len);
  }
  const double mean = sum / N;
  // Uniform on [2,4]: mean 3, sd ~0.577; sample mean sd ~0.009.
  CHECK(mean == doctest::Approx(3.0).epsilon(0.02));
  CHECK(mn >= 2.0 - 1.0 / 32);  // quantization slack
  CHECK(mx <= 4.0 + 1.0 / 32);
}

TEST_CASE("hflip is an exact involution") {
  SkeletonSpec spec = default_skeleton_spec();
  for (const char* id : {"desk14", "desk14-interp"}) {
    spec.tree_id = id;
    JointTree t = tree_by_id(id);
    for (uint64_t seed = 0; seed < 50; ++seed) {
      PoseSample s = sample_pose(spec, t, 64, seed);
      render_sample(s, spec, t, 64, seed + 1);
      PoseSample ff = hflip(hflip(s, t), t);
      CHECK(ff.joint_x == s.joint_x);
      CHECK(ff.joint_y == s.joint_y);
      CHECK(ff.visible == s.visible);
      CHECK(ff.mixture == s.mixture);
      CHECK(ff.image.pixels == s.image.pixels);
    }
  }
}

TEST_CASE("hflip swaps left and right joint identities") {
  SkeletonSpec spec = default_skeleton_spec();
  JointTree t = tree_by_id("desk14");
  PoseSample s = sample_pose(spec, t, 64, 9);
  render_sample(s, spec, t, 64, 10);
  PoseSample f = hflip(s, t);
  const int lw = t.index_of("l_wrist"), rw = t.index_of("r_wrist");
  CHECK(f.joint_x[lw] == 63.0 - s.joint_x[rw]);
  CHECK(f.joint_y[lw] == s.joint_y[rw]);
}

TEST_CASE("rotation moves coordinates by the closed form") {
  SkeletonSpec spec = default_skeleton_spec();
  JointTree t = tree_by_id("desk14");
  PoseSample s = sample_pose(spec, t, 64, 21);
  render_sample(s, spec, t, 64, 22);
  const double th = 0.3;
  PoseSample r = rotate(s, th);
  const double cx = 31.5, cy = 31.5;
  for (int k = 0; k < t.size(); ++k) {
    const double ex = std::cos(th) * (s.joint_x[k] - cx) -
                      std::sin(th) * (s.joint_y[k] - cy) + cx;
    const double ey = std::sin(th) * (s.joint_x[k] - cx) +
                      std::cos(th) * (s.joint_y[k] - cy) + cy;
    CHECK(r.joint_x[k] == doctest::Approx(ex).epsilon(1e-12));
    CHECK(r.joint_y[k] == doctest::Approx(ey).epsilon(1e-12));
  }
  // Rotating by zero is the identity on coordinates.
  PoseSample z = rotate(s, 0.0);
  CHECK(z.joint_x == s.joint_x);
  CHECK(z.joint_y == s.joint_y);
}

TEST_CASE("labels put each joint's class at its score-map cell") {
  JointTree t = tree_by_id("desk14");
  ModelConfig cfg;
  cfg.input_size = 64;
  cfg.downsample = 4;
  cfg.backbone = {{BackboneLayerSpec::Conv, 4, 3},
                  {BackboneLayerSpec::Pool, 0, 2},
                  {BackboneLayerSpec::Pool, 0, 2},
                  {BackboneLayerSpec::Conv, 4, 3}};
  cfg.label_radius = 0.5;

  PoseSample s;
  s.joint_x.assign(t.size(), -100.0);
  s.joint_y.assign(t.size(), -100.0);
  s.visible.assign(t.size(), 0);
  s.mixture.assign(t.size(), 0);
  // Joint 5 dead-center in cell (3, 2): pixel (10, 14).
  s.joint_x[5] = 10.0;
  s.joint_y[5] = 14.0;
  s.visible[5] = 1;
  LabelTensor lt = make_label(s, t, cfg);
  CHECK(lt.cls[lt.index(0, 3, 2)] == 5);
  int fg = 0;
  for (std::size_t i = 0; i < lt.size(); ++i) fg += lt.cls[i] != lt.background();
  CHECK(fg == 1);  // radius 0.5 marks exactly the containing cell

  // The nearest of two competing joints wins the shared cell.
  s.joint_x[6] = 10.8;
  s.joint_y[6] = 14.8;
  s.visible[6] = 1;
  lt = make_label(s, t, cfg);
  CHECK(lt.cls[lt.index(0, 3, 2)] == 5);
}

TEST_CASE("mixture labels index interleaved class channels") {
  JointTree t = tree_by_id("desk14");
  ModelConfig cfg;
  cfg.input_size = 16;
  cfg.downsample = 4;
  cfg.backbone = {{BackboneLayerSpec::Conv, 4, 3},
                  {BackboneLayerSpec::Pool, 0, 2},
                  {BackboneLayerSpec::Pool, 0, 2},
                  {BackboneLayerSpec::Conv, 4, 3}};
  cfg.mixtures = 3;
  cfg.label_radius = 0.5;
  PoseSample s;
  s.joint_x.assign(t.size(), -100.0);
  s.joint_y.assign(t.size(), -100.0);
  s.visible.assign(t.size(), 0);
  s.mixture.assign(t.size(), 0);
  s.joint_x[2] = 6.0;
  s.joint_y[2] = 6.0;
  s.visible[2] = 1;
  s.mixture[2] = 2;
  LabelTensor lt = make_label(s, t, cfg);
  CHECK(lt.num_classes == 14 * 3 + 1);
  CHECK(lt.cls[lt.index(0, 1, 1)] == 2 * 3 + 2);
}

TEST_CASE("k-means recovers two well-separated clusters exactly") {
  JointTree t = tree_by_id("chain2");  // j0 child of j1
  std::vector<PoseSample> samples;
  // Two tight groups of child-relative offsets: around (5, 0) and (-5, 0).
  for (int i = 0; i < 40; ++i) {
    PoseSample s;
    s.joint_x = {32.0, 32.0};
    s.joint_y = {32.0, 20.0};
    s.visible = {1, 1};
    s.mixture = {0, 0};
    const double off = (i % 2 == 0 ? 5.0 : -5.0) + 0.01 * (i % 5);
    s.joint_x[0] = 32.0 + off;
    samples.push_back(s);
  }
  MixtureModel mm = cluster_mixtures(samples, t, 2, 7);
  REQUIRE(mm.centroids[0].size() == 2);
  // Every even sample shares one label, every odd sample the other.
  for (int i = 2; i < 40; ++i)
    CHECK(samples[i].mixture[0] == samples[i % 2].mixture[0]);
  CHECK(samples[0].mixture[0] != samples[1].mixture[0]);
  // Labels match brute-force nearest centroid.
  for (auto& s : samples) {
    const int before = s.mixture[0];
    assign_mixtures(s, t, mm);
    CHECK(s.mixture[0] == before);
  }
}

TEST_CASE("k-means rejects more clusters than distinct points") {
  JointTree t = tree_by_id("chain2");
  std::vector<PoseSample> samples(3);
  for (auto& s : samples) {
    s.joint_x = {30.0, 32.0};
    s.joint_y = {30.0, 32.0};
    s.visible = {1, 1};
    s.mixture = {0, 0};
  }
  CHECK_THROWS_AS(cluster_mixtures(samples, t, 2, 1), DataError);
}

TEST_CASE("head scale is the head-neck distance") {
  JointTree t = tree_by_id("desk14");
  PoseSample s;
  s.joint_x.assign(t.size(), 0.0);
  s.joint_y.assign(t.size(), 0.0);
  s.visible.assign(t.size(), 1);
  s.mixture.assign(t.size(), 0);
  s.joint_x[t.index_of("head")] = 3.0;
  s.joint_y[t.index_of("head")] = 4.0;
  CHECK(head_scale(s, t) == doctest::Approx(5.0));
}

TEST_CASE("pgm files round-trip") {
  GrayImage img;
  img.width = 13;
  img.height = 7;
  img.pixels.resize(13 * 7);
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    img.pixels[i] = static_cast<uint8_t>((i * 37) % 256);
  const std::string path =
      (std::filesystem::temp_directory_path() / "tp_test.pgm").string();
  write_pgm(path, img);
  GrayImage back = read_pgm(path);
  CHECK(back.width == img.width);
  CHECK(back.height == img.height);
  CHECK(back.pixels == img.pixels);
  std::filesystem::remove(path);
}

TEST_CASE("datasets round-trip deep-equal") {
  SkeletonSpec spec = default_skeleton_spec();
  JointTree t = tree_by_id("desk14");
  std::vector<PoseSample> samples;
  for (uint64_t seed = 0; seed < 12; ++seed) {
    PoseSample s = sample_pose(spec, t, 64, seed);
    render_sample(s, spec, t, 64, seed + 100);
    s.mixture[3] = 1;  // non-trivial mixture labels must survive
    samples.push_back(std::move(s));
  }
  const std::string dir = temp_dir("tp_test_ds");
  write_dataset(dir, samples, t);
  auto back = read_dataset(dir, t);
  REQUIRE(back.size() == samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    CHECK(back[i].joint_x == samples[i].joint_x);
    CHECK(back[i].joint_y == samples[i].joint_y);
    CHECK(back[i].visible == samples[i].visible);
    CHECK(back[i].mixture == samples[i].mixture);
    CHECK(back[i].image.pixels == samples[i].image.pixels);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("reading a dataset with a missing image names the file") {
  SkeletonSpec spec = default_skeleton_spec();
  JointTree t = tree_by_id("desk14");
  std::vector<PoseSample> samples;
  for (uint64_t seed = 0; seed < 3; ++seed) {
    PoseSample s = sample_pose(spec, t, 64, seed);
    render_sample(s, spec, t, 64, seed);
    samples.push_back(std::move(s));
  }
  const std::string dir = temp_dir("tp_test_ds_miss");
  write_dataset(dir, samples, t);
  std::filesystem::remove(std::filesystem::path(dir) / "images" /
                          "sample_00001.pgm");
  try {
    read_dataset(dir, t);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("sample_00001") != std::string::npos);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("multi-figure rendering never moves the labeled pose") {
  SkeletonSpec spec = default_skeleton_spec();
  spec.multi_figure_prob = 1.0;
  JointTree t = tree_by_id("desk14");
  PoseSample s = sample_pose(spec, t, 64, 5);
  auto jx = s.joint_x, jy = s.joint_y;
  render_sample(s, spec, t, 64, 6);
  CHECK(s.joint_x == jx);
  CHECK(s.joint_y == jy);
}
