// Command-line frontend: dataset generation, training, evaluation,
// prediction and the illustrative demos.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "treepose/checkpoint.hpp"
#include "treepose/config.hpp"
#include "treepose/dataset.hpp"
#include "treepose/kmeans.hpp"
#include "treepose/receptive_field.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fs = std::filesystem;
using namespace treepose;

namespace {

void write_text_atomic(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw DataError("cannot open " + tmp + " for writing");
    os << text;
    if (!os) throw DataError("write failed for " + tmp);
  }
  fs::rename(tmp, path);
}

GrayImage to_gray(const Tensor& map, int n, int c, float lo, float hi) {
  GrayImage img;
  img.height = map.h();
  img.width = map.w();
  img.pixels.resize(static_cast<std::size_t>(img.height) * img.width);
  const float span = hi > lo ? hi - lo : 1.0f;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      float v = (map.data[map.index(n, c, y, x)] - lo) / span;
      img.at(y, x) = static_cast<uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
    }
  return img;
}

std::pair<float, float> plane_minmax(const Tensor& t, int n, int c) {
  float lo = t.data[t.index(n, c, 0, 0)], hi = lo;
  for (int y = 0; y < t.h(); ++y)
    for (int x = 0; x < t.w(); ++x) {
      const float v = t.data[t.index(n, c, y, x)];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  return {lo, hi};
}

void write_raw_plane(const std::string& path, const Tensor& t, int n, int c) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw DataError("cannot open " + tmp + " for writing");
    for (int y = 0; y < t.h(); ++y)
      for (int x = 0; x < t.w(); ++x) {
        const float v = t.data[t.index(n, c, y, x)];
        os.write(reinterpret_cast<const char*>(&v), sizeof(float));
      }
  }
  fs::rename(tmp, path);
}

std::vector<NamedTensor> pairwise_tensors(const PairwiseParams& pw) {
  auto pack = [](const std::string& name, const std::vector<double>& v) {
    NamedTensor t{name, {static_cast<int>(v.size())}, {}};
    for (double x : v) t.values.push_back(static_cast<float>(x));
    return t;
  };
  return {pack("pairwise.x_r", pw.x_r), pack("pairwise.y_r", pw.y_r),
          pack("pairwise.w_x", pw.w_x), pack("pairwise.w_y", pw.w_y)};
}

PairwiseParams pairwise_from_tensors(const std::vector<NamedTensor>& ts) {
  auto unpack = [&](const std::string& name) {
    for (const auto& t : ts)
      if (t.name == name)
        return std::vector<double>(t.values.begin(), t.values.end());
    throw DataError("checkpoint is missing tensor '" + name + "'");
  };
  PairwiseParams pw;
  pw.x_r = unpack("pairwise.x_r");
  pw.y_r = unpack("pairwise.y_r");
  pw.w_x = unpack("pairwise.w_x");
  pw.w_y = unpack("pairwise.w_y");
  return pw;
}

std::vector<PoseSample> generate_samples(const RunConfig& rc, int count,
                                         uint64_t seed) {
  const JointTree tree = tree_by_id(rc.model.tree_id);
  std::vector<PoseSample> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    const uint64_t s = seed + static_cast<uint64_t>(i) * 7919u;
    PoseSample ps = sample_pose(rc.data, tree, rc.model.input_size, s);
    render_sample(ps, rc.data, tree, rc.model.input_size, s ^ 0xabcdef12u);
    out.push_back(std::move(ps));
  }
  if (rc.model.mixtures > 1) cluster_mixtures(out, tree, rc.model.mixtures, seed);
  return out;
}

int cmd_gen_data(const std::string& config, const std::string& out, int count,
                 uint64_t seed) {
  RunConfig rc = RunConfig::from_file(config);
  const JointTree tree = tree_by_id(rc.model.tree_id);
  auto samples = generate_samples(rc, count, seed);
  write_dataset(out, samples, tree);
  std::cout << "wrote " << samples.size() << " samples to " << out << "\n";
  return 0;
}

int cmd_train(const std::string& config, const std::string& data,
              const std::string& out, uint64_t seed_override, bool has_seed) {
  RunConfig rc = RunConfig::from_file(config);
  if (has_seed) rc.train.seed = seed_override;
  const JointTree tree = tree_by_id(rc.model.tree_id);
  auto samples = read_dataset(data, tree);
  const std::size_t n_val = static_cast<std::size_t>(
      std::llround(rc.train.val_fraction * static_cast<double>(samples.size())));
  std::vector<PoseSample> val(samples.end() - n_val, samples.end());
  samples.resize(samples.size() - n_val);

  PoseModel model(rc.model);
  std::mt19937 rng(static_cast<uint32_t>(rc.train.seed));
  model.init_params(rng);
  TrainResult result = train_model(model, samples, val, rc.train, &std::cout);

  fs::create_directories(out);
  auto tensors = model_tensors(model);
  auto pw = pairwise_tensors(result.pairwise);
  tensors.insert(tensors.end(), pw.begin(), pw.end());
  save_checkpoint((fs::path(out) / "model.spl").string(), tensors);

  std::ostringstream loss_csv;
  loss_csv << "epoch,train_loss,val_pcp\n";
  for (std::size_t e = 0; e < result.epochs.size(); ++e)
    loss_csv << e << "," << result.epochs[e].train_loss << ","
             << result.epochs[e].val_pcp << "\n";
  write_text_atomic((fs::path(out) / "loss.csv").string(), loss_csv.str());
  std::cout << "wrote " << out << "/model.spl and loss.csv\n";
  return 0;
}

int cmd_eval(const std::string& config, const std::string& checkpoint,
             const std::string& data, const std::string& out) {
  RunConfig rc = RunConfig::from_file(config);
  const JointTree tree = tree_by_id(rc.model.tree_id);
  auto samples = read_dataset(data, tree);

  PoseModel model(rc.model);
  auto tensors = load_checkpoint(checkpoint);
  load_into_model(model, tensors);
  PairwiseParams pw = pairwise_from_tensors(tensors);
  std::fill(pw.w_x.begin(), pw.w_x.end(), rc.infer.pairwise_weight);
  std::fill(pw.w_y.begin(), pw.w_y.end(), rc.infer.pairwise_weight);

  auto estimates =
      predict_all(model, samples, pw, decode_mode_from_string(rc.infer.mode));

  fs::create_directories(out);
  const auto limbs = default_limbs(tree);
  PcpResult pcp = pcp_strict(estimates, samples, limbs);
  std::ostringstream pcp_csv;
  pcp_csv << "group,pcp\n";
  for (const auto& [g, v] : pcp.group_pcp) pcp_csv << g << "," << v << "\n";
  pcp_csv << "mean," << pcp.mean << "\n";
  write_text_atomic((fs::path(out) / "pcp.csv").string(), pcp_csv.str());

  std::vector<double> thresholds;
  for (int i = 1; i <= 10; ++i) thresholds.push_back(0.05 * i);
  auto pdj = pdj_curve(estimates, samples, thresholds);
  std::ostringstream pdj_csv;
  pdj_csv << "threshold";
  for (const auto& name : tree.joint_names) pdj_csv << "," << name;
  pdj_csv << "\n";
  for (std::size_t r = 0; r < thresholds.size(); ++r) {
    pdj_csv << thresholds[r];
    for (double v : pdj[r]) pdj_csv << "," << v;
    pdj_csv << "\n";
  }
  write_text_atomic((fs::path(out) / "pdj.csv").string(), pdj_csv.str());
  std::cout << "mean PCP " << pcp.mean << ", wrote " << out
            << "/pcp.csv and pdj.csv\n";
  return 0;
}

int cmd_predict(const std::string& config, const std::string& checkpoint,
                const std::string& image, const std::string& out, bool raw) {
  RunConfig rc = RunConfig::from_file(config);
  const JointTree tree = tree_by_id(rc.model.tree_id);
  PoseModel model(rc.model);
  auto tensors = load_checkpoint(checkpoint);
  load_into_model(model, tensors);
  PairwiseParams pw = pairwise_from_tensors(tensors);
  std::fill(pw.w_x.begin(), pw.w_x.end(), rc.infer.pairwise_weight);
  std::fill(pw.w_y.begin(), pw.w_y.end(), rc.infer.pairwise_weight);

  GrayImage img = read_pgm(image);
  if (img.width != rc.model.input_size || img.height != rc.model.input_size)
    throw DataError("image " + image + " is " + std::to_string(img.width) +
                    "x" + std::to_string(img.height) + ", config expects " +
                    std::to_string(rc.model.input_size));
  Tensor x = image_to_tensor(img);
  std::mt19937 rng(0);
  ForwardTraceT<float> tr;
  Tensor scores = model.forward(x, false, rng, tr);
  PoseEstimate est = decode(scores, 0, rc.model.mixtures, rc.model.downsample,
                            pw, tree, decode_mode_from_string(rc.infer.mode));

  fs::create_directories(out);
  std::ostringstream csv;
  csv << "joint,x,y,peak\n";
  for (int k = 0; k < tree.size(); ++k)
    csv << tree.joint_names[k] << "," << est.px[k] << "," << est.py[k] << ","
        << est.peak[k] << "\n";
  write_text_atomic((fs::path(out) / "estimate.csv").string(), csv.str());

  const int M = rc.model.mixtures;
  std::ostringstream sidecar;
  auto dump_channel = [&](int c, const std::string& stem) {
    auto [lo, hi] = plane_minmax(scores, 0, c);
    write_pgm((fs::path(out) / (stem + ".pgm")).string(),
              to_gray(scores, 0, c, lo, hi));
    sidecar << stem << " " << lo << " " << hi << "\n";
    if (raw) write_raw_plane((fs::path(out) / (stem + ".f32")).string(), scores, 0, c);
  };
  for (int k = 0; k < tree.size(); ++k)
    for (int m = 0; m < M; ++m)
      dump_channel(k * M + m, "score_" + tree.joint_names[k] +
                                  (M > 1 ? ".m" + std::to_string(m) : ""));
  dump_channel(tree.size() * M, "score_background");
  write_text_atomic((fs::path(out) / "score_maps_minmax.txt").string(),
                    sidecar.str());
  std::cout << "wrote " << out << "/estimate.csv and score maps\n";
  return 0;
}

// Fig.-3 style illustration: a Gaussian blob pushed through off-center delta
// kernels shifts by exactly the kernel offset.
int cmd_demo_shift(const std::string& out) {
  const int size = 33, ksz = 7, pad = ksz / 2;
  Tensor blob({1, 1, size, size});
  const double cx = (size - 1) / 2.0, sigma = 4.0;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      blob.data[blob.index(0, 0, y, x)] = static_cast<float>(
          std::exp(-((y - cx) * (y - cx) + (x - cx) * (x - cx)) /
                   (2 * sigma * sigma)));

  fs::create_directories(out);
  auto to_pgm = [&](const Tensor& t, const std::string& name) {
    auto [lo, hi] = plane_minmax(t, 0, 0);
    write_pgm((fs::path(out) / name).string(), to_gray(t, 0, 0, lo, hi));
  };
  to_pgm(blob, "input.pgm");

  const std::vector<std::pair<int, int>> offsets = {{0, 3}, {3, 0}, {-2, -2}, {2, -3}};
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    auto [dy, dx] = offsets[i];
    ConvParams k(1, 1, ksz, 1, pad, "demo");
    std::fill(k.weights.data.begin(), k.weights.data.end(), 0.0f);
    k.weights.data[k.weights.index(0, 0, pad + dy, pad + dx)] = 1.0f;
    std::fill(k.bias.data.begin(), k.bias.data.end(), 0.0f);
    Tensor shifted = conv2d_forward(blob, k);
    Tensor kimg({1, 1, ksz, ksz});
    kimg.data = k.weights.data;
    to_pgm(kimg, "kernel_" + std::to_string(i) + ".pgm");
    to_pgm(shifted, "output_" + std::to_string(i) + ".pgm");
  }
  std::cout << "wrote demo images to " << out << "\n";
  return 0;
}

int cmd_rf_report(const std::string& preset, const std::string& config) {
  std::vector<LayerDesc> layers;
  if (!config.empty()) {
    RunConfig rc = RunConfig::from_file(config);
    int ci = 0, pi = 0;
    for (const auto& l : rc.model.backbone) {
      if (l.kind == BackboneLayerSpec::Conv)
        layers.push_back({"conv" + std::to_string(ci++), l.kernel, 1});
      else
        layers.push_back({"pool" + std::to_string(pi++), 2, 2});
    }
    for (int t = 0; t < rc.model.stack_depth; ++t)
      layers.push_back({"msp" + std::to_string(t), rc.model.kernel_size, 1});
  } else if (preset == "paper-table1") {
    layers = paper_table1_layers();
  } else {
    throw ConfigError("unknown rf-report preset: " + preset);
  }
  std::cout << rf_report_text(receptive_field_of(layers));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tree-structured pose estimation toolkit"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "cap on OpenMP threads (0 = default)");

  std::string config, data, out, checkpoint, image, preset = "paper-table1";
  int count = 100;
  uint64_t seed = 1;
  bool raw = false;

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  gen->add_option("--config", config)->required();
  gen->add_option("--out", out)->required();
  gen->add_option("--count", count)->required();
  gen->add_option("--seed", seed);

  auto* train = app.add_subcommand("train", "train a model on a dataset");
  train->add_option("--config", config)->required();
  train->add_option("--data", data)->required();
  train->add_option("--out", out)->required();
  auto* seed_opt = train->add_option("--seed", seed, "overrides train.seed");

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  ev->add_option("--config", config)->required();
  ev->add_option("--checkpoint", checkpoint)->required();
  ev->add_option("--data", data)->required();
  ev->add_option("--out", out)->required();

  auto* pred = app.add_subcommand("predict", "run one image through a checkpoint");
  pred->add_option("--config", config)->required();
  pred->add_option("--checkpoint", checkpoint)->required();
  pred->add_option("--image", image)->required();
  pred->add_option("--out", out)->required();
  pred->add_flag("--raw", raw, "also dump raw 32-bit score maps");

  auto* demo = app.add_subcommand("demo-shift", "kernel-shift illustration");
  demo->add_option("--out", out)->required();

  auto* rf = app.add_subcommand("rf-report", "receptive-field table");
  rf->add_option("--preset", preset);
  rf->add_option("--config", config);

  auto* pc = app.add_subcommand("print-config", "dump the effective configuration");
  pc->add_option("--config", config)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
#ifdef _OPENMP
    if (threads > 0) omp_set_num_threads(threads);
#endif
    if (gen->parsed()) return cmd_gen_data(config, out, count, seed);
    if (train->parsed())
      return cmd_train(config, data, out, seed, seed_opt->count() > 0);
    if (ev->parsed()) return cmd_eval(config, checkpoint, data, out);
    if (pred->parsed()) return cmd_predict(config, checkpoint, image, out, raw);
    if (demo->parsed()) return cmd_demo_shift(out);
    if (rf->parsed()) return cmd_rf_report(preset, config);
    if (pc->parsed()) {
      std::cout << RunConfig::from_file(config).dump();
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
