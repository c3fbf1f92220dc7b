#include "treepose/config.hpp"

#include <fstream>
#include <sstream>

namespace treepose {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

int to_int(const std::string& v, const std::string& key) {
  try {
    std::size_t pos;
    int out = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("expected integer for " + key + ", got '" + v + "'");
  }
}

double to_double(const std::string& v, const std::string& key) {
  try {
    std::size_t pos;
    double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("expected number for " + key + ", got '" + v + "'");
  }
}

bool to_bool(const std::string& v, const std::string& key) {
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  throw ConfigError("expected boolean for " + key + ", got '" + v + "'");
}

}  // namespace

std::string backbone_to_string(const std::vector<BackboneLayerSpec>& bb) {
  std::string out;
  for (const auto& l : bb) {
    if (!out.empty()) out += ",";
    if (l.kind == BackboneLayerSpec::Pool)
      out += "pool";
    else
      out += "conv:" + std::to_string(l.out_ch) + ":" + std::to_string(l.kernel);
  }
  return out;
}

std::vector<BackboneLayerSpec> backbone_from_string(const std::string& s) {
  std::vector<BackboneLayerSpec> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (tok == "pool") {
      out.push_back({BackboneLayerSpec::Pool, 0, 2});
    } else if (tok.rfind("conv:", 0) == 0) {
      const auto rest = tok.substr(5);
      const auto colon = rest.find(':');
      if (colon == std::string::npos)
        throw ConfigError("bad backbone conv spec: " + tok);
      BackboneLayerSpec l;
      l.kind = BackboneLayerSpec::Conv;
      l.out_ch = to_int(rest.substr(0, colon), "backbone");
      l.kernel = to_int(rest.substr(colon + 1), "backbone");
      out.push_back(l);
    } else {
      throw ConfigError("bad backbone layer spec: '" + tok + "'");
    }
  }
  if (out.empty()) throw ConfigError("empty backbone spec");
  return out;
}

void RunConfig::set(const std::string& section, const std::string& key,
                    const std::string& v) {
  const std::string full = section + "." + key;
  if (section == "model") {
    if (key == "input_size") model.input_size = to_int(v, full);
    else if (key == "image_channels") model.image_channels = to_int(v, full);
    else if (key == "backbone") model.backbone = backbone_from_string(v);
    else if (key == "downsample") model.downsample = to_int(v, full);
    else if (key == "c7") model.c7 = to_int(v, full);
    else if (key == "tree") { model.tree_id = v; data.tree_id = v; }
    else if (key == "stack_depth") model.stack_depth = to_int(v, full);
    else if (key == "kernel_size") model.kernel_size = to_int(v, full);
    else if (key == "mixtures") model.mixtures = to_int(v, full);
    else if (key == "dropout") model.dropout = to_double(v, full);
    else if (key == "neg_keep_ratio") model.neg_keep_ratio = to_double(v, full);
    else if (key == "label_radius") model.label_radius = to_double(v, full);
    else if (key == "variant") model.variant = variant_from_string(v);
    else throw ConfigError("unknown config key: " + full);
  } else if (section == "train") {
    if (key == "epochs") train.epochs = to_int(v, full);
    else if (key == "batch_size") train.batch_size = to_int(v, full);
    else if (key == "lr_backbone") train.lr_backbone = to_double(v, full);
    else if (key == "lr_new") train.lr_new = to_double(v, full);
    else if (key == "momentum") train.momentum = to_double(v, full);
    else if (key == "seed") train.seed = static_cast<uint64_t>(std::stoull(v));
    else if (key == "val_fraction") train.val_fraction = to_double(v, full);
    else if (key == "augment_hflip") train.augment_hflip = to_bool(v, full);
    else if (key == "augment_rotate") train.augment_rotate = to_double(v, full);
    else throw ConfigError("unknown config key: " + full);
  } else if (section == "data") {
    if (key == "root_x_min") data.root_x_min = to_double(v, full);
    else if (key == "root_x_max") data.root_x_max = to_double(v, full);
    else if (key == "root_y_min") data.root_y_min = to_double(v, full);
    else if (key == "root_y_max") data.root_y_max = to_double(v, full);
    else if (key == "base_rotation_spread") data.base_rotation_spread = to_double(v, full);
    else if (key == "thickness_min") data.thickness_min = to_double(v, full);
    else if (key == "thickness_max") data.thickness_max = to_double(v, full);
    else if (key == "fg_min") data.fg_min = to_double(v, full);
    else if (key == "fg_max") data.fg_max = to_double(v, full);
    else if (key == "bg_min") data.bg_min = to_double(v, full);
    else if (key == "bg_max") data.bg_max = to_double(v, full);
    else if (key == "noise_sigma") data.noise_sigma = to_double(v, full);
    else if (key == "distractor_min") data.distractor_min = to_int(v, full);
    else if (key == "distractor_max") data.distractor_max = to_int(v, full);
    else if (key == "multi_figure_prob") data.multi_figure_prob = to_double(v, full);
    else if (key == "rejection_budget") data.rejection_budget = to_int(v, full);
    else if (key.rfind("edge.", 0) == 0) {
      // data.edge.<joint>.<field>
      const auto rest = key.substr(5);
      const auto dot = rest.rfind('.');
      if (dot == std::string::npos)
        throw ConfigError("unknown config key: " + full);
      const std::string joint = rest.substr(0, dot);
      const std::string field = rest.substr(dot + 1);
      const JointTree base = tree_by_id(
          data.tree_id.find("-interp") != std::string::npos
              ? data.tree_id.substr(0, data.tree_id.find("-interp"))
              : data.tree_id);
      EdgeSpec& e = data.edges.at(static_cast<std::size_t>(base.index_of(joint)));
      if (field == "len_min") e.len_min = to_double(v, full);
      else if (field == "len_max") e.len_max = to_double(v, full);
      else if (field == "angle_mean") e.angle_mean = to_double(v, full);
      else if (field == "angle_spread") e.angle_spread = to_double(v, full);
      else throw ConfigError("unknown config key: " + full);
    } else {
      throw ConfigError("unknown config key: " + full);
    }
  } else if (section == "infer") {
    if (key == "mode") infer.mode = v;
    else if (key == "pairwise_weight") infer.pairwise_weight = to_double(v, full);
    else throw ConfigError("unknown config key: " + full);
  } else {
    throw ConfigError("unknown config section: [" + section + "]");
  }
}

RunConfig RunConfig::from_text(const std::string& text) {
  RunConfig rc;
  rc.data = default_skeleton_spec("desk14");
  std::stringstream ss(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("line " + std::to_string(lineno) + ": bad section header");
      section = line.substr(1, line.size() - 2);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
    if (section.empty())
      throw ConfigError("line " + std::to_string(lineno) + ": key outside any section");
    rc.set(section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  rc.validate();
  return rc;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path);
  std::stringstream buf;
  buf << is.rdbuf();
  return from_text(buf.str());
}

void RunConfig::validate() const {
  model.validate();
  data.validate(tree_by_id(
      data.tree_id.find("-interp") != std::string::npos
          ? data.tree_id.substr(0, data.tree_id.find("-interp"))
          : data.tree_id));
  decode_mode_from_string(infer.mode);
  if (train.epochs < 0 || train.batch_size < 1)
    throw ConfigError("train.epochs must be >= 0 and batch_size >= 1");
  if (infer.pairwise_weight < 0)
    throw ConfigError("infer.pairwise_weight must be non-negative");
}

std::string RunConfig::dump() const {
  std::stringstream os;
  os << "[model]\n";
  os << "input_size = " << model.input_size << "\n";
  os << "image_channels = " << model.image_channels << "\n";
  os << "backbone = " << backbone_to_string(model.backbone) << "\n";
  os << "downsample = " << model.downsample << "\n";
  os << "c7 = " << model.c7 << "\n";
  os << "tree = " << model.tree_id << "\n";
  os << "stack_depth = " << model.stack_depth << "\n";
  os << "kernel_size = " << model.kernel_size << "\n";
  os << "mixtures = " << model.mixtures << "\n";
  os << "dropout = " << model.dropout << "\n";
  os << "neg_keep_ratio = " << model.neg_keep_ratio << "\n";
  os << "label_radius = " << model.label_radius << "\n";
  os << "variant = " << to_string(model.variant) << "\n";
  os << "\n[train]\n";
  os << "epochs = " << train.epochs << "\n";
  os << "batch_size = " << train.batch_size << "\n";
  os << "lr_backbone = " << train.lr_backbone << "\n";
  os << "lr_new = " << train.lr_new << "\n";
  os << "momentum = " << train.momentum << "\n";
  os << "seed = " << train.seed << "\n";
  os << "val_fraction = " << train.val_fraction << "\n";
  os << "augment_hflip = " << (train.augment_hflip ? 1 : 0) << "\n";
  os << "augment_rotate = " << train.augment_rotate << "\n";
  os << "\n[data]\n";
  os << "root_x_min = " << data.root_x_min << "\n";
  os << "root_x_max = " << data.root_x_max << "\n";
  os << "root_y_min = " << data.root_y_min << "\n";
  os << "root_y_max = " << data.root_y_max << "\n";
  os << "base_rotation_spread = " << data.base_rotation_spread << "\n";
  os << "thickness_min = " << data.thickness_min << "\n";
  os << "thickness_max = " << data.thickness_max << "\n";
  os << "fg_min = " << data.fg_min << "\n";
  os << "fg_max = " << data.fg_max << "\n";
  os << "bg_min = " << data.bg_min << "\n";
  os << "bg_max = " << data.bg_max << "\n";
  os << "noise_sigma = " << data.noise_sigma << "\n";
  os << "distractor_min = " << data.distractor_min << "\n";
  os << "distractor_max = " << data.distractor_max << "\n";
  os << "multi_figure_prob = " << data.multi_figure_prob << "\n";
  os << "rejection_budget = " << data.rejection_budget << "\n";
  os << "\n[infer]\n";
  os << "mode = " << infer.mode << "\n";
  os << "pairwise_weight = " << infer.pairwise_weight << "\n";
  return os.str();
}

}  // namespace treepose
