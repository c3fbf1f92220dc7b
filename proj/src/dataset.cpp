#include "treepose/dataset.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace treepose {

namespace {

void atomic_write_text(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::trunc);
    if (!os) throw DataError("cannot open " + tmp);
    os << text;
    if (!os) throw DataError("write failure on " + tmp);
  }
  fs::rename(tmp, path);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

}  // namespace

void write_dataset(const std::string& dir,
                   const std::vector<PoseSample>& samples,
                   const JointTree& tree) {
  fs::create_directories(fs::path(dir) / "images");
  std::string manifest, csv = "sample_id,joint_name,x,y,visible,mixture_type\n";
  char buf[256];
  int row = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (static_cast<int>(s.joint_x.size()) != tree.size())
      throw DataError("sample " + std::to_string(i) +
                      " has the wrong joint count");
    std::snprintf(buf, sizeof(buf), "images/sample_%05zu.pgm", i);
    const std::string rel = buf;
    write_pgm((fs::path(dir) / rel).string(), s.image);
    const int first = row;
    for (int k = 0; k < tree.size(); ++k, ++row) {
      std::snprintf(buf, sizeof(buf), "%zu,%s,%.17g,%.17g,%d,%d\n", i,
                    tree.joint_names[k].c_str(), s.joint_x[k], s.joint_y[k],
                    static_cast<int>(s.visible[k]), s.mixture[k]);
      csv += buf;
    }
    manifest += rel + " " + std::to_string(first) + " " +
                std::to_string(row - 1) + "\n";
  }
  atomic_write_text((fs::path(dir) / "annotations.csv").string(), csv);
  atomic_write_text((fs::path(dir) / "manifest.txt").string(), manifest);
}

std::vector<PoseSample> read_dataset(const std::string& dir,
                                     const JointTree& tree) {
  std::ifstream mf(fs::path(dir) / "manifest.txt");
  if (!mf) throw DataError("missing manifest.txt in " + dir);
  std::ifstream af(fs::path(dir) / "annotations.csv");
  if (!af) throw DataError("missing annotations.csv in " + dir);

  std::vector<std::string> rows;
  std::string line;
  std::getline(af, line);  // header
  if (line.rfind("sample_id,", 0) != 0)
    throw DataError("malformed annotations.csv header in " + dir);
  while (std::getline(af, line))
    if (!line.empty()) rows.push_back(line);

  std::vector<PoseSample> out;
  while (std::getline(mf, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string rel;
    long first = -1, last = -1;
    ss >> rel >> first >> last;
    if (rel.empty() || first < 0 || last < first)
      throw DataError("malformed manifest line: " + line);
    if (last >= static_cast<long>(rows.size()))
      throw DataError("manifest row range exceeds annotations.csv");
    if (last - first + 1 != tree.size())
      throw DataError("annotation row count != joint count for " + rel);
    const fs::path img_path = fs::path(dir) / rel;
    if (!fs::exists(img_path))
      throw DataError("manifest references missing image file " + rel);
    PoseSample s;
    s.image = read_pgm(img_path.string());
    s.joint_x.resize(tree.size());
    s.joint_y.resize(tree.size());
    s.visible.resize(tree.size());
    s.mixture.resize(tree.size());
    for (int k = 0; k < tree.size(); ++k) {
      const auto f = split_csv_line(rows[first + k]);
      if (f.size() != 6) throw DataError("malformed annotation row: " + rows[first + k]);
      if (f[1] != tree.joint_names[k])
        throw DataError("annotation joint order mismatch: expected " +
                        tree.joint_names[k] + ", got " + f[1]);
      s.joint_x[k] = std::stod(f[2]);
      s.joint_y[k] = std::stod(f[3]);
      s.visible[k] = static_cast<uint8_t>(std::stoi(f[4]));
      s.mixture[k] = std::stoi(f[5]);
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace treepose
