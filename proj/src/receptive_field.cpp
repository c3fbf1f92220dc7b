#include "treepose/receptive_field.hpp"

#include <cstdio>

namespace treepose {

std::vector<RfEntry> receptive_field_of(const std::vector<LayerDesc>& layers) {
  std::vector<RfEntry> out;
  int rf = 1, jump = 1;
  for (const auto& l : layers) {
    rf += (l.kernel - 1) * jump;
    jump *= l.stride;
    out.push_back({l.name, l.kernel, l.stride, jump, rf});
  }
  return out;
}

std::vector<LayerDesc> paper_table1_layers() {
  std::vector<LayerDesc> l;
  auto conv_block = [&](const std::string& base, int count) {
    for (int i = 1; i <= count; ++i)
      l.push_back({base + "_" + std::to_string(i), 3, 1});
  };
  conv_block("conv1", 2);
  l.push_back({"pool1", 2, 2});
  conv_block("conv2", 2);
  l.push_back({"pool2", 2, 2});
  conv_block("conv3", 3);
  l.push_back({"pool3", 2, 2});
  conv_block("conv4", 3);
  conv_block("conv5", 3);
  l.push_back({"fcn6", 7, 1});
  l.push_back({"fcn7", 1, 1});
  l.push_back({"msp1", 7, 1});
  l.push_back({"msp2", 7, 1});
  l.push_back({"msp3", 7, 1});
  return l;
}

std::string rf_report_text(const std::vector<RfEntry>& entries) {
  std::string out;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%-10s %6s %6s %6s %6s\n", "layer", "kernel",
                "stride", "jump", "rf");
  out += buf;
  for (const auto& e : entries) {
    std::snprintf(buf, sizeof(buf), "%-10s %6d %6d %6d %6d\n", e.name.c_str(),
                  e.kernel, e.stride, e.jump, e.rf);
    out += buf;
  }
  return out;
}

}  // namespace treepose
