#pragma once

#include <string>
#include <vector>

namespace treepose {

struct LayerDesc {
  std::string name;
  int kernel;
  int stride;
};

struct RfEntry {
  std::string name;
  int kernel;
  int stride;
  int jump;  // effective stride at this layer's output
  int rf;    // receptive field size at this layer's output
};

/// rf <- rf + (k-1)*jump, jump <- jump*stride, applied in layer order.
std::vector<RfEntry> receptive_field_of(const std::vector<LayerDesc>& layers);

/// The full-scale network stack: 13 3x3 convs with 3 stride-2 pools, a 7x7
/// fcn6, a 1x1 fcn7, then three stacked 7x7 transform kernels.
std::vector<LayerDesc> paper_table1_layers();

std::string rf_report_text(const std::vector<RfEntry>& entries);

}  // namespace treepose
