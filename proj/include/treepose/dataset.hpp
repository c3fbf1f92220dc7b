#pragma once

#include "treepose/synth.hpp"

namespace treepose {

/// On-disk layout under a dataset directory:
///   manifest.txt       one sample per line: image_path first_row last_row
///   annotations.csv    sample_id,joint_name,x,y,visible,mixture_type
///   images/*.pgm       binary PGM, one per sample
void write_dataset(const std::string& dir, const std::vector<PoseSample>& samples,
                   const JointTree& tree);
std::vector<PoseSample> read_dataset(const std::string& dir,
                                     const JointTree& tree);

}  // namespace treepose
