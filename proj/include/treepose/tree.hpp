#pragma once

#include <string>
#include <vector>

#include "treepose/tensor.hpp"

namespace treepose {

/// Rooted joint tree with precomputed traversal orders. The upward pass
/// visits children before parents (leaves -> root); downward is the reverse.
struct JointTree {
  std::vector<std::string> joint_names;
  std::vector<int> parent;  // -1 for the root
  int root = -1;
  std::vector<int> upward_order;
  std::vector<int> downward_order;
  std::vector<std::vector<int>> children;

  int size() const { return static_cast<int>(joint_names.size()); }
  int index_of(const std::string& name) const;
  bool is_leaf(int k) const { return children[k].empty(); }

  /// Joint permutation under horizontal mirroring (l_* <-> r_* by name).
  std::vector<int> mirror_map() const;
};

JointTree make_tree(const std::vector<std::string>& names,
                    const std::vector<int>& parent);

/// Named trees: "desk14" (neck-rooted 14-joint figure) and "desk14-interp"
/// (same with a midpoint joint inserted on every edge). "chainN" builds an
/// N-joint path rooted at the last joint, for tests.
JointTree tree_by_id(const std::string& id);

/// Midpoint insertion on every edge; midpoint of edge (p, c) is named
/// "<c>__mid" and parented so the original chain structure is preserved.
JointTree interpolate_midpoints(const JointTree& base);

struct Limb {
  std::string group;
  int joint_a;
  int joint_b;
};

/// Default evaluation limbs for a tree (derived from its edges, grouped by
/// body part for desk14; generic per-edge groups otherwise).
std::vector<Limb> default_limbs(const JointTree& tree);

}  // namespace treepose
