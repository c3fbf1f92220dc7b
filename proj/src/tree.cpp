#include "treepose/tree.hpp"

#include <algorithm>
#include <functional>
#include <map>

namespace treepose {

int JointTree::index_of(const std::string& name) const {
  for (int i = 0; i < size(); ++i)
    if (joint_names[i] == name) return i;
  throw ConfigError("unknown joint name: " + name);
}

std::vector<int> JointTree::mirror_map() const {
  std::vector<int> m(size());
  for (int i = 0; i < size(); ++i) {
    const std::string& n = joint_names[i];
    std::string other;
    if (n.rfind("l_", 0) == 0)
      other = "r_" + n.substr(2);
    else if (n.rfind("r_", 0) == 0)
      other = "l_" + n.substr(2);
    m[i] = other.empty() ? i : index_of(other);
  }
  return m;
}

JointTree make_tree(const std::vector<std::string>& names,
                    const std::vector<int>& parent) {
  if (names.size() != parent.size() || names.empty())
    throw ConfigError("tree: names and parent lists must match and be non-empty");
  JointTree t;
  t.joint_names = names;
  t.parent = parent;
  t.children.resize(names.size());
  for (int i = 0; i < t.size(); ++i) {
    if (parent[i] < 0) {
      if (t.root >= 0) throw ConfigError("tree: multiple roots");
      t.root = i;
    } else {
      if (parent[i] >= t.size()) throw ConfigError("tree: parent out of range");
      t.children[parent[i]].push_back(i);
    }
  }
  if (t.root < 0) throw ConfigError("tree: no root");

  // Post-order from the root yields a children-before-parents sequence and
  // detects cycles (unreached joints).
  std::vector<char> seen(names.size(), 0);
  std::function<void(int)> post = [&](int k) {
    seen[k] = 1;
    for (int c : t.children[k]) post(c);
    t.upward_order.push_back(k);
  };
  post(t.root);
  if (static_cast<int>(t.upward_order.size()) != t.size())
    throw ConfigError("tree: cycle or disconnected joint");
  t.downward_order.assign(t.upward_order.rbegin(), t.upward_order.rend());
  return t;
}

JointTree tree_by_id(const std::string& id) {
  if (id == "desk14") {
    const std::vector<std::string> names = {
        "neck",   "head",    "l_shoulder", "r_shoulder", "l_elbow",
        "r_elbow", "l_wrist", "r_wrist",    "l_hip",      "r_hip",
        "l_knee", "r_knee",  "l_ankle",    "r_ankle"};
    //                      nk  hd  ls  rs  le  re  lw  rw  lh  rh  lk  rk  la  ra
    const std::vector<int> par = {-1, 0, 0, 0, 2, 3, 4, 5, 0, 0, 8, 9, 10, 11};
    return make_tree(names, par);
  }
  if (id == "desk14-interp") return interpolate_midpoints(tree_by_id("desk14"));
  if (id.rfind("chain", 0) == 0) {
    int n = std::stoi(id.substr(5));
    if (n < 1) throw ConfigError("chain tree needs at least one joint");
    std::vector<std::string> names;
    std::vector<int> par;
    for (int i = 0; i < n; ++i) {
      names.push_back("j" + std::to_string(i));
      par.push_back(i + 1 < n ? i + 1 : -1);  // rooted at the last joint
    }
    return make_tree(names, par);
  }
  throw ConfigError("unknown tree id: " + id);
}

JointTree interpolate_midpoints(const JointTree& base) {
  std::vector<std::string> names = base.joint_names;
  std::vector<int> par = base.parent;
  for (int c = 0; c < base.size(); ++c) {
    if (base.parent[c] < 0) continue;
    int mid = static_cast<int>(names.size());
    names.push_back(base.joint_names[c] + "__mid");
    par.push_back(base.parent[c]);
    par[c] = mid;
  }
  return make_tree(names, par);
}

std::vector<Limb> default_limbs(const JointTree& tree) {
  // desk14 grouping mirrors the usual part-based reporting.
  static const std::map<std::string, std::string> groups = {
      {"head", "Head"},      {"l_hip", "Torso"},  {"r_hip", "Torso"},
      {"l_shoulder", "Torso"}, {"r_shoulder", "Torso"},
      {"l_elbow", "U.arms"}, {"r_elbow", "U.arms"},
      {"l_wrist", "L.arms"}, {"r_wrist", "L.arms"},
      {"l_knee", "U.legs"},  {"r_knee", "U.legs"},
      {"l_ankle", "L.legs"}, {"r_ankle", "L.legs"}};
  std::vector<Limb> limbs;
  for (int c = 0; c < tree.size(); ++c) {
    if (tree.parent[c] < 0) continue;
    auto it = groups.find(tree.joint_names[c]);
    std::string g = it != groups.end()
                        ? it->second
                        : tree.joint_names[tree.parent[c]] + "-" +
                              tree.joint_names[c];
    limbs.push_back({g, tree.parent[c], c});
  }
  return limbs;
}

}  // namespace treepose
