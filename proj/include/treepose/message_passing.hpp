#pragma once

// Feature-level message passing over a joint tree. Each directed edge owns a
// stack of same-padded square transform kernels; a joint's features are
// refined as relu(own + sum of transformed neighbor features).

#include "treepose/ops.hpp"
#include "treepose/tree.hpp"

namespace treepose {

/// One directed edge's transform: T convolutions (C7 -> C7, same padding),
/// relu between stages, no nonlinearity after the last stage (the outer relu
/// fires after summation at the receiving joint).
template <class T>
struct KernelStackT {
  std::vector<ConvParamsT<T>> convs;

  static KernelStackT make(int channels, int depth, int kernel,
                           const std::string& name_prefix) {
    if (depth < 1) throw ConfigError("kernel stack depth must be >= 1");
    if (kernel % 2 == 0) throw ConfigError("transform kernels must be odd-sized");
    KernelStackT s;
    for (int i = 0; i < depth; ++i)
      s.convs.emplace_back(channels, channels, kernel, 1, (kernel - 1) / 2,
                           name_prefix + ".s" + std::to_string(i));
    return s;
  }
};

template <class T>
struct StackTrace {
  std::vector<TensorT<T>> inputs;  // stage inputs; inputs[0] is the message
  std::vector<TensorT<T>> pre;     // conv outputs per stage
};

template <class T>
TensorT<T> apply_kernel_stack(const TensorT<T>& msg, const KernelStackT<T>& st,
                              StackTrace<T>* trace = nullptr) {
  if (st.convs.empty()) throw ConfigError("empty kernel stack");
  TensorT<T> cur = msg;
  const int depth = static_cast<int>(st.convs.size());
  for (int i = 0; i < depth; ++i) {
    TensorT<T> pre = conv2d_forward(cur, st.convs[i]);
    if (!(pre.shape == cur.shape))
      throw ConfigError("kernel stack changed spatial shape at stage " +
                        std::to_string(i));
    if (trace) {
      trace->inputs.push_back(std::move(cur));
      trace->pre.push_back(pre);
    }
    cur = (i + 1 < depth) ? relu_forward(pre) : std::move(pre);
  }
  return cur;
}

/// Returns the gradient w.r.t. the stack input and accumulates parameter
/// gradients. `trace` must come from the matching forward call.
template <class T>
TensorT<T> kernel_stack_backward(KernelStackT<T>& st, StackTrace<T>& trace,
                                 const TensorT<T>& dout) {
  const int depth = static_cast<int>(st.convs.size());
  TensorT<T> d = dout;
  for (int i = depth - 1; i >= 0; --i) {
    trace.inputs[i].zero_grad();
    conv2d_backward(trace.inputs[i], st.convs[i], d, true);
    if (i > 0) {
      // Stage input was relu(pre[i-1]); mask through the kink.
      d = TensorT<T>(trace.inputs[i].shape);
      for (std::size_t j = 0; j < d.data.size(); ++j)
        d.data[j] = trace.pre[i - 1].data[j] > T(0) ? trace.inputs[i].grad[j]
                                                    : T(0);
    }
  }
  TensorT<T> din(trace.inputs[0].shape);
  din.data = trace.inputs[0].grad;
  return din;
}

enum class Direction { Upward, Downward };

/// Per-branch features: original (post-relu bank outputs) and refined.
template <class T>
struct BranchFeaturesT {
  std::vector<TensorT<T>> original;
  std::vector<TensorT<T>> refined;
};

template <class T>
struct BranchTrace {
  std::vector<TensorT<T>> pre;  // pre-relu sums; unused slots stay empty
  std::vector<std::vector<StackTrace<T>>> stacks;  // per joint, per incoming edge
};

/// Runs one branch of message passing. `stacks[k]` is the transform for the
/// directed edge touching non-root joint k (child->parent when upward,
/// parent->child when downward). Sources of the flow copy their features.
template <class T>
void pass_messages(BranchFeaturesT<T>& branch, const JointTree& tree,
                   Direction dir, std::vector<KernelStackT<T>>& stacks,
                   BranchTrace<T>* trace = nullptr) {
  const int K = tree.size();
  if (static_cast<int>(branch.original.size()) != K)
    throw ConfigError("pass_messages: feature count != joint count");
  branch.refined.assign(K, TensorT<T>());
  if (trace) {
    trace->pre.assign(K, TensorT<T>());
    trace->stacks.assign(K, {});
  }
  const auto& order =
      dir == Direction::Upward ? tree.upward_order : tree.downward_order;
  for (int k : order) {
    const bool source = dir == Direction::Upward ? tree.is_leaf(k)
                                                 : k == tree.root;
    if (source) {
      branch.refined[k] = branch.original[k];
      continue;
    }
    TensorT<T> pre = branch.original[k];
    std::vector<int> senders;
    if (dir == Direction::Upward)
      senders = tree.children[k];
    else
      senders = {tree.parent[k]};
    for (int s : senders) {
      // Edge is identified by its non-root endpoint.
      const int edge = dir == Direction::Upward ? s : k;
      if (edge < 0 || edge >= static_cast<int>(stacks.size()) ||
          stacks[edge].convs.empty())
        throw ConfigError("missing transform stack for edge at joint " +
                          tree.joint_names[k]);
      StackTrace<T>* strace = nullptr;
      if (trace) {
        trace->stacks[k].emplace_back();
        strace = &trace->stacks[k].back();
      }
      TensorT<T> msg = apply_kernel_stack(branch.refined[s], stacks[edge], strace);
      for (std::size_t i = 0; i < pre.data.size(); ++i)
        pre.data[i] += msg.data[i];
    }
    branch.refined[k] = relu_forward(pre);
    if (trace) trace->pre[k] = std::move(pre);
  }
}

/// Backward through one branch. `drefined` holds incoming gradients w.r.t.
/// the refined features and is consumed; gradients w.r.t. the original
/// features are accumulated into `doriginal`.
template <class T>
void pass_messages_backward(const BranchFeaturesT<T>& /*branch*/,
                            const JointTree& tree, Direction dir,
                            std::vector<KernelStackT<T>>& stacks,
                            BranchTrace<T>& trace,
                            std::vector<TensorT<T>>& drefined,
                            std::vector<TensorT<T>>& doriginal) {
  const auto& order =
      dir == Direction::Upward ? tree.downward_order : tree.upward_order;
  for (int k : order) {
    const bool source = dir == Direction::Upward ? tree.is_leaf(k)
                                                 : k == tree.root;
    if (source) {
      for (std::size_t i = 0; i < drefined[k].data.size(); ++i)
        doriginal[k].data[i] += drefined[k].data[i];
      continue;
    }
    TensorT<T> dpre(drefined[k].shape);
    for (std::size_t i = 0; i < dpre.data.size(); ++i)
      dpre.data[i] =
          trace.pre[k].data[i] > T(0) ? drefined[k].data[i] : T(0);
    for (std::size_t i = 0; i < dpre.data.size(); ++i)
      doriginal[k].data[i] += dpre.data[i];
    std::vector<int> senders;
    if (dir == Direction::Upward)
      senders = tree.children[k];
    else
      senders = {tree.parent[k]};
    for (std::size_t si = 0; si < senders.size(); ++si) {
      const int s = senders[si];
      const int edge = dir == Direction::Upward ? s : k;
      TensorT<T> dmsg =
          kernel_stack_backward(stacks[edge], trace.stacks[k][si], dpre);
      for (std::size_t i = 0; i < dmsg.data.size(); ++i)
        drefined[s].data[i] += dmsg.data[i];
    }
  }
}

/// Per-joint [A'_k, B'_k] channel concatenation.
template <class T>
std::vector<TensorT<T>> concat_branches(const BranchFeaturesT<T>& up,
                                        const BranchFeaturesT<T>& down) {
  if (up.refined.size() != down.refined.size())
    throw ConfigError("concat_branches: joint count mismatch");
  std::vector<TensorT<T>> out;
  for (std::size_t k = 0; k < up.refined.size(); ++k)
    out.push_back(concat_channels<T>({&up.refined[k], &down.refined[k]}));
  return out;
}

}  // namespace treepose
