#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "treepose/message_passing.hpp"
#include "treepose/receptive_field.hpp"
#include "treepose/tree.hpp"

using namespace treepose;

namespace {

template <class T>
void fill_random(std::vector<T>& v, std::mt19937& rng, double lo = -1,
                 double hi = 1) {
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& x : v) x = static_cast<T>(u(rng));
}

KernelStackT<double> delta_stack(int channels, int kernel, int dy, int dx) {
  auto st = KernelStackT<double>::make(channels, 1, kernel, "delta");
  auto& w = st.convs[0].weights;
  std::fill(w.data.begin(), w.data.end(), 0.0);
  const int pad = (kernel - 1) / 2;
  for (int c = 0; c < channels; ++c)
    w.data[w.index(c, c, pad + dy, pad + dx)] = 1.0;
  return st;
}

}  // namespace

TEST_CASE("desk14 tree structure") {
  JointTree t = tree_by_id("desk14");
  REQUIRE(t.size() == 14);
  CHECK(t.joint_names[t.root] == "neck");
  CHECK(t.parent[t.root] == -1);
  // Children appear before parents in the upward order.
  std::vector<int> seen(t.size(), 0);
  for (int k : t.upward_order) {
    for (int c : t.children[k]) CHECK(seen[c] == 1);
    seen[k] = 1;
  }
  // Downward is the exact reverse.
  auto rev = t.downward_order;
  std::reverse(rev.begin(), rev.end());
  CHECK(rev == t.upward_order);

  auto m = t.mirror_map();
  CHECK(m[t.index_of("l_wrist")] == t.index_of("r_wrist"));
  CHECK(m[t.index_of("r_hip")] == t.index_of("l_hip"));
  CHECK(m[t.index_of("head")] == t.index_of("head"));
}

TEST_CASE("interpolated tree inserts one midpoint per edge") {
  JointTree base = tree_by_id("desk14");
  JointTree t = tree_by_id("desk14-interp");
  CHECK(t.size() == 2 * base.size() - 1);  // 13 edges -> 13 midpoints
  const int mid = t.index_of("l_wrist__mid");
  CHECK(t.joint_names[t.parent[t.index_of("l_wrist")]] == "l_wrist__mid");
  CHECK(t.joint_names[t.parent[mid]] == "l_elbow");
}

TEST_CASE("make_tree rejects cycles and multiple roots") {
  CHECK_THROWS_AS(make_tree({"a", "b"}, {1, 0}), ConfigError);
  CHECK_THROWS_AS(make_tree({"a", "b", "c"}, {-1, -1, 0}), ConfigError);
}

TEST_CASE("delta kernels shift maps exactly on interior pixels") {
  std::mt19937 rng(31);
  const int S = 16, C = 3;
  TensorT<double> x({2, C, S, S});
  fill_random(x.data, rng);
  for (int dy = -3; dy <= 3; ++dy)
    for (int dx = -3; dx <= 3; ++dx) {
      auto st = delta_stack(C, 7, dy, dx);
      TensorT<double> y = apply_kernel_stack(x, st);
      for (int n = 0; n < 2; ++n)
        for (int c = 0; c < C; ++c)
          for (int i = 0; i < S; ++i)
            for (int j = 0; j < S; ++j) {
              const int si = i + dy, sj = j + dx;
              if (si < 0 || si >= S || sj < 0 || sj >= S) continue;
              CHECK(y.at(n, c, i, j) == x.at(n, c, si, sj));
            }
    }
}

TEST_CASE("two stacked shifts compose to their sum on non-negative maps") {
  std::mt19937 rng(37);
  const int S = 16;
  TensorT<double> x({1, 2, S, S});
  fill_random(x.data, rng, 0.0, 1.0);  // relu between stages must be neutral
  auto a = delta_stack(2, 5, 1, 2);
  auto b = delta_stack(2, 5, 1, -1);
  KernelStackT<double> st;
  st.convs = {a.convs[0], b.convs[0]};
  TensorT<double> y = apply_kernel_stack(x, st);
  for (int i = 2; i < S - 2; ++i)
    for (int j = 2; j < S - 2; ++j)
      CHECK(y.at(0, 0, i, j) == x.at(0, 0, i + 2, j + 1));
}

TEST_CASE("kernel stack backward matches finite differences") {
  std::mt19937 rng(41);
  auto st = KernelStackT<double>::make(2, 2, 3, "t");
  for (auto& c : st.convs) {
    fill_random(c.weights.data, rng, -0.5, 0.5);
    fill_random(c.bias.data, rng, -0.1, 0.1);
  }
  TensorT<double> x({1, 2, 5, 5});
  fill_random(x.data, rng);
  TensorT<double> cot({1, 2, 5, 5});
  fill_random(cot.data, rng);

  auto loss = [&]() {
    TensorT<double> y = apply_kernel_stack(x, st);
    double l = 0;
    for (std::size_t i = 0; i < y.data.size(); ++i)
      l += y.data[i] * cot.data[i];
    return l;
  };
  StackTrace<double> tr;
  apply_kernel_stack(x, st, &tr);
  for (auto& c : st.convs) c.ensure_grad();
  TensorT<double> dx = kernel_stack_backward(st, tr, cot);

  const double eps = 1e-6;
  for (std::size_t i = 0; i < x.data.size(); i += 7) {
    const double saved = x.data[i];
    x.data[i] = saved + eps;
    const double lp = loss();
    x.data[i] = saved - eps;
    const double lm = loss();
    x.data[i] = saved;
    CHECK(dx.data[i] == doctest::Approx((lp - lm) / (2 * eps)).epsilon(1e-5));
  }
  auto& w = st.convs[0].weights;
  for (std::size_t i = 0; i < w.data.size(); i += 5) {
    const double saved = w.data[i];
    w.data[i] = saved + eps;
    const double lp = loss();
    w.data[i] = saved - eps;
    const double lm = loss();
    w.data[i] = saved;
    CHECK(w.grad[i] == doctest::Approx((lp - lm) / (2 * eps)).epsilon(1e-5));
  }
}

TEST_CASE("upward pass on a chain matches the recursive hand oracle") {
  // chain4: joints 0..3, rooted at 3, parent of k is k+1. Upward messages
  // flow leaf -> root, so refined(3) = relu(A3 + f(refined(2))) etc.
  JointTree t = tree_by_id("chain4");
  REQUIRE(t.root == 3);
  const int S = 8, C = 2;
  std::mt19937 rng(43);
  BranchFeaturesT<double> br;
  br.original.resize(4);
  for (int k = 0; k < 4; ++k) {
    br.original[k] = TensorT<double>({1, C, S, S});
    fill_random(br.original[k].data, rng, 0.0, 1.0);
  }
  std::vector<KernelStackT<double>> stacks(4);
  for (int k = 0; k < 3; ++k) {
    stacks[k] = KernelStackT<double>::make(C, 1, 3, "s");
    fill_random(stacks[k].convs[0].weights.data, rng, -0.3, 0.3);
  }
  auto saved = br.original;
  pass_messages(br, t, Direction::Upward, stacks);

  // Hand recursion using only conv2d_forward_ref.
  std::vector<TensorT<double>> hand(4);
  hand[0] = saved[0];
  for (int k = 1; k < 4; ++k) {
    TensorT<double> msg = conv2d_forward_ref(hand[k - 1], stacks[k - 1].convs[0]);
    TensorT<double> pre = saved[k];
    for (std::size_t i = 0; i < pre.data.size(); ++i)
      pre.data[i] += msg.data[i];
    hand[k] = relu_forward(pre);
  }
  for (int k = 0; k < 4; ++k)
    for (std::size_t i = 0; i < hand[k].data.size(); ++i)
      CHECK(br.refined[k].data[i] ==
            doctest::Approx(hand[k].data[i]).epsilon(1e-12));
}

TEST_CASE("downward pass sends parent features through the edge stack") {
  JointTree t = tree_by_id("chain3");
  const int S = 6, C = 1;
  std::mt19937 rng(47);
  BranchFeaturesT<double> br;
  br.original.resize(3);
  for (int k = 0; k < 3; ++k) {
    br.original[k] = TensorT<double>({1, C, S, S});
    fill_random(br.original[k].data, rng, 0.0, 1.0);
  }
  std::vector<KernelStackT<double>> stacks(3);
  for (int k = 0; k < 2; ++k) {
    stacks[k] = KernelStackT<double>::make(C, 1, 3, "s");
    fill_random(stacks[k].convs[0].weights.data, rng, -0.3, 0.3);
  }
  auto saved = br.original;
  pass_messages(br, t, Direction::Downward, stacks);
  CHECK(br.refined[2].data == saved[2].data);  // root copies its features

  TensorT<double> msg = conv2d_forward_ref(br.refined[2], stacks[1].convs[0]);
  for (std::size_t i = 0; i < msg.data.size(); ++i)
    msg.data[i] += saved[1].data[i];
  msg = relu_forward(msg);
  for (std::size_t i = 0; i < msg.data.size(); ++i)
    CHECK(br.refined[1].data[i] == doctest::Approx(msg.data[i]).epsilon(1e-12));
}

TEST_CASE("zero transform kernels leave every branch bit-identical") {
  JointTree t = tree_by_id("desk14");
  const int S = 8, C = 3;
  std::mt19937 rng(53);
  BranchFeaturesT<double> br;
  br.original.resize(t.size());
  for (int k = 0; k < t.size(); ++k) {
    br.original[k] = TensorT<double>({2, C, S, S});
    fill_random(br.original[k].data, rng, 0.0, 2.0);
  }
  std::vector<KernelStackT<double>> stacks(t.size());
  for (int k = 0; k < t.size(); ++k) {
    if (t.parent[k] < 0) continue;
    stacks[k] = KernelStackT<double>::make(C, 2, 5, "z");
    for (auto& c : stacks[k].convs) {
      std::fill(c.weights.data.begin(), c.weights.data.end(), 0.0);
      std::fill(c.bias.data.begin(), c.bias.data.end(), 0.0);
    }
  }
  auto saved = br.original;
  pass_messages(br, t, Direction::Upward, stacks);
  for (int k = 0; k < t.size(); ++k)
    CHECK(br.refined[k].data == saved[k].data);
  pass_messages(br, t, Direction::Downward, stacks);
  for (int k = 0; k < t.size(); ++k)
    CHECK(br.refined[k].data == saved[k].data);
}

TEST_CASE("receptive field arithmetic on hand-checked stacks") {
  // Single 3x3 conv: rf 3. Conv then 2x pool then conv: 3 -> 4 -> 8.
  auto rf = receptive_field_of({{"c1", 3, 1}, {"p", 2, 2}, {"c2", 3, 1}});
  CHECK(rf[0].rf == 3);
  CHECK(rf[1].rf == 4);
  CHECK(rf[2].rf == 8);
  CHECK(rf[2].jump == 2);
}

TEST_CASE("full-scale stack reaches 188 at fcn7 and 332 after transforms") {
  auto rf = receptive_field_of(paper_table1_layers());
  int fcn7 = -1, last = -1;
  for (const auto& e : rf) {
    if (e.name == "fcn7") fcn7 = e.rf;
    last = e.rf;
  }
  CHECK(fcn7 == 188);
  CHECK(last == 332);
}
