// Times the GEMM-based convolution kernels against the serial reference
// implementation and checks they agree.

#include <chrono>
#include <cmath>
#include <iostream>
#include <random>

#include "treepose/ops.hpp"

using namespace treepose;
using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

void fill_random(std::vector<float>& v, std::mt19937& rng) {
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  for (auto& x : v) x = u(rng);
}

struct Case {
  int n, c_in, c_out, size, kernel;
};

void run_case(const Case& cs, std::mt19937& rng) {
  Tensor x({cs.n, cs.c_in, cs.size, cs.size});
  fill_random(x.data, rng);
  ConvParams p(cs.c_out, cs.c_in, cs.kernel, 1, (cs.kernel - 1) / 2, "bench");
  fill_random(p.weights.data, rng);
  fill_random(p.bias.data, rng);

  auto t0 = Clock::now();
  Tensor y_ref = conv2d_forward_ref(x, p);
  const double t_ref = ms_since(t0);

  t0 = Clock::now();
  Tensor y = conv2d_forward(x, p);
  const double t_fast = ms_since(t0);

  float max_diff = 0.0f;
  for (std::size_t i = 0; i < y.data.size(); ++i)
    max_diff = std::max(max_diff, std::abs(y.data[i] - y_ref.data[i]));

  std::printf(
      "n=%d c=%d->%d %dx%d k=%d  reference %8.2f ms  gemm %8.2f ms  "
      "speedup %5.1fx  max_diff %.2e\n",
      cs.n, cs.c_in, cs.c_out, cs.size, cs.size, cs.kernel, t_ref, t_fast,
      t_ref / t_fast, static_cast<double>(max_diff));
}

}  // namespace

int main() {
  std::mt19937 rng(7);
  const Case cases[] = {
      {8, 8, 16, 64, 3},
      {8, 16, 32, 32, 3},
      {8, 32, 48, 16, 3},
      {8, 8, 8, 16, 5},
      {8, 8, 8, 16, 7},
      {1, 48, 8, 16, 1},
  };
  for (const auto& cs : cases) run_case(cs, rng);
  return 0;
}
