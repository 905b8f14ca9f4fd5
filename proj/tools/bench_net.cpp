// Throughput probe for the transformer core: forward+backward and decode
// cost per token at candidate sizes, single thread.  Informational only.
#include <chrono>
#include <cstdio>
#include <vector>

#include "skipthink/common.hpp"
#include "skipthink/net.hpp"
#include "skipthink/vocab.hpp"

using namespace skipthink;
using Clock = std::chrono::steady_clock;

static double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

static void bench(int d, int layers, int dff, int T, int reps) {
  NetConfig cfg;
  cfg.d_model = d;
  cfg.n_layer = layers;
  cfg.d_ff = dff;
  cfg.n_head = 4;
  cfg.context = 512;
  cfg.vocab = Vocabulary::size();
  Net<float> net(cfg);
  net.init_params(7);

  Rng rng(11);
  std::vector<int> tok(T);
  for (auto& t : tok) t = rng.index(Vocabulary::kChars);
  std::vector<double> w(T, 1.0);
  w[0] = 0.0;

  // train step cost: forward + backward + adam
  auto t0 = Clock::now();
  for (int r = 0; r < reps; ++r) {
    net.zero_grad();
    net.forward_loss(tok.data(), T, w.data(), 1.0 / (T - 1), nullptr);
    net.adam_update(1e-3, 0.9, 0.95, 1e-8, 0.1);
  }
  double train_ms = ms_since(t0) / reps;

  // decode cost: prefill half, generate half
  t0 = Clock::now();
  int gen_reps = std::max(1, reps / 4);
  for (int r = 0; r < gen_reps; ++r) {
    auto st = net.make_state();
    net.prefill(tok.data(), T / 2, st);
    for (int i = T / 2; i < T; ++i) net.step(tok[i], st);
  }
  double gen_ms = ms_since(t0) / gen_reps;

  std::printf(
      "d=%-3d L=%d ff=%-3d T=%-4d  train %7.2f ms (%6.1f us/tok)  "
      "decode %7.2f ms (%6.1f us/gen-tok)  params %zu\n",
      d, layers, dff, T, train_ms, 1000.0 * train_ms / T, gen_ms,
      1000.0 * gen_ms / (T / 2), net.n_params());
}

int main() {
  bench(48, 2, 96, 256, 30);
  bench(48, 2, 96, 512, 15);
  bench(64, 2, 128, 256, 20);
  bench(64, 2, 256, 256, 20);
  bench(32, 2, 64, 256, 30);
  return 0;
}
