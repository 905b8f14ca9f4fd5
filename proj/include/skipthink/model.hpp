#pragma once

#include <memory>
#include <string>
#include <vector>

#include "skipthink/net.hpp"
#include "skipthink/vocab.hpp"

namespace skipthink {

struct TrainConfig {
  double lr = 1e-5;
  int batch = 2;
  int epochs = 50;
  int warmup = 1200;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double weight_decay = 0.1;
  double adam_eps = 1e-8;
  int restart_period = 0;  // cosine cycle length in steps; 0 = one epoch
  double min_lr = 0.0;
  int patience = 10;  // epochs without a new best dev accuracy before stopping
  uint64_t seed = 1;
};

// Linear warmup to the peak, then cosine annealing with warm restarts:
// the schedule restarts at the peak every cycle_steps optimizer steps.
double lr_at(const TrainConfig& cfg, int64_t step, int64_t cycle_steps);

// A tokenized training example.  Target span is tokens[s..); extra_weights
// lists positions whose CE weight differs from 1.
struct SpanExample {
  std::string id;
  std::vector<int> tokens;
  int s = 0;
  std::vector<std::pair<int, double>> extra_weights;
};

struct DecodeResult {
  std::vector<int> tokens;     // generated tokens, stop token excluded
  std::string text;            // decoded tokens
  std::vector<double> probs;   // greedy probability of each generated token
  enum class Stop { stop_token, length } stop = Stop::length;
  int stop_id = -1;
};

// The trainable student: a float transformer plus its optimizer state, the
// exact span loss, greedy decoding and checkpoint round-tripping.
class Model {
 public:
  static constexpr int kDefaultCap = 1024;

  Model(const NetConfig& cfg, uint64_t init_seed);

  const NetConfig& config() const { return net_->config(); }
  Net<float>& net() { return *net_; }
  const Net<float>& net() const { return *net_; }

  // mean CE over tokens[s..K); requires 1 <= s < K
  double span_loss(const std::vector<int>& tokens, int s);
  double span_loss(const SpanExample& ex);

  struct StepOut {
    double loss = 0;          // mean of per-example span losses
    double lr = 0;
    int64_t token_batch = 0;  // sum over the batch of (K_i - s_i)
  };
  // one Adam step on the batch-mean span loss at the scheduled rate
  StepOut train_step(const std::vector<const SpanExample*>& batch,
                     const TrainConfig& cfg, int64_t step,
                     int64_t cycle_steps);

  DecodeResult greedy_generate(const std::vector<int>& prompt, int cap,
                               const std::vector<int>& stop_tokens);

  // teacher-forced probability of each continuation token given the prompt
  std::vector<double> token_confidences(const std::vector<int>& prompt,
                                        const std::vector<int>& continuation);

  Eigen::MatrixXf logits_full(const std::vector<int>& tokens);  // diagnostics

  uint64_t params_hash() const;
  void save_checkpoint(const std::string& path) const;
  static Model load_checkpoint(const std::string& path);

 private:
  explicit Model(const NetConfig& cfg);
  std::vector<double> weights_for(const SpanExample& ex) const;

  std::unique_ptr<Net<float>> net_;
};

}  // namespace skipthink
