#pragma once

#include <string>
#include <vector>

#include "skipthink/chunking.hpp"
#include "skipthink/corpus.hpp"
#include "skipthink/databuild.hpp"
#include "skipthink/eval.hpp"
#include "skipthink/model.hpp"

namespace skipthink {

enum class Regime {
  baseline,   // full-rationale fine-tuning
  cwt_ac,     // chunk-wise training, fixed even-split plans
  cwt_sbc,    // chunk-wise training, plans re-searched before every epoch
  stt,        // skip-thinking: skip examples + chunk-wise mix, iterated
  skipall,    // question -> answer, no rationale
  sent_wise,  // one chunk per sentence group
  step_wise,  // one chunk per reasoning step
  weighted,   // baseline with doubled core-token loss weight
};
std::string to_string(Regime r);
Regime regime_from_string(const std::string& s);

struct RunConfig {
  Regime regime = Regime::baseline;
  NetConfig arch;     // arch.vocab is filled in by the runner
  TrainConfig train;
  int chunks = 2;             // M for even-split plans
  SearchConfig search;        // cwt_sbc / stt plan search
  bool stage_tags = true;     // granular regimes: emit stage-prefix tokens
  double core_weight = 2.0;   // weighted regime
  bool skip_accumulate = true;  // carry internalizations across probes
  int cap = 160;              // generation cap for dev eval and label probes
  int stt_iters = 2;          // outer-iteration cap
  int dev_chunks = 0;         // stages rolled at dev time; 0 = chunks
};

struct EpochStat {
  int epoch = 0;
  double mean_loss = 0;
  double dev_accuracy = 0;
  double dev_gen_tokens = 0;
  double mean_token_batch = 0;  // mean token-level batch size N over steps
  int steps = 0;
  uint64_t plan_hash = 0;  // 0 when the regime trains without plans
};

struct SttIterStat {
  int iteration = 0;
  double dev_accuracy = 0;
  double dev_gen_tokens = 0;
  int epochs_run = 0;
  bool improved = false;
  int internalized = 0;  // labels marking a chunk skippable
  int labels = 0;
};

struct RunRecord {
  Regime regime = Regime::baseline;
  uint64_t seed = 1;
  std::vector<EpochStat> epochs;
  std::vector<SttIterStat> stt;
  int best_epoch = -1;
  double best_accuracy = 0;
  double best_gen_tokens = 0;
  bool stopped_early = false;
  bool aborted = false;
  std::string abort_reason;
  uint64_t checkpoint_hash = 0;  // params hash of the returned model
};

struct RunResult {
  RunRecord record;
  Model model;
  std::vector<ChunkPlan> final_plans;  // plan-driven regimes only
  std::vector<SkipLabel> labels;       // stt: labels of the returned iteration
};

// N = sum over the batch of target-span lengths (K_i - s_i)
long long token_batch_size(const std::vector<TrainingExample>& batch);

// mean rationale step count of a corpus
double mean_step_count(const std::vector<Sample>& samples);

// protocol a regime's checkpoints answer to at eval time
EvalMode eval_mode_for(Regime r);

RunResult run_baseline(const RunConfig& cfg, const std::vector<Sample>& train_set,
                       const std::vector<Sample>& dev_set);
RunResult run_cwt(const RunConfig& cfg, const std::vector<Sample>& train_set,
                  const std::vector<Sample>& dev_set);
// source: a trained chunk-wise model, iteration 0's label source
RunResult run_stt(const RunConfig& cfg, const std::vector<Sample>& train_set,
                  const std::vector<Sample>& dev_set, Model& source);
RunResult run_variant(const RunConfig& cfg, const std::vector<Sample>& train_set,
                      const std::vector<Sample>& dev_set);

// dispatches on cfg.regime; stt requires source
RunResult run_training(const RunConfig& cfg, const std::vector<Sample>& train_set,
                       const std::vector<Sample>& dev_set,
                       Model* source = nullptr);

// event log: one {"epoch","metric","value"} line per recorded metric
void save_run_events(const std::string& path, const RunRecord& rec);
void save_run_summary(const std::string& path, const RunRecord& rec,
                      const json& provenance = nullptr);
RunRecord load_run_summary(const std::string& path, json* provenance = nullptr);

}  // namespace skipthink
