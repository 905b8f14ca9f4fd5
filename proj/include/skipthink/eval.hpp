#pragma once

#include <string>
#include <vector>

#include "skipthink/chunking.hpp"
#include "skipthink/corpus.hpp"
#include "skipthink/model.hpp"

namespace skipthink {

enum class EvalMode { full, staged, skip };
std::string to_string(EvalMode m);
EvalMode eval_mode_from_string(const std::string& s);

struct SampleEval {
  std::string id;
  bool correct = false;
  std::string extracted;  // empty when no answer marker appeared
  std::string text;       // answer-bearing generated text, kept so accuracy
                          // can be recomputed from the persisted trace
  int gen_tokens = 0;
  bool cap_hit = false;   // some generation call stopped on length
  double wall_ms = 0;
};

struct Confidence {
  double core = 0;   // mean token probability * 100 over core positions
  double other = 0;  // same over the remaining rationale positions
  double gap = 0;    // other - core
  long long core_n = 0, other_n = 0;
};

struct EvalReport {
  EvalMode mode = EvalMode::full;
  int n = 0;
  double accuracy = 0;
  double mean_gen_tokens = 0;
  double cap_hit_frac = 0;
  double mean_wall_ms = 0;
  std::vector<SampleEval> records;
  bool has_confidence = false;
  Confidence gold;        // teacher-forced on gold rationales
  Confidence self_trace;  // over the model's own generated rationale text
};

struct EvalOptions {
  EvalMode mode = EvalMode::full;
  int chunks = 2;            // stages rolled in staged mode
  bool per_sample_m = false; // staged: roll one stage per rationale step
  int cap = Model::kDefaultCap;
  bool confidence = false;
};

// full: generate rationale+answer from the question.  staged: roll chunk
// stages then the answer stage, feeding generated chunks forward.  skip:
// generate from the skip tag.  Accuracy is exact match of the extracted
// answer; generated token counts include every stage of a sample.
EvalReport evaluate(Model& model, const std::vector<Sample>& samples,
                    const EvalOptions& opt);

// mean generated tokens of the reasoning decode over the skip decode
double speedup_ratio(const EvalReport& reasoning, const EvalReport& skip);

// Teacher-forced confidence over gold rationale tokens.  full mode forces
// the baseline layout; staged mode forces each stage-m sequence of the
// even-split plan with the given chunk count, mirroring how that regime
// emits its rationale.
Confidence gold_confidence(Model& model, const std::vector<Sample>& samples,
                           EvalMode mode, int chunks);

void save_eval(const std::string& path, const EvalReport& rep,
               const json& provenance = nullptr);
EvalReport load_eval(const std::string& path, json* provenance = nullptr);

// one {"id",...,"text"} line per sample, so traces stay greppable
void save_trace(const std::string& path, const EvalReport& rep);

struct RunConfig;  // defined in train.hpp

struct SweepRow {
  int setting = 0;  // chunk count or example batch size
  double accuracy = 0;
  double mean_gen_tokens = 0;
  double mean_token_batch = 0;  // token-level batch size of the final epoch
};

struct SweepTable {
  std::string axis;       // "chunk_count" or "token_batch"
  double mean_steps = 0;  // corpus mean rationale step count (chunk axis)
  std::vector<SweepRow> rows;
};

SweepTable sweep_chunk_count(const RunConfig& base, const std::vector<int>& grid,
                             const std::vector<Sample>& train_set,
                             const std::vector<Sample>& dev_set);
SweepTable sweep_token_batch(const RunConfig& base, const std::vector<int>& grid,
                             const std::vector<Sample>& train_set,
                             const std::vector<Sample>& dev_set);

}  // namespace skipthink
