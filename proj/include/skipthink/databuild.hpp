#pragma once

#include <string>
#include <vector>

#include "skipthink/chunking.hpp"
#include "skipthink/corpus.hpp"
#include "skipthink/layout.hpp"
#include "skipthink/model.hpp"

namespace skipthink {

enum class ExampleKind { baseline, stage, answer, skip, skipall };
std::string to_string(ExampleKind k);
ExampleKind example_kind_from_string(const std::string& s);

struct TrainingExample {
  SpanExample span;  // span.id names the source sample
  ExampleKind kind = ExampleKind::baseline;
  int stage = -1;  // m for stage examples, -1 otherwise
};

// Chunk-removal probe outcome for one (sample, chunk).
struct SkipLabel {
  std::string sample_id;
  int iteration = 0;
  int chunk = 0;
  bool internalized = false;
  std::string reason;  // answer_match | answer_mismatch | cap_hit
  int generated_tokens = 0;
};

// plans are parallel to samples and id-checked.  use_tag=false drops the
// stage-prefix tokens (the no-prefix granular ablation).
std::vector<TrainingExample> build_baseline(const std::vector<Sample>& samples);
std::vector<TrainingExample> build_cwt(const std::vector<Sample>& samples,
                                       const std::vector<ChunkPlan>& plans,
                                       bool use_tag = true);
std::vector<TrainingExample> build_stt(const std::vector<Sample>& samples,
                                       const std::vector<ChunkPlan>& plans,
                                       const std::vector<SkipLabel>& labels);
std::vector<TrainingExample> build_skipall(const std::vector<Sample>& samples);
std::vector<TrainingExample> build_weighted(const std::vector<Sample>& samples,
                                            double core_weight = 2.0);

// Rule-based flags over the raw rationale characters marking core reasoning
// tokens: post-swap assignment clauses, equation digits/operators, extracted
// letters and the final concatenation.
// Byte ranges of load-bearing characters within one rationale step. Empty
// when the step carries no core content (or the task has no rule).
std::vector<std::pair<size_t, size_t>> core_ranges_for_step(
    TaskKind kind, const std::string& step, size_t step_index);

std::vector<uint8_t> core_token_mask(const Sample& s);

// Probes each chunk by removing it, rolling the model through the remaining
// stages and checking the produced answer.  accumulate=true carries earlier
// internalizations forward; false probes each chunk in isolation.
std::vector<SkipLabel> generate_skip_labels(Model& model,
                                            const std::vector<Sample>& samples,
                                            const std::vector<ChunkPlan>& plans,
                                            bool accumulate, int cap,
                                            int iteration);

void save_labels(const std::string& path, const std::vector<SkipLabel>& labels,
                 const json& header = nullptr);
std::vector<SkipLabel> load_labels(const std::string& path,
                                   json* header = nullptr);

// target positions holding text (non-control) tokens
int text_target_tokens(const TrainingExample& ex);

// throws "data" naming the first sample whose example exceeds max_len
void check_lengths(const std::vector<TrainingExample>& examples, int max_len);

void save_examples(const std::string& path,
                   const std::vector<TrainingExample>& examples,
                   const json& header = nullptr);
std::vector<TrainingExample> load_examples(const std::string& path,
                                           json* header = nullptr);

}  // namespace skipthink
