#pragma once

#include <string>
#include <vector>

#include "skipthink/corpus.hpp"
#include "skipthink/model.hpp"

namespace skipthink {

// Chunks are contiguous runs of rationale steps.  bounds has size m+1 with
// bounds[0] = 0, bounds[m] = step count, strictly increasing, so every chunk
// is non-empty and concatenating chunk texts with newlines reproduces the
// rationale exactly.
struct ChunkPlan {
  std::string sample_id;
  int m_requested = 0;
  int m = 0;  // effective count; equals min(m_requested, step count) for AC
  std::vector<int> bounds;
};

void validate_plan(const Sample& s, const ChunkPlan& p);
std::vector<std::string> chunk_texts(const Sample& s, const ChunkPlan& p);

// Even split: chunk size floor(L/M), remainder carried by the last chunk;
// M is clamped to the step count so chunks stay non-empty.
ChunkPlan average_chunk(const Sample& s, int M);

enum class Granular { sentence, step };
// step: one chunk per step.  sentence: consecutive steps group until one
// ends with terminal punctuation (steps are the atomic unit, so a step is
// never split below step granularity).
ChunkPlan granular_chunk(const Sample& s, Granular mode);

struct SearchConfig {
  double eta = 0.1;
  bool anneal = false;
  double temperature = 0.1;
  uint64_t seed = 0;
  int round = 0;  // salt for annealing draws, callers pass the epoch
};

// Stage-conditional chunk scorer.  split_scores returns the losses of every
// candidate first chunk of the merged span [bounds[m], bounds[m+2]): entry
// i-1 is the stage-m loss of a chunk holding the first i steps of the span,
// i in 1..len-1.  The current chunk's loss sits at i = bounds[m+1]-bounds[m].
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual std::vector<double> split_scores(const Sample& s,
                                           const std::vector<int>& bounds,
                                           int m) = 0;
};

// Greedy boundary re-cut, chunk pairs visited left to right.  A move to the
// argmin cut happens when current_loss - min_loss exceeds eta; with anneal
// on, a failed test still moves with probability exp(-(eta - gain)/T),
// decided by a stateless seeded draw per (seed, sample, round, stage).
ChunkPlan search_chunk(const Sample& s, const ChunkPlan& start, Scorer& scorer,
                       const SearchConfig& cfg);

// Loss of chunk m under the stage-m training layout; the only loss the
// search may consult.
double chunk_stage_loss(Model& model, const Sample& s, const ChunkPlan& p,
                        int m);

// Model-backed scorer.  One causal pass over the merged span scores every
// candidate: per-position CE plus the end-of-chunk stop term at each cut,
// identical to chunk_stage_loss on the standalone sequence.
class ModelScorer : public Scorer {
 public:
  explicit ModelScorer(Model& model) : model_(model) {}
  std::vector<double> split_scores(const Sample& s,
                                   const std::vector<int>& bounds,
                                   int m) override;

 private:
  Model& model_;
};

uint64_t plan_hash(const std::vector<ChunkPlan>& plans);

struct PlanRecord {
  int epoch = 0;
  ChunkPlan plan;
};

void save_plans(const std::string& path, const std::vector<PlanRecord>& recs,
                const json& header = nullptr);
std::vector<PlanRecord> load_plans(const std::string& path,
                                   json* header = nullptr);

}  // namespace skipthink
