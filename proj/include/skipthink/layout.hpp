#pragma once

#include <string>
#include <vector>

#include "skipthink/vocab.hpp"

namespace skipthink {

// Token sequence layouts shared by chunk scoring, dataset building and
// evaluation.  One convention everywhere:
//
//   stage m   : [m] q NL block(c0) .. block(c_{m-1}) | block(c_m) EOC
//   answer    : [answer] q NL block(c0) .. block(c_{M-1}) | ANS a EOS
//   baseline  : <begin> q NL | block(rationale) ANS a EOS
//   skip      : [skip] q NL | {block(c_m) or [thought]}* ANS a EOS
//   skip-all  : [skip] q NL | ANS a EOS
//
// '|' marks s, the first prediction-target index.  block(text) encodes the
// text and terminates every line with the newline char, so concatenated
// blocks reproduce the rationale (plus one trailing newline) and per-stage
// target token counts add up exactly to the baseline rationale span.

struct SeqSpan {
  std::vector<int> tokens;
  int s = 0;
};

void append_block(std::vector<int>& out, const std::string& chunk_text);

// prompt builders (context only, generation continues from them)
std::vector<int> stage_prompt(const std::string& question,
                              const std::vector<std::string>& prior_chunks,
                              int m, bool use_tag);
std::vector<int> answer_prompt(const std::string& question,
                               const std::vector<std::string>& chunks,
                               bool use_tag);
std::vector<int> full_prompt(const std::string& question);
std::vector<int> skip_prompt(const std::string& question);

// training examples
SeqSpan stage_example(const std::string& question,
                      const std::vector<std::string>& chunks_through_m, int m,
                      bool use_tag);
SeqSpan answer_example(const std::string& question,
                       const std::vector<std::string>& chunks,
                       const std::string& answer_text, bool use_tag);
SeqSpan baseline_example(const std::string& question,
                         const std::string& rationale,
                         const std::string& answer_text);
SeqSpan skip_example(const std::string& question,
                     const std::vector<std::string>& chunks,
                     const std::vector<bool>& internalized,
                     const std::string& answer_text);
SeqSpan skipall_example(const std::string& question,
                        const std::string& answer_text);

}  // namespace skipthink
