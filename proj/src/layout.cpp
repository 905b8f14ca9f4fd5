#include "skipthink/layout.hpp"

#include "skipthink/common.hpp"

namespace skipthink {

namespace {

void append_text(std::vector<int>& out, const std::string& text) {
  auto ids = Vocabulary::encode(text);
  out.insert(out.end(), ids.begin(), ids.end());
}

std::vector<int> header(int first_token, const std::string& question) {
  std::vector<int> out;
  out.push_back(first_token);
  append_text(out, question);
  out.push_back(Vocabulary::char_id('\n'));
  return out;
}

}  // namespace

void append_block(std::vector<int>& out, const std::string& chunk_text) {
  if (chunk_text.empty()) fail("contract", "empty chunk text");
  append_text(out, chunk_text);
  out.push_back(Vocabulary::char_id('\n'));
}

std::vector<int> stage_prompt(const std::string& question,
                              const std::vector<std::string>& prior_chunks,
                              int m, bool use_tag) {
  auto out = header(use_tag ? Vocabulary::stage_tag(m) : Vocabulary::kBegin,
                    question);
  for (const auto& c : prior_chunks) append_block(out, c);
  return out;
}

std::vector<int> answer_prompt(const std::string& question,
                               const std::vector<std::string>& chunks,
                               bool use_tag) {
  auto out = header(use_tag ? Vocabulary::kAnswerTag : Vocabulary::kBegin,
                    question);
  for (const auto& c : chunks) append_block(out, c);
  return out;
}

std::vector<int> full_prompt(const std::string& question) {
  return header(Vocabulary::kBegin, question);
}

std::vector<int> skip_prompt(const std::string& question) {
  return header(Vocabulary::kSkipTag, question);
}

SeqSpan stage_example(const std::string& question,
                      const std::vector<std::string>& chunks_through_m, int m,
                      bool use_tag) {
  if (m < 0 || m >= static_cast<int>(chunks_through_m.size()))
    fail("contract", "stage index out of range");
  SeqSpan ex;
  ex.tokens = stage_prompt(
      question,
      {chunks_through_m.begin(), chunks_through_m.begin() + m}, m, use_tag);
  ex.s = static_cast<int>(ex.tokens.size());
  append_block(ex.tokens, chunks_through_m[m]);
  ex.tokens.push_back(Vocabulary::kEndChunk);
  return ex;
}

SeqSpan answer_example(const std::string& question,
                       const std::vector<std::string>& chunks,
                       const std::string& answer_text, bool use_tag) {
  SeqSpan ex;
  ex.tokens = answer_prompt(question, chunks, use_tag);
  ex.s = static_cast<int>(ex.tokens.size());
  ex.tokens.push_back(Vocabulary::kAnswerMark);
  append_text(ex.tokens, " " + answer_text);
  ex.tokens.push_back(Vocabulary::kEndSeq);
  return ex;
}

SeqSpan baseline_example(const std::string& question,
                         const std::string& rationale,
                         const std::string& answer_text) {
  SeqSpan ex;
  ex.tokens = full_prompt(question);
  ex.s = static_cast<int>(ex.tokens.size());
  append_block(ex.tokens, rationale);
  ex.tokens.push_back(Vocabulary::kAnswerMark);
  append_text(ex.tokens, " " + answer_text);
  ex.tokens.push_back(Vocabulary::kEndSeq);
  return ex;
}

SeqSpan skip_example(const std::string& question,
                     const std::vector<std::string>& chunks,
                     const std::vector<bool>& internalized,
                     const std::string& answer_text) {
  if (chunks.size() != internalized.size())
    fail("contract", "chunk/label size mismatch");
  SeqSpan ex;
  ex.tokens = skip_prompt(question);
  ex.s = static_cast<int>(ex.tokens.size());
  for (size_t m = 0; m < chunks.size(); ++m) {
    if (internalized[m])
      ex.tokens.push_back(Vocabulary::kThought);
    else
      append_block(ex.tokens, chunks[m]);
  }
  ex.tokens.push_back(Vocabulary::kAnswerMark);
  append_text(ex.tokens, " " + answer_text);
  ex.tokens.push_back(Vocabulary::kEndSeq);
  return ex;
}

SeqSpan skipall_example(const std::string& question,
                        const std::string& answer_text) {
  SeqSpan ex;
  ex.tokens = skip_prompt(question);
  ex.s = static_cast<int>(ex.tokens.size());
  ex.tokens.push_back(Vocabulary::kAnswerMark);
  append_text(ex.tokens, " " + answer_text);
  ex.tokens.push_back(Vocabulary::kEndSeq);
  return ex;
}

}  // namespace skipthink
