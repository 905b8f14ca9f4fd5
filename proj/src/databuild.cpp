#include "skipthink/databuild.hpp"

#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

namespace skipthink {

namespace {

void check_parallel(const std::vector<Sample>& samples,
                    const std::vector<ChunkPlan>& plans) {
  if (samples.size() != plans.size())
    fail("contract", "sample/plan count mismatch");
  for (size_t i = 0; i < samples.size(); ++i) validate_plan(samples[i], plans[i]);
}

TrainingExample wrap(std::string id, SeqSpan seq, ExampleKind kind,
                     int stage) {
  TrainingExample ex;
  ex.span.id = std::move(id);
  ex.span.tokens = std::move(seq.tokens);
  ex.span.s = seq.s;
  ex.kind = kind;
  ex.stage = stage;
  return ex;
}

}  // namespace

std::string to_string(ExampleKind k) {
  switch (k) {
    case ExampleKind::baseline: return "baseline";
    case ExampleKind::stage: return "stage";
    case ExampleKind::answer: return "answer";
    case ExampleKind::skip: return "skip";
    case ExampleKind::skipall: return "skipall";
  }
  fail("contract", "bad example kind");
}

ExampleKind example_kind_from_string(const std::string& s) {
  if (s == "baseline") return ExampleKind::baseline;
  if (s == "stage") return ExampleKind::stage;
  if (s == "answer") return ExampleKind::answer;
  if (s == "skip") return ExampleKind::skip;
  if (s == "skipall") return ExampleKind::skipall;
  fail("data", "unknown example kind '" + s + "'");
}

std::vector<TrainingExample> build_baseline(
    const std::vector<Sample>& samples) {
  std::vector<TrainingExample> out;
  for (const Sample& s : samples)
    out.push_back(wrap(s.id,
                       baseline_example(s.question, s.rationale,
                                        answer_presentation(s)),
                       ExampleKind::baseline, -1));
  return out;
}

std::vector<TrainingExample> build_cwt(const std::vector<Sample>& samples,
                                       const std::vector<ChunkPlan>& plans,
                                       bool use_tag) {
  check_parallel(samples, plans);
  std::vector<TrainingExample> out;
  for (size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    auto texts = chunk_texts(s, plans[i]);
    for (int m = 0; m < plans[i].m; ++m)
      out.push_back(
          wrap(s.id,
               stage_example(s.question,
                             {texts.begin(), texts.begin() + m + 1}, m,
                             use_tag),
               ExampleKind::stage, m));
    out.push_back(wrap(s.id,
                       answer_example(s.question, texts,
                                      answer_presentation(s), use_tag),
                       ExampleKind::answer, -1));
  }
  return out;
}

std::vector<TrainingExample> build_stt(const std::vector<Sample>& samples,
                                       const std::vector<ChunkPlan>& plans,
                                       const std::vector<SkipLabel>& labels) {
  check_parallel(samples, plans);
  std::map<std::string, std::map<int, bool>> flag;
  for (const auto& l : labels) flag[l.sample_id][l.chunk] = l.internalized;

  auto out = build_cwt(samples, plans, true);
  for (size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    auto texts = chunk_texts(s, plans[i]);
    auto it = flag.find(s.id);
    if (it == flag.end()) fail("data", "no skip labels for sample " + s.id);
    std::vector<bool> internal(texts.size(), false);
    for (size_t m = 0; m < texts.size(); ++m) {
      auto fm = it->second.find(static_cast<int>(m));
      if (fm == it->second.end())
        fail("data", s.id + ": missing label for chunk " + std::to_string(m));
      internal[m] = fm->second;
    }
    out.push_back(wrap(s.id,
                       skip_example(s.question, texts, internal,
                                    answer_presentation(s)),
                       ExampleKind::skip, -1));
  }
  return out;
}

std::vector<TrainingExample> build_skipall(const std::vector<Sample>& samples) {
  std::vector<TrainingExample> out;
  for (const Sample& s : samples)
    out.push_back(wrap(s.id,
                       skipall_example(s.question, answer_presentation(s)),
                       ExampleKind::skipall, -1));
  return out;
}

std::vector<std::pair<size_t, size_t>> core_ranges_for_step(
    TaskKind kind, const std::string& step, size_t step_index) {
  std::vector<std::pair<size_t, size_t>> out;
  if (step.empty()) return out;
  switch (kind) {
    case TaskKind::object_swap: {
      (void)step_index;
      size_t end = step.size() - (step.back() == '.' ? 1 : 0);
      if (step.rfind("Swap ", 0) == 0) {
        // post-swap state: the assignment clauses after the cited swap
        size_t dot = step.find(". ");
        size_t begin = dot == std::string::npos ? 0 : dot + 2;
        if (begin < end) out.emplace_back(begin, end);
      } else if (step.rfind("Now: ", 0) == 0) {
        // conclusion: the held color and the choice letter are decisions;
        // the entity name is copied from the question
        size_t dash = step.find('-');
        size_t open = step.find('(');
        if (dash != std::string::npos && open != std::string::npos &&
            dash + 1 < open)
          out.emplace_back(dash + 1, open);
        if (open != std::string::npos && open + 1 < end)
          out.emplace_back(open + 1, open + 2);
      }
      // the "Start: " restatement and the closing summary are pure copying,
      // no core tokens
      break;
    }
    case TaskKind::arithmetic: {
      // equation steps only: digits and operators; the summary step has no
      // core tokens
      bool is_eq = std::isdigit(static_cast<unsigned char>(step[0])) &&
                   step.find('=') != std::string::npos;
      if (is_eq) {
        for (size_t i = 0; i < step.size(); ++i) {
          char c = step[i];
          if (std::isdigit(static_cast<unsigned char>(c)) || c == '+' ||
              c == '-' || c == '=')
            out.emplace_back(i, i + 1);
        }
      }
      break;
    }
    case TaskKind::last_letter: {
      const std::string isp = " is ";
      size_t p = step.rfind(isp);
      if (step.rfind("The last letter", 0) == 0 && p != std::string::npos) {
        if (p + isp.size() < step.size() - 1)
          out.emplace_back(p + isp.size(), step.size() - 1);
      } else if (step.rfind("Concatenated: ", 0) == 0) {
        size_t begin = std::string("Concatenated: ").size();
        if (begin < step.size() - 1) out.emplace_back(begin, step.size() - 1);
      }
      break;
    }
    case TaskKind::imported:
      break;
  }
  return out;
}

std::vector<uint8_t> core_token_mask(const Sample& s) {
  if (s.kind == TaskKind::imported)
    fail("data", s.id + ": no core-token rule for imported samples");
  std::vector<uint8_t> mask(s.rationale.size(), 0);
  size_t off = 0;  // offset of the current step within the rationale
  for (size_t k = 0; k < s.steps.size(); ++k) {
    const std::string& st = s.steps[k];
    for (auto [b, e] : core_ranges_for_step(s.kind, st, k))
      for (size_t i = off + b; i < off + e && i < mask.size(); ++i)
        mask[i] = 1;
    off += st.size() + 1;  // skip the newline
  }
  size_t marked = 0;
  for (uint8_t b : mask) marked += b;
  if (marked == 0 || marked >= mask.size())
    fail("contract", s.id + ": degenerate core-token mask");
  return mask;
}

std::vector<TrainingExample> build_weighted(const std::vector<Sample>& samples,
                                            double core_weight) {
  auto out = build_baseline(samples);
  for (size_t i = 0; i < samples.size(); ++i) {
    auto mask = core_token_mask(samples[i]);
    for (size_t c = 0; c < mask.size(); ++c)
      if (mask[c])
        out[i].span.extra_weights.emplace_back(
            out[i].span.s + static_cast<int>(c), core_weight);
  }
  return out;
}

std::vector<SkipLabel> generate_skip_labels(Model& model,
                                            const std::vector<Sample>& samples,
                                            const std::vector<ChunkPlan>& plans,
                                            bool accumulate, int cap,
                                            int iteration) {
  check_parallel(samples, plans);
  std::vector<SkipLabel> out;
  const int ctx = model.config().context;
  for (size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    auto texts = chunk_texts(s, plans[i]);
    const int M = plans[i].m;
    std::vector<bool> internal(M, false);

    for (int m = 0; m < M; ++m) {
      SkipLabel lab;
      lab.sample_id = s.id;
      lab.iteration = iteration;
      lab.chunk = m;

      std::vector<std::string> blocks;
      for (int j = 0; j < m; ++j)
        if (!(accumulate && internal[j])) blocks.push_back(texts[j]);

      bool failed = false;
      for (int st = m + 1; st < M && !failed; ++st) {
        auto prompt = stage_prompt(s.question, blocks, st, true);
        if (static_cast<int>(prompt.size()) >= ctx) {
          lab.reason = "cap_hit";
          failed = true;
          break;
        }
        auto dr = model.greedy_generate(
            prompt, cap, {Vocabulary::kEndChunk, Vocabulary::kEndSeq});
        lab.generated_tokens += static_cast<int>(dr.tokens.size());
        if (dr.stop == DecodeResult::Stop::length) {
          lab.reason = "cap_hit";
          failed = true;
          break;
        }
        std::string text = dr.text;
        while (!text.empty() && text.back() == '\n') text.pop_back();
        if (dr.stop_id != Vocabulary::kEndChunk || text.empty()) {
          lab.reason = "answer_mismatch";
          failed = true;
          break;
        }
        blocks.push_back(text);
      }
      if (!failed) {
        auto prompt = answer_prompt(s.question, blocks, true);
        if (static_cast<int>(prompt.size()) >= ctx) {
          lab.reason = "cap_hit";
        } else {
          auto dr =
              model.greedy_generate(prompt, cap, {Vocabulary::kEndSeq});
          lab.generated_tokens += static_cast<int>(dr.tokens.size());
          if (dr.stop == DecodeResult::Stop::length) {
            lab.reason = "cap_hit";
          } else {
            auto got = extract_answer(dr.text, s.kind);
            if (got && *got == s.answer) {
              lab.internalized = true;
              lab.reason = "answer_match";
            } else {
              lab.reason = "answer_mismatch";
            }
          }
        }
      }
      if (accumulate && lab.internalized) internal[m] = true;
      out.push_back(std::move(lab));
    }
  }
  return out;
}

int text_target_tokens(const TrainingExample& ex) {
  int n = 0;
  for (size_t t = ex.span.s; t < ex.span.tokens.size(); ++t)
    if (Vocabulary::is_char(ex.span.tokens[t])) ++n;
  return n;
}

void check_lengths(const std::vector<TrainingExample>& examples, int max_len) {
  for (const auto& ex : examples)
    if (static_cast<int>(ex.span.tokens.size()) > max_len)
      fail("data", "sample " + ex.span.id + ": example of " +
                       std::to_string(ex.span.tokens.size()) +
                       " tokens exceeds limit " + std::to_string(max_len));
}

void save_labels(const std::string& path, const std::vector<SkipLabel>& labels,
                 const json& header) {
  std::ostringstream out;
  if (!header.is_null()) out << header.dump() << '\n';
  for (const auto& l : labels) {
    json j;
    j["sample_id"] = l.sample_id;
    j["iteration"] = l.iteration;
    j["chunk"] = l.chunk;
    j["internalized"] = l.internalized;
    j["reason"] = l.reason;
    j["generated_tokens"] = l.generated_tokens;
    out << j.dump() << '\n';
  }
  write_file(path, out.str());
}

std::vector<SkipLabel> load_labels(const std::string& path, json* header) {
  std::ifstream in(path);
  if (!in) fail("io", "cannot open " + path);
  if (header) *header = nullptr;
  std::vector<SkipLabel> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail("data",
           path + ":" + std::to_string(lineno) + ": bad json: " + e.what());
    }
    if (lineno == 1 && j.contains("artifact")) {
      if (header) *header = j;
      continue;
    }
    try {
      SkipLabel l;
      l.sample_id = j.at("sample_id").get<std::string>();
      l.iteration = j.at("iteration").get<int>();
      l.chunk = j.at("chunk").get<int>();
      l.internalized = j.at("internalized").get<bool>();
      l.reason = j.at("reason").get<std::string>();
      l.generated_tokens = j.at("generated_tokens").get<int>();
      out.push_back(std::move(l));
    } catch (const nlohmann::json::exception& e) {
      fail("data", path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void save_examples(const std::string& path,
                   const std::vector<TrainingExample>& examples,
                   const json& header) {
  std::ostringstream out;
  if (!header.is_null()) out << header.dump() << '\n';
  for (const auto& ex : examples) {
    json j;
    j["id"] = ex.span.id;
    j["kind"] = to_string(ex.kind);
    j["stage"] = ex.stage;
    j["s"] = ex.span.s;
    j["tokens"] = ex.span.tokens;
    json w = json::array();
    for (const auto& [pos, wt] : ex.span.extra_weights)
      w.push_back(json::array({pos, wt}));
    j["weights"] = w;
    out << j.dump() << '\n';
  }
  write_file(path, out.str());
}

std::vector<TrainingExample> load_examples(const std::string& path,
                                           json* header) {
  std::ifstream in(path);
  if (!in) fail("io", "cannot open " + path);
  if (header) *header = nullptr;
  std::vector<TrainingExample> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail("data",
           path + ":" + std::to_string(lineno) + ": bad json: " + e.what());
    }
    if (lineno == 1 && j.contains("artifact")) {
      if (header) *header = j;
      continue;
    }
    try {
      TrainingExample ex;
      ex.span.id = j.at("id").get<std::string>();
      ex.kind = example_kind_from_string(j.at("kind").get<std::string>());
      ex.stage = j.at("stage").get<int>();
      ex.span.s = j.at("s").get<int>();
      ex.span.tokens = j.at("tokens").get<std::vector<int>>();
      for (const auto& w : j.at("weights"))
        ex.span.extra_weights.emplace_back(w.at(0).get<int>(),
                                           w.at(1).get<double>());
      out.push_back(std::move(ex));
    } catch (const nlohmann::json::exception& e) {
      fail("data", path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace skipthink
