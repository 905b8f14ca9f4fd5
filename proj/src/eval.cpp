#include "skipthink/eval.hpp"

#include <chrono>

#include "skipthink/databuild.hpp"
#include "skipthink/layout.hpp"

namespace skipthink {

namespace {

using Clock = std::chrono::steady_clock;

std::string normalize_block(std::string t) {
  while (!t.empty() && t.back() == '\n') t.pop_back();
  return t;
}

// Collects (char, prob) pairs of generated rationale text and classifies
// them line-by-line with the per-step core rules.
struct SelfTrace {
  double core_sum = 0, other_sum = 0;
  long long core_n = 0, other_n = 0;
  std::string line;
  std::vector<double> line_probs;
  size_t line_index = 0;
  TaskKind kind = TaskKind::imported;

  void flush() {
    if (!line.empty()) {
      auto ranges = core_ranges_for_step(kind, line, line_index);
      for (size_t i = 0; i < line.size(); ++i) {
        bool core = false;
        for (auto [b, e] : ranges) core |= (i >= b && i < e);
        (core ? core_sum : other_sum) += line_probs[i];
        (core ? core_n : other_n) += 1;
      }
      ++line_index;
    }
    line.clear();
    line_probs.clear();
  }

  void feed(const DecodeResult& dr, bool stop_at_answer_mark) {
    for (size_t i = 0; i < dr.tokens.size(); ++i) {
      int id = dr.tokens[i];
      if (stop_at_answer_mark && id == Vocabulary::kAnswerMark) break;
      if (!Vocabulary::is_char(id)) continue;
      char c = Vocabulary::token_spelling(id)[0];
      if (c == '\n') {
        flush();
      } else {
        line += c;
        line_probs.push_back(dr.probs[i]);
      }
    }
  }
};

}  // namespace

std::string to_string(EvalMode m) {
  switch (m) {
    case EvalMode::full: return "full";
    case EvalMode::staged: return "staged";
    case EvalMode::skip: return "skip";
  }
  fail("contract", "bad eval mode");
}

EvalMode eval_mode_from_string(const std::string& s) {
  if (s == "full") return EvalMode::full;
  if (s == "staged") return EvalMode::staged;
  if (s == "skip") return EvalMode::skip;
  fail("config", "unknown eval mode '" + s + "'");
}

EvalReport evaluate(Model& model, const std::vector<Sample>& samples,
                    const EvalOptions& opt) {
  EvalReport rep;
  rep.mode = opt.mode;
  rep.n = static_cast<int>(samples.size());
  const int ctx = model.config().context;
  SelfTrace trace;

  double acc = 0, gen_sum = 0, cap_sum = 0, wall_sum = 0;
  for (const Sample& s : samples) {
    auto t0 = Clock::now();
    SampleEval se;
    se.id = s.id;
    trace.kind = s.kind;
    trace.line_index = 0;
    std::string final_text;

    auto run = [&](const std::vector<int>& prompt,
                   const std::vector<int>& stops) {
      auto dr = model.greedy_generate(prompt, opt.cap, stops);
      se.gen_tokens += static_cast<int>(dr.tokens.size());
      if (dr.stop == DecodeResult::Stop::length) se.cap_hit = true;
      return dr;
    };

    switch (opt.mode) {
      case EvalMode::full: {
        auto dr = run(full_prompt(s.question), {Vocabulary::kEndSeq});
        trace.feed(dr, true);
        final_text = dr.text;
        break;
      }
      case EvalMode::skip: {
        auto dr = run(skip_prompt(s.question), {Vocabulary::kEndSeq});
        trace.feed(dr, true);
        final_text = dr.text;
        break;
      }
      case EvalMode::staged: {
        int stages = opt.per_sample_m
                         ? std::min<int>(static_cast<int>(s.steps.size()),
                                         Vocabulary::kMaxStages)
                         : opt.chunks;
        std::vector<std::string> blocks;
        bool abnormal = false;
        for (int m = 0; m < stages && !abnormal; ++m) {
          auto prompt = stage_prompt(s.question, blocks, m, true);
          if (static_cast<int>(prompt.size()) >= ctx) {
            se.cap_hit = true;
            break;
          }
          auto dr =
              run(prompt, {Vocabulary::kEndChunk, Vocabulary::kEndSeq});
          trace.feed(dr, false);
          std::string text = normalize_block(dr.text);
          if (!text.empty()) blocks.push_back(text);
          abnormal = dr.stop == DecodeResult::Stop::length ||
                     dr.stop_id == Vocabulary::kEndSeq;
        }
        auto prompt = answer_prompt(s.question, blocks, true);
        if (static_cast<int>(prompt.size()) >= ctx) {
          se.cap_hit = true;
        } else {
          auto dr = run(prompt, {Vocabulary::kEndSeq});
          final_text = dr.text;
        }
        break;
      }
    }
    trace.flush();

    auto got = extract_answer(final_text, s.kind);
    if (got) se.extracted = *got;
    se.correct = got && *got == s.answer;
    se.text = std::move(final_text);
    se.wall_ms =
        std::chrono::duration<double, std::milli>(Clock::now() - t0).count();

    acc += se.correct ? 1 : 0;
    gen_sum += se.gen_tokens;
    cap_sum += se.cap_hit ? 1 : 0;
    wall_sum += se.wall_ms;
    rep.records.push_back(std::move(se));
  }
  if (rep.n > 0) {
    rep.accuracy = acc / rep.n;
    rep.mean_gen_tokens = gen_sum / rep.n;
    rep.cap_hit_frac = cap_sum / rep.n;
    rep.mean_wall_ms = wall_sum / rep.n;
  }
  if (opt.confidence) {
    rep.has_confidence = true;
    rep.gold = gold_confidence(
        model, samples,
        opt.mode == EvalMode::staged ? EvalMode::staged : EvalMode::full,
        opt.chunks);
    if (trace.core_n > 0) rep.self_trace.core = 100.0 * trace.core_sum / trace.core_n;
    if (trace.other_n > 0)
      rep.self_trace.other = 100.0 * trace.other_sum / trace.other_n;
    rep.self_trace.core_n = trace.core_n;
    rep.self_trace.other_n = trace.other_n;
    rep.self_trace.gap = rep.self_trace.other - rep.self_trace.core;
  }
  return rep;
}

double speedup_ratio(const EvalReport& reasoning, const EvalReport& skip) {
  if (skip.mean_gen_tokens <= 0)
    fail("contract", "skip decode produced no tokens");
  return reasoning.mean_gen_tokens / skip.mean_gen_tokens;
}

Confidence gold_confidence(Model& model, const std::vector<Sample>& samples,
                           EvalMode mode, int chunks) {
  Confidence c;
  double core_sum = 0, other_sum = 0;
  for (const Sample& s : samples) {
    auto mask = core_token_mask(s);
    auto account = [&](const std::vector<double>& probs, size_t char_off,
                       size_t n_chars) {
      for (size_t i = 0; i < n_chars; ++i) {
        if (mask[char_off + i]) {
          core_sum += probs[i];
          c.core_n++;
        } else {
          other_sum += probs[i];
          c.other_n++;
        }
      }
    };
    if (mode == EvalMode::staged) {
      ChunkPlan plan = average_chunk(s, chunks);
      auto texts = chunk_texts(s, plan);
      size_t char_off = 0;
      for (int m = 0; m < plan.m; ++m) {
        SeqSpan ex = stage_example(
            s.question, {texts.begin(), texts.begin() + m + 1}, m, true);
        std::vector<int> prompt(ex.tokens.begin(), ex.tokens.begin() + ex.s);
        std::vector<int> cont(ex.tokens.begin() + ex.s, ex.tokens.end());
        auto probs = model.token_confidences(prompt, cont);
        account(probs, char_off, texts[m].size());
        char_off += texts[m].size() + 1;  // newline between chunks
      }
    } else {
      SeqSpan ex = baseline_example(s.question, s.rationale,
                                    answer_presentation(s));
      std::vector<int> prompt(ex.tokens.begin(), ex.tokens.begin() + ex.s);
      std::vector<int> cont(ex.tokens.begin() + ex.s, ex.tokens.end());
      auto probs = model.token_confidences(prompt, cont);
      account(probs, 0, s.rationale.size());
    }
  }
  if (c.core_n > 0) c.core = 100.0 * core_sum / c.core_n;
  if (c.other_n > 0) c.other = 100.0 * other_sum / c.other_n;
  c.gap = c.other - c.core;
  return c;
}

namespace {

json confidence_to_json(const Confidence& c) {
  json j;
  j["core"] = c.core;
  j["other"] = c.other;
  j["gap"] = c.gap;
  j["core_n"] = c.core_n;
  j["other_n"] = c.other_n;
  return j;
}

Confidence confidence_from_json(const json& j) {
  Confidence c;
  c.core = j.at("core").get<double>();
  c.other = j.at("other").get<double>();
  c.gap = j.at("gap").get<double>();
  c.core_n = j.at("core_n").get<long long>();
  c.other_n = j.at("other_n").get<long long>();
  return c;
}

}  // namespace

void save_eval(const std::string& path, const EvalReport& rep,
               const json& provenance) {
  json j;
  if (!provenance.is_null()) j["provenance"] = provenance;
  j["mode"] = to_string(rep.mode);
  j["n"] = rep.n;
  j["accuracy"] = rep.accuracy;
  j["mean_gen_tokens"] = rep.mean_gen_tokens;
  j["cap_hit_frac"] = rep.cap_hit_frac;
  j["mean_wall_ms"] = rep.mean_wall_ms;
  if (rep.has_confidence) {
    j["confidence_gold"] = confidence_to_json(rep.gold);
    j["confidence_self_trace"] = confidence_to_json(rep.self_trace);
  }
  json recs = json::array();
  for (const auto& r : rep.records) {
    json e;
    e["id"] = r.id;
    e["correct"] = r.correct;
    e["extracted"] = r.extracted;
    e["text"] = r.text;
    e["gen_tokens"] = r.gen_tokens;
    e["cap_hit"] = r.cap_hit;
    e["wall_ms"] = r.wall_ms;
    recs.push_back(e);
  }
  j["records"] = recs;
  write_file(path, j.dump(2) + "\n");
}

void save_trace(const std::string& path, const EvalReport& rep) {
  std::string out;
  for (const auto& r : rep.records) {
    json e;
    e["id"] = r.id;
    e["correct"] = r.correct;
    e["extracted"] = r.extracted;
    e["text"] = r.text;
    e["gen_tokens"] = r.gen_tokens;
    e["cap_hit"] = r.cap_hit;
    out += e.dump() + "\n";
  }
  write_file(path, out);
}

EvalReport load_eval(const std::string& path, json* provenance) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    fail("data", path + ": bad json: " + e.what());
  }
  EvalReport rep;
  try {
    if (provenance)
      *provenance = j.contains("provenance") ? j.at("provenance") : json(nullptr);
    rep.mode = eval_mode_from_string(j.at("mode").get<std::string>());
    rep.n = j.at("n").get<int>();
    rep.accuracy = j.at("accuracy").get<double>();
    rep.mean_gen_tokens = j.at("mean_gen_tokens").get<double>();
    rep.cap_hit_frac = j.at("cap_hit_frac").get<double>();
    rep.mean_wall_ms = j.at("mean_wall_ms").get<double>();
    if (j.contains("confidence_gold")) {
      rep.has_confidence = true;
      rep.gold = confidence_from_json(j.at("confidence_gold"));
      rep.self_trace = confidence_from_json(j.at("confidence_self_trace"));
    }
    for (const auto& e : j.at("records")) {
      SampleEval r;
      r.id = e.at("id").get<std::string>();
      r.correct = e.at("correct").get<bool>();
      r.extracted = e.at("extracted").get<std::string>();
      r.text = e.at("text").get<std::string>();
      r.gen_tokens = e.at("gen_tokens").get<int>();
      r.cap_hit = e.at("cap_hit").get<bool>();
      r.wall_ms = e.at("wall_ms").get<double>();
      rep.records.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    fail("data", path + ": " + e.what());
  }
  return rep;
}

}  // namespace skipthink
