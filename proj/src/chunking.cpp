#include "skipthink/chunking.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "skipthink/layout.hpp"

namespace skipthink {

void validate_plan(const Sample& s, const ChunkPlan& p) {
  const int L = static_cast<int>(s.steps.size());
  if (p.sample_id != s.id)
    fail("contract", "plan for " + p.sample_id + " applied to " + s.id);
  if (p.m < 1 || static_cast<int>(p.bounds.size()) != p.m + 1)
    fail("contract", s.id + ": malformed plan bounds");
  if (p.bounds.front() != 0 || p.bounds.back() != L)
    fail("contract", s.id + ": plan does not cover the rationale");
  for (int i = 0; i < p.m; ++i)
    if (p.bounds[i] >= p.bounds[i + 1])
      fail("contract", s.id + ": empty or reordered chunk");
}

std::vector<std::string> chunk_texts(const Sample& s, const ChunkPlan& p) {
  validate_plan(s, p);
  std::vector<std::string> out;
  for (int m = 0; m < p.m; ++m) {
    std::string text;
    for (int k = p.bounds[m]; k < p.bounds[m + 1]; ++k) {
      if (k > p.bounds[m]) text += '\n';
      text += s.steps[k];
    }
    out.push_back(std::move(text));
  }
  return out;
}

ChunkPlan average_chunk(const Sample& s, int M) {
  if (M < 1) fail("config", "chunk count must be positive");
  if (M > Vocabulary::kMaxStages)
    fail("config", "chunk count exceeds stage tag range");
  const int L = static_cast<int>(s.steps.size());
  ChunkPlan p;
  p.sample_id = s.id;
  p.m_requested = M;
  p.m = std::min(M, L);
  const int g = L / p.m;
  for (int i = 0; i < p.m; ++i) p.bounds.push_back(g * i);
  p.bounds.push_back(L);
  validate_plan(s, p);
  return p;
}

ChunkPlan granular_chunk(const Sample& s, Granular mode) {
  const int L = static_cast<int>(s.steps.size());
  ChunkPlan p;
  p.sample_id = s.id;
  p.bounds.push_back(0);
  if (mode == Granular::step) {
    for (int i = 1; i <= L; ++i) p.bounds.push_back(i);
  } else {
    for (int i = 0; i < L; ++i) {
      char last = s.steps[i].back();
      bool closes = last == '.' || last == '!' || last == '?' || i == L - 1;
      if (closes) p.bounds.push_back(i + 1);
    }
  }
  p.m = static_cast<int>(p.bounds.size()) - 1;
  p.m_requested = p.m;
  if (p.m > Vocabulary::kMaxStages)
    fail("data", s.id + ": too many chunks for the stage tag range");
  validate_plan(s, p);
  return p;
}

ChunkPlan search_chunk(const Sample& s, const ChunkPlan& start, Scorer& scorer,
                       const SearchConfig& cfg) {
  validate_plan(s, start);
  ChunkPlan p = start;
  if (p.m < 2) return p;
  for (int m = 0; m <= p.m - 2; ++m) {
    const int a = p.bounds[m], b = p.bounds[m + 1], c = p.bounds[m + 2];
    const int len = c - a;
    if (len == 2) continue;  // one legal cut: the boundary cannot move
    auto sc = scorer.split_scores(s, p.bounds, m);
    if (static_cast<int>(sc.size()) != len - 1)
      fail("contract", s.id + ": scorer returned wrong candidate count");
    const double l_c = sc[b - a - 1];
    int besti = 1;
    for (int i = 2; i <= len - 1; ++i)
      if (sc[i - 1] < sc[besti - 1]) besti = i;  // ties keep the leftmost cut
    const double l_min = sc[besti - 1];
    bool move = (l_c - l_min) > cfg.eta;
    if (!move && cfg.anneal) {
      const double shortfall = cfg.eta - (l_c - l_min);  // >= 0 here
      double pacc = std::exp(-shortfall / cfg.temperature);
      if (pacc > 1.0) pacc = 1.0;
      uint64_t h = fnv1a64(s.id);
      h = fnv1a64_u64(cfg.seed, h);
      h = fnv1a64_u64(static_cast<uint64_t>(cfg.round), h);
      h = fnv1a64_u64(static_cast<uint64_t>(m), h);
      const double u =
          static_cast<double>(h >> 11) * (1.0 / 9007199254740992.0);
      move = u < pacc;
    }
    if (move) p.bounds[m + 1] = a + besti;
  }
  validate_plan(s, p);
  return p;
}

double chunk_stage_loss(Model& model, const Sample& s, const ChunkPlan& p,
                        int m) {
  validate_plan(s, p);
  if (m < 0 || m >= p.m) fail("contract", s.id + ": stage out of range");
  auto texts = chunk_texts(s, p);
  SeqSpan ex = stage_example(
      s.question, {texts.begin(), texts.begin() + m + 1}, m, true);
  if (static_cast<int>(ex.tokens.size()) > model.config().context)
    fail("data", s.id + ": stage sequence exceeds model context");
  return model.span_loss(ex.tokens, ex.s);
}

std::vector<double> ModelScorer::split_scores(const Sample& s,
                                              const std::vector<int>& bounds,
                                              int m) {
  const int a = bounds[m], c = bounds[m + 2];
  const int len = c - a;

  // chunks before m keep their current texts
  std::vector<std::string> prior;
  for (int j = 0; j < m; ++j) {
    std::string text;
    for (int k = bounds[j]; k < bounds[j + 1]; ++k) {
      if (k > bounds[j]) text += '\n';
      text += s.steps[k];
    }
    prior.push_back(std::move(text));
  }

  std::vector<int> seq = stage_prompt(s.question, prior, m, true);
  const int prefix = static_cast<int>(seq.size());
  std::vector<int> block_end;  // token count after each merged step's block
  for (int k = a; k < c; ++k) {
    append_block(seq, s.steps[k]);
    block_end.push_back(static_cast<int>(seq.size()));
  }
  const int T = static_cast<int>(seq.size());
  if (T > model_.config().context)
    fail("data", s.id + ": merged span exceeds model context");

  // one causal pass; column t-1-(prefix-1) predicts token t
  Eigen::MatrixXf z = model_.net().logits_range(seq.data(), T, prefix - 1, T);
  auto ce_at = [&](int col, int tok) {
    Eigen::VectorXd zc = z.col(col).cast<double>();
    double mx = zc.maxCoeff();
    double lse = mx + std::log((zc.array() - mx).exp().sum());
    return lse - zc(tok);
  };

  std::vector<double> cum(len + 1, 0.0);  // CE sum of the first i blocks
  {
    double run = 0.0;
    int t = prefix;
    for (int i = 0; i < len; ++i) {
      for (; t < block_end[i]; ++t) run += ce_at(t - prefix, seq[t]);
      cum[i + 1] = run;
    }
  }
  std::vector<double> out;
  for (int i = 1; i <= len - 1; ++i) {
    const double eoc = ce_at(block_end[i - 1] - prefix, Vocabulary::kEndChunk);
    const int n_tok = block_end[i - 1] - prefix;
    out.push_back((cum[i] + eoc) / (n_tok + 1));
  }
  return out;
}

uint64_t plan_hash(const std::vector<ChunkPlan>& plans) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& p : plans) {
    h = fnv1a64(p.sample_id, h);
    for (int b : p.bounds) h = fnv1a64_u64(static_cast<uint64_t>(b), h);
  }
  return h;
}

void save_plans(const std::string& path, const std::vector<PlanRecord>& recs,
                const json& header) {
  std::ostringstream out;
  if (!header.is_null()) out << header.dump() << '\n';
  for (const auto& r : recs) {
    json j;
    j["id"] = r.plan.sample_id;
    j["epoch"] = r.epoch;
    j["m_requested"] = r.plan.m_requested;
    j["m"] = r.plan.m;
    j["bounds"] = r.plan.bounds;
    out << j.dump() << '\n';
  }
  write_file(path, out.str());
}

std::vector<PlanRecord> load_plans(const std::string& path, json* header) {
  std::ifstream in(path);
  if (!in) fail("io", "cannot open " + path);
  std::vector<PlanRecord> recs;
  if (header) *header = nullptr;
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
      PlanRecord r;
      r.epoch = j.at("epoch").get<int>();
      r.plan.sample_id = j.at("id").get<std::string>();
      r.plan.m_requested = j.at("m_requested").get<int>();
      r.plan.m = j.at("m").get<int>();
      r.plan.bounds = j.at("bounds").get<std::vector<int>>();
      recs.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      fail("data", path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return recs;
}

}  // namespace skipthink
