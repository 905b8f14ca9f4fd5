#include <doctest.h>

#include <string>
#include <vector>

#include "skipthink/train.hpp"
#include "util.hpp"

using namespace skipthink;
using testutil::error_kind;
using testutil::TempDir;
using testutil::tiny_arch;

namespace {

// two-entity object swaps: every sample has exactly five rationale steps
// (start state, two swaps, conclusion, closing summary)
std::vector<Sample> swap_corpus(int count, uint64_t seed) {
  TaskConfig cfg;
  cfg.kind = TaskKind::object_swap;
  cfg.count = count;
  cfg.seed = seed;
  cfg.entities = 2;
  cfg.swaps = 2;
  return generate(cfg);
}

RunConfig quick_config(Regime regime, int epochs = 2) {
  RunConfig cfg;
  cfg.regime = regime;
  cfg.arch = tiny_arch(384);
  cfg.train.lr = 1e-3;
  cfg.train.warmup = 4;
  cfg.train.epochs = epochs;
  cfg.train.patience = 10;
  cfg.train.batch = 2;
  cfg.train.seed = 5;
  cfg.chunks = 2;
  cfg.cap = 120;
  return cfg;
}

void check_equal_epochs(const std::vector<EpochStat>& a,
                        const std::vector<EpochStat>& b) {
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].epoch == b[i].epoch);
    CHECK(a[i].mean_loss == b[i].mean_loss);
    CHECK(a[i].dev_accuracy == b[i].dev_accuracy);
    CHECK(a[i].dev_gen_tokens == b[i].dev_gen_tokens);
    CHECK(a[i].mean_token_batch == b[i].mean_token_batch);
    CHECK(a[i].steps == b[i].steps);
    CHECK(a[i].plan_hash == b[i].plan_hash);
  }
}

}  // namespace

TEST_CASE("token batch size sums the target span lengths") {
  TrainingExample a, b;
  a.span.tokens.assign(7, 0);
  a.span.s = 3;  // span of 4
  b.span.tokens.assign(10, 0);
  b.span.s = 9;  // span of 1
  CHECK(token_batch_size({a, b}) == 5);
  CHECK(token_batch_size({a}) == 4);
  CHECK(error_kind([&] { token_batch_size({}); }) == "contract");
}

TEST_CASE("mean step count averages rationale lengths") {
  Sample a = make_arithmetic("Sam", "coins", {"Max"}, {3, 4}, "a");  // 2 steps
  Sample b = make_arithmetic("Sam", "coins", {"Max", "Ned", "Ora"},
                             {1, 2, 3, 4}, "b");  // 4 steps
  CHECK(mean_step_count({a, b}) == doctest::Approx(3.0));
  CHECK(error_kind([&] { mean_step_count({}); }) == "contract");
}

TEST_CASE("every regime answers to its own decode protocol") {
  CHECK(eval_mode_for(Regime::baseline) == EvalMode::full);
  CHECK(eval_mode_for(Regime::weighted) == EvalMode::full);
  CHECK(eval_mode_for(Regime::cwt_ac) == EvalMode::staged);
  CHECK(eval_mode_for(Regime::cwt_sbc) == EvalMode::staged);
  CHECK(eval_mode_for(Regime::sent_wise) == EvalMode::staged);
  CHECK(eval_mode_for(Regime::step_wise) == EvalMode::staged);
  CHECK(eval_mode_for(Regime::stt) == EvalMode::skip);
  CHECK(eval_mode_for(Regime::skipall) == EvalMode::skip);
}

TEST_CASE("regime names round-trip and unknown names are rejected") {
  for (Regime r : {Regime::baseline, Regime::cwt_ac, Regime::cwt_sbc,
                   Regime::stt, Regime::skipall, Regime::sent_wise,
                   Regime::step_wise, Regime::weighted})
    CHECK(regime_from_string(to_string(r)) == r);
  CHECK(error_kind([&] { regime_from_string("cwt"); }) == "config");
}

TEST_CASE("stage examples carry shorter target spans than the baseline") {
  auto train_set = swap_corpus(20, 2);
  auto base = build_baseline(train_set);
  std::vector<ChunkPlan> plans;
  for (const auto& s : train_set) plans.push_back(average_chunk(s, 2));
  auto cwt = build_cwt(train_set, plans);

  double base_mean =
      static_cast<double>(token_batch_size(base)) / base.size();
  double cwt_mean = static_cast<double>(token_batch_size(cwt)) / cwt.size();
  CHECK(cwt_mean < base_mean);
}

TEST_CASE("zero patience stops after exactly one epoch") {
  auto train_set = swap_corpus(8, 3);
  auto dev_set = swap_corpus(4, 4);
  RunConfig cfg = quick_config(Regime::baseline, 10);
  cfg.train.patience = 0;
  RunResult res = run_baseline(cfg, train_set, dev_set);
  CHECK(res.record.epochs.size() == 1);
  CHECK(res.record.stopped_early);
  CHECK(res.record.best_epoch == 0);
  CHECK_FALSE(res.record.aborted);
  CHECK(res.record.checkpoint_hash == res.model.params_hash());
}

TEST_CASE("identical configurations train to identical checkpoints") {
  auto train_set = swap_corpus(10, 6);
  auto dev_set = swap_corpus(4, 7);
  RunConfig cfg = quick_config(Regime::baseline);
  RunResult a = run_baseline(cfg, train_set, dev_set);
  RunResult b = run_baseline(cfg, train_set, dev_set);
  check_equal_epochs(a.record.epochs, b.record.epochs);
  CHECK(a.record.best_epoch == b.record.best_epoch);
  CHECK(a.record.best_accuracy == b.record.best_accuracy);
  CHECK(a.record.checkpoint_hash == b.record.checkpoint_hash);
  CHECK(a.record.regime == Regime::baseline);
  CHECK(a.record.seed == cfg.train.seed);
}

TEST_CASE("unit core weight trains bit-identically to the plain baseline") {
  auto train_set = swap_corpus(10, 8);
  auto dev_set = swap_corpus(4, 9);
  RunConfig base = quick_config(Regime::baseline);
  RunConfig weighted = quick_config(Regime::weighted);
  weighted.core_weight = 1.0;

  RunResult a = run_baseline(base, train_set, dev_set);
  RunResult b = run_training(weighted, train_set, dev_set);
  CHECK(b.record.regime == Regime::weighted);
  check_equal_epochs(a.record.epochs, b.record.epochs);
  CHECK(a.record.checkpoint_hash == b.record.checkpoint_hash);

  // a real extra weight changes the optimization trajectory
  RunConfig heavier = quick_config(Regime::weighted);
  heavier.core_weight = 4.0;
  RunResult c = run_training(heavier, train_set, dev_set);
  CHECK(c.record.checkpoint_hash != a.record.checkpoint_hash);
}

TEST_CASE("step-granular training equals even chunking at one step per chunk") {
  // every sample has exactly five steps, so M=5 even splits are singletons
  auto train_set = swap_corpus(10, 10);
  auto dev_set = swap_corpus(4, 11);

  RunConfig even = quick_config(Regime::cwt_ac);
  even.chunks = 5;
  RunConfig steps = quick_config(Regime::step_wise);
  steps.chunks = 5;  // dev rollout depth matches per-sample stages

  RunResult a = run_cwt(even, train_set, dev_set);
  RunResult b = run_variant(steps, train_set, dev_set);
  check_equal_epochs(a.record.epochs, b.record.epochs);
  CHECK(a.record.checkpoint_hash == b.record.checkpoint_hash);
  REQUIRE(a.final_plans.size() == b.final_plans.size());
  for (size_t i = 0; i < a.final_plans.size(); ++i)
    CHECK(a.final_plans[i].bounds == b.final_plans[i].bounds);
}

TEST_CASE("plan-searched chunking reports per-epoch plan hashes") {
  auto train_set = swap_corpus(8, 12);
  auto dev_set = swap_corpus(4, 13);
  RunConfig cfg = quick_config(Regime::cwt_sbc);
  cfg.search.eta = 0.05;
  RunResult res = run_cwt(cfg, train_set, dev_set);
  CHECK(res.final_plans.size() == train_set.size());
  for (const auto& e : res.record.epochs) CHECK(e.plan_hash != 0);
  for (size_t i = 0; i < train_set.size(); ++i)
    validate_plan(train_set[i], res.final_plans[i]);

  // same config, same search trajectory
  RunResult again = run_cwt(cfg, train_set, dev_set);
  CHECK(again.record.checkpoint_hash == res.record.checkpoint_hash);
  check_equal_epochs(again.record.epochs, res.record.epochs);
}

TEST_CASE("skip-thinking runs label, train and select in one iteration") {
  auto train_set = swap_corpus(8, 14);
  auto dev_set = swap_corpus(4, 15);

  RunConfig src_cfg = quick_config(Regime::cwt_ac, 1);
  RunResult src = run_cwt(src_cfg, train_set, dev_set);

  RunConfig cfg = quick_config(Regime::stt, 1);
  cfg.stt_iters = 1;
  cfg.cap = 48;
  RunResult res = run_stt(cfg, train_set, dev_set, src.model);

  CHECK(res.record.regime == Regime::stt);
  REQUIRE(res.record.stt.size() == 1);
  const SttIterStat& st = res.record.stt[0];
  CHECK(st.iteration == 0);
  CHECK(st.improved);  // the first iteration always records a best
  CHECK(st.labels == static_cast<int>(res.labels.size()));
  CHECK(res.labels.size() == train_set.size() * 2);  // two chunks per sample
  int internal = 0;
  for (const auto& l : res.labels) {
    CHECK(l.iteration == 0);
    internal += l.internalized ? 1 : 0;
  }
  CHECK(st.internalized == internal);
  CHECK(res.final_plans.size() == train_set.size());
  CHECK(res.record.checkpoint_hash == res.model.params_hash());

  CHECK(error_kind([&] { run_training(cfg, train_set, dev_set); }) == "config");
}

TEST_CASE("a divergent learning rate aborts the run with a numeric reason") {
  auto train_set = swap_corpus(12, 16);
  auto dev_set = swap_corpus(4, 17);
  RunConfig cfg = quick_config(Regime::baseline, 3);
  cfg.train.lr = 1e8;
  cfg.train.warmup = 1;
  cfg.train.batch = 1;
  RunResult res = run_baseline(cfg, train_set, dev_set);
  CHECK(res.record.aborted);
  CHECK_FALSE(res.record.abort_reason.empty());
}

TEST_CASE("training contracts: empty sets are rejected") {
  auto samples = swap_corpus(4, 18);
  RunConfig cfg = quick_config(Regime::baseline, 1);
  CHECK(error_kind([&] { run_baseline(cfg, {}, samples); }) == "contract");
  CHECK(error_kind([&] { run_baseline(cfg, samples, {}); }) == "contract");
  RunConfig wrong = quick_config(Regime::baseline, 1);
  CHECK(error_kind([&] { run_cwt(wrong, samples, samples); }) == "contract");
  RunConfig stt_cfg = quick_config(Regime::stt, 1);
  stt_cfg.stt_iters = 0;
  Model src(tiny_arch(384), 1);
  CHECK(error_kind([&] { run_stt(stt_cfg, samples, samples, src); }) ==
        "config");
}

TEST_CASE("the batch sweep row reproduces a direct run bit for bit") {
  auto train_set = swap_corpus(8, 19);
  auto dev_set = swap_corpus(4, 20);
  RunConfig base = quick_config(Regime::baseline);

  SweepTable table = sweep_token_batch(base, {2}, train_set, dev_set);
  CHECK(table.axis == "token_batch");
  REQUIRE(table.rows.size() == 1);

  RunConfig direct = base;
  direct.train.batch = 2;
  RunResult res = run_baseline(direct, train_set, dev_set);
  CHECK(table.rows[0].setting == 2);
  CHECK(table.rows[0].accuracy == res.record.best_accuracy);
  CHECK(table.rows[0].mean_gen_tokens == res.record.best_gen_tokens);
  CHECK(table.rows[0].mean_token_batch ==
        res.record.epochs.back().mean_token_batch);

  CHECK(error_kind([&] { sweep_token_batch(base, {}, train_set, dev_set); }) ==
        "contract");
  CHECK(error_kind([&] {
          sweep_token_batch(base, {0}, train_set, dev_set);
        }) == "config");
}

TEST_CASE("the chunk sweep row reproduces a direct chunk-wise run") {
  auto train_set = swap_corpus(8, 21);
  auto dev_set = swap_corpus(4, 22);
  RunConfig base = quick_config(Regime::baseline);  // coerced to cwt_ac

  SweepTable table = sweep_chunk_count(base, {2}, train_set, dev_set);
  CHECK(table.axis == "chunk_count");
  CHECK(table.mean_steps == doctest::Approx(5.0));
  REQUIRE(table.rows.size() == 1);

  RunConfig direct = quick_config(Regime::cwt_ac);
  direct.chunks = 2;
  RunResult res = run_cwt(direct, train_set, dev_set);
  CHECK(table.rows[0].setting == 2);
  CHECK(table.rows[0].accuracy == res.record.best_accuracy);
  CHECK(table.rows[0].mean_gen_tokens == res.record.best_gen_tokens);
}

TEST_CASE("run events list every recorded metric once per epoch") {
  TempDir tmp;
  RunRecord rec;
  rec.regime = Regime::cwt_ac;
  rec.seed = 9;
  EpochStat e0;
  e0.epoch = 0;
  e0.mean_loss = 1.5;
  e0.dev_accuracy = 0.25;
  e0.dev_gen_tokens = 40.0;
  e0.mean_token_batch = 80.0;
  e0.steps = 4;
  e0.plan_hash = 0xdeadbeefull;
  EpochStat e1 = e0;
  e1.epoch = 1;
  e1.mean_loss = 1.1;
  rec.epochs = {e0, e1};
  SttIterStat st;
  st.iteration = 0;
  st.dev_accuracy = 0.5;
  st.dev_gen_tokens = 12.0;
  st.internalized = 3;
  rec.stt = {st};

  const std::string path = tmp.file("events.jsonl");
  save_run_events(path, rec);
  std::string text = read_file(path);

  std::vector<json> lines;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t nl = text.find('\n', pos);
    lines.push_back(json::parse(text.substr(pos, nl - pos)));
    pos = nl + 1;
  }
  REQUIRE(lines.size() == 2 * 5 + 3);
  CHECK(lines[0].at("epoch") == 0);
  CHECK(lines[0].at("metric") == "mean_loss");
  CHECK(lines[0].at("value") == 1.5);
  CHECK(lines[4].at("metric") == "plan_hash");
  CHECK(lines[4].at("value") == "00000000deadbeef");
  CHECK(lines[10].at("metric") == "stt_dev_accuracy");
  CHECK(lines[12].at("metric") == "stt_internalized");
  CHECK(lines[12].at("value") == 3);
}

TEST_CASE("run summaries round-trip through disk") {
  TempDir tmp;
  RunRecord rec;
  rec.regime = Regime::stt;
  rec.seed = 41;
  rec.best_epoch = 1;
  rec.best_accuracy = 0.625;
  rec.best_gen_tokens = 33.5;
  rec.stopped_early = true;
  rec.aborted = true;
  rec.abort_reason = "nan loss";
  rec.checkpoint_hash = 0x1234abcd5678ull;
  EpochStat e;
  e.epoch = 0;
  e.mean_loss = 2.25;
  e.dev_accuracy = 0.5;
  e.dev_gen_tokens = 20.0;
  e.mean_token_batch = 64.0;
  e.steps = 7;
  e.plan_hash = 0xfeedull;
  rec.epochs = {e};
  SttIterStat st;
  st.iteration = 2;
  st.dev_accuracy = 0.625;
  st.dev_gen_tokens = 33.5;
  st.epochs_run = 3;
  st.improved = true;
  st.internalized = 5;
  st.labels = 16;
  rec.stt = {st};

  json prov;
  prov["artifact"] = "run";
  const std::string path = tmp.file("summary.json");
  save_run_summary(path, rec, prov);

  json got_prov;
  RunRecord got = load_run_summary(path, &got_prov);
  CHECK(got_prov.at("artifact") == "run");
  CHECK(got.regime == rec.regime);
  CHECK(got.seed == rec.seed);
  CHECK(got.best_epoch == rec.best_epoch);
  CHECK(got.best_accuracy == rec.best_accuracy);
  CHECK(got.best_gen_tokens == rec.best_gen_tokens);
  CHECK(got.stopped_early == rec.stopped_early);
  CHECK(got.aborted == rec.aborted);
  CHECK(got.abort_reason == rec.abort_reason);
  CHECK(got.checkpoint_hash == rec.checkpoint_hash);
  REQUIRE(got.epochs.size() == 1);
  CHECK(got.epochs[0].mean_loss == e.mean_loss);
  CHECK(got.epochs[0].plan_hash == e.plan_hash);
  CHECK(got.epochs[0].steps == e.steps);
  REQUIRE(got.stt.size() == 1);
  CHECK(got.stt[0].iteration == st.iteration);
  CHECK(got.stt[0].labels == st.labels);
  CHECK(got.stt[0].improved == st.improved);

  CHECK(error_kind([&] { load_run_summary(tmp.file("gone.json")); }) == "io");
  write_file(tmp.file("bad.json"), "[1,2");
  CHECK(error_kind([&] { load_run_summary(tmp.file("bad.json")); }) == "data");
}
