#include "skipthink/train.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>

namespace skipthink {

std::string to_string(Regime r) {
  switch (r) {
    case Regime::baseline: return "baseline";
    case Regime::cwt_ac: return "cwt_ac";
    case Regime::cwt_sbc: return "cwt_sbc";
    case Regime::stt: return "stt";
    case Regime::skipall: return "skipall";
    case Regime::sent_wise: return "sent_wise";
    case Regime::step_wise: return "step_wise";
    case Regime::weighted: return "weighted";
  }
  fail("contract", "bad regime");
}

Regime regime_from_string(const std::string& s) {
  for (Regime r : {Regime::baseline, Regime::cwt_ac, Regime::cwt_sbc,
                   Regime::stt, Regime::skipall, Regime::sent_wise,
                   Regime::step_wise, Regime::weighted})
    if (to_string(r) == s) return r;
  fail("config", "unknown regime '" + s + "'");
}

long long token_batch_size(const std::vector<TrainingExample>& batch) {
  if (batch.empty()) fail("contract", "empty batch");
  long long n = 0;
  for (const auto& ex : batch)
    n += static_cast<long long>(ex.span.tokens.size()) - ex.span.s;
  return n;
}

double mean_step_count(const std::vector<Sample>& samples) {
  if (samples.empty()) fail("contract", "empty sample set");
  double sum = 0;
  for (const auto& s : samples) sum += static_cast<double>(s.steps.size());
  return sum / static_cast<double>(samples.size());
}

EvalMode eval_mode_for(Regime r) {
  switch (r) {
    case Regime::baseline:
    case Regime::weighted: return EvalMode::full;
    case Regime::cwt_ac:
    case Regime::cwt_sbc:
    case Regime::sent_wise:
    case Regime::step_wise: return EvalMode::staged;
    case Regime::stt:
    case Regime::skipall: return EvalMode::skip;
  }
  fail("contract", "bad regime");
}

namespace {

NetConfig arch_for(const RunConfig& cfg) {
  NetConfig a = cfg.arch;
  a.vocab = Vocabulary::kSize;
  return a;
}

EvalOptions dev_options(const RunConfig& cfg) {
  EvalOptions opt;
  opt.mode = eval_mode_for(cfg.regime);
  if ((cfg.regime == Regime::sent_wise || cfg.regime == Regime::step_wise) &&
      !cfg.stage_tags)
    opt.mode = EvalMode::full;  // untagged stages leave one flat rollout
  opt.chunks = cfg.dev_chunks > 0 ? cfg.dev_chunks : cfg.chunks;
  opt.per_sample_m =
      cfg.regime == Regime::sent_wise || cfg.regime == Regime::step_wise;
  opt.cap = cfg.cap;
  return opt;
}

std::vector<ChunkPlan> average_plans(const std::vector<Sample>& samples,
                                     int M) {
  std::vector<ChunkPlan> plans;
  plans.reserve(samples.size());
  for (const auto& s : samples) plans.push_back(average_chunk(s, M));
  return plans;
}

void search_plans(std::vector<ChunkPlan>& plans,
                  const std::vector<Sample>& samples, Model& model,
                  const SearchConfig& base, int round) {
  SearchConfig scfg = base;
  scfg.round = round;
  ModelScorer scorer(model);
  for (size_t i = 0; i < samples.size(); ++i)
    plans[i] = search_chunk(samples[i], plans[i], scorer, scfg);
}

// examples for one epoch; fills the plan hash when plans drive the build
using EpochSource =
    std::function<const std::vector<TrainingExample>&(int, Model&, uint64_t&)>;

RunRecord epoch_loop(Model& model, const RunConfig& cfg,
                     const EpochSource& source,
                     const std::vector<Sample>& dev_set,
                     const EvalOptions& devopt,
                     Net<float>::Buf& best_params) {
  RunRecord rec;
  rec.regime = cfg.regime;
  rec.seed = cfg.train.seed;
  if (dev_set.empty()) fail("contract", "empty dev set");

  double best = -1;
  int since = 0;
  int64_t gstep = 0;
  for (int e = 0; e < cfg.train.epochs; ++e) {
    uint64_t ph = 0;
    const std::vector<TrainingExample>& exs = source(e, model, ph);
    if (exs.empty()) fail("contract", "empty training set");
    const int n = static_cast<int>(exs.size());
    const int B = std::max(1, cfg.train.batch);
    const int steps_per_epoch = (n + B - 1) / B;
    const int64_t cycle = cfg.train.restart_period > 0
                              ? cfg.train.restart_period
                              : steps_per_epoch;

    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    Rng rng(fnv1a64_u64(static_cast<uint64_t>(e),
                        fnv1a64_u64(cfg.train.seed, fnv1a64("shuffle"))));
    rng.shuffle(order);

    double loss_sum = 0;
    long long tok_sum = 0;
    int steps = 0, seen = 0;
    bool diverged = false;
    for (int at = 0; at < n; at += B) {
      std::vector<const SpanExample*> batch;
      for (int j = at; j < std::min(n, at + B); ++j)
        batch.push_back(&exs[order[j]].span);
      try {
        auto out = model.train_step(batch, cfg.train, gstep + steps, cycle);
        loss_sum += out.loss * static_cast<double>(batch.size());
        tok_sum += out.token_batch;
      } catch (const Error& err) {
        if (std::string(err.kind()) != "numeric") throw;
        rec.aborted = true;
        rec.abort_reason = err.what();
        diverged = true;
        break;
      }
      ++steps;
      seen += static_cast<int>(batch.size());
    }
    if (diverged) break;
    gstep += steps;

    EpochStat st;
    st.epoch = e;
    st.mean_loss = loss_sum / seen;
    st.mean_token_batch = static_cast<double>(tok_sum) / steps;
    st.steps = steps;
    st.plan_hash = ph;
    EvalReport dev = evaluate(model, dev_set, devopt);
    st.dev_accuracy = dev.accuracy;
    st.dev_gen_tokens = dev.mean_gen_tokens;
    rec.epochs.push_back(st);

    if (dev.accuracy > best) {
      best = dev.accuracy;
      rec.best_epoch = e;
      rec.best_accuracy = dev.accuracy;
      rec.best_gen_tokens = dev.mean_gen_tokens;
      best_params = model.net().params();
      since = 0;
    } else {
      ++since;
    }
    if (since >= cfg.train.patience) {
      rec.stopped_early = true;
      break;
    }
  }
  return rec;
}

void restore_best(Model& model, const Net<float>::Buf& best_params,
                  RunRecord& rec) {
  if (!best_params.empty()) model.net().params() = best_params;
  rec.checkpoint_hash = model.params_hash();
}

}  // namespace

RunResult run_baseline(const RunConfig& cfg,
                       const std::vector<Sample>& train_set,
                       const std::vector<Sample>& dev_set) {
  if (train_set.empty()) fail("contract", "empty training set");
  Model model(arch_for(cfg), cfg.train.seed);
  auto exs = cfg.regime == Regime::weighted
                 ? build_weighted(train_set, cfg.core_weight)
                 : build_baseline(train_set);
  check_lengths(exs, model.config().context);
  Net<float>::Buf best_params;
  auto source = [&exs](int, Model&, uint64_t&) -> const auto& { return exs; };
  RunRecord rec = epoch_loop(model, cfg, source, dev_set, dev_options(cfg),
                             best_params);
  restore_best(model, best_params, rec);
  return {std::move(rec), std::move(model), {}, {}};
}

RunResult run_cwt(const RunConfig& cfg, const std::vector<Sample>& train_set,
                  const std::vector<Sample>& dev_set) {
  if (cfg.regime != Regime::cwt_ac && cfg.regime != Regime::cwt_sbc)
    fail("contract", "run_cwt needs a chunk-wise regime");
  if (train_set.empty()) fail("contract", "empty training set");
  Model model(arch_for(cfg), cfg.train.seed);
  auto plans = average_plans(train_set, cfg.chunks);
  std::vector<TrainingExample> exs;
  if (cfg.regime == Regime::cwt_ac) {
    exs = build_cwt(train_set, plans);
    check_lengths(exs, model.config().context);
  }
  Net<float>::Buf best_params;
  auto source = [&](int e, Model& m, uint64_t& ph) -> const auto& {
    if (cfg.regime == Regime::cwt_sbc) {
      search_plans(plans, train_set, m, cfg.search, e);
      exs = build_cwt(train_set, plans);
      if (e == 0) check_lengths(exs, m.config().context);
    }
    ph = plan_hash(plans);
    return exs;
  };
  RunRecord rec = epoch_loop(model, cfg, source, dev_set, dev_options(cfg),
                             best_params);
  restore_best(model, best_params, rec);
  return {std::move(rec), std::move(model), std::move(plans), {}};
}

RunResult run_variant(const RunConfig& cfg, const std::vector<Sample>& train_set,
                      const std::vector<Sample>& dev_set) {
  if (cfg.regime == Regime::weighted || cfg.regime == Regime::skipall) {
    if (cfg.regime == Regime::skipall) {
      if (train_set.empty()) fail("contract", "empty training set");
      Model model(arch_for(cfg), cfg.train.seed);
      auto exs = build_skipall(train_set);
      check_lengths(exs, model.config().context);
      Net<float>::Buf best_params;
      auto source = [&exs](int, Model&, uint64_t&) -> const auto& {
        return exs;
      };
      RunRecord rec = epoch_loop(model, cfg, source, dev_set,
                                 dev_options(cfg), best_params);
      restore_best(model, best_params, rec);
      return {std::move(rec), std::move(model), {}, {}};
    }
    return run_baseline(cfg, train_set, dev_set);
  }
  if (cfg.regime != Regime::sent_wise && cfg.regime != Regime::step_wise)
    fail("contract", "run_variant needs an ablation regime");
  if (train_set.empty()) fail("contract", "empty training set");
  Model model(arch_for(cfg), cfg.train.seed);
  Granular g = cfg.regime == Regime::sent_wise ? Granular::sentence
                                               : Granular::step;
  std::vector<ChunkPlan> plans;
  plans.reserve(train_set.size());
  for (const auto& s : train_set) plans.push_back(granular_chunk(s, g));
  auto exs = build_cwt(train_set, plans, cfg.stage_tags);
  check_lengths(exs, model.config().context);
  Net<float>::Buf best_params;
  auto source = [&](int, Model&, uint64_t& ph) -> const auto& {
    ph = plan_hash(plans);
    return exs;
  };
  RunRecord rec = epoch_loop(model, cfg, source, dev_set, dev_options(cfg),
                             best_params);
  restore_best(model, best_params, rec);
  return {std::move(rec), std::move(model), std::move(plans), {}};
}

RunResult run_stt(const RunConfig& cfg, const std::vector<Sample>& train_set,
                  const std::vector<Sample>& dev_set, Model& source) {
  if (cfg.regime != Regime::stt) fail("contract", "run_stt needs regime stt");
  if (train_set.empty()) fail("contract", "empty training set");
  if (cfg.stt_iters < 1) fail("config", "stt needs at least one iteration");

  RunRecord rec;
  rec.regime = Regime::stt;
  rec.seed = cfg.train.seed;

  std::optional<Model> best_model;
  std::vector<ChunkPlan> best_plans;
  std::vector<SkipLabel> best_labels;
  RunRecord best_rec;
  uint64_t pristine = 0;
  Model* label_src = &source;

  for (int it = 0; it < cfg.stt_iters; ++it) {
    // label plans and labels come from the current best reasoning model
    auto plans = average_plans(train_set, cfg.chunks);
    SearchConfig lcfg = cfg.search;
    search_plans(plans, train_set, *label_src, lcfg, 1000 + it);
    auto labels = generate_skip_labels(*label_src, train_set, plans,
                                       cfg.skip_accumulate, cfg.cap, it);
    std::vector<TrainingExample> skip_exs;
    for (auto& ex : build_stt(train_set, plans, labels))
      if (ex.kind == ExampleKind::skip) skip_exs.push_back(std::move(ex));

    // the student restarts from the pristine initialization every iteration
    Model student(arch_for(cfg), cfg.train.seed);
    if (it == 0)
      pristine = student.params_hash();
    else if (student.params_hash() != pristine)
      fail("contract", "student re-initialization drifted");

    auto iplans = plans;
    std::vector<TrainingExample> exs;
    auto isource = [&](int e, Model& m, uint64_t& ph) -> const auto& {
      search_plans(iplans, train_set, m, cfg.search, e);
      exs = build_cwt(train_set, iplans);
      exs.insert(exs.end(), skip_exs.begin(), skip_exs.end());
      if (e == 0 && it == 0) check_lengths(exs, m.config().context);
      ph = plan_hash(iplans);
      return exs;
    };
    EvalOptions devopt = dev_options(cfg);
    Net<float>::Buf best_params;
    RunRecord irec = epoch_loop(student, cfg, isource, dev_set, devopt,
                                best_params);
    restore_best(student, best_params, irec);

    SttIterStat st;
    st.iteration = it;
    st.dev_accuracy = irec.best_accuracy;
    st.dev_gen_tokens = irec.best_gen_tokens;
    st.epochs_run = static_cast<int>(irec.epochs.size());
    st.labels = static_cast<int>(labels.size());
    for (const auto& l : labels) st.internalized += l.internalized ? 1 : 0;
    bool improved =
        !best_model || irec.best_accuracy > best_rec.best_accuracy ||
        (irec.best_accuracy == best_rec.best_accuracy &&
         irec.best_gen_tokens < best_rec.best_gen_tokens);
    st.improved = improved;
    rec.stt.push_back(st);

    if (irec.aborted) {
      rec.aborted = true;
      rec.abort_reason = irec.abort_reason;
      if (!best_model) {
        best_model.emplace(std::move(student));
        best_rec = irec;
        best_plans = std::move(iplans);
        best_labels = std::move(labels);
      }
      break;
    }
    if (improved) {
      best_model.emplace(std::move(student));
      best_rec = irec;
      best_plans = std::move(iplans);
      best_labels = std::move(labels);
      label_src = &*best_model;
    } else {
      break;  // dev accuracy no longer increases
    }
  }

  rec.epochs = best_rec.epochs;  // the returned checkpoint's history
  rec.best_epoch = best_rec.best_epoch;
  rec.best_accuracy = best_rec.best_accuracy;
  rec.best_gen_tokens = best_rec.best_gen_tokens;
  rec.stopped_early = best_rec.stopped_early;
  rec.checkpoint_hash = best_rec.checkpoint_hash;
  return {std::move(rec), std::move(*best_model), std::move(best_plans),
          std::move(best_labels)};
}

RunResult run_training(const RunConfig& cfg, const std::vector<Sample>& train_set,
                       const std::vector<Sample>& dev_set, Model* source) {
  switch (cfg.regime) {
    case Regime::baseline: return run_baseline(cfg, train_set, dev_set);
    case Regime::cwt_ac:
    case Regime::cwt_sbc: return run_cwt(cfg, train_set, dev_set);
    case Regime::stt:
      if (!source) fail("config", "stt needs a trained source checkpoint");
      return run_stt(cfg, train_set, dev_set, *source);
    case Regime::skipall:
    case Regime::sent_wise:
    case Regime::step_wise:
    case Regime::weighted: return run_variant(cfg, train_set, dev_set);
  }
  fail("contract", "bad regime");
}

SweepTable sweep_chunk_count(const RunConfig& base, const std::vector<int>& grid,
                             const std::vector<Sample>& train_set,
                             const std::vector<Sample>& dev_set) {
  if (grid.empty()) fail("contract", "empty sweep grid");
  SweepTable table;
  table.axis = "chunk_count";
  table.mean_steps = mean_step_count(train_set);
  for (int M : grid) {
    RunConfig cfg = base;
    if (cfg.regime != Regime::cwt_ac && cfg.regime != Regime::cwt_sbc)
      cfg.regime = Regime::cwt_ac;
    cfg.chunks = M;
    cfg.dev_chunks = M;
    RunResult res = run_cwt(cfg, train_set, dev_set);
    SweepRow row;
    row.setting = M;
    row.accuracy = res.record.best_accuracy;
    row.mean_gen_tokens = res.record.best_gen_tokens;
    if (!res.record.epochs.empty())
      row.mean_token_batch = res.record.epochs.back().mean_token_batch;
    table.rows.push_back(row);
  }
  return table;
}

SweepTable sweep_token_batch(const RunConfig& base, const std::vector<int>& grid,
                             const std::vector<Sample>& train_set,
                             const std::vector<Sample>& dev_set) {
  if (grid.empty()) fail("contract", "empty sweep grid");
  SweepTable table;
  table.axis = "token_batch";
  for (int B : grid) {
    if (B < 1) fail("config", "batch size must be positive");
    RunConfig cfg = base;
    cfg.regime = Regime::baseline;
    cfg.train.batch = B;
    RunResult res = run_baseline(cfg, train_set, dev_set);
    SweepRow row;
    row.setting = B;
    row.accuracy = res.record.best_accuracy;
    row.mean_gen_tokens = res.record.best_gen_tokens;
    if (!res.record.epochs.empty())
      row.mean_token_batch = res.record.epochs.back().mean_token_batch;
    table.rows.push_back(row);
  }
  return table;
}

namespace {

json epoch_to_json(const EpochStat& e) {
  json j;
  j["epoch"] = e.epoch;
  j["mean_loss"] = e.mean_loss;
  j["dev_accuracy"] = e.dev_accuracy;
  j["dev_gen_tokens"] = e.dev_gen_tokens;
  j["mean_token_batch"] = e.mean_token_batch;
  j["steps"] = e.steps;
  j["plan_hash"] = to_hex(e.plan_hash);
  return j;
}

EpochStat epoch_from_json(const json& j) {
  EpochStat e;
  e.epoch = j.at("epoch").get<int>();
  e.mean_loss = j.at("mean_loss").get<double>();
  e.dev_accuracy = j.at("dev_accuracy").get<double>();
  e.dev_gen_tokens = j.at("dev_gen_tokens").get<double>();
  e.mean_token_batch = j.at("mean_token_batch").get<double>();
  e.steps = j.at("steps").get<int>();
  e.plan_hash = std::stoull(j.at("plan_hash").get<std::string>(), nullptr, 16);
  return e;
}

json stt_to_json(const SttIterStat& s) {
  json j;
  j["iteration"] = s.iteration;
  j["dev_accuracy"] = s.dev_accuracy;
  j["dev_gen_tokens"] = s.dev_gen_tokens;
  j["epochs_run"] = s.epochs_run;
  j["improved"] = s.improved;
  j["internalized"] = s.internalized;
  j["labels"] = s.labels;
  return j;
}

SttIterStat stt_from_json(const json& j) {
  SttIterStat s;
  s.iteration = j.at("iteration").get<int>();
  s.dev_accuracy = j.at("dev_accuracy").get<double>();
  s.dev_gen_tokens = j.at("dev_gen_tokens").get<double>();
  s.epochs_run = j.at("epochs_run").get<int>();
  s.improved = j.at("improved").get<bool>();
  s.internalized = j.at("internalized").get<int>();
  s.labels = j.at("labels").get<int>();
  return s;
}

}  // namespace

void save_run_events(const std::string& path, const RunRecord& rec) {
  std::string out;
  auto emit = [&out](int epoch, const char* metric, const json& value) {
    json j;
    j["epoch"] = epoch;
    j["metric"] = metric;
    j["value"] = value;
    out += j.dump() + "\n";
  };
  for (const auto& e : rec.epochs) {
    emit(e.epoch, "mean_loss", e.mean_loss);
    emit(e.epoch, "dev_accuracy", e.dev_accuracy);
    emit(e.epoch, "dev_gen_tokens", e.dev_gen_tokens);
    emit(e.epoch, "mean_token_batch", e.mean_token_batch);
    emit(e.epoch, "plan_hash", to_hex(e.plan_hash));
  }
  for (const auto& s : rec.stt) {
    emit(s.iteration, "stt_dev_accuracy", s.dev_accuracy);
    emit(s.iteration, "stt_dev_gen_tokens", s.dev_gen_tokens);
    emit(s.iteration, "stt_internalized", s.internalized);
  }
  write_file(path, out);
}

void save_run_summary(const std::string& path, const RunRecord& rec,
                      const json& provenance) {
  json j;
  if (!provenance.is_null()) j["provenance"] = provenance;
  j["regime"] = to_string(rec.regime);
  j["seed"] = rec.seed;
  j["best_epoch"] = rec.best_epoch;
  j["best_accuracy"] = rec.best_accuracy;
  j["best_gen_tokens"] = rec.best_gen_tokens;
  j["stopped_early"] = rec.stopped_early;
  j["aborted"] = rec.aborted;
  j["abort_reason"] = rec.abort_reason;
  j["checkpoint_hash"] = to_hex(rec.checkpoint_hash);
  json eps = json::array();
  for (const auto& e : rec.epochs) eps.push_back(epoch_to_json(e));
  j["epochs"] = eps;
  json st = json::array();
  for (const auto& s : rec.stt) st.push_back(stt_to_json(s));
  j["stt"] = st;
  write_file(path, j.dump(2) + "\n");
}

RunRecord load_run_summary(const std::string& path, json* provenance) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    fail("data", path + ": bad json: " + e.what());
  }
  RunRecord rec;
  try {
    if (provenance)
      *provenance = j.contains("provenance") ? j.at("provenance") : json(nullptr);
    rec.regime = regime_from_string(j.at("regime").get<std::string>());
    rec.seed = j.at("seed").get<uint64_t>();
    rec.best_epoch = j.at("best_epoch").get<int>();
    rec.best_accuracy = j.at("best_accuracy").get<double>();
    rec.best_gen_tokens = j.at("best_gen_tokens").get<double>();
    rec.stopped_early = j.at("stopped_early").get<bool>();
    rec.aborted = j.at("aborted").get<bool>();
    rec.abort_reason = j.at("abort_reason").get<std::string>();
    rec.checkpoint_hash =
        std::stoull(j.at("checkpoint_hash").get<std::string>(), nullptr, 16);
    for (const auto& e : j.at("epochs")) rec.epochs.push_back(epoch_from_json(e));
    for (const auto& s : j.at("stt")) rec.stt.push_back(stt_from_json(s));
  } catch (const nlohmann::json::exception& e) {
    fail("data", path + ": " + e.what());
  }
  return rec;
}

}  // namespace skipthink
