// Command-line front end: gen -> chunk -> build -> train -> eval -> report,
// every artifact carrying a provenance header with its input hashes.
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "skipthink/artifact_io.hpp"
#include "skipthink/chunking.hpp"
#include "skipthink/corpus.hpp"
#include "skipthink/databuild.hpp"
#include "skipthink/eval.hpp"
#include "skipthink/model.hpp"
#include "skipthink/teacher.hpp"
#include "skipthink/train.hpp"

namespace fs = std::filesystem;
using namespace skipthink;

namespace {

int exit_code_for(const std::string& kind) {
  if (kind == "config") return 2;
  if (kind == "data") return 3;
  if (kind == "io") return 4;
  if (kind == "exists") return 5;
  if (kind == "contract") return 6;
  if (kind == "numeric") return 7;
  if (kind == "network") return 8;
  if (kind == "auth") return 9;
  if (kind == "protocol") return 10;
  if (kind == "empty") return 11;
  return 1;
}

std::string config_tag(const json& cfg) {
  return to_hex(fnv1a64(cfg.dump())).substr(4);  // 12 hex chars
}

double parse_eta(const std::string& s) {
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail("config", "bad eta '" + s + "' (number or inf)");
  }
}

std::vector<int> parse_grid(const std::string& s) {
  std::vector<int> out;
  std::string cur;
  for (char c : s + ",") {
    if (c == ',') {
      if (cur.empty()) continue;
      try {
        out.push_back(std::stoi(cur));
      } catch (const std::exception&) {
        fail("config", "bad grid entry '" + cur + "'");
      }
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (out.empty()) fail("config", "empty grid");
  return out;
}

std::vector<ChunkPlan> plans_for_samples(const std::string& path,
                                         const std::vector<Sample>& samples) {
  auto recs = load_plans(path);
  std::map<std::string, const ChunkPlan*> by_id;
  for (const auto& r : recs) by_id[r.plan.sample_id] = &r.plan;
  std::vector<ChunkPlan> plans;
  plans.reserve(samples.size());
  for (const auto& s : samples) {
    auto it = by_id.find(s.id);
    if (it == by_id.end()) fail("data", path + ": no plan for " + s.id);
    plans.push_back(*it->second);
  }
  return plans;
}

// --- gen ---------------------------------------------------------------

struct GenArgs {
  std::string task = "object_swap";
  TaskConfig tc;
  std::string out;
  bool force = false;
};

int cmd_gen(const GenArgs& a) {
  TaskConfig tc = a.tc;
  tc.kind = task_kind_from_string(a.task);
  if (tc.kind == TaskKind::imported)
    fail("config", "imported is not a generator task");
  json cfg;
  cfg["cmd"] = "gen";
  cfg["task"] = a.task;
  cfg["count"] = tc.count;
  cfg["seed"] = tc.seed;
  cfg["entities"] = tc.entities;
  cfg["swaps"] = tc.swaps;
  cfg["words"] = tc.words;
  cfg["terms"] = tc.terms;
  cfg["max_operand"] = tc.max_operand;

  auto samples = generate(tc);
  json header = provenance_header("dataset", {}, tc.seed);
  header["task"] = a.task;
  header["config"] = config_tag(cfg);
  require_fresh(a.out, a.force);
  save_dataset(a.out, samples, header);
  std::printf("wrote %s: %zu samples (%s)\n", a.out.c_str(), samples.size(),
              a.task.c_str());
  return 0;
}

// --- chunk -------------------------------------------------------------

struct ChunkArgs {
  std::string data, mode = "ac", checkpoint, out, eta = "0.1";
  int chunks = 2;
  bool anneal = false;
  double temperature = 0.1;
  uint64_t seed = 0;
  int round = 0;
  bool force = false;
};

int cmd_chunk(const ChunkArgs& a) {
  auto ds = load_dataset(a.data);
  std::vector<ChunkPlan> plans;
  plans.reserve(ds.samples.size());
  std::vector<std::pair<std::string, std::string>> inputs = {{"data", a.data}};

  if (a.mode == "ac" || a.mode == "sbc") {
    for (const auto& s : ds.samples) plans.push_back(average_chunk(s, a.chunks));
    if (a.mode == "sbc") {
      if (a.checkpoint.empty())
        fail("config", "mode sbc needs --checkpoint");
      inputs.emplace_back("checkpoint", a.checkpoint);
      Model model = Model::load_checkpoint(a.checkpoint);
      SearchConfig scfg;
      scfg.eta = parse_eta(a.eta);
      scfg.anneal = a.anneal;
      scfg.temperature = a.temperature;
      scfg.seed = a.seed;
      scfg.round = a.round;
      ModelScorer scorer(model);
      for (size_t i = 0; i < ds.samples.size(); ++i)
        plans[i] = search_chunk(ds.samples[i], plans[i], scorer, scfg);
    }
  } else if (a.mode == "sentence" || a.mode == "step") {
    Granular g = a.mode == "sentence" ? Granular::sentence : Granular::step;
    for (const auto& s : ds.samples) plans.push_back(granular_chunk(s, g));
  } else {
    fail("config", "unknown chunk mode '" + a.mode + "'");
  }

  json cfg;
  cfg["cmd"] = "chunk";
  cfg["mode"] = a.mode;
  cfg["chunks"] = a.chunks;
  cfg["eta"] = a.eta;
  cfg["anneal"] = a.anneal;
  cfg["temperature"] = a.temperature;
  cfg["seed"] = a.seed;
  cfg["round"] = a.round;
  json header = provenance_header("plans", inputs, a.seed);
  header["mode"] = a.mode;
  header["config"] = config_tag(cfg);

  std::vector<PlanRecord> recs;
  recs.reserve(plans.size());
  for (auto& p : plans) recs.push_back({a.round, std::move(p)});
  require_fresh(a.out, a.force);
  save_plans(a.out, recs, header);
  std::printf("wrote %s: %zu plans (mode %s)\n", a.out.c_str(), recs.size(),
              a.mode.c_str());
  return 0;
}

// --- build -------------------------------------------------------------

struct BuildArgs {
  std::string data, kind = "baseline", plans, labels, out;
  double core_weight = 2.0;
  bool no_tags = false;
  bool force = false;
};

int cmd_build(const BuildArgs& a) {
  auto ds = load_dataset(a.data);
  std::vector<std::pair<std::string, std::string>> inputs = {{"data", a.data}};
  std::vector<TrainingExample> exs;
  if (a.kind == "baseline") {
    exs = build_baseline(ds.samples);
  } else if (a.kind == "weighted") {
    exs = build_weighted(ds.samples, a.core_weight);
  } else if (a.kind == "skipall") {
    exs = build_skipall(ds.samples);
  } else if (a.kind == "cwt") {
    if (a.plans.empty()) fail("config", "kind cwt needs --plans");
    inputs.emplace_back("plans", a.plans);
    exs = build_cwt(ds.samples, plans_for_samples(a.plans, ds.samples),
                    !a.no_tags);
  } else if (a.kind == "stt") {
    if (a.plans.empty() || a.labels.empty())
      fail("config", "kind stt needs --plans and --labels");
    inputs.emplace_back("plans", a.plans);
    inputs.emplace_back("labels", a.labels);
    exs = build_stt(ds.samples, plans_for_samples(a.plans, ds.samples),
                    load_labels(a.labels));
  } else {
    fail("config", "unknown build kind '" + a.kind + "'");
  }

  json cfg;
  cfg["cmd"] = "build";
  cfg["kind"] = a.kind;
  cfg["core_weight"] = a.core_weight;
  cfg["no_tags"] = a.no_tags;
  json header = provenance_header("examples", inputs, 0);
  header["kind"] = a.kind;
  header["config"] = config_tag(cfg);
  require_fresh(a.out, a.force);
  save_examples(a.out, exs, header);
  std::printf("wrote %s: %zu examples (kind %s)\n", a.out.c_str(), exs.size(),
              a.kind.c_str());
  return 0;
}

// --- train -------------------------------------------------------------

struct TrainArgs {
  std::string data, dev, regime = "baseline", source, out = "runs";
  std::string eta = "0.1", sweep = "none", grid = "1,2,4,8";
  double dev_frac = 0.1;
  RunConfig rc;
  bool no_tags = false;
  bool skip_independent = false;
  bool force = false;
};

json train_config_json(const TrainArgs& a) {
  json cfg;
  cfg["cmd"] = "train";
  cfg["regime"] = a.regime;
  cfg["data"] = a.data;
  cfg["dev"] = a.dev;
  cfg["dev_frac"] = a.dev_frac;
  cfg["chunks"] = a.rc.chunks;
  cfg["dev_chunks"] = a.rc.dev_chunks;
  cfg["eta"] = a.eta;
  cfg["anneal"] = a.rc.search.anneal;
  cfg["temperature"] = a.rc.search.temperature;
  cfg["stage_tags"] = !a.no_tags;
  cfg["core_weight"] = a.rc.core_weight;
  cfg["skip_accumulate"] = !a.skip_independent;
  cfg["cap"] = a.rc.cap;
  cfg["stt_iters"] = a.rc.stt_iters;
  cfg["source"] = a.source;
  cfg["sweep"] = a.sweep;
  cfg["grid"] = a.grid;
  json t;
  t["lr"] = a.rc.train.lr;
  t["batch"] = a.rc.train.batch;
  t["epochs"] = a.rc.train.epochs;
  t["warmup"] = a.rc.train.warmup;
  t["beta1"] = a.rc.train.beta1;
  t["beta2"] = a.rc.train.beta2;
  t["weight_decay"] = a.rc.train.weight_decay;
  t["restart_period"] = a.rc.train.restart_period;
  t["min_lr"] = a.rc.train.min_lr;
  t["patience"] = a.rc.train.patience;
  t["seed"] = a.rc.train.seed;
  cfg["train"] = t;
  json n;
  n["n_layer"] = a.rc.arch.n_layer;
  n["d_model"] = a.rc.arch.d_model;
  n["n_head"] = a.rc.arch.n_head;
  n["d_ff"] = a.rc.arch.d_ff;
  n["context"] = a.rc.arch.context;
  n["init_std"] = a.rc.arch.init_std;
  cfg["arch"] = n;
  return cfg;
}

int cmd_train(TrainArgs a) {
  a.rc.regime = regime_from_string(a.regime);
  a.rc.search.eta = parse_eta(a.eta);
  a.rc.search.seed = a.rc.train.seed;
  a.rc.stage_tags = !a.no_tags;
  a.rc.skip_accumulate = !a.skip_independent;

  auto ds = load_dataset(a.data);
  std::vector<Sample> train_set, dev_set;
  std::vector<std::pair<std::string, std::string>> inputs = {{"data", a.data}};
  if (!a.dev.empty()) {
    train_set = std::move(ds.samples);
    dev_set = load_dataset(a.dev).samples;
    inputs.emplace_back("dev", a.dev);
  } else {
    int n_dev = static_cast<int>(ds.samples.size() * a.dev_frac + 0.5);
    std::tie(train_set, dev_set) =
        hash_split(ds.samples, n_dev, a.rc.train.seed);
  }
  if (!a.source.empty()) inputs.emplace_back("source", a.source);

  json cfg = train_config_json(a);
  fs::path dir = fs::path(a.out) / config_tag(cfg);
  fs::create_directories(dir);
  std::string summary_path = (dir / "summary.json").string();
  std::string sweep_path = (dir / "sweep.json").string();
  require_fresh(a.sweep == "none" ? summary_path : sweep_path, a.force);
  json prov = provenance_header("run", inputs, a.rc.train.seed);
  prov["config"] = config_tag(cfg);

  {
    json cj;
    cj["provenance"] = prov;
    cj["resolved"] = cfg;
    write_file((dir / "config.json").string(), cj.dump(2) + "\n");
  }

  if (a.sweep != "none") {
    auto grid = parse_grid(a.grid);
    SweepTable table;
    if (a.sweep == "chunk_count")
      table = sweep_chunk_count(a.rc, grid, train_set, dev_set);
    else if (a.sweep == "token_batch")
      table = sweep_token_batch(a.rc, grid, train_set, dev_set);
    else
      fail("config", "unknown sweep '" + a.sweep + "'");
    json j;
    j["provenance"] = prov;
    j["axis"] = table.axis;
    j["mean_steps"] = table.mean_steps;
    json rows = json::array();
    for (const auto& r : table.rows) {
      json e;
      e["setting"] = r.setting;
      e["accuracy"] = r.accuracy;
      e["mean_gen_tokens"] = r.mean_gen_tokens;
      e["mean_token_batch"] = r.mean_token_batch;
      rows.push_back(e);
    }
    j["rows"] = rows;
    write_file(sweep_path, j.dump(2) + "\n");
    std::printf("sweep %s over %zu settings -> %s\n", table.axis.c_str(),
                table.rows.size(), sweep_path.c_str());
    for (const auto& r : table.rows)
      std::printf("  %s=%d  accuracy=%.4f  gen_tokens=%.1f  N=%.1f\n",
                  table.axis == "chunk_count" ? "M" : "batch", r.setting,
                  r.accuracy, r.mean_gen_tokens, r.mean_token_batch);
    return 0;
  }

  std::optional<Model> source_model;
  if (!a.source.empty()) source_model.emplace(Model::load_checkpoint(a.source));
  RunResult res = run_training(a.rc, train_set, dev_set,
                               source_model ? &*source_model : nullptr);

  std::string ckpt_path = (dir / "checkpoint.bin").string();
  res.model.save_checkpoint(ckpt_path);
  json sprov = prov;
  sprov["checkpoint"] = {{"path", ckpt_path},
                         {"fnv64", to_hex(hash_file(ckpt_path))}};
  save_run_summary(summary_path, res.record, sprov);
  save_run_events((dir / "events.jsonl").string(), res.record);
  if (!res.final_plans.empty()) {
    std::vector<PlanRecord> recs;
    int last_epoch =
        res.record.epochs.empty() ? 0 : res.record.epochs.back().epoch;
    for (auto& p : res.final_plans) recs.push_back({last_epoch, std::move(p)});
    save_plans((dir / "plans.jsonl").string(), recs, prov);
  }
  if (!res.labels.empty())
    save_labels((dir / "labels.jsonl").string(), res.labels, prov);

  std::printf(
      "run %s: regime=%s best_epoch=%d dev_accuracy=%.4f gen_tokens=%.1f%s%s\n",
      dir.string().c_str(), a.regime.c_str(), res.record.best_epoch,
      res.record.best_accuracy, res.record.best_gen_tokens,
      res.record.stopped_early ? " (early stop)" : "",
      res.record.aborted ? " (aborted)" : "");
  if (res.record.aborted) {
    std::fprintf(stderr, "error: numeric: %s\n",
                 res.record.abort_reason.c_str());
    return exit_code_for("numeric");
  }
  return 0;
}

// --- eval --------------------------------------------------------------

struct EvalArgs {
  std::string data, checkpoint, mode = "full", split = "all", out;
  double dev_frac = 0.1;
  uint64_t seed = 1;
  EvalOptions opt;
  bool force = false;
};

int cmd_eval(const EvalArgs& a) {
  auto ds = load_dataset(a.data);
  std::vector<Sample> samples;
  if (a.split == "all") {
    samples = std::move(ds.samples);
  } else {
    int n_dev = static_cast<int>(ds.samples.size() * a.dev_frac + 0.5);
    auto [tr, dv] = hash_split(ds.samples, n_dev, a.seed);
    if (a.split == "dev")
      samples = std::move(dv);
    else if (a.split == "train")
      samples = std::move(tr);
    else
      fail("config", "unknown split '" + a.split + "'");
  }

  Model model = Model::load_checkpoint(a.checkpoint);
  EvalOptions opt = a.opt;
  opt.mode = eval_mode_from_string(a.mode);
  EvalReport rep = evaluate(model, samples, opt);

  fs::create_directories(a.out);
  std::string eval_path = (fs::path(a.out) / "eval.json").string();
  require_fresh(eval_path, a.force);
  json cfg;
  cfg["cmd"] = "eval";
  cfg["mode"] = a.mode;
  cfg["split"] = a.split;
  cfg["dev_frac"] = a.dev_frac;
  cfg["seed"] = a.seed;
  cfg["chunks"] = opt.chunks;
  cfg["per_sample_m"] = opt.per_sample_m;
  cfg["cap"] = opt.cap;
  cfg["confidence"] = opt.confidence;
  json prov = provenance_header(
      "eval", {{"data", a.data}, {"checkpoint", a.checkpoint}}, a.seed);
  prov["config"] = config_tag(cfg);
  save_eval(eval_path, rep, prov);
  save_trace((fs::path(a.out) / "trace.jsonl").string(), rep);

  std::printf("eval %s: mode=%s n=%d accuracy=%.4f gen_tokens=%.1f cap_hit=%.3f\n",
              a.out.c_str(), a.mode.c_str(), rep.n, rep.accuracy,
              rep.mean_gen_tokens, rep.cap_hit_frac);
  if (rep.has_confidence)
    std::printf("  confidence: core=%.2f other=%.2f gap=%.2f\n", rep.gold.core,
                rep.gold.other, rep.gold.gap);
  return 0;
}

// --- report ------------------------------------------------------------

struct ReportArgs {
  std::vector<std::string> summaries, evals, verify;
  std::vector<std::string> speedup;  // reasoning.json skip.json
  std::string sweep;
};

json artifact_header(const std::string& path) {
  std::string text = read_file(path);
  size_t nl = text.find('\n');
  std::string first = nl == std::string::npos ? text : text.substr(0, nl);
  try {
    json j = json::parse(first);
    if (j.contains("artifact")) return j;
  } catch (const nlohmann::json::exception&) {
  }
  try {
    json j = json::parse(text);
    if (j.contains("provenance")) return j.at("provenance");
  } catch (const nlohmann::json::exception&) {
  }
  fail("data", path + ": no provenance header found");
}

int cmd_report(const ReportArgs& a) {
  int bad = 0;
  if (!a.summaries.empty()) {
    std::printf("%-10s %8s %6s %10s %7s\n", "regime", "best_acc", "epoch",
                "gen_tokens", "early");
    for (const auto& p : a.summaries) {
      RunRecord rec = load_run_summary(p);
      std::printf("%-10s %8.4f %6d %10.1f %7s\n",
                  to_string(rec.regime).c_str(), rec.best_accuracy,
                  rec.best_epoch, rec.best_gen_tokens,
                  rec.stopped_early ? "yes" : "no");
    }
  }
  if (!a.evals.empty()) {
    std::printf("%-28s %-7s %8s %10s %8s %8s %8s %8s\n", "file", "mode",
                "accuracy", "gen_tokens", "cap_hit", "core", "other", "gap");
    for (const auto& p : a.evals) {
      EvalReport rep = load_eval(p);
      std::printf("%-28s %-7s %8.4f %10.1f %8.3f", p.c_str(),
                  to_string(rep.mode).c_str(), rep.accuracy,
                  rep.mean_gen_tokens, rep.cap_hit_frac);
      if (rep.has_confidence)
        std::printf(" %8.2f %8.2f %8.2f", rep.gold.core, rep.gold.other,
                    rep.gold.gap);
      std::printf("\n");
    }
  }
  if (!a.speedup.empty()) {
    if (a.speedup.size() != 2)
      fail("config", "--speedup needs exactly two eval files");
    EvalReport reasoning = load_eval(a.speedup[0]);
    EvalReport skip = load_eval(a.speedup[1]);
    double ratio = speedup_ratio(reasoning, skip);
    double wall = skip.mean_wall_ms > 0
                      ? reasoning.mean_wall_ms / skip.mean_wall_ms
                      : 0;
    std::printf("speedup: tokens %.1f / %.1f = %.2f (wall-time ratio %.2f)\n",
                reasoning.mean_gen_tokens, skip.mean_gen_tokens, ratio, wall);
  }
  if (!a.sweep.empty()) {
    json j;
    try {
      j = json::parse(read_file(a.sweep));
    } catch (const nlohmann::json::exception& e) {
      fail("data", a.sweep + ": bad json: " + e.what());
    }
    std::string axis = j.at("axis").get<std::string>();
    std::printf("sweep axis=%s", axis.c_str());
    if (axis == "chunk_count")
      std::printf("  (corpus mean steps %.2f)", j.at("mean_steps").get<double>());
    std::printf("\n%10s %10s %12s %12s\n", "setting", "accuracy", "gen_tokens",
                "token_batch");
    for (const auto& r : j.at("rows"))
      std::printf("%10d %10.4f %12.1f %12.1f\n", r.at("setting").get<int>(),
                  r.at("accuracy").get<double>(),
                  r.at("mean_gen_tokens").get<double>(),
                  r.at("mean_token_batch").get<double>());
  }
  for (const auto& p : a.verify) {
    auto problems = verify_provenance(artifact_header(p));
    if (problems.empty()) {
      std::printf("%s: ok\n", p.c_str());
    } else {
      for (const auto& msg : problems) {
        std::printf("%s: %s\n", p.c_str(), msg.c_str());
        ++bad;
      }
    }
  }
  if (bad) fail("data", std::to_string(bad) + " provenance problem(s)");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"chain-of-thought distillation toolkit"};
  app.set_config("--config", "", "read options from a TOML/INI file");
  app.require_subcommand(1);
  int jobs = 1;
  app.add_option("--jobs", jobs, "worker cap (pipeline schedules sequentially)")
      ->check(CLI::PositiveNumber);

  GenArgs g;
  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  gen->add_option("--task", g.task, "object_swap | last_letter | arithmetic")
      ->check(CLI::IsMember({"object_swap", "last_letter", "arithmetic"}));
  gen->add_option("--count", g.tc.count)->check(CLI::PositiveNumber);
  gen->add_option("--seed", g.tc.seed);
  gen->add_option("--entities", g.tc.entities);
  gen->add_option("--swaps", g.tc.swaps);
  gen->add_option("--words", g.tc.words);
  gen->add_option("--terms", g.tc.terms);
  gen->add_option("--max-operand", g.tc.max_operand);
  gen->add_option("--out", g.out, "dataset jsonl path")->required();
  gen->add_flag("--force", g.force, "overwrite existing outputs");

  ChunkArgs c;
  auto* chunk = app.add_subcommand("chunk", "write chunk plans for a dataset");
  chunk->add_option("--data", c.data)->required();
  chunk->add_option("--mode", c.mode, "ac | sbc | sentence | step")
      ->check(CLI::IsMember({"ac", "sbc", "sentence", "step"}));
  chunk->add_option("--chunks", c.chunks, "target chunk count M");
  chunk->add_option("--eta", c.eta, "search gain threshold (number or inf)");
  chunk->add_flag("--anneal", c.anneal);
  chunk->add_option("--temperature", c.temperature);
  chunk->add_option("--seed", c.seed);
  chunk->add_option("--round", c.round, "annealing round salt");
  chunk->add_option("--checkpoint", c.checkpoint, "scorer model (mode sbc)");
  chunk->add_option("--out", c.out)->required();
  chunk->add_flag("--force", c.force);

  BuildArgs b;
  auto* build = app.add_subcommand("build", "write training examples");
  build->add_option("--data", b.data)->required();
  build->add_option("--kind", b.kind,
                    "baseline | cwt | stt | skipall | weighted")
      ->check(CLI::IsMember({"baseline", "cwt", "stt", "skipall", "weighted"}));
  build->add_option("--plans", b.plans);
  build->add_option("--labels", b.labels);
  build->add_option("--core-weight", b.core_weight);
  build->add_flag("--no-tags", b.no_tags, "drop stage-prefix tokens");
  build->add_option("--out", b.out)->required();
  build->add_flag("--force", b.force);

  TrainArgs t;
  auto* train = app.add_subcommand("train", "train a student model");
  train->add_option("--data", t.data)->required();
  train->add_option("--dev", t.dev, "held-out dataset (default: hash split)");
  train->add_option("--dev-frac", t.dev_frac);
  train->add_option("--regime", t.regime,
                    "baseline | cwt_ac | cwt_sbc | stt | skipall | sent_wise | "
                    "step_wise | weighted");
  train->add_option("--chunks", t.rc.chunks);
  train->add_option("--dev-chunks", t.rc.dev_chunks);
  train->add_option("--eta", t.eta);
  train->add_flag("--anneal", t.rc.search.anneal);
  train->add_option("--temperature", t.rc.search.temperature);
  train->add_option("--epochs", t.rc.train.epochs);
  train->add_option("--lr", t.rc.train.lr);
  train->add_option("--warmup", t.rc.train.warmup);
  train->add_option("--batch", t.rc.train.batch);
  train->add_option("--patience", t.rc.train.patience);
  train->add_option("--weight-decay", t.rc.train.weight_decay);
  train->add_option("--restart-period", t.rc.train.restart_period);
  train->add_option("--min-lr", t.rc.train.min_lr);
  train->add_option("--seed", t.rc.train.seed);
  train->add_option("--cap", t.rc.cap, "dev/probe generation cap");
  train->add_option("--stt-iters", t.rc.stt_iters);
  train->add_flag("--skip-independent", t.skip_independent,
                  "probe chunks in isolation");
  train->add_option("--core-weight", t.rc.core_weight);
  train->add_flag("--no-tags", t.no_tags);
  train->add_option("--source", t.source, "chunk-wise checkpoint (stt)");
  train->add_option("--layers", t.rc.arch.n_layer);
  train->add_option("--d-model", t.rc.arch.d_model);
  train->add_option("--heads", t.rc.arch.n_head);
  train->add_option("--ff", t.rc.arch.d_ff);
  train->add_option("--context", t.rc.arch.context);
  train->add_option("--init-std", t.rc.arch.init_std);
  train->add_option("--sweep", t.sweep, "none | chunk_count | token_batch")
      ->check(CLI::IsMember({"none", "chunk_count", "token_batch"}));
  train->add_option("--grid", t.grid, "comma-separated sweep settings");
  train->add_option("--out", t.out, "base run directory");
  train->add_flag("--force", t.force);

  EvalArgs e;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--data", e.data)->required();
  eval->add_option("--split", e.split, "all | dev | train");
  eval->add_option("--dev-frac", e.dev_frac);
  eval->add_option("--seed", e.seed, "split seed");
  eval->add_option("--checkpoint", e.checkpoint)->required();
  eval->add_option("--mode", e.mode, "full | staged | skip")
      ->check(CLI::IsMember({"full", "staged", "skip"}));
  eval->add_option("--chunks", e.opt.chunks);
  eval->add_flag("--per-sample-m", e.opt.per_sample_m);
  eval->add_option("--cap", e.opt.cap);
  eval->add_flag("--confidence", e.opt.confidence);
  eval->add_option("--out", e.out, "output directory")->required();
  eval->add_flag("--force", e.force);

  ReportArgs r;
  auto* report = app.add_subcommand("report", "render summaries and tables");
  report->add_option("--summary", r.summaries, "run summary.json files");
  report->add_option("--eval", r.evals, "eval.json files");
  report->add_option("--speedup", r.speedup,
                     "reasoning eval.json then skip eval.json")
      ->expected(2);
  report->add_option("--sweep", r.sweep, "sweep.json file");
  report->add_option("--verify", r.verify, "artifacts to provenance-check");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen(g);
    if (chunk->parsed()) return cmd_chunk(c);
    if (build->parsed()) return cmd_build(b);
    if (train->parsed()) return cmd_train(t);
    if (eval->parsed()) return cmd_eval(e);
    if (report->parsed()) return cmd_report(r);
  } catch (const Error& err) {
    std::fprintf(stderr, "error: %s: %s\n", err.kind().c_str(), err.what());
    return exit_code_for(err.kind());
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: internal: %s\n", ex.what());
    return 1;
  }
  return 0;
}
