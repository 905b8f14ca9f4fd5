#include <doctest.h>

#include <cmath>
#include <vector>

#include "skipthink/layout.hpp"
#include "skipthink/model.hpp"
#include "util.hpp"

using namespace skipthink;
using testutil::error_kind;
using testutil::TempDir;
using testutil::tiny_arch;

namespace {

std::vector<int> random_tokens(int n, uint64_t seed) {
  Rng rng(seed);
  std::vector<int> tok(n);
  for (int i = 0; i < n; ++i) tok[i] = rng.index(Vocabulary::kSize);
  return tok;
}

// mean cross-entropy over tokens[s..K) recomputed in double from the logits
double oracle_span_loss(Model& m, const std::vector<int>& tok, int s) {
  Eigen::MatrixXf z = m.logits_full(tok);
  double sum = 0;
  for (size_t t = s; t < tok.size(); ++t) {
    Eigen::VectorXd col = z.col(static_cast<int>(t) - 1).cast<double>();
    double mx = col.maxCoeff();
    double lse = mx + std::log((col.array() - mx).exp().sum());
    sum += lse - col(tok[t]);
  }
  return sum / static_cast<double>(tok.size() - s);
}

void zero_params(Model& m) {
  for (float& p : m.net().params()) p = 0.0f;
}

}  // namespace

TEST_CASE("span loss equals a double softmax oracle over the same logits") {
  Model m(tiny_arch(64), 3);
  for (uint64_t seed : {1ull, 2ull, 3ull, 4ull, 5ull}) {
    auto tok = random_tokens(12, seed);
    for (int s : {1, 3, 11}) {
      double got = m.span_loss(tok, s);
      double want = oracle_span_loss(m, tok, s);
      CHECK(got == doctest::Approx(want).epsilon(1e-6));
    }
  }
}

TEST_CASE("span loss on zeroed parameters is the uniform log-vocab") {
  Model m(tiny_arch(64), 3);
  zero_params(m);
  auto tok = random_tokens(20, 9);
  CHECK(m.span_loss(tok, 4) ==
        doctest::Approx(std::log(113.0)).epsilon(1e-12));
}

TEST_CASE("span loss validates the span start") {
  Model m(tiny_arch(64), 3);
  auto tok = random_tokens(8, 1);
  CHECK(error_kind([&] { m.span_loss(tok, 0); }) == "contract");
  CHECK(error_kind([&] { m.span_loss(tok, 8); }) == "contract");
  CHECK(error_kind([&] { m.span_loss({5}, 1); }) == "contract");
  CHECK_NOTHROW(m.span_loss(tok, 7));
}

TEST_CASE("explicit unit weights match the unweighted loss bitwise") {
  Model m(tiny_arch(64), 3);
  SpanExample ex;
  ex.id = "w1";
  ex.tokens = random_tokens(15, 4);
  ex.s = 5;
  ex.extra_weights = {{5, 1.0}, {9, 1.0}, {14, 1.0}};
  CHECK(m.span_loss(ex) == m.span_loss(ex.tokens, ex.s));
}

TEST_CASE("extra weights scale their terms; the denominator stays the count") {
  Model m(tiny_arch(64), 3);
  auto tok = random_tokens(10, 6);
  const int s = 4;

  // per-term oracle from the logits
  Eigen::MatrixXf z = m.logits_full(tok);
  auto ce_at = [&](int t) {
    Eigen::VectorXd col = z.col(t - 1).cast<double>();
    double mx = col.maxCoeff();
    double lse = mx + std::log((col.array() - mx).exp().sum());
    return lse - col(tok[t]);
  };
  double want = 0;
  for (int t = s; t < 10; ++t) want += (t == 6 ? 2.0 : 1.0) * ce_at(t);
  want /= (10 - s);

  SpanExample ex;
  ex.id = "w2";
  ex.tokens = tok;
  ex.s = s;
  ex.extra_weights = {{6, 2.0}};
  CHECK(m.span_loss(ex) == doctest::Approx(want).epsilon(1e-6));

  ex.extra_weights = {{2, 2.0}};  // outside the target span
  CHECK(error_kind([&] { m.span_loss(ex); }) == "contract");
  ex.extra_weights = {{6, -1.0}};
  CHECK(error_kind([&] { m.span_loss(ex); }) == "contract");
}

TEST_CASE("token confidences are exp of the per-token cross-entropy") {
  Model m(tiny_arch(64), 8);
  auto tok = random_tokens(14, 2);
  std::vector<int> prompt(tok.begin(), tok.begin() + 6);
  std::vector<int> cont(tok.begin() + 6, tok.end());

  auto conf = m.token_confidences(prompt, cont);
  REQUIRE(conf.size() == cont.size());

  Eigen::MatrixXf z = m.logits_full(tok);
  for (size_t i = 0; i < cont.size(); ++i) {
    Eigen::VectorXd col = z.col(5 + static_cast<int>(i)).cast<double>();
    double mx = col.maxCoeff();
    double lse = mx + std::log((col.array() - mx).exp().sum());
    double ce = lse - col(tok[6 + i]);
    CHECK(conf[i] == doctest::Approx(std::exp(-ce)).epsilon(1e-9));
    CHECK(conf[i] > 0.0);
    CHECK(conf[i] <= 1.0);
  }

  CHECK(m.token_confidences(prompt, {}).empty());

  // a single-target span: loss is exactly -log of that confidence
  double loss = m.span_loss(tok, 13);
  std::vector<int> p13(tok.begin(), tok.begin() + 13);
  auto c13 = m.token_confidences(p13, {tok[13]});
  REQUIRE(c13.size() == 1);
  CHECK(std::exp(-loss) == doctest::Approx(c13[0]).epsilon(1e-9));
}

TEST_CASE("learning-rate schedule: linear warmup, cosine decay, restarts") {
  TrainConfig cfg;
  cfg.lr = 0.01;
  cfg.warmup = 4;
  cfg.min_lr = 0.001;

  CHECK(lr_at(cfg, 0, 10) == doctest::Approx(0.01 * 1 / 4).epsilon(1e-15));
  CHECK(lr_at(cfg, 1, 10) == doctest::Approx(0.01 * 2 / 4).epsilon(1e-15));
  CHECK(lr_at(cfg, 3, 10) == doctest::Approx(0.01).epsilon(1e-15));
  // cycle position 0 sits at the peak
  CHECK(lr_at(cfg, 4, 10) == doctest::Approx(0.01).epsilon(1e-15));
  // halfway through the cycle: midpoint of peak and floor
  CHECK(lr_at(cfg, 9, 10) == doctest::Approx(0.0055).epsilon(1e-12));
  // one full cycle later the schedule restarts at the peak
  CHECK(lr_at(cfg, 14, 10) == doctest::Approx(0.01).epsilon(1e-15));
  CHECK(lr_at(cfg, 24, 10) == doctest::Approx(0.01).epsilon(1e-15));
  // late in a cycle the rate approaches the floor from above
  double late = lr_at(cfg, 13, 10);
  CHECK(late > cfg.min_lr);
  CHECK(late < 0.002);
  CHECK(error_kind([&] { lr_at(cfg, -1, 10); }) == "contract");
}

TEST_CASE("train_step reports the pre-update batch loss and token count") {
  Model m(tiny_arch(64), 5);
  SpanExample a;
  a.id = "a";
  a.tokens = random_tokens(30, 1);
  a.s = 10;  // span 20
  SpanExample b;
  b.id = "b";
  b.tokens = random_tokens(25, 2);
  b.s = 5;  // span 20

  double la = m.span_loss(a), lb = m.span_loss(b);
  TrainConfig cfg;
  cfg.lr = 1e-3;
  cfg.warmup = 1;
  auto out = m.train_step({&a, &b}, cfg, 0, 100);
  CHECK(out.token_batch == 40);
  CHECK(out.loss == doctest::Approx((la + lb) / 2).epsilon(1e-12));
  CHECK(out.lr == lr_at(cfg, 0, 100));

  CHECK(error_kind([&] { m.train_step({}, cfg, 1, 100); }) == "contract");
}

TEST_CASE("duplicating an example leaves the batch-mean loss unchanged") {
  Model m(tiny_arch(64), 5);
  SpanExample a;
  a.id = "a";
  a.tokens = random_tokens(30, 3);
  a.s = 10;
  TrainConfig cfg;
  cfg.lr = 0.0;  // no update, loss reporting only
  Model m2(tiny_arch(64), 5);
  auto once = m.train_step({&a}, cfg, 0, 100);
  auto twice = m2.train_step({&a, &a}, cfg, 0, 100);
  CHECK(once.loss == twice.loss);
  CHECK(twice.token_batch == 2 * once.token_batch);
}

TEST_CASE("zero learning rate leaves parameters bitwise unchanged") {
  Model m(tiny_arch(64), 7);
  uint64_t before = m.params_hash();
  SpanExample a;
  a.id = "a";
  a.tokens = random_tokens(30, 4);
  a.s = 8;
  TrainConfig cfg;
  cfg.lr = 0.0;
  cfg.warmup = 0;
  for (int i = 0; i < 3; ++i) m.train_step({&a}, cfg, i, 100);
  CHECK(m.params_hash() == before);
}

TEST_CASE("training is bit-reproducible across identical runs") {
  auto run = [] {
    Model m(tiny_arch(64), 9);
    TrainConfig cfg;
    cfg.lr = 3e-3;
    cfg.warmup = 5;
    SpanExample a, b;
    a.id = "a";
    a.tokens = random_tokens(40, 5);
    a.s = 12;
    b.id = "b";
    b.tokens = random_tokens(35, 6);
    b.s = 9;
    for (int i = 0; i < 20; ++i) m.train_step({&a, &b}, cfg, i, 50);
    return m.params_hash();
  };
  uint64_t h1 = run();
  uint64_t h2 = run();
  CHECK(h1 == h2);
}

TEST_CASE("a short run on a tiny corpus halves the loss") {
  Model m(tiny_arch(128), 13);
  std::vector<SpanExample> exs(3);
  const char* texts[3] = {"ab ab ab ab.", "cd cd cd cd.", "ef ef ef ef."};
  for (int i = 0; i < 3; ++i) {
    SeqSpan ss = baseline_example("q", texts[i], "x");
    exs[i].id = "m" + std::to_string(i);
    exs[i].tokens = ss.tokens;
    exs[i].s = ss.s;
  }
  TrainConfig cfg;
  cfg.lr = 3e-3;
  cfg.warmup = 20;

  double initial = 0;
  for (auto& e : exs) initial += m.span_loss(e) / 3;
  std::vector<const SpanExample*> batch = {&exs[0], &exs[1], &exs[2]};
  for (int i = 0; i < 200; ++i) m.train_step(batch, cfg, i, 200);
  double final_loss = 0;
  for (auto& e : exs) final_loss += m.span_loss(e) / 3;

  CHECK(initial > 1.0);  // fresh models sit near uniform
  CHECK(final_loss < 0.5 * initial);
}

TEST_CASE("greedy decode on zeroed parameters emits the lowest id until cap") {
  Model m(tiny_arch(64), 1);
  zero_params(m);
  auto prompt = Vocabulary::encode("hi");

  auto dr = m.greedy_generate(prompt, 5, {});
  CHECK(dr.tokens == std::vector<int>{0, 0, 0, 0, 0});
  CHECK(dr.text == "     ");
  CHECK(dr.stop == DecodeResult::Stop::length);
  REQUIRE(dr.probs.size() == 5);
  for (double p : dr.probs)
    CHECK(p == doctest::Approx(1.0 / 113).epsilon(1e-12));

  // a stop set containing that token halts generation immediately
  auto stopped = m.greedy_generate(prompt, 5, {0});
  CHECK(stopped.tokens.empty());
  CHECK(stopped.text.empty());
  CHECK(stopped.stop == DecodeResult::Stop::stop_token);
  CHECK(stopped.stop_id == 0);
}

TEST_CASE("greedy decode agrees with an argmax replay of the full logits") {
  Model m(tiny_arch(64), 21);
  auto prompt = Vocabulary::encode("abc");
  auto dr = m.greedy_generate(prompt, 8, {});
  REQUIRE(dr.tokens.size() == 8);

  std::vector<int> cur = prompt;
  for (size_t i = 0; i < dr.tokens.size(); ++i) {
    Eigen::MatrixXf z = m.logits_full(cur);
    Eigen::VectorXd col = z.col(z.cols() - 1).cast<double>();
    int best = 0;
    for (int v = 1; v < col.size(); ++v)
      if (col(v) > col(best)) best = v;
    CHECK(dr.tokens[i] == best);
    double mx = col(best);
    double sum = 0;
    for (int v = 0; v < col.size(); ++v) sum += std::exp(col(v) - mx);
    CHECK(dr.probs[i] == doctest::Approx(1.0 / sum).epsilon(1e-4));
    cur.push_back(best);
  }
}

TEST_CASE("greedy decode guards its prompt") {
  Model m(tiny_arch(64), 2);
  CHECK(error_kind([&] { m.greedy_generate({}, 5, {}); }) == "contract");
  std::vector<int> toolong(64, 1);
  CHECK(error_kind([&] { m.greedy_generate(toolong, 5, {}); }) == "contract");

  // generation never runs past the context even when cap allows it
  std::vector<int> nearly(60, 1);
  auto dr = m.greedy_generate(nearly, 100, {});
  CHECK(static_cast<int>(dr.tokens.size()) <= 4);
}

TEST_CASE("checkpoints round-trip parameters and optimizer state") {
  TempDir tmp;
  Model m(tiny_arch(96), 31);
  TrainConfig cfg;
  cfg.lr = 2e-3;
  cfg.warmup = 2;
  SpanExample a;
  a.id = "a";
  a.tokens = random_tokens(40, 7);
  a.s = 10;
  for (int i = 0; i < 3; ++i) m.train_step({&a}, cfg, i, 50);

  const std::string path = tmp.file("model.ckpt");
  m.save_checkpoint(path);
  Model r = Model::load_checkpoint(path);
  CHECK(r.params_hash() == m.params_hash());
  CHECK(r.config() == m.config());
  CHECK(r.net().adam_steps() == m.net().adam_steps());

  // optimizer state restored: further identical steps stay in lockstep
  m.train_step({&a}, cfg, 3, 50);
  r.train_step({&a}, cfg, 3, 50);
  CHECK(r.params_hash() == m.params_hash());
}

TEST_CASE("checkpoint loader rejects corrupt files") {
  TempDir tmp;
  Model m(tiny_arch(64), 1);
  const std::string path = tmp.file("model.ckpt");
  m.save_checkpoint(path);

  std::string bytes = read_file(path);
  write_file(tmp.file("trunc.ckpt"), bytes.substr(0, bytes.size() / 2));
  CHECK(error_kind([&] {
          Model::load_checkpoint(tmp.file("trunc.ckpt"));
        }) == "data");

  std::string garbled = bytes;
  garbled[0] = 'X';
  write_file(tmp.file("magic.ckpt"), garbled);
  CHECK(error_kind([&] {
          Model::load_checkpoint(tmp.file("magic.ckpt"));
        }) == "data");

  write_file(tmp.file("extra.ckpt"), bytes + "tail");
  CHECK(error_kind([&] {
          Model::load_checkpoint(tmp.file("extra.ckpt"));
        }) == "data");

  CHECK(error_kind([&] {
          Model::load_checkpoint(tmp.file("absent.ckpt"));
        }) == "io");
}
