#include "skipthink/model.hpp"

#include <cmath>
#include <cstring>

#include "skipthink/artifact_io.hpp"

namespace skipthink {

double lr_at(const TrainConfig& cfg, int64_t step, int64_t cycle_steps) {
  if (step < 0) fail("contract", "negative step");
  if (cfg.warmup > 0 && step < cfg.warmup)
    return cfg.lr * static_cast<double>(step + 1) / cfg.warmup;
  if (cycle_steps <= 0) return cfg.lr;
  int64_t t = (step - cfg.warmup) % cycle_steps;
  double cosv = std::cos(3.14159265358979323846 * static_cast<double>(t) /
                         static_cast<double>(cycle_steps));
  return cfg.min_lr + 0.5 * (cfg.lr - cfg.min_lr) * (1.0 + cosv);
}

Model::Model(const NetConfig& cfg) : net_(std::make_unique<Net<float>>(cfg)) {}

Model::Model(const NetConfig& cfg, uint64_t init_seed) : Model(cfg) {
  net_->init_params(init_seed);
}

std::vector<double> Model::weights_for(const SpanExample& ex) const {
  const int K = static_cast<int>(ex.tokens.size());
  if (ex.s < 1 || ex.s >= K)
    fail("contract", "span start " + std::to_string(ex.s) +
                         " out of range for length " + std::to_string(K));
  std::vector<double> w(K, 0.0);
  for (int t = ex.s; t < K; ++t) w[t] = 1.0;
  for (const auto& [pos, wt] : ex.extra_weights) {
    if (pos < ex.s || pos >= K)
      fail("contract", "weight position outside target span");
    if (wt < 0) fail("contract", "negative token weight");
    w[pos] = wt;
  }
  return w;
}

double Model::span_loss(const std::vector<int>& tokens, int s) {
  SpanExample ex;
  ex.tokens = tokens;
  ex.s = s;
  return span_loss(ex);
}

double Model::span_loss(const SpanExample& ex) {
  auto w = weights_for(ex);
  auto out = net_->forward_loss(ex.tokens.data(),
                                static_cast<int>(ex.tokens.size()), w.data(),
                                0.0, nullptr);
  return out.weighted_sum / (ex.tokens.size() - ex.s);
}

Model::StepOut Model::train_step(const std::vector<const SpanExample*>& batch,
                                 const TrainConfig& cfg, int64_t step,
                                 int64_t cycle_steps) {
  if (batch.empty()) fail("contract", "empty batch");
  const double B = static_cast<double>(batch.size());
  net_->zero_grad();
  StepOut out;
  for (const SpanExample* ex : batch) {
    auto w = weights_for(*ex);
    const int K = static_cast<int>(ex->tokens.size());
    const int span = K - ex->s;
    auto r = net_->forward_loss(ex->tokens.data(), K, w.data(),
                                1.0 / (B * span), nullptr);
    double loss_i = r.weighted_sum / span;
    if (!std::isfinite(loss_i))
      fail("numeric", "non-finite loss at example '" + ex->id + "'");
    out.loss += loss_i / B;
    out.token_batch += span;
  }
  out.lr = lr_at(cfg, step, cycle_steps);
  net_->adam_update(out.lr, cfg.beta1, cfg.beta2, cfg.adam_eps,
                    cfg.weight_decay);
  return out;
}

DecodeResult Model::greedy_generate(const std::vector<int>& prompt, int cap,
                                    const std::vector<int>& stop_tokens) {
  if (prompt.empty()) fail("contract", "empty prompt");
  const int ctx = net_->config().context;
  if (static_cast<int>(prompt.size()) >= ctx)
    fail("contract", "prompt length " + std::to_string(prompt.size()) +
                         " leaves no room in context " + std::to_string(ctx));
  DecodeResult res;
  auto st = net_->make_state();
  Eigen::VectorXd z =
      net_->prefill(prompt.data(), static_cast<int>(prompt.size()), st);
  const int room = ctx - static_cast<int>(prompt.size());
  const int limit = std::min(cap, room);
  while (static_cast<int>(res.tokens.size()) < limit) {
    int best = 0;
    for (int i = 1; i < z.size(); ++i)
      if (z(i) > z(best)) best = i;  // ties keep the lowest id
    double mx = z(best);
    double sum = 0;
    for (int i = 0; i < z.size(); ++i) sum += std::exp(z(i) - mx);
    double prob = 1.0 / sum;
    bool is_stop = false;
    for (int sid : stop_tokens)
      if (sid == best) is_stop = true;
    if (is_stop) {
      res.stop = DecodeResult::Stop::stop_token;
      res.stop_id = best;
      break;
    }
    res.tokens.push_back(best);
    res.probs.push_back(prob);
    if (static_cast<int>(res.tokens.size()) >= limit) break;
    z = net_->step(best, st);
  }
  res.text = Vocabulary::decode(res.tokens);
  return res;
}

std::vector<double> Model::token_confidences(
    const std::vector<int>& prompt, const std::vector<int>& continuation) {
  if (prompt.empty()) fail("contract", "empty prompt");
  if (continuation.empty()) return {};
  std::vector<int> tok = prompt;
  tok.insert(tok.end(), continuation.begin(), continuation.end());
  std::vector<double> w(tok.size(), 0.0);
  for (size_t t = prompt.size(); t < tok.size(); ++t) w[t] = 1.0;
  std::vector<double> ce;
  net_->forward_loss(tok.data(), static_cast<int>(tok.size()), w.data(), 0.0,
                     &ce);
  std::vector<double> out;
  for (size_t t = prompt.size(); t < tok.size(); ++t)
    out.push_back(std::exp(-ce[t]));
  return out;
}

Eigen::MatrixXf Model::logits_full(const std::vector<int>& tokens) {
  return net_->logits_range(tokens.data(), static_cast<int>(tokens.size()), 0,
                            static_cast<int>(tokens.size()));
}

uint64_t Model::params_hash() const {
  const auto& p = net_->params();
  return fnv1a64(p.data(), p.size() * sizeof(float));
}

namespace {

constexpr char kMagic[4] = {'S', 'T', 'C', 'K'};
constexpr uint32_t kVersion = 1;

template <class T>
void put(std::string& out, T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  out.append(reinterpret_cast<char*>(b), sizeof(T));
}

template <class T>
T take(const std::string& in, size_t& off) {
  if (off + sizeof(T) > in.size()) fail("data", "truncated checkpoint");
  T v;
  std::memcpy(&v, in.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}

}  // namespace

void Model::save_checkpoint(const std::string& path) const {
  // little-endian: magic, version, scalar width, dims, vocab table hash,
  // adam step count, param count, then params / adam-m / adam-v as float32
  std::string out;
  out.append(kMagic, 4);
  put<uint32_t>(out, kVersion);
  put<uint32_t>(out, sizeof(float));
  const NetConfig& c = net_->config();
  for (int v : {c.n_layer, c.d_model, c.n_head, c.d_ff, c.context, c.vocab})
    put<int32_t>(out, v);
  put<double>(out, c.init_std);
  put<uint64_t>(out, Vocabulary::table_hash());
  put<int64_t>(out, net_->adam_steps());
  put<uint64_t>(out, net_->n_params());
  auto dump = [&](const Net<float>::Buf& a) {
    out.append(reinterpret_cast<const char*>(a.data()),
               a.size() * sizeof(float));
  };
  const Net<float>& n = *net_;
  dump(n.params());
  dump(const_cast<Net<float>&>(n).adam_m());
  dump(const_cast<Net<float>&>(n).adam_v());
  write_file(path, out);
}

Model Model::load_checkpoint(const std::string& path) {
  std::string in = read_file(path);
  size_t off = 0;
  if (in.size() < 4 || std::memcmp(in.data(), kMagic, 4) != 0)
    fail("data", "not a checkpoint: " + path);
  off = 4;
  if (take<uint32_t>(in, off) != kVersion)
    fail("data", "unsupported checkpoint version in " + path);
  if (take<uint32_t>(in, off) != sizeof(float))
    fail("data", "unsupported scalar width in " + path);
  NetConfig c;
  c.n_layer = take<int32_t>(in, off);
  c.d_model = take<int32_t>(in, off);
  c.n_head = take<int32_t>(in, off);
  c.d_ff = take<int32_t>(in, off);
  c.context = take<int32_t>(in, off);
  c.vocab = take<int32_t>(in, off);
  c.init_std = take<double>(in, off);
  if (take<uint64_t>(in, off) != Vocabulary::table_hash())
    fail("data", "checkpoint vocabulary differs from this build: " + path);
  int64_t steps = take<int64_t>(in, off);
  uint64_t n = take<uint64_t>(in, off);
  Model m(c);
  if (n != m.net_->n_params()) fail("data", "param count mismatch in " + path);
  auto read_arr = [&](Net<float>::Buf& a) {
    if (off + a.size() * sizeof(float) > in.size())
      fail("data", "truncated checkpoint: " + path);
    std::memcpy(a.data(), in.data() + off, a.size() * sizeof(float));
    off += a.size() * sizeof(float);
  };
  read_arr(m.net_->params());
  read_arr(m.net_->adam_m());
  read_arr(m.net_->adam_v());
  m.net_->adam_steps() = steps;
  if (off != in.size()) fail("data", "trailing bytes in checkpoint: " + path);
  return m;
}

}  // namespace skipthink
