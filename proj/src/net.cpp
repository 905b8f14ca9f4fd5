#include "skipthink/net.hpp"

#include <cmath>

#include "skipthink/common.hpp"

namespace skipthink {

namespace {
constexpr double kRmsEps = 1e-5;
}

template <class S>
Net<S>::Net(const NetConfig& cfg) : cfg_(cfg) {
  if (cfg.n_layer < 1 || cfg.d_model < 1 || cfg.n_head < 1 || cfg.d_ff < 1 ||
      cfg.context < 1 || cfg.vocab < 2)
    fail("config", "bad net dimensions");
  if (cfg.d_model % cfg.n_head != 0)
    fail("config", "d_model must be divisible by n_head");

  const size_t d = cfg.d_model, V = cfg.vocab, ctx = cfg.context,
               dff = cfg.d_ff;
  size_t o = 0;
  off_.tok = o; o += d * V;
  off_.pos = o; o += d * ctx;
  off_.layer.resize(cfg.n_layer);
  for (auto& L : off_.layer) {
    L.ln1 = o; o += d;
    L.qkv = o; o += 3 * d * d;
    L.wo = o; o += d * d;
    L.ln2 = o; o += d;
    L.wf1 = o; o += dff * d;
    L.wf2 = o; o += d * dff;
  }
  off_.lnf = o; o += d;
  off_.lm = o; o += V * d;
  n_params_ = o;
  p_.assign(o, S(0));
  g_.assign(o, S(0));
  m_.assign(o, S(0));
  v_.assign(o, S(0));
}

template <class S>
void Net<S>::init_params(uint64_t seed) {
  Rng rng(seed);
  auto fill = [&](size_t off, size_t count, double std) {
    for (size_t i = 0; i < count; ++i)
      p_[off + i] = static_cast<S>(rng.normal() * std);
  };
  auto ones = [&](size_t off, size_t count) {
    for (size_t i = 0; i < count; ++i) p_[off + i] = S(1);
  };
  const size_t d = cfg_.d_model, V = cfg_.vocab, ctx = cfg_.context,
               dff = cfg_.d_ff;
  const double std = cfg_.init_std;
  // residual branch outputs are damped by depth for stable early training
  const double res_std = std / std::sqrt(2.0 * cfg_.n_layer);
  fill(off_.tok, d * V, std);
  fill(off_.pos, d * ctx, std);
  for (auto& L : off_.layer) {
    ones(L.ln1, d);
    fill(L.qkv, 3 * d * d, std);
    fill(L.wo, d * d, res_std);
    ones(L.ln2, d);
    fill(L.wf1, dff * d, std);
    fill(L.wf2, d * dff, res_std);
  }
  ones(off_.lnf, d);
  fill(off_.lm, V * d, std);
  std::fill(g_.begin(), g_.end(), S(0));
  std::fill(m_.begin(), m_.end(), S(0));
  std::fill(v_.begin(), v_.end(), S(0));
  adam_t_ = 0;
}

template <class S>
void Net<S>::zero_grad() {
  std::fill(g_.begin(), g_.end(), S(0));
}

template <class S>
void Net<S>::rms_forward(const Mat& x, size_t gain_off, Mat& y, Vec& invr) {
  const int d = cfg_.d_model;
  const int T = static_cast<int>(x.cols());
  auto g = cmat(p_, gain_off, d, 1);
  y.resize(d, T);
  invr.resize(T);
  for (int t = 0; t < T; ++t) {
    S ms = x.col(t).squaredNorm() / S(d);
    S r = S(1) / std::sqrt(ms + S(kRmsEps));
    invr(t) = r;
    y.col(t) = g.col(0).cwiseProduct(x.col(t)) * r;
  }
}

template <class S>
typename Net<S>::Mat Net<S>::rms_backward(const Mat& x, const Vec& invr,
                                          size_t gain_off, const Mat& dy) {
  const int d = cfg_.d_model;
  const int T = static_cast<int>(x.cols());
  auto g = cmat(p_, gain_off, d, 1);
  auto gg = mat(g_, gain_off, d, 1);
  Mat dx(d, T);
  for (int t = 0; t < T; ++t) {
    S r = invr(t);
    gg.col(0) += (x.col(t) * r).cwiseProduct(dy.col(t));
    Vec dxhat = g.col(0).cwiseProduct(dy.col(t));
    S dot = x.col(t).dot(dxhat);
    dx.col(t) = dxhat * r - x.col(t) * (dot * r * r * r / S(d));
  }
  return dx;
}

template <class S>
void Net<S>::layer_forward(int l, Mat& x, LayerCache& c) {
  const int d = cfg_.d_model, h = cfg_.n_head, dh = d / h, dff = cfg_.d_ff;
  const int T = static_cast<int>(x.cols());
  const auto& L = off_.layer[l];
  const S scale = S(1) / std::sqrt(S(dh));

  c.x_in = x;
  rms_forward(c.x_in, L.ln1, c.xn1, c.invr1);

  Mat qkv(3 * d, T);
  qkv.noalias() = cmat(p_, L.qkv, 3 * d, d) * c.xn1;
  c.q = qkv.topRows(d);
  c.k = qkv.middleRows(d, d);
  c.v = qkv.bottomRows(d);

  c.probs.assign(h, Mat());
  c.attn_cat.resize(d, T);
  for (int hh = 0; hh < h; ++hh) {
    auto Qh = c.q.middleRows(hh * dh, dh);
    auto Kh = c.k.middleRows(hh * dh, dh);
    auto Vh = c.v.middleRows(hh * dh, dh);
    Mat& P = c.probs[hh];
    P.resize(T, T);
    P.noalias() = Kh.transpose() * Qh;  // (j, i) = k_j . q_i
    P *= scale;
    for (int i = 0; i < T; ++i) {
      auto col = P.col(i).head(i + 1);
      S mx = col.maxCoeff();
      col = (col.array() - mx).exp();
      col /= col.sum();
      if (i + 1 < T) P.col(i).tail(T - i - 1).setZero();
    }
    c.attn_cat.middleRows(hh * dh, dh).noalias() = Vh * P;
  }

  c.x_res1.resize(d, T);
  c.x_res1.noalias() = cmat(p_, L.wo, d, d) * c.attn_cat;
  c.x_res1 += c.x_in;

  rms_forward(c.x_res1, L.ln2, c.xn2, c.invr2);
  c.f1.resize(dff, T);
  c.f1.noalias() = cmat(p_, L.wf1, dff, d) * c.xn2;
  c.f1 = c.f1.cwiseMax(S(0));
  x.noalias() = cmat(p_, L.wf2, d, dff) * c.f1;
  x += c.x_res1;
}

template <class S>
void Net<S>::check_tokens(const int* tok, int T) const {
  if (T < 1) fail("contract", "empty token sequence");
  if (T > cfg_.context)
    fail("contract", "sequence length " + std::to_string(T) +
                         " exceeds context " + std::to_string(cfg_.context));
  for (int t = 0; t < T; ++t)
    if (tok[t] < 0 || tok[t] >= cfg_.vocab)
      fail("contract", "token id out of range at position " + std::to_string(t));
}

template <class S>
void Net<S>::trunk_forward(const int* tok, int T,
                           std::vector<LayerCache>& caches, Mat& x_resf,
                           Mat& xf, Vec& invrf) {
  const int d = cfg_.d_model;
  check_tokens(tok, T);

  auto tokE = cmat(p_, off_.tok, d, cfg_.vocab);
  auto posE = cmat(p_, off_.pos, d, cfg_.context);
  Mat x(d, T);
  for (int t = 0; t < T; ++t) x.col(t) = tokE.col(tok[t]) + posE.col(t);

  caches.resize(cfg_.n_layer);
  for (int l = 0; l < cfg_.n_layer; ++l) layer_forward(l, x, caches[l]);
  x_resf = x;
  rms_forward(x_resf, off_.lnf, xf, invrf);
}

template <class S>
typename Net<S>::LossOut Net<S>::forward_loss(const int* tok, int T,
                                              const double* w,
                                              double grad_scale,
                                              std::vector<double>* ce_out) {
  const int d = cfg_.d_model, V = cfg_.vocab, h = cfg_.n_head, dh = d / h;
  check_tokens(tok, T);  // malformed input is rejected even with no targets
  if (ce_out) ce_out->assign(T, 0.0);
  if (w[0] > 0) fail("contract", "position 0 cannot be a target");

  std::vector<int> tgt;  // target token positions
  for (int t = 1; t < T; ++t)
    if (w[t] > 0) tgt.push_back(t);
  LossOut out;
  out.n_targets = static_cast<int>(tgt.size());
  if (tgt.empty()) return out;

  std::vector<LayerCache> caches;
  Mat x_resf, xf;
  Vec invrf;
  trunk_forward(tok, T, caches, x_resf, xf, invrf);

  const int n = out.n_targets;
  Mat xn_use(d, n);
  for (int k = 0; k < n; ++k) xn_use.col(k) = xf.col(tgt[k] - 1);
  Mat z(V, n);
  z.noalias() = cmat(p_, off_.lm, V, d) * xn_use;

  Mat dz;
  if (grad_scale > 0) dz.resize(V, n);
  for (int k = 0; k < n; ++k) {
    const int t = tgt[k];
    Eigen::VectorXd zc = z.col(k).template cast<double>();
    double mx = zc.maxCoeff();
    Eigen::VectorXd ex = (zc.array() - mx).exp();
    double sum = ex.sum();
    double lse = mx + std::log(sum);
    double ce = lse - zc(tok[t]);
    out.weighted_sum += w[t] * ce;
    if (ce_out) (*ce_out)[t] = ce;
    if (grad_scale > 0) {
      Eigen::VectorXd dcol = ex / sum;
      dcol(tok[t]) -= 1.0;
      dz.col(k) = (dcol * (w[t] * grad_scale)).template cast<S>();
    }
  }
  if (grad_scale <= 0) return out;

  // ---- backward ----
  const S scale = S(1) / std::sqrt(S(dh));
  mat(g_, off_.lm, V, d).noalias() += dz * xn_use.transpose();
  Mat dxn_use(d, n);
  dxn_use.noalias() = cmat(p_, off_.lm, V, d).transpose() * dz;
  Mat dxf = Mat::Zero(d, T);
  for (int k = 0; k < n; ++k) dxf.col(tgt[k] - 1) = dxn_use.col(k);

  Mat dx = rms_backward(x_resf, invrf, off_.lnf, dxf);

  for (int l = cfg_.n_layer - 1; l >= 0; --l) {
    LayerCache& c = caches[l];
    const auto& L = off_.layer[l];
    // x_out = x_res1 + Wf2 * relu(Wf1 * rms2(x_res1))
    mat(g_, L.wf2, d, cfg_.d_ff).noalias() += dx * c.f1.transpose();
    Mat df1(cfg_.d_ff, T);
    df1.noalias() = cmat(p_, L.wf2, d, cfg_.d_ff).transpose() * dx;
    df1 = (c.f1.array() > S(0)).select(df1, S(0));
    mat(g_, L.wf1, cfg_.d_ff, d).noalias() += df1 * c.xn2.transpose();
    Mat dxn2(d, T);
    dxn2.noalias() = cmat(p_, L.wf1, cfg_.d_ff, d).transpose() * df1;
    Mat dres1 = dx + rms_backward(c.x_res1, c.invr2, L.ln2, dxn2);

    // x_res1 = x_in + Wo * attn
    mat(g_, L.wo, d, d).noalias() += dres1 * c.attn_cat.transpose();
    Mat dattn(d, T);
    dattn.noalias() = cmat(p_, L.wo, d, d).transpose() * dres1;

    Mat dqkv(3 * d, T);
    auto dq = dqkv.topRows(d);
    auto dk = dqkv.middleRows(d, d);
    auto dv = dqkv.bottomRows(d);
    for (int hh = 0; hh < h; ++hh) {
      auto Qh = c.q.middleRows(hh * dh, dh);
      auto Kh = c.k.middleRows(hh * dh, dh);
      auto Vh = c.v.middleRows(hh * dh, dh);
      const Mat& P = c.probs[hh];
      auto dOh = dattn.middleRows(hh * dh, dh);
      dv.middleRows(hh * dh, dh).noalias() = dOh * P.transpose();
      Mat dP(T, T);
      dP.noalias() = Vh.transpose() * dOh;
      for (int i = 0; i < T; ++i) {
        auto pc = P.col(i).head(i + 1);
        auto dpc = dP.col(i).head(i + 1);
        S dot = pc.dot(dpc);
        dP.col(i).head(i + 1) = pc.array() * (dpc.array() - dot);
        if (i + 1 < T) dP.col(i).tail(T - i - 1).setZero();
      }
      dP *= scale;
      dq.middleRows(hh * dh, dh).noalias() = Kh * dP;
      dk.middleRows(hh * dh, dh).noalias() = Qh * dP.transpose();
    }
    mat(g_, L.qkv, 3 * d, d).noalias() += dqkv * c.xn1.transpose();
    Mat dxn1(d, T);
    dxn1.noalias() = cmat(p_, L.qkv, 3 * d, d).transpose() * dqkv;
    dx = dres1 + rms_backward(c.x_in, c.invr1, L.ln1, dxn1);
  }

  auto gtok = mat(g_, off_.tok, d, V);
  auto gpos = mat(g_, off_.pos, d, cfg_.context);
  for (int t = 0; t < T; ++t) {
    gtok.col(tok[t]) += dx.col(t);
    gpos.col(t) += dx.col(t);
  }
  return out;
}

template <class S>
typename Net<S>::Mat Net<S>::logits_range(const int* tok, int T, int c0,
                                          int c1) {
  if (c0 < 0 || c1 > T || c0 >= c1) fail("contract", "bad logits column range");
  std::vector<LayerCache> caches;
  Mat x_resf, xf;
  Vec invrf;
  trunk_forward(tok, T, caches, x_resf, xf, invrf);
  Mat z(cfg_.vocab, c1 - c0);
  z.noalias() = cmat(p_, off_.lm, cfg_.vocab, cfg_.d_model) *
                xf.middleCols(c0, c1 - c0);
  return z;
}

template <class S>
typename Net<S>::DecodeState Net<S>::make_state() const {
  DecodeState st;
  st.kc.assign(cfg_.n_layer, Mat::Zero(cfg_.d_model, cfg_.context));
  st.vc.assign(cfg_.n_layer, Mat::Zero(cfg_.d_model, cfg_.context));
  return st;
}

template <class S>
Eigen::VectorXd Net<S>::prefill(const int* tok, int T, DecodeState& st) {
  if (st.len != 0) fail("contract", "prefill requires an empty decode state");
  std::vector<LayerCache> caches;
  Mat x_resf, xf;
  Vec invrf;
  trunk_forward(tok, T, caches, x_resf, xf, invrf);
  for (int l = 0; l < cfg_.n_layer; ++l) {
    st.kc[l].leftCols(T) = caches[l].k;
    st.vc[l].leftCols(T) = caches[l].v;
  }
  st.len = T;
  Eigen::VectorXd z =
      (cmat(p_, off_.lm, cfg_.vocab, cfg_.d_model) * xf.col(T - 1))
          .template cast<double>();
  return z;
}

template <class S>
Eigen::VectorXd Net<S>::step(int tok, DecodeState& st) {
  const int d = cfg_.d_model, h = cfg_.n_head, dh = d / h, dff = cfg_.d_ff;
  if (st.len >= cfg_.context) fail("contract", "decode past context length");
  if (tok < 0 || tok >= cfg_.vocab) fail("contract", "token id out of range");
  const int pos = st.len;
  const S scale = S(1) / std::sqrt(S(dh));

  Vec x = cmat(p_, off_.tok, d, cfg_.vocab).col(tok) +
          cmat(p_, off_.pos, d, cfg_.context).col(pos);
  for (int l = 0; l < cfg_.n_layer; ++l) {
    const auto& L = off_.layer[l];
    auto g1 = cmat(p_, L.ln1, d, 1);
    S r1 = S(1) / std::sqrt(x.squaredNorm() / S(d) + S(kRmsEps));
    Vec xn = g1.col(0).cwiseProduct(x) * r1;
    Vec qkv(3 * d);
    qkv.noalias() = cmat(p_, L.qkv, 3 * d, d) * xn;
    st.kc[l].col(pos) = qkv.segment(d, d);
    st.vc[l].col(pos) = qkv.segment(2 * d, d);
    Vec attn(d);
    for (int hh = 0; hh < h; ++hh) {
      auto Kh = st.kc[l].block(hh * dh, 0, dh, pos + 1);
      auto Vh = st.vc[l].block(hh * dh, 0, dh, pos + 1);
      Vec sc(pos + 1);
      sc.noalias() = Kh.transpose() * qkv.segment(hh * dh, dh);
      sc *= scale;
      S mx = sc.maxCoeff();
      sc = (sc.array() - mx).exp();
      sc /= sc.sum();
      attn.segment(hh * dh, dh).noalias() = Vh * sc;
    }
    x.noalias() += cmat(p_, L.wo, d, d) * attn;
    auto g2 = cmat(p_, L.ln2, d, 1);
    S r2 = S(1) / std::sqrt(x.squaredNorm() / S(d) + S(kRmsEps));
    Vec xn2 = g2.col(0).cwiseProduct(x) * r2;
    Vec f1(dff);
    f1.noalias() = cmat(p_, L.wf1, dff, d) * xn2;
    f1 = f1.cwiseMax(S(0));
    x.noalias() += cmat(p_, L.wf2, d, dff) * f1;
  }
  auto gf = cmat(p_, off_.lnf, d, 1);
  S rf = S(1) / std::sqrt(x.squaredNorm() / S(d) + S(kRmsEps));
  Vec xf = gf.col(0).cwiseProduct(x) * rf;
  Eigen::VectorXd z = (cmat(p_, off_.lm, cfg_.vocab, d) * xf).template cast<double>();
  st.len++;
  return z;
}

template <class S>
void Net<S>::adam_update(double lr, double beta1, double beta2, double eps,
                         double weight_decay) {
  adam_t_++;
  using Arr = Eigen::Map<Eigen::Array<S, Eigen::Dynamic, 1>>;
  Arr p(p_.data(), p_.size());
  Arr g(g_.data(), g_.size());
  Arr m(m_.data(), m_.size());
  Arr v(v_.data(), v_.size());
  const S b1 = S(beta1), b2 = S(beta2);
  const S bc1 = S(1.0 - std::pow(beta1, static_cast<double>(adam_t_)));
  const S bc2 = S(1.0 - std::pow(beta2, static_cast<double>(adam_t_)));
  m = b1 * m + (S(1) - b1) * g;
  v = b2 * v + (S(1) - b2) * g * g;
  p -= S(lr) * ((m / bc1) / ((v / bc2).sqrt() + S(eps)) + S(weight_decay) * p);
}

template class Net<float>;
template class Net<double>;

}  // namespace skipthink
