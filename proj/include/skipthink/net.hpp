#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace skipthink {

struct NetConfig {
  int n_layer = 2;
  int d_model = 48;
  int n_head = 4;
  int d_ff = 96;
  int context = 512;
  int vocab = 0;
  double init_std = 0.08;

  bool operator==(const NetConfig&) const = default;
};

// Decoder-only causal transformer over a token sequence, scalar type S.
// Pre-norm blocks: x += Wo*Attn(rms(x)); x += Wf2*relu(Wf1*rms(x)); final
// rms norm then an untied output projection.  No biases.  The production
// instantiation is float; double exists for finite-difference gradient
// checks.  Softmax/cross-entropy at the output stage is always evaluated in
// double so losses agree with a double oracle over the same logits.
template <class S>
class Net {
 public:
  using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
  // Parameter-sized buffers are packet-aligned.  Vectorized Eigen assignments
  // split scalar/packet work at an address-dependent boundary, and the two
  // paths can round differently; pinning the allocation to the packet
  // alignment keeps training bit-identical regardless of heap placement.
  using Buf = std::vector<S, Eigen::aligned_allocator<S>>;

  explicit Net(const NetConfig& cfg);

  const NetConfig& config() const { return cfg_; }
  size_t n_params() const { return n_params_; }

  void init_params(uint64_t seed);

  Buf& params() { return p_; }
  const Buf& params() const { return p_; }
  Buf& grads() { return g_; }
  Buf& adam_m() { return m_; }
  Buf& adam_v() { return v_; }
  int64_t& adam_steps() { return adam_t_; }
  int64_t adam_steps() const { return adam_t_; }

  void zero_grad();

  struct LossOut {
    double weighted_sum = 0.0;  // sum over targets of w[t] * CE_t
    int n_targets = 0;          // positions with w[t] > 0
  };

  // Teacher-forced causal pass over tokens[0..T).  w has size T; w[t] > 0
  // marks token t as a prediction target (predicted from positions < t) and
  // weights its CE term.  w[0] must be 0.  When grad_scale > 0 the gradient
  // of grad_scale * weighted_sum is accumulated into grads().  ce_out, when
  // given, is filled with per-position CE (size T, zero at non-targets).
  LossOut forward_loss(const int* tok, int T, const double* w,
                       double grad_scale, std::vector<double>* ce_out);

  // Logits columns [c0, c1) of the causal pass; column t predicts token t+1.
  Mat logits_range(const int* tok, int T, int c0, int c1);

  struct DecodeState {
    std::vector<Mat> kc, vc;  // per layer, d_model x context key/value cache
    int len = 0;
  };
  DecodeState make_state() const;

  // Appends tokens to the state; returns the logits column (double) at the
  // last appended position.  prefill requires an empty state.
  Eigen::VectorXd prefill(const int* tok, int T, DecodeState& st);
  Eigen::VectorXd step(int tok, DecodeState& st);

  void adam_update(double lr, double beta1, double beta2, double eps,
                   double weight_decay);

 private:
  struct LayerCache {
    Mat x_in, xn1, q, k, v, attn_cat, x_res1, xn2, f1;
    Vec invr1, invr2;
    std::vector<Mat> probs;  // per head, T x T lower-triangular columns
  };

  struct Offsets {
    size_t tok, pos, lnf, lm;
    struct Layer {
      size_t ln1, qkv, wo, ln2, wf1, wf2;
    };
    std::vector<Layer> layer;
  };

  Eigen::Map<Mat> mat(Buf& a, size_t off, int r, int c) {
    return Eigen::Map<Mat>(a.data() + off, r, c);
  }
  Eigen::Map<const Mat> cmat(const Buf& a, size_t off, int r, int c) const {
    return Eigen::Map<const Mat>(a.data() + off, r, c);
  }

  void check_tokens(const int* tok, int T) const;
  void rms_forward(const Mat& x, size_t gain_off, Mat& y, Vec& invr);
  // returns dX; accumulates the gain gradient
  Mat rms_backward(const Mat& x, const Vec& invr, size_t gain_off,
                   const Mat& dy);
  void layer_forward(int l, Mat& x, LayerCache& c);
  void trunk_forward(const int* tok, int T, std::vector<LayerCache>& caches,
                     Mat& x_resf, Mat& xf, Vec& invrf);

  NetConfig cfg_;
  Offsets off_;
  size_t n_params_ = 0;
  Buf p_, g_, m_, v_;
  int64_t adam_t_ = 0;
};

extern template class Net<float>;
extern template class Net<double>;

}  // namespace skipthink
