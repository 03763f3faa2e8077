#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssmpc/rng.hpp"

namespace ssmpc {

struct ModelConfig {
  int d_model = 128;
  int n_heads = 4;
  int n_enc_layers = 2;
  int n_dec_layers = 2;
  int ffn_dim = 512;
  int max_positions = 512;
  int vocab_size = 0;
  double dropout = 0.0;
  uint64_t init_seed = 1;

  void validate() const {
    if (d_model < 1 || n_heads < 1 || d_model % n_heads != 0)
      throw std::invalid_argument("model: d_model must be a positive multiple of n_heads");
    if (n_enc_layers < 1 || n_dec_layers < 1 || ffn_dim < 1 || max_positions < 1)
      throw std::invalid_argument("model: bad layer/ffn/position sizes");
    if (vocab_size < 1) throw std::invalid_argument("model: vocab_size unset");
    if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("model: dropout outside [0,1)");
  }
};

// Pre-LN transformer encoder-decoder. A single embedding matrix serves the
// encoder input, decoder input, encoder LM head and decoder LM head; logits
// are always hidden * E^T.
template <typename S>
struct ModelT {
  using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  struct LayerNormParams {
    Mat g, b;  // 1 x D
  };
  struct AttentionParams {
    Mat wq, wk, wv, wo;  // D x D
    Mat bq, bk, bv, bo;  // 1 x D
  };
  struct FfnParams {
    Mat w1, b1, w2, b2;  // D x F, 1 x F, F x D, 1 x D
  };
  struct EncLayerParams {
    LayerNormParams ln1;
    AttentionParams attn;
    LayerNormParams ln2;
    FfnParams ffn;
  };
  struct DecLayerParams {
    LayerNormParams ln1;
    AttentionParams self_attn;
    LayerNormParams ln2;
    AttentionParams cross_attn;
    LayerNormParams ln3;
    FfnParams ffn;
  };

  struct TensorRef {
    std::string name;
    Mat* mat;
    char init;  // 'n' normal(0, 0.02), 'z' zeros, 'o' ones
  };

  struct Params {
    Mat embedding;  // V x D, the one shared storage
    Mat pos_enc;    // P x D
    Mat pos_dec;    // P x D
    std::vector<EncLayerParams> enc;
    std::vector<DecLayerParams> dec;
    LayerNormParams enc_final;
    LayerNormParams dec_final;

    std::vector<TensorRef> tensors();
    long num_scalars();
    void set_zero();
    bool all_finite();
  };

  ModelConfig cfg;
  Params params;

  explicit ModelT(const ModelConfig& config) : cfg(config) { init_params(); }

  // --- caches -------------------------------------------------------------

  struct LnCache {
    Mat xhat;  // T x D
    Mat rstd;  // T x 1
  };
  struct AttnCache {
    Mat q_in, kv_in;     // post-LN inputs
    Mat q, k, v;         // T x D / Tk x D
    std::vector<Mat> p;  // per-head softmax, T x Tk
    Mat concat;          // T x D, heads concatenated before output projection
  };
  struct FfnCache {
    Mat f_in;  // post-LN input, T x D
    Mat h1;    // pre-activation, T x F
  };
  struct DropMask {
    Mat keep;  // empty when dropout off; else 0 / 1/(1-p) scaling
    bool active() const { return keep.size() > 0; }
  };
  struct EncLayerCache {
    Mat x_in;
    LnCache ln1;
    AttnCache attn;
    DropMask drop_attn;
    Mat x_mid;
    LnCache ln2;
    FfnCache ffn;
    DropMask drop_ffn;
  };
  struct DecLayerCache {
    Mat y_in;
    LnCache ln1;
    AttnCache self_attn;
    DropMask drop_self;
    Mat y_mid1;
    LnCache ln2;
    AttnCache cross;
    DropMask drop_cross;
    Mat y_mid2;
    LnCache ln3;
    FfnCache ffn;
    DropMask drop_ffn;
  };
  struct EncoderActs {
    std::vector<int> ids;
    std::vector<EncLayerCache> layers;
    Mat x_last;        // input to the final LN
    LnCache final_ln;
    Mat h;             // T x D final hidden states
    Mat logits;        // T x V, present when requested
  };
  struct DecoderActs {
    std::vector<int> prefix;
    std::vector<DecLayerCache> layers;
    Mat y_last;
    LnCache final_ln;
    Mat h;
    Mat logits;
  };

  // --- forward / backward ---------------------------------------------------

  // Bidirectional self-attention; dropout_rng non-null enables train-mode dropout.
  EncoderActs encoder_forward(const std::vector<int>& ids, bool want_logits,
                              Rng* dropout_rng = nullptr) const;
  // Causal self-attention plus cross-attention over enc_h.
  DecoderActs decoder_forward(const std::vector<int>& prefix, const Mat& enc_h,
                              bool want_logits = true, Rng* dropout_rng = nullptr) const;

  // dlogits and d_h_extra (gradient arriving at the final hidden states, e.g.
  // from decoder cross-attention) may be empty.
  void encoder_backward(const EncoderActs& acts, const Mat& dlogits, const Mat& d_h_extra,
                        Params& grads) const;
  // Returns the gradient w.r.t. the encoder hidden states.
  Mat decoder_backward(const DecoderActs& acts, const Mat& dlogits, Params& grads) const;

  Params zero_grads() const;

 private:
  void init_params();

  // one attention block
  void attn_forward(const Mat& q_in, const Mat& kv_in, const AttentionParams& w, bool causal,
                    AttnCache& cache, Mat& out) const;
  void attn_backward(const Mat& dout, const AttnCache& cache, const AttentionParams& w,
                     AttentionParams& gw, Mat& dq_in, Mat& dkv_in) const;
  void ffn_forward(const Mat& f_in, const FfnParams& w, FfnCache& cache, Mat& out) const;
  void ffn_backward(const Mat& dout, const FfnCache& cache, const FfnParams& w, FfnParams& gw,
                    Mat& df_in) const;
  void make_dropout(DropMask& m, long rows, long cols, Rng* rng) const;
};

// --- shared small ops -------------------------------------------------------

template <typename S>
typename ModelT<S>::Mat softmax_rows(const typename ModelT<S>::Mat& x) {
  typename ModelT<S>::Mat out(x.rows(), x.cols());
  for (long i = 0; i < x.rows(); ++i) {
    const S mx = x.row(i).maxCoeff();
    out.row(i) = (x.row(i).array() - mx).exp();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

template <typename S>
void ln_forward(const typename ModelT<S>::Mat& x, const typename ModelT<S>::LayerNormParams& w,
                typename ModelT<S>::LnCache& cache, typename ModelT<S>::Mat& y) {
  constexpr S eps = static_cast<S>(1e-5);
  const long t = x.rows(), d = x.cols();
  cache.xhat.resize(t, d);
  cache.rstd.resize(t, 1);
  y.resize(t, d);
  for (long i = 0; i < t; ++i) {
    const S mu = x.row(i).mean();
    const S var = (x.row(i).array() - mu).square().mean();
    const S rstd = S(1) / std::sqrt(var + eps);
    cache.rstd(i, 0) = rstd;
    cache.xhat.row(i) = (x.row(i).array() - mu) * rstd;
    y.row(i) = cache.xhat.row(i).cwiseProduct(w.g.row(0)) + w.b.row(0);
  }
}

template <typename S>
void ln_backward(const typename ModelT<S>::Mat& dy, const typename ModelT<S>::LnCache& cache,
                 const typename ModelT<S>::LayerNormParams& w,
                 typename ModelT<S>::LayerNormParams& gw, typename ModelT<S>::Mat& dx) {
  const long t = dy.rows(), d = dy.cols();
  dx.resize(t, d);
  gw.g.row(0) += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
  gw.b.row(0) += dy.colwise().sum();
  for (long i = 0; i < t; ++i) {
    auto dxhat = (dy.row(i).array() * w.g.row(0).array()).eval();
    const S m1 = dxhat.mean();
    const S m2 = (dxhat * cache.xhat.row(i).array()).mean();
    dx.row(i) =
        ((dxhat - m1 - cache.xhat.row(i).array() * m2) * cache.rstd(i, 0)).matrix();
  }
}

template <typename S>
S gelu_scalar(S x) {
  return S(0.5) * x * (S(1) + std::erf(x * S(0.7071067811865475244)));
}

template <typename S>
S gelu_grad_scalar(S x) {
  const S cdf = S(0.5) * (S(1) + std::erf(x * S(0.7071067811865475244)));
  const S pdf = S(0.3989422804014326779) * std::exp(S(-0.5) * x * x);
  return cdf + x * pdf;
}

// --- checkpoints --------------------------------------------------------------

struct CheckpointMeta {
  uint64_t vocab_hash = 0;
  uint64_t seed = 0;
  uint64_t config_digest = 0;
  std::string version;
};

template <typename S>
void save_checkpoint(const std::string& path, const ModelT<S>& model, const CheckpointMeta& meta);

// Verifies vocab hash (when expected_vocab_hash != 0) and tensor shapes.
template <typename S>
ModelT<S> load_checkpoint(const std::string& path, uint64_t expected_vocab_hash,
                          CheckpointMeta* meta_out = nullptr);

}  // namespace ssmpc

#include "ssmpc/model_impl.hpp"
