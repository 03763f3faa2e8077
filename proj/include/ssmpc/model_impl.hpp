#pragma once

// Implementation of ModelT. Included at the end of model.hpp.

#include <cstring>
#include <sstream>

#include "ssmpc/io.hpp"
#include "ssmpc/version.hpp"

namespace ssmpc {

// --- parameter registry -------------------------------------------------------

template <typename S>
std::vector<typename ModelT<S>::TensorRef> ModelT<S>::Params::tensors() {
  std::vector<TensorRef> out;
  auto add = [&out](const std::string& name, Mat& m, char init) {
    out.push_back(TensorRef{name, &m, init});
  };
  auto add_ln = [&](const std::string& prefix, LayerNormParams& ln) {
    add(prefix + ".g", ln.g, 'o');
    add(prefix + ".b", ln.b, 'z');
  };
  auto add_attn = [&](const std::string& prefix, AttentionParams& a) {
    add(prefix + ".wq", a.wq, 'n');
    add(prefix + ".bq", a.bq, 'z');
    add(prefix + ".wk", a.wk, 'n');
    add(prefix + ".bk", a.bk, 'z');
    add(prefix + ".wv", a.wv, 'n');
    add(prefix + ".bv", a.bv, 'z');
    add(prefix + ".wo", a.wo, 'n');
    add(prefix + ".bo", a.bo, 'z');
  };
  auto add_ffn = [&](const std::string& prefix, FfnParams& f) {
    add(prefix + ".w1", f.w1, 'n');
    add(prefix + ".b1", f.b1, 'z');
    add(prefix + ".w2", f.w2, 'n');
    add(prefix + ".b2", f.b2, 'z');
  };

  add("embedding", embedding, 'n');
  add("pos_enc", pos_enc, 'n');
  add("pos_dec", pos_dec, 'n');
  for (size_t i = 0; i < enc.size(); ++i) {
    const std::string p = "enc." + std::to_string(i);
    add_ln(p + ".ln1", enc[i].ln1);
    add_attn(p + ".attn", enc[i].attn);
    add_ln(p + ".ln2", enc[i].ln2);
    add_ffn(p + ".ffn", enc[i].ffn);
  }
  for (size_t i = 0; i < dec.size(); ++i) {
    const std::string p = "dec." + std::to_string(i);
    add_ln(p + ".ln1", dec[i].ln1);
    add_attn(p + ".self", dec[i].self_attn);
    add_ln(p + ".ln2", dec[i].ln2);
    add_attn(p + ".cross", dec[i].cross_attn);
    add_ln(p + ".ln3", dec[i].ln3);
    add_ffn(p + ".ffn", dec[i].ffn);
  }
  add_ln("enc_final", enc_final);
  add_ln("dec_final", dec_final);
  return out;
}

template <typename S>
long ModelT<S>::Params::num_scalars() {
  long n = 0;
  for (const auto& t : tensors()) n += static_cast<long>(t.mat->size());
  return n;
}

template <typename S>
void ModelT<S>::Params::set_zero() {
  for (auto& t : tensors()) t.mat->setZero();
}

template <typename S>
bool ModelT<S>::Params::all_finite() {
  for (auto& t : tensors())
    if (!t.mat->allFinite()) return false;
  return true;
}

template <typename S>
void ModelT<S>::init_params() {
  cfg.validate();
  const int d = cfg.d_model, f = cfg.ffn_dim, v = cfg.vocab_size, p = cfg.max_positions;

  params.embedding.resize(v, d);
  params.pos_enc.resize(p, d);
  params.pos_dec.resize(p, d);
  auto size_ln = [d](LayerNormParams& ln) {
    ln.g.resize(1, d);
    ln.b.resize(1, d);
  };
  auto size_attn = [d](AttentionParams& a) {
    a.wq.resize(d, d);
    a.wk.resize(d, d);
    a.wv.resize(d, d);
    a.wo.resize(d, d);
    a.bq.resize(1, d);
    a.bk.resize(1, d);
    a.bv.resize(1, d);
    a.bo.resize(1, d);
  };
  auto size_ffn = [d, f](FfnParams& w) {
    w.w1.resize(d, f);
    w.b1.resize(1, f);
    w.w2.resize(f, d);
    w.b2.resize(1, d);
  };
  params.enc.resize(cfg.n_enc_layers);
  for (auto& l : params.enc) {
    size_ln(l.ln1);
    size_attn(l.attn);
    size_ln(l.ln2);
    size_ffn(l.ffn);
  }
  params.dec.resize(cfg.n_dec_layers);
  for (auto& l : params.dec) {
    size_ln(l.ln1);
    size_attn(l.self_attn);
    size_ln(l.ln2);
    size_attn(l.cross_attn);
    size_ln(l.ln3);
    size_ffn(l.ffn);
  }
  size_ln(params.enc_final);
  size_ln(params.dec_final);

  // One RNG pass over the fixed tensor order makes initialization a pure
  // function of (config, seed).
  Rng rng(derive_seed(cfg.init_seed, {0x1217u}));
  for (auto& t : params.tensors()) {
    switch (t.init) {
      case 'o': t.mat->setOnes(); break;
      case 'z': t.mat->setZero(); break;
      default:
        for (long i = 0; i < t.mat->rows(); ++i)
          for (long j = 0; j < t.mat->cols(); ++j)
            (*t.mat)(i, j) = static_cast<S>(0.02 * rng.normal());
    }
  }
}

template <typename S>
typename ModelT<S>::Params ModelT<S>::zero_grads() const {
  ModelT<S> scratch(cfg);  // sized identically; values overwritten below
  scratch.params.set_zero();
  return std::move(scratch.params);
}

// --- dropout -------------------------------------------------------------

template <typename S>
void ModelT<S>::make_dropout(DropMask& m, long rows, long cols, Rng* rng) const {
  if (rng == nullptr || cfg.dropout <= 0.0) return;
  const S scale = static_cast<S>(1.0 / (1.0 - cfg.dropout));
  m.keep.resize(rows, cols);
  for (long i = 0; i < rows; ++i)
    for (long j = 0; j < cols; ++j)
      m.keep(i, j) = rng->bernoulli(cfg.dropout) ? S(0) : scale;
}

// --- attention -------------------------------------------------------------

template <typename S>
void ModelT<S>::attn_forward(const Mat& q_in, const Mat& kv_in, const AttentionParams& w,
                             bool causal, AttnCache& cache, Mat& out) const {
  const long t = q_in.rows(), tk = kv_in.rows();
  const int nh = cfg.n_heads, hd = cfg.d_model / cfg.n_heads;
  const S inv_sqrt = S(1) / std::sqrt(static_cast<S>(hd));

  cache.q_in = q_in;
  cache.kv_in = kv_in;
  cache.q.noalias() = q_in * w.wq;
  cache.q.rowwise() += w.bq.row(0);
  cache.k.noalias() = kv_in * w.wk;
  cache.k.rowwise() += w.bk.row(0);
  cache.v.noalias() = kv_in * w.wv;
  cache.v.rowwise() += w.bv.row(0);

  cache.p.assign(nh, Mat());
  cache.concat.resize(t, cfg.d_model);
  for (int h = 0; h < nh; ++h) {
    auto qh = cache.q.middleCols(h * hd, hd);
    auto kh = cache.k.middleCols(h * hd, hd);
    auto vh = cache.v.middleCols(h * hd, hd);
    Mat scores = (qh * kh.transpose()) * inv_sqrt;  // t x tk
    if (causal) {
      const S neg_inf = -std::numeric_limits<S>::infinity();
      for (long i = 0; i < t; ++i)
        for (long j = i + 1; j < tk; ++j) scores(i, j) = neg_inf;
    }
    cache.p[h] = softmax_rows<S>(scores);
    cache.concat.middleCols(h * hd, hd).noalias() = cache.p[h] * vh;
  }
  out.noalias() = cache.concat * w.wo;
  out.rowwise() += w.bo.row(0);
}

template <typename S>
void ModelT<S>::attn_backward(const Mat& dout, const AttnCache& cache, const AttentionParams& w,
                              AttentionParams& gw, Mat& dq_in, Mat& dkv_in) const {
  const long t = cache.q.rows(), tk = cache.k.rows();
  const int nh = cfg.n_heads, hd = cfg.d_model / cfg.n_heads;
  const S inv_sqrt = S(1) / std::sqrt(static_cast<S>(hd));

  gw.wo.noalias() += cache.concat.transpose() * dout;
  gw.bo.row(0) += dout.colwise().sum();
  Mat dconcat = dout * w.wo.transpose();

  Mat dq(t, cfg.d_model), dk(tk, cfg.d_model), dv(tk, cfg.d_model);
  for (int h = 0; h < nh; ++h) {
    auto qh = cache.q.middleCols(h * hd, hd);
    auto kh = cache.k.middleCols(h * hd, hd);
    auto vh = cache.v.middleCols(h * hd, hd);
    auto dch = dconcat.middleCols(h * hd, hd);
    const Mat& p = cache.p[h];

    Mat dp = dch * vh.transpose();                 // t x tk
    dv.middleCols(h * hd, hd).noalias() = p.transpose() * dch;
    // softmax backward per row: ds = p .* (dp - rowdot(dp, p))
    Mat ds(t, tk);
    for (long i = 0; i < t; ++i) {
      const S dot = dp.row(i).dot(p.row(i));
      ds.row(i) = (p.row(i).array() * (dp.row(i).array() - dot)).matrix();
    }
    dq.middleCols(h * hd, hd).noalias() = (ds * kh) * inv_sqrt;
    dk.middleCols(h * hd, hd).noalias() = (ds.transpose() * qh) * inv_sqrt;
  }

  gw.wq.noalias() += cache.q_in.transpose() * dq;
  gw.bq.row(0) += dq.colwise().sum();
  gw.wk.noalias() += cache.kv_in.transpose() * dk;
  gw.bk.row(0) += dk.colwise().sum();
  gw.wv.noalias() += cache.kv_in.transpose() * dv;
  gw.bv.row(0) += dv.colwise().sum();

  dq_in.noalias() = dq * w.wq.transpose();
  dkv_in.noalias() = dk * w.wk.transpose();
  dkv_in.noalias() += dv * w.wv.transpose();
}

// --- feed-forward ------------------------------------------------------------

template <typename S>
void ModelT<S>::ffn_forward(const Mat& f_in, const FfnParams& w, FfnCache& cache, Mat& out) const {
  cache.f_in = f_in;
  cache.h1.noalias() = f_in * w.w1;
  cache.h1.rowwise() += w.b1.row(0);
  Mat act = cache.h1.unaryExpr([](S x) { return gelu_scalar(x); });
  out.noalias() = act * w.w2;
  out.rowwise() += w.b2.row(0);
}

template <typename S>
void ModelT<S>::ffn_backward(const Mat& dout, const FfnCache& cache, const FfnParams& w,
                             FfnParams& gw, Mat& df_in) const {
  Mat act = cache.h1.unaryExpr([](S x) { return gelu_scalar(x); });
  gw.w2.noalias() += act.transpose() * dout;
  gw.b2.row(0) += dout.colwise().sum();
  Mat dact = dout * w.w2.transpose();
  Mat dh1 =
      dact.cwiseProduct(cache.h1.unaryExpr([](S x) { return gelu_grad_scalar(x); }));
  gw.w1.noalias() += cache.f_in.transpose() * dh1;
  gw.b1.row(0) += dh1.colwise().sum();
  df_in.noalias() = dh1 * w.w1.transpose();
}

// --- encoder -------------------------------------------------------------

template <typename S>
typename ModelT<S>::EncoderActs ModelT<S>::encoder_forward(const std::vector<int>& ids,
                                                           bool want_logits,
                                                           Rng* dropout_rng) const {
  const long t = static_cast<long>(ids.size());
  if (t < 1) throw std::invalid_argument("encoder: empty input");
  if (t > cfg.max_positions) throw std::invalid_argument("encoder: sequence exceeds max_positions");
  for (int id : ids)
    if (id < 0 || id >= cfg.vocab_size) throw std::invalid_argument("encoder: token id out of range");

  EncoderActs acts;
  acts.ids = ids;
  Mat x(t, cfg.d_model);
  for (long i = 0; i < t; ++i)
    x.row(i) = params.embedding.row(ids[i]) + params.pos_enc.row(i);

  acts.layers.resize(params.enc.size());
  for (size_t li = 0; li < params.enc.size(); ++li) {
    const auto& w = params.enc[li];
    auto& c = acts.layers[li];
    c.x_in = x;
    Mat a, attn_out;
    ln_forward<S>(c.x_in, w.ln1, c.ln1, a);
    attn_forward(a, a, w.attn, /*causal=*/false, c.attn, attn_out);
    make_dropout(c.drop_attn, attn_out.rows(), attn_out.cols(), dropout_rng);
    if (c.drop_attn.active()) attn_out = attn_out.cwiseProduct(c.drop_attn.keep);
    c.x_mid = c.x_in + attn_out;
    Mat f, ffn_out;
    ln_forward<S>(c.x_mid, w.ln2, c.ln2, f);
    ffn_forward(f, w.ffn, c.ffn, ffn_out);
    make_dropout(c.drop_ffn, ffn_out.rows(), ffn_out.cols(), dropout_rng);
    if (c.drop_ffn.active()) ffn_out = ffn_out.cwiseProduct(c.drop_ffn.keep);
    x = c.x_mid + ffn_out;
  }

  acts.x_last = x;
  ln_forward<S>(acts.x_last, params.enc_final, acts.final_ln, acts.h);
  if (want_logits) {
    acts.logits.noalias() = acts.h * params.embedding.transpose();
  }
  return acts;
}

template <typename S>
void ModelT<S>::encoder_backward(const EncoderActs& acts, const Mat& dlogits, const Mat& d_h_extra,
                                 Params& grads) const {
  const long t = static_cast<long>(acts.ids.size());
  Mat dh = Mat::Zero(t, cfg.d_model);
  if (dlogits.size() > 0) {
    dh.noalias() += dlogits * params.embedding;
    grads.embedding.noalias() += dlogits.transpose() * acts.h;
  }
  if (d_h_extra.size() > 0) dh += d_h_extra;

  Mat dx;
  ln_backward<S>(dh, acts.final_ln, params.enc_final, grads.enc_final, dx);

  for (long li = static_cast<long>(params.enc.size()) - 1; li >= 0; --li) {
    const auto& w = params.enc[li];
    const auto& c = acts.layers[li];
    auto& gw = grads.enc[li];

    Mat d_ffn_out = dx;
    if (c.drop_ffn.active()) d_ffn_out = d_ffn_out.cwiseProduct(c.drop_ffn.keep);
    Mat df, dx_mid_ln;
    ffn_backward(d_ffn_out, c.ffn, w.ffn, gw.ffn, df);
    ln_backward<S>(df, c.ln2, w.ln2, gw.ln2, dx_mid_ln);
    Mat dx_mid = dx + dx_mid_ln;

    Mat d_attn_out = dx_mid;
    if (c.drop_attn.active()) d_attn_out = d_attn_out.cwiseProduct(c.drop_attn.keep);
    Mat dq_in, dkv_in, da_ln;
    attn_backward(d_attn_out, c.attn, w.attn, gw.attn, dq_in, dkv_in);
    Mat da = dq_in + dkv_in;  // self-attention: same input twice
    ln_backward<S>(da, c.ln1, w.ln1, gw.ln1, da_ln);
    dx = dx_mid + da_ln;
  }

  for (long i = 0; i < t; ++i) {
    grads.embedding.row(acts.ids[i]) += dx.row(i);
    grads.pos_enc.row(i) += dx.row(i);
  }
}

// --- decoder -------------------------------------------------------------

template <typename S>
typename ModelT<S>::DecoderActs ModelT<S>::decoder_forward(const std::vector<int>& prefix,
                                                           const Mat& enc_h, bool want_logits,
                                                           Rng* dropout_rng) const {
  const long u = static_cast<long>(prefix.size());
  if (u < 1) throw std::invalid_argument("decoder: empty prefix");
  if (u > cfg.max_positions) throw std::invalid_argument("decoder: prefix exceeds max_positions");
  if (enc_h.cols() != cfg.d_model || enc_h.rows() < 1)
    throw std::invalid_argument("decoder: bad encoder states");
  for (int id : prefix)
    if (id < 0 || id >= cfg.vocab_size) throw std::invalid_argument("decoder: token id out of range");

  DecoderActs acts;
  acts.prefix = prefix;
  Mat y(u, cfg.d_model);
  for (long i = 0; i < u; ++i)
    y.row(i) = params.embedding.row(prefix[i]) + params.pos_dec.row(i);

  acts.layers.resize(params.dec.size());
  for (size_t li = 0; li < params.dec.size(); ++li) {
    const auto& w = params.dec[li];
    auto& c = acts.layers[li];
    c.y_in = y;
    Mat a, self_out;
    ln_forward<S>(c.y_in, w.ln1, c.ln1, a);
    attn_forward(a, a, w.self_attn, /*causal=*/true, c.self_attn, self_out);
    make_dropout(c.drop_self, self_out.rows(), self_out.cols(), dropout_rng);
    if (c.drop_self.active()) self_out = self_out.cwiseProduct(c.drop_self.keep);
    c.y_mid1 = c.y_in + self_out;

    Mat q, cross_out;
    ln_forward<S>(c.y_mid1, w.ln2, c.ln2, q);
    attn_forward(q, enc_h, w.cross_attn, /*causal=*/false, c.cross, cross_out);
    make_dropout(c.drop_cross, cross_out.rows(), cross_out.cols(), dropout_rng);
    if (c.drop_cross.active()) cross_out = cross_out.cwiseProduct(c.drop_cross.keep);
    c.y_mid2 = c.y_mid1 + cross_out;

    Mat f, ffn_out;
    ln_forward<S>(c.y_mid2, w.ln3, c.ln3, f);
    ffn_forward(f, w.ffn, c.ffn, ffn_out);
    make_dropout(c.drop_ffn, ffn_out.rows(), ffn_out.cols(), dropout_rng);
    if (c.drop_ffn.active()) ffn_out = ffn_out.cwiseProduct(c.drop_ffn.keep);
    y = c.y_mid2 + ffn_out;
  }

  acts.y_last = y;
  ln_forward<S>(acts.y_last, params.dec_final, acts.final_ln, acts.h);
  if (want_logits) {
    acts.logits.noalias() = acts.h * params.embedding.transpose();
  }
  return acts;
}

template <typename S>
typename ModelT<S>::Mat ModelT<S>::decoder_backward(const DecoderActs& acts, const Mat& dlogits,
                                                    Params& grads) const {
  const long u = static_cast<long>(acts.prefix.size());
  const long te = acts.layers.empty() ? 0 : acts.layers[0].cross.kv_in.rows();
  Mat d_enc_h = Mat::Zero(te, cfg.d_model);

  Mat dh = Mat::Zero(u, cfg.d_model);
  if (dlogits.size() > 0) {
    dh.noalias() += dlogits * params.embedding;
    grads.embedding.noalias() += dlogits.transpose() * acts.h;
  }

  Mat dy;
  ln_backward<S>(dh, acts.final_ln, params.dec_final, grads.dec_final, dy);

  for (long li = static_cast<long>(params.dec.size()) - 1; li >= 0; --li) {
    const auto& w = params.dec[li];
    const auto& c = acts.layers[li];
    auto& gw = grads.dec[li];

    Mat d_ffn_out = dy;
    if (c.drop_ffn.active()) d_ffn_out = d_ffn_out.cwiseProduct(c.drop_ffn.keep);
    Mat df, dmid2_ln;
    ffn_backward(d_ffn_out, c.ffn, w.ffn, gw.ffn, df);
    ln_backward<S>(df, c.ln3, w.ln3, gw.ln3, dmid2_ln);
    Mat dy_mid2 = dy + dmid2_ln;

    Mat d_cross_out = dy_mid2;
    if (c.drop_cross.active()) d_cross_out = d_cross_out.cwiseProduct(c.drop_cross.keep);
    Mat dq_in, dkv_in, dmid1_ln;
    attn_backward(d_cross_out, c.cross, w.cross_attn, gw.cross_attn, dq_in, dkv_in);
    d_enc_h += dkv_in;
    ln_backward<S>(dq_in, c.ln2, w.ln2, gw.ln2, dmid1_ln);
    Mat dy_mid1 = dy_mid2 + dmid1_ln;

    Mat d_self_out = dy_mid1;
    if (c.drop_self.active()) d_self_out = d_self_out.cwiseProduct(c.drop_self.keep);
    Mat dsq, dskv, dself_ln;
    attn_backward(d_self_out, c.self_attn, w.self_attn, gw.self_attn, dsq, dskv);
    Mat dself = dsq + dskv;
    ln_backward<S>(dself, c.ln1, w.ln1, gw.ln1, dself_ln);
    dy = dy_mid1 + dself_ln;
  }

  for (long i = 0; i < u; ++i) {
    grads.embedding.row(acts.prefix[i]) += dy.row(i);
    grads.pos_dec.row(i) += dy.row(i);
  }
  return d_enc_h;
}

// --- checkpoints --------------------------------------------------------------

namespace detail {

template <typename T>
void put_pod(std::string& buf, const T& v) {
  buf.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get_pod(const std::string& buf, size_t& off) {
  if (off + sizeof(T) > buf.size()) throw std::runtime_error("checkpoint: truncated file");
  T v;
  std::memcpy(&v, buf.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}

inline void put_str(std::string& buf, const std::string& s) {
  put_pod<uint32_t>(buf, static_cast<uint32_t>(s.size()));
  buf.append(s);
}

inline std::string get_str(const std::string& buf, size_t& off) {
  const auto n = get_pod<uint32_t>(buf, off);
  if (off + n > buf.size()) throw std::runtime_error("checkpoint: truncated string");
  std::string s = buf.substr(off, n);
  off += n;
  return s;
}

}  // namespace detail

inline constexpr char kCheckpointMagic[8] = {'S', 'S', 'M', 'P', 'C', 'C', 'K', 'P'};
inline constexpr uint32_t kCheckpointVersion = 1;

template <typename S>
void save_checkpoint(const std::string& path, const ModelT<S>& model, const CheckpointMeta& meta) {
  std::string buf;
  buf.append(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::put_pod<uint32_t>(buf, kCheckpointVersion);
  detail::put_pod<uint32_t>(buf, static_cast<uint32_t>(sizeof(S)));
  detail::put_pod<uint64_t>(buf, meta.vocab_hash);
  detail::put_pod<uint64_t>(buf, meta.seed);
  detail::put_pod<uint64_t>(buf, meta.config_digest);
  detail::put_str(buf, meta.version.empty() ? std::string(kVersion) : meta.version);

  const ModelConfig& c = model.cfg;
  detail::put_pod<int32_t>(buf, c.d_model);
  detail::put_pod<int32_t>(buf, c.n_heads);
  detail::put_pod<int32_t>(buf, c.n_enc_layers);
  detail::put_pod<int32_t>(buf, c.n_dec_layers);
  detail::put_pod<int32_t>(buf, c.ffn_dim);
  detail::put_pod<int32_t>(buf, c.max_positions);
  detail::put_pod<int32_t>(buf, c.vocab_size);
  detail::put_pod<double>(buf, c.dropout);
  detail::put_pod<uint64_t>(buf, c.init_seed);

  auto refs = const_cast<typename ModelT<S>::Params&>(model.params).tensors();
  detail::put_pod<uint32_t>(buf, static_cast<uint32_t>(refs.size()));
  for (const auto& r : refs) {
    detail::put_str(buf, r.name);
    detail::put_pod<int64_t>(buf, static_cast<int64_t>(r.mat->rows()));
    detail::put_pod<int64_t>(buf, static_cast<int64_t>(r.mat->cols()));
    buf.append(reinterpret_cast<const char*>(r.mat->data()), sizeof(S) * r.mat->size());
  }
  atomic_write(path, buf);
}

template <typename S>
ModelT<S> load_checkpoint(const std::string& path, uint64_t expected_vocab_hash,
                          CheckpointMeta* meta_out) {
  const std::string buf = read_file(path);
  size_t off = 0;
  if (buf.size() < sizeof(kCheckpointMagic) ||
      std::memcmp(buf.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  off = sizeof(kCheckpointMagic);
  const auto version = detail::get_pod<uint32_t>(buf, off);
  if (version != kCheckpointVersion) throw std::runtime_error("checkpoint: unsupported version");
  const auto dtype = detail::get_pod<uint32_t>(buf, off);
  if (dtype != sizeof(S)) throw std::runtime_error("checkpoint: scalar width mismatch");

  CheckpointMeta meta;
  meta.vocab_hash = detail::get_pod<uint64_t>(buf, off);
  meta.seed = detail::get_pod<uint64_t>(buf, off);
  meta.config_digest = detail::get_pod<uint64_t>(buf, off);
  meta.version = detail::get_str(buf, off);
  if (expected_vocab_hash != 0 && meta.vocab_hash != expected_vocab_hash)
    throw std::runtime_error("checkpoint: vocabulary hash mismatch (model was trained with a different vocabulary)");

  ModelConfig c;
  c.d_model = detail::get_pod<int32_t>(buf, off);
  c.n_heads = detail::get_pod<int32_t>(buf, off);
  c.n_enc_layers = detail::get_pod<int32_t>(buf, off);
  c.n_dec_layers = detail::get_pod<int32_t>(buf, off);
  c.ffn_dim = detail::get_pod<int32_t>(buf, off);
  c.max_positions = detail::get_pod<int32_t>(buf, off);
  c.vocab_size = detail::get_pod<int32_t>(buf, off);
  c.dropout = detail::get_pod<double>(buf, off);
  c.init_seed = detail::get_pod<uint64_t>(buf, off);

  ModelT<S> model(c);
  auto refs = model.params.tensors();
  const auto count = detail::get_pod<uint32_t>(buf, off);
  if (count != refs.size()) throw std::runtime_error("checkpoint: tensor count mismatch");
  for (auto& r : refs) {
    const std::string name = detail::get_str(buf, off);
    const auto rows = detail::get_pod<int64_t>(buf, off);
    const auto cols = detail::get_pod<int64_t>(buf, off);
    if (name != r.name || rows != r.mat->rows() || cols != r.mat->cols())
      throw std::runtime_error("checkpoint: tensor layout mismatch at " + r.name);
    const size_t bytes = sizeof(S) * static_cast<size_t>(rows) * static_cast<size_t>(cols);
    if (off + bytes > buf.size()) throw std::runtime_error("checkpoint: truncated tensor data");
    std::memcpy(r.mat->data(), buf.data() + off, bytes);
    off += bytes;
  }
  if (meta_out != nullptr) *meta_out = meta;
  return model;
}

}  // namespace ssmpc
