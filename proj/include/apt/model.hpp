#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "apt/error.hpp"
#include "apt/rng.hpp"
#include "apt/tape.hpp"
#include "apt/tensor.hpp"

namespace apt {

// Additive key-mask value for padded positions; exp(x + kMaskedLogit) is
// exactly zero after row-max subtraction in both f32 and f64.
inline constexpr double kMaskedLogit = -1e9;
inline constexpr double kLayerNormEps = 1e-5;

// Architecture hyper-parameters. prefix_len applies to every layer unless
// layer_prefix_len (length num_layers) overrides it per layer.
struct ModelConfig {
  int num_layers = 2;
  int num_heads = 2;
  int model_dim = 16;
  int ffn_dim = 32;
  int vocab_size = 0;
  int max_seq_len = 64;
  int prefix_len = 4;
  std::vector<int> layer_prefix_len;
  double dropout = 0.0;

  int head_dim() const { return model_dim / num_heads; }

  int prefix_len_at(int layer) const {
    if (!layer_prefix_len.empty()) return layer_prefix_len.at(size_t(layer));
    return prefix_len;
  }

  void validate() const {
    if (num_layers < 0 || num_heads <= 0 || model_dim <= 0 || ffn_dim <= 0 ||
        vocab_size <= 0 || max_seq_len <= 0)
      throw RejectedInput("model config: extents must be positive");
    if (model_dim % num_heads != 0)
      throw RejectedInput("model config: model_dim " + std::to_string(model_dim) +
                          " not divisible by num_heads " + std::to_string(num_heads));
    if (prefix_len < 0) throw RejectedInput("model config: prefix_len must be >= 0");
    if (!layer_prefix_len.empty() && int(layer_prefix_len.size()) != num_layers)
      throw RejectedInput("model config: layer_prefix_len must have one entry per layer");
    for (int l : layer_prefix_len)
      if (l < 0) throw RejectedInput("model config: per-layer prefix lengths must be >= 0");
    if (dropout < 0.0 || dropout >= 1.0)
      throw RejectedInput("model config: dropout must be in [0,1)");
  }
};

template <typename T>
struct LayerWeights {
  Tensor<T> w_q, w_k, w_v, w_o;          // d x d attention projections
  Tensor<T> w1, b1, w2, b2;              // FFN
  Tensor<T> ln1_gain, ln1_bias, ln2_gain, ln2_bias;

  template <typename F>
  void visit(const std::string& prefix, F&& fn) {
    fn(prefix + ".w_q", w_q);
    fn(prefix + ".w_k", w_k);
    fn(prefix + ".w_v", w_v);
    fn(prefix + ".w_o", w_o);
    fn(prefix + ".w1", w1);
    fn(prefix + ".b1", b1);
    fn(prefix + ".w2", w2);
    fn(prefix + ".b2", b2);
    fn(prefix + ".ln1_gain", ln1_gain);
    fn(prefix + ".ln1_bias", ln1_bias);
    fn(prefix + ".ln2_gain", ln2_gain);
    fn(prefix + ".ln2_bias", ln2_bias);
  }
};

// Token + position embeddings and the L transformer layers. Acts as the
// stand-in for a pre-trained backbone: randomly initialized once, then
// frozen for prefix training.
template <typename T>
struct Backbone {
  Tensor<T> tok_embed;  // vocab x d
  Tensor<T> pos_embed;  // max_seq_len x d
  std::vector<LayerWeights<T>> layers;

  template <typename F>
  void visit(F&& fn) {
    fn("backbone.tok_embed", tok_embed);
    fn("backbone.pos_embed", pos_embed);
    for (size_t i = 0; i < layers.size(); ++i)
      layers[i].visit("backbone.layer" + std::to_string(i), fn);
  }
};

// Every tensor drawn from its own name-keyed stream, so adding or removing
// unrelated parameters never shifts another tensor's initial values.
template <typename T>
Backbone<T> init_backbone(const ModelConfig& cfg, const Rng& rng) {
  cfg.validate();
  Backbone<T> bb;
  const int d = cfg.model_dim;
  const double wstd = 1.0 / std::sqrt(double(d));
  // The backbone stays frozen, so the init has to leave the first-token
  // readout usable as-is rather than trusting training to repair it:
  //  - queries start near zero, making attention close to uniform, so every
  //    position aggregates the whole sentence instead of the arbitrary
  //    peaked mixture an untrained score matrix would commit to;
  //  - the FFN output projection starts small, keeping the nonlinear branch
  //    from drowning the linear attention signal in the residual stream.
  const double qstd = 0.05 * wstd;
  const double fstd = 0.02 / std::sqrt(double(cfg.ffn_dim));
  bb.layers.resize(size_t(cfg.num_layers));
  bb.visit([&](const std::string& name, Tensor<T>& t) {
    Rng r = rng.fork(name);
    if (name == "backbone.tok_embed")
      t = Tensor<T>::randn({cfg.vocab_size, d}, r, 0.1);
    else if (name == "backbone.pos_embed")
      t = Tensor<T>::randn({cfg.max_seq_len, d}, r, 0.02);
    else if (name.ends_with(".w_q"))
      t = Tensor<T>::randn({d, d}, r, qstd);
    else if (name.ends_with(".w_v") || name.ends_with(".w_o"))
      t = Tensor<T>::randn({d, d}, r, 4.0 * wstd);
    else if (name.ends_with(".w_k"))
      t = Tensor<T>::randn({d, d}, r, wstd);
    else if (name.ends_with(".w1"))
      t = Tensor<T>::randn({d, cfg.ffn_dim}, r, wstd);
    else if (name.ends_with(".b1"))
      t = Tensor<T>::zeros({cfg.ffn_dim});
    else if (name.ends_with(".w2"))
      t = Tensor<T>::randn({cfg.ffn_dim, d}, r, fstd);
    else if (name.ends_with(".b2"))
      t = Tensor<T>::zeros({d});
    else if (name.ends_with("_gain"))
      t = Tensor<T>::full({d}, T(1));
    else  // layer-norm bias
      t = Tensor<T>::zeros({d});
    t.requires_grad = true;  // trainable until freeze_base
  });
  return bb;
}

// A padded batch of token id rows. ids is row-major [batch x seq]; row e is
// real for the first lengths[e] positions.
struct TokenBatch {
  int batch = 0;
  int seq = 0;
  std::vector<int> ids;
  std::vector<int> lengths;

  static TokenBatch from_rows(const std::vector<std::vector<int>>& rows, int pad_id) {
    TokenBatch b;
    b.batch = int(rows.size());
    for (const auto& r : rows) b.seq = std::max(b.seq, int(r.size()));
    b.ids.assign(size_t(b.batch) * size_t(b.seq), pad_id);
    for (int e = 0; e < b.batch; ++e) {
      b.lengths.push_back(int(rows[size_t(e)].size()));
      std::copy(rows[size_t(e)].begin(), rows[size_t(e)].end(),
                b.ids.begin() + size_t(e) * size_t(b.seq));
    }
    return b;
  }

  std::vector<int> row(int e) const {
    return {ids.begin() + size_t(e) * size_t(seq),
            ids.begin() + size_t(e + 1) * size_t(seq)};
  }
};

// Hidden states h_0..h_L as tape node ids, per layer and per example; each
// node is an [s x d] matrix. h_0 is the embedding output.
template <typename T>
struct EncoderState {
  int batch = 0;
  int seq = 0;
  std::vector<std::vector<int>> hidden;  // [num_layers+1][batch]

  int layers() const { return int(hidden.size()) - 1; }

  // Dense [batch x seq x d] copy of one layer's hidden states.
  Tensor<T> materialize(const Tape<T>& tape, int layer) const {
    const auto& ids = hidden.at(size_t(layer));
    const Tensor<T>& first = tape.value(ids.at(0));
    Tensor<T> out(Shape{batch, seq, first.cols()});
    for (int e = 0; e < batch; ++e) {
      const Tensor<T>& h = tape.value(ids[size_t(e)]);
      std::copy(h.data.begin(), h.data.end(),
                out.data.begin() + size_t(e) * h.data.size());
    }
    return out;
  }
};

// Hook through which the encoder requests this layer's gated prefix for one
// example. h_first_id is the [1 x d] first-token slice of the previous
// layer's hidden states. Returns (key, value) node ids, each [l_i x d], or
// nullopt when the layer has no prefix.
template <typename T>
struct PrefixProvider {
  virtual ~PrefixProvider() = default;
  virtual std::optional<std::pair<int, int>> gated_prefix(Tape<T>& tape, int layer,
                                                          int h_first_id, int example) = 0;
};

// Per-tape leaf ids for one layer's weights.
template <typename T>
struct LayerLeafIds {
  int w_q, w_k, w_v, w_o, w1, b1, w2, b2, ln1_gain, ln1_bias, ln2_gain, ln2_bias;

  static LayerLeafIds make(Tape<T>& tape, LayerWeights<T>& lw) {
    return {tape.leaf(lw.w_q),     tape.leaf(lw.w_k),     tape.leaf(lw.w_v),
            tape.leaf(lw.w_o),     tape.leaf(lw.w1),      tape.leaf(lw.b1),
            tape.leaf(lw.w2),      tape.leaf(lw.b2),      tape.leaf(lw.ln1_gain),
            tape.leaf(lw.ln1_bias), tape.leaf(lw.ln2_gain), tape.leaf(lw.ln2_bias)};
  }
};

// ReLU(x W1 + b1) W2 + b2.
template <typename T>
int feed_forward(Tape<T>& tape, int x, const LayerLeafIds<T>& lw) {
  int h = tape.relu(tape.add_rowvec(tape.matmul(x, lw.w1), lw.b1));
  return tape.add_rowvec(tape.matmul(h, lw.w2), lw.b2);
}

// Multi-head attention over keys [P_k; K] and values [P_v; V]. The prefix
// pair, when present, is already gated and is attendable from every query;
// mask_row (id of a [l+s] additive row, or kNone) silences padded keys.
template <typename T>
int prefix_attention(Tape<T>& tape, int x, const LayerLeafIds<T>& lw,
                     std::optional<std::pair<int, int>> prefix_kv, int mask_row,
                     int num_heads) {
  const int d = tape.value(x).cols();
  const int dh = d / num_heads;
  int k = tape.matmul(x, lw.w_k);
  int v = tape.matmul(x, lw.w_v);
  int q = tape.matmul(x, lw.w_q);
  if (prefix_kv) {
    const Tensor<T>& pk = tape.value(prefix_kv->first);
    if (pk.rank() != 2 || pk.cols() != d)
      throw RejectedInput("prefix_attention: prefix width " +
                          std::to_string(pk.rank() == 2 ? pk.cols() : -1) +
                          " does not match model_dim " + std::to_string(d));
    k = tape.concat({prefix_kv->first, k}, 0);
    v = tape.concat({prefix_kv->second, v}, 0);
  }
  const T inv_sqrt = T(1) / std::sqrt(T(dh));
  std::vector<int> heads;
  heads.reserve(size_t(num_heads));
  for (int h = 0; h < num_heads; ++h) {
    int qh = tape.slice_cols(q, h * dh, (h + 1) * dh);
    int kh = tape.slice_cols(k, h * dh, (h + 1) * dh);
    int vh = tape.slice_cols(v, h * dh, (h + 1) * dh);
    int scores = tape.scale(tape.matmul(qh, tape.transpose(kh)), inv_sqrt);
    if (mask_row != Tape<T>::kNone) scores = tape.add_rowvec(scores, mask_row);
    heads.push_back(tape.matmul(tape.softmax_rows(scores), vh));
  }
  int ctx = num_heads == 1 ? heads[0] : tape.concat(heads, 1);
  return tape.matmul(ctx, lw.w_o);
}

// Optional train-time dropout; masks are drawn from the run's seeded stream.
struct DropoutCtx {
  Rng* rng;
  double p;
};

template <typename T>
int apply_dropout(Tape<T>& tape, int x, DropoutCtx* ctx) {
  if (!ctx || ctx->p <= 0.0) return x;
  const Tensor<T>& v = tape.value(x);
  std::vector<T> mask(v.data.size());
  const T keep_scale = T(1.0 / (1.0 - ctx->p));
  for (T& m : mask) m = ctx->rng->next_double() >= ctx->p ? keep_scale : T(0);
  return tape.mul(x, tape.constant(v.shape, std::move(mask)));
}

// Pre-norm encoder stack. For each layer i the previous hidden state's
// first-token slice is handed to the prefix provider, then the block runs
// attention + residual and FFN + residual. Returns all hidden states.
template <typename T>
EncoderState<T> encode(Tape<T>& tape, const TokenBatch& batch, const ModelConfig& cfg,
                       Backbone<T>& backbone,
                       std::type_identity_t<PrefixProvider<T>*> prefixes,
                       DropoutCtx* dropout = nullptr) {
  cfg.validate();
  if (batch.batch <= 0) throw RejectedInput("encode: empty batch");
  if (batch.seq > cfg.max_seq_len)
    throw RejectedInput("encode: sequence length " + std::to_string(batch.seq) +
                        " exceeds max_seq_len " + std::to_string(cfg.max_seq_len));
  for (int id : batch.ids)
    if (id < 0 || id >= cfg.vocab_size)
      throw RejectedInput("encode: token id " + std::to_string(id) +
                          " out of range [0," + std::to_string(cfg.vocab_size) + ")");

  EncoderState<T> state;
  state.batch = batch.batch;
  state.seq = batch.seq;
  state.hidden.resize(size_t(cfg.num_layers) + 1);

  const int tok_leaf = tape.leaf(backbone.tok_embed);
  const int pos_full = tape.leaf(backbone.pos_embed);
  const int pos =
      batch.seq < cfg.max_seq_len ? tape.slice_rows(pos_full, 0, batch.seq) : pos_full;
  for (int e = 0; e < batch.batch; ++e) {
    int emb = tape.embedding(tok_leaf, batch.row(e));
    state.hidden[0].push_back(tape.add(emb, pos));
  }

  std::vector<LayerLeafIds<T>> leaves;
  leaves.reserve(backbone.layers.size());
  for (auto& lw : backbone.layers) leaves.push_back(LayerLeafIds<T>::make(tape, lw));

  for (int i = 0; i < cfg.num_layers; ++i) {
    const int l_i = prefixes ? cfg.prefix_len_at(i) : 0;
    // One shared additive mask row per distinct example length.
    std::vector<int> mask_cache(size_t(batch.seq) + 1, Tape<T>::kNone);
    for (int e = 0; e < batch.batch; ++e) {
      int h_prev = state.hidden[size_t(i)][size_t(e)];
      std::optional<std::pair<int, int>> pfx;
      if (prefixes && l_i > 0) {
        int h_first = tape.slice_rows(h_prev, 0, 1);
        pfx = prefixes->gated_prefix(tape, i, h_first, e);
      }
      const int len = batch.lengths[size_t(e)];
      int mask_row = Tape<T>::kNone;
      if (len < batch.seq) {
        if (mask_cache[size_t(len)] == Tape<T>::kNone) {
          const int pl = pfx ? l_i : 0;
          std::vector<T> m(size_t(pl + batch.seq), T(0));
          for (int j = pl + len; j < pl + batch.seq; ++j) m[size_t(j)] = T(kMaskedLogit);
          mask_cache[size_t(len)] = tape.constant({pl + batch.seq}, std::move(m));
        }
        mask_row = mask_cache[size_t(len)];
      }
      int x = tape.layer_norm(h_prev, leaves[size_t(i)].ln1_gain,
                              leaves[size_t(i)].ln1_bias, T(kLayerNormEps));
      int attn = prefix_attention(tape, x, leaves[size_t(i)], pfx, mask_row, cfg.num_heads);
      attn = apply_dropout(tape, attn, dropout);
      int h_mid = tape.add(h_prev, attn);
      int y = tape.layer_norm(h_mid, leaves[size_t(i)].ln2_gain,
                              leaves[size_t(i)].ln2_bias, T(kLayerNormEps));
      int ffn = feed_forward(tape, y, leaves[size_t(i)]);
      ffn = apply_dropout(tape, ffn, dropout);
      state.hidden[size_t(i) + 1].push_back(tape.add(h_mid, ffn));
    }
  }
  return state;
}

}  // namespace apt
