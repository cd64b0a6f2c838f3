#pragma once

// Plain-loop, double-precision forward pass kept separate from the tape
// implementation on purpose: no shared kernels, dot-product loop order, one
// example at a time. Used by tests as an independent cross-check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "apt/error.hpp"
#include "apt/model.hpp"
#include "apt/tensor.hpp"

namespace apt::ref {

struct Mat {
  int rows = 0, cols = 0;
  std::vector<double> v;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), v(size_t(r) * size_t(c), 0.0) {}
  double& at(int i, int j) { return v[size_t(i) * size_t(cols) + size_t(j)]; }
  double at(int i, int j) const { return v[size_t(i) * size_t(cols) + size_t(j)]; }
};

template <typename T>
Mat from_tensor(const Tensor<T>& t) {
  Mat m(t.rank() == 2 ? t.rows() : 1, t.rank() == 2 ? t.cols() : int(t.size()));
  for (size_t i = 0; i < t.data.size(); ++i) m.v[i] = double(t.data[i]);
  return m;
}

inline Mat matmul(const Mat& a, const Mat& b) {
  if (a.cols != b.rows) throw ContractViolation("ref matmul: shape mismatch");
  Mat c(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < b.cols; ++j) {
      double acc = 0.0;
      for (int k = 0; k < a.cols; ++k) acc += a.at(i, k) * b.at(k, j);
      c.at(i, j) = acc;
    }
  return c;
}

inline Mat transpose(const Mat& a) {
  Mat t(a.cols, a.rows);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) t.at(j, i) = a.at(i, j);
  return t;
}

inline void softmax_rows_inplace(Mat& m) {
  for (int i = 0; i < m.rows; ++i) {
    double mx = m.at(i, 0);
    for (int j = 1; j < m.cols; ++j) mx = std::max(mx, m.at(i, j));
    double sum = 0.0;
    for (int j = 0; j < m.cols; ++j) sum += (m.at(i, j) = std::exp(m.at(i, j) - mx));
    for (int j = 0; j < m.cols; ++j) m.at(i, j) /= sum;
  }
}

inline Mat layer_norm(const Mat& x, const Mat& gain, const Mat& bias, double eps) {
  Mat y(x.rows, x.cols);
  for (int i = 0; i < x.rows; ++i) {
    double mean = 0.0;
    for (int j = 0; j < x.cols; ++j) mean += x.at(i, j);
    mean /= x.cols;
    double var = 0.0;
    for (int j = 0; j < x.cols; ++j) var += (x.at(i, j) - mean) * (x.at(i, j) - mean);
    var /= x.cols;
    const double inv = 1.0 / std::sqrt(var + eps);
    for (int j = 0; j < x.cols; ++j)
      y.at(i, j) = (x.at(i, j) - mean) * inv * gain.v[size_t(j)] + bias.v[size_t(j)];
  }
  return y;
}

// Per-layer prefix hook: given the previous layer's first-token row, return
// the (already gated) key/value prefix matrices, or nullopt for no prefix.
using PrefixFn =
    std::function<std::optional<std::pair<Mat, Mat>>(int layer, const std::vector<double>&)>;

inline Mat slice_cols(const Mat& a, int c0, int c1) {
  Mat s(a.rows, c1 - c0);
  for (int i = 0; i < a.rows; ++i)
    for (int j = c0; j < c1; ++j) s.at(i, j - c0) = a.at(i, j);
  return s;
}

inline Mat vstack(const Mat& a, const Mat& b) {
  Mat s(a.rows + b.rows, a.cols);
  std::copy(a.v.begin(), a.v.end(), s.v.begin());
  std::copy(b.v.begin(), b.v.end(), s.v.begin() + a.v.size());
  return s;
}

inline Mat attention(const Mat& x, const Mat& wq, const Mat& wk, const Mat& wv,
                     const Mat& wo, const std::optional<std::pair<Mat, Mat>>& prefix,
                     int num_heads) {
  Mat q = matmul(x, wq), k = matmul(x, wk), v = matmul(x, wv);
  if (prefix) {
    k = vstack(prefix->first, k);
    v = vstack(prefix->second, v);
  }
  const int dh = x.cols / num_heads;
  Mat ctx(x.rows, x.cols);
  for (int h = 0; h < num_heads; ++h) {
    Mat qh = slice_cols(q, h * dh, (h + 1) * dh);
    Mat kh = slice_cols(k, h * dh, (h + 1) * dh);
    Mat vh = slice_cols(v, h * dh, (h + 1) * dh);
    Mat scores = matmul(qh, transpose(kh));
    for (double& s : scores.v) s /= std::sqrt(double(dh));
    softmax_rows_inplace(scores);
    Mat out = matmul(scores, vh);
    for (int i = 0; i < out.rows; ++i)
      for (int j = 0; j < dh; ++j) ctx.at(i, h * dh + j) = out.at(i, j);
  }
  return matmul(ctx, wo);
}

// Forward pass for one unpadded example; returns hidden states h_0..h_L.
template <typename T>
std::vector<Mat> encode(const ModelConfig& cfg, Backbone<T>& backbone,
                        const std::vector<int>& ids, PrefixFn prefix_fn = nullptr) {
  const int s = int(ids.size());
  const int d = cfg.model_dim;
  std::vector<Mat> hidden;
  Mat h0(s, d);
  for (int i = 0; i < s; ++i)
    for (int j = 0; j < d; ++j)
      h0.at(i, j) = double(backbone.tok_embed.at(ids[size_t(i)], j)) +
                    double(backbone.pos_embed.at(i, j));
  hidden.push_back(std::move(h0));

  for (int layer = 0; layer < cfg.num_layers; ++layer) {
    auto& lw = backbone.layers[size_t(layer)];
    const Mat& h_prev = hidden.back();
    std::optional<std::pair<Mat, Mat>> prefix;
    if (prefix_fn) {
      std::vector<double> h_first(h_prev.v.begin(), h_prev.v.begin() + d);
      prefix = prefix_fn(layer, h_first);
    }
    Mat x = layer_norm(h_prev, from_tensor(lw.ln1_gain), from_tensor(lw.ln1_bias),
                       kLayerNormEps);
    Mat attn = attention(x, from_tensor(lw.w_q), from_tensor(lw.w_k), from_tensor(lw.w_v),
                         from_tensor(lw.w_o), prefix, cfg.num_heads);
    Mat h_mid(s, d);
    for (size_t i = 0; i < h_mid.v.size(); ++i) h_mid.v[i] = h_prev.v[i] + attn.v[i];
    Mat y = layer_norm(h_mid, from_tensor(lw.ln2_gain), from_tensor(lw.ln2_bias),
                       kLayerNormEps);
    Mat f1 = matmul(y, from_tensor(lw.w1));
    for (int i = 0; i < f1.rows; ++i)
      for (int j = 0; j < f1.cols; ++j)
        f1.at(i, j) = std::max(0.0, f1.at(i, j) + double(lw.b1.data[size_t(j)]));
    Mat f2 = matmul(f1, from_tensor(lw.w2));
    Mat h_next(s, d);
    for (int i = 0; i < s; ++i)
      for (int j = 0; j < d; ++j)
        h_next.at(i, j) = h_mid.at(i, j) + f2.at(i, j) + double(lw.b2.data[size_t(j)]);
    hidden.push_back(std::move(h_next));
  }
  return hidden;
}

}  // namespace apt::ref
