#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "apt/error.hpp"
#include "apt/kernels.hpp"
#include "apt/tensor.hpp"

namespace apt {

// Reverse-mode autodiff over a recorded operation tape. Ops execute eagerly
// and append one node each; backward() walks the tape once in reverse.
//
// Leaves reference external Tensor storage (parameters), which must outlive
// the tape. Gradients of leaves with requires_grad accumulate into the
// external tensor's grad slot; frozen leaves keep their grad absent.
template <typename T>
class Tape {
 public:
  static constexpr int kNone = -1;

  // ---- graph construction -------------------------------------------------

  int leaf(Tensor<T>& t) {
    Node n;
    n.kind = Op::kLeaf;
    n.external = &t;
    n.requires_grad = t.requires_grad;
    return push(std::move(n));
  }

  int constant(Shape shape, std::vector<T> data) {
    Node n;
    n.kind = Op::kConstant;
    n.value = Tensor<T>(std::move(shape), std::move(data));
    return push(std::move(n));
  }

  int matmul(int a, int b) {
    const Tensor<T>& ta = val(a);
    const Tensor<T>& tb = val(b);
    require(ta.rank() == 2 && tb.rank() == 2, "matmul: inputs must be rank 2");
    if (ta.cols() != tb.rows())
      throw RejectedInput("matmul: inner extents differ, " + shape_str(ta.shape) +
                          " x " + shape_str(tb.shape));
    Node n = binary(Op::kMatMul, a, b, Shape{ta.rows(), tb.cols()});
    kernels::matmul(ta.data.data(), tb.data.data(), n.value.data.data(),
                    ta.rows(), ta.cols(), tb.cols());
    return push(std::move(n));
  }

  int transpose(int a) {
    const Tensor<T>& ta = val(a);
    require(ta.rank() == 2, "transpose: input must be rank 2");
    Node n = unary(Op::kTranspose, a, Shape{ta.cols(), ta.rows()});
    for (int i = 0; i < ta.rows(); ++i)
      for (int j = 0; j < ta.cols(); ++j)
        n.value.data[size_t(j) * ta.rows() + i] = ta.data[size_t(i) * ta.cols() + j];
    return push(std::move(n));
  }

  int add(int a, int b) {
    const Tensor<T>& ta = val(a);
    const Tensor<T>& tb = val(b);
    require(ta.shape == tb.shape, "add: shape mismatch " + shape_str(ta.shape) +
                                      " vs " + shape_str(tb.shape));
    Node n = binary(Op::kAdd, a, b, ta.shape);
    for (size_t i = 0; i < ta.data.size(); ++i) n.value.data[i] = ta.data[i] + tb.data[i];
    return push(std::move(n));
  }

  int mul(int a, int b) {
    const Tensor<T>& ta = val(a);
    const Tensor<T>& tb = val(b);
    require(ta.shape == tb.shape, "mul: shape mismatch " + shape_str(ta.shape) +
                                      " vs " + shape_str(tb.shape));
    Node n = binary(Op::kMul, a, b, ta.shape);
    for (size_t i = 0; i < ta.data.size(); ++i) n.value.data[i] = ta.data[i] * tb.data[i];
    return push(std::move(n));
  }

  int scale(int a, T c) {
    const Tensor<T>& ta = val(a);
    Node n = unary(Op::kScale, a, ta.shape);
    n.attr_scalar = c;
    for (size_t i = 0; i < ta.data.size(); ++i) n.value.data[i] = ta.data[i] * c;
    return push(std::move(n));
  }

  // a[m x n] + v[n], v broadcast over rows.
  int add_rowvec(int a, int v) {
    const Tensor<T>& ta = val(a);
    const Tensor<T>& tv = val(v);
    require(ta.rank() == 2 && tv.rank() == 1, "add_rowvec: need matrix and vector");
    require(tv.shape[0] == ta.cols(), "add_rowvec: vector length " +
                                          std::to_string(tv.shape[0]) +
                                          " vs cols " + std::to_string(ta.cols()));
    Node n = binary(Op::kAddRowVec, a, v, ta.shape);
    for (int i = 0; i < ta.rows(); ++i)
      for (int j = 0; j < ta.cols(); ++j)
        n.value.data[size_t(i) * ta.cols() + j] = ta.at(i, j) + tv.data[size_t(j)];
    return push(std::move(n));
  }

  // Row i of a[m x n] scaled by v[i] (broadcast-mul of a vector over rows).
  int scale_rows(int a, int v) {
    const Tensor<T>& ta = val(a);
    const Tensor<T>& tv = val(v);
    require(ta.rank() == 2 && tv.rank() == 1, "scale_rows: need matrix and vector");
    if (tv.shape[0] != ta.rows())
      throw RejectedInput("scale_rows: vector length " + std::to_string(tv.shape[0]) +
                          " vs rows " + std::to_string(ta.rows()));
    Node n = binary(Op::kScaleRows, a, v, ta.shape);
    for (int i = 0; i < ta.rows(); ++i)
      for (int j = 0; j < ta.cols(); ++j)
        n.value.data[size_t(i) * ta.cols() + j] = ta.at(i, j) * tv.data[size_t(i)];
    return push(std::move(n));
  }

  // c = s * a with s a one-element tensor.
  int mul_scalar(int a, int s) {
    const Tensor<T>& ta = val(a);
    const Tensor<T>& ts = val(s);
    require(ts.size() == 1, "mul_scalar: scale must have one element");
    Node n = binary(Op::kMulScalar, a, s, ta.shape);
    const T sv = ts.data[0];
    for (size_t i = 0; i < ta.data.size(); ++i) n.value.data[i] = ta.data[i] * sv;
    return push(std::move(n));
  }

  int sigmoid(int a) {
    const Tensor<T>& ta = val(a);
    Node n = unary(Op::kSigmoid, a, ta.shape);
    kernels::map(ta.data.data(), n.value.data.data(), ta.size(),
                 [](T x) { return kernels::stable_sigmoid(x); });
    return push(std::move(n));
  }

  int relu(int a) {
    const Tensor<T>& ta = val(a);
    Node n = unary(Op::kRelu, a, ta.shape);
    kernels::map(ta.data.data(), n.value.data.data(), ta.size(),
                 [](T x) { return x > T(0) ? x : T(0); });
    return push(std::move(n));
  }

  int softmax_rows(int a) {
    const Tensor<T>& ta = val(a);
    require(ta.rank() == 2, "softmax_rows: input must be rank 2");
    for (T x : ta.data)
      if (std::isnan(x)) throw RejectedInput("softmax_rows: NaN input");
    Node n = unary(Op::kSoftmaxRows, a, ta.shape);
    kernels::softmax_rows(ta.data.data(), n.value.data.data(), ta.rows(), ta.cols());
    return push(std::move(n));
  }

  int layer_norm(int a, int gain, int bias, T eps = T(1e-5)) {
    const Tensor<T>& ta = val(a);
    const Tensor<T>& tg = val(gain);
    const Tensor<T>& tb = val(bias);
    require(ta.rank() == 2, "layer_norm: input must be rank 2");
    require(tg.rank() == 1 && tg.shape[0] == ta.cols() && tb.shape == tg.shape,
            "layer_norm: gain/bias must be vectors of length cols");
    Node n;
    n.kind = Op::kLayerNorm;
    n.inputs = {a, gain, bias};
    n.requires_grad = needs_grad(a) || needs_grad(gain) || needs_grad(bias);
    n.value = Tensor<T>(ta.shape);
    n.attr_scalar = eps;
    n.aux.resize(size_t(2 * ta.rows()));
    kernels::layer_norm_rows(ta.data.data(), tg.data.data(), tb.data.data(),
                             n.value.data.data(), n.aux.data(),
                             n.aux.data() + ta.rows(), ta.rows(), ta.cols(), eps);
    return push(std::move(n));
  }

  // Concatenate rank-2 tensors along axis 0 (rows) or 1 (cols).
  int concat(const std::vector<int>& ids, int axis) {
    require(!ids.empty(), "concat: no inputs");
    require(axis == 0 || axis == 1, "concat: axis must be 0 or 1");
    const Tensor<T>& first = val(ids[0]);
    require(first.rank() == 2, "concat: inputs must be rank 2");
    int other = axis == 0 ? first.cols() : first.rows();
    int total = 0;
    bool rg = false;
    for (int id : ids) {
      const Tensor<T>& t = val(id);
      require(t.rank() == 2, "concat: inputs must be rank 2");
      int o = axis == 0 ? t.cols() : t.rows();
      if (o != other)
        throw RejectedInput("concat: extent mismatch along fixed axis (" +
                            std::to_string(o) + " vs " + std::to_string(other) + ")");
      total += axis == 0 ? t.rows() : t.cols();
      rg = rg || needs_grad(id);
    }
    Node n;
    n.kind = Op::kConcat;
    n.inputs = ids;
    n.requires_grad = rg;
    n.attr_axis = axis;
    if (axis == 0) {
      n.value = Tensor<T>(Shape{total, other});
      int r = 0;
      for (int id : ids) {
        const Tensor<T>& t = val(id);
        std::copy(t.data.begin(), t.data.end(),
                  n.value.data.begin() + size_t(r) * other);
        r += t.rows();
      }
    } else {
      n.value = Tensor<T>(Shape{other, total});
      int c = 0;
      for (int id : ids) {
        const Tensor<T>& t = val(id);
        for (int i = 0; i < other; ++i)
          std::copy(t.data.begin() + size_t(i) * t.cols(),
                    t.data.begin() + size_t(i + 1) * t.cols(),
                    n.value.data.begin() + size_t(i) * total + c);
        c += t.cols();
      }
    }
    return push(std::move(n));
  }

  // Rows [r0, r1) of a rank-2 tensor.
  int slice_rows(int a, int r0, int r1) {
    const Tensor<T>& ta = val(a);
    require(ta.rank() == 2, "slice_rows: input must be rank 2");
    require(0 <= r0 && r0 < r1 && r1 <= ta.rows(), "slice_rows: bad range");
    Node n = unary(Op::kSliceRows, a, Shape{r1 - r0, ta.cols()});
    n.attr_axis = r0;
    std::copy(ta.data.begin() + size_t(r0) * ta.cols(),
              ta.data.begin() + size_t(r1) * ta.cols(), n.value.data.begin());
    return push(std::move(n));
  }

  // Columns [c0, c1) of a rank-2 tensor.
  int slice_cols(int a, int c0, int c1) {
    const Tensor<T>& ta = val(a);
    require(ta.rank() == 2, "slice_cols: input must be rank 2");
    require(0 <= c0 && c0 < c1 && c1 <= ta.cols(), "slice_cols: bad range");
    Node n = unary(Op::kSliceCols, a, Shape{ta.rows(), c1 - c0});
    n.attr_axis = c0;
    for (int i = 0; i < ta.rows(); ++i)
      std::copy(ta.data.begin() + size_t(i) * ta.cols() + c0,
                ta.data.begin() + size_t(i) * ta.cols() + c1,
                n.value.data.begin() + size_t(i) * (c1 - c0));
    return push(std::move(n));
  }

  int reshape(int a, Shape shape) {
    const Tensor<T>& ta = val(a);
    require(numel(shape) == ta.size(), "reshape: element count mismatch");
    Node n = unary(Op::kReshape, a, shape);
    n.value.data = ta.data;
    return push(std::move(n));
  }

  // Gather rows of table[v x d] by token id.
  int embedding(int table, const std::vector<int>& ids) {
    const Tensor<T>& tt = val(table);
    require(tt.rank() == 2, "embedding: table must be rank 2");
    for (int id : ids)
      if (id < 0 || id >= tt.rows())
        throw RejectedInput("embedding: token id " + std::to_string(id) +
                            " out of range [0," + std::to_string(tt.rows()) + ")");
    Node n = unary(Op::kEmbedding, table, Shape{int(ids.size()), tt.cols()});
    n.attr_indices = ids;
    for (size_t i = 0; i < ids.size(); ++i)
      std::copy(tt.data.begin() + size_t(ids[i]) * tt.cols(),
                tt.data.begin() + size_t(ids[i] + 1) * tt.cols(),
                n.value.data.begin() + i * size_t(tt.cols()));
    return push(std::move(n));
  }

  int sum(int a) {
    const Tensor<T>& ta = val(a);
    Node n = unary(Op::kSum, a, Shape{1});
    T acc = T(0);
    for (T x : ta.data) acc += x;
    n.value.data[0] = acc;
    return push(std::move(n));
  }

  // Mean negative log-likelihood over rows; stable log-sum-exp inside.
  int cross_entropy(int logits, const std::vector<int>& targets) {
    const Tensor<T>& tl = val(logits);
    require(tl.rank() == 2, "cross_entropy: logits must be rank 2");
    require(int(targets.size()) == tl.rows(),
            "cross_entropy: one target per logit row");
    const int c = tl.cols();
    for (int t : targets)
      if (t < 0 || t >= c)
        throw RejectedInput("cross_entropy: target " + std::to_string(t) +
                            " out of range [0," + std::to_string(c) + ")");
    Node n = unary(Op::kCrossEntropy, logits, Shape{1});
    n.attr_indices = targets;
    n.aux.resize(tl.data.size());  // softmax probabilities for backward
    kernels::softmax_rows(tl.data.data(), n.aux.data(), tl.rows(), c);
    T loss = T(0);
    for (int i = 0; i < tl.rows(); ++i) {
      const T* row = tl.data.data() + size_t(i) * c;
      T mx = row[0];
      for (int j = 1; j < c; ++j) mx = row[j] > mx ? row[j] : mx;
      T se = T(0);
      for (int j = 0; j < c; ++j) se += std::exp(row[j] - mx);
      loss += mx + std::log(se) - row[targets[size_t(i)]];
    }
    n.value.data[0] = loss / T(tl.rows());
    return push(std::move(n));
  }

  // ---- access --------------------------------------------------------------

  const Tensor<T>& value(int id) const { return val(id); }
  const std::vector<T>& node_grad(int id) const { return nodes_[size_t(id)].grad; }
  bool node_requires_grad(int id) const { return nodes_[size_t(id)].requires_grad; }
  size_t num_nodes() const { return nodes_.size(); }

  // ---- backward ------------------------------------------------------------

  void backward(int loss) {
    if (val(loss).size() != 1)
      throw ContractViolation("backward: loss must be a scalar, got " +
                              shape_str(val(loss).shape));
    if (!nodes_[size_t(loss)].requires_grad) return;  // nothing trainable below

    // Reachability: only nodes feeding the loss get scratch gradients.
    std::vector<char> live(nodes_.size(), 0);
    std::vector<int> stack{loss};
    while (!stack.empty()) {
      int id = stack.back();
      stack.pop_back();
      if (live[size_t(id)]) continue;
      live[size_t(id)] = 1;
      for (int in : nodes_[size_t(id)].inputs)
        if (nodes_[size_t(in)].requires_grad) stack.push_back(in);
    }
    for (size_t i = 0; i < nodes_.size(); ++i) {
      if (live[i])
        nodes_[i].grad.assign(val(int(i)).data.size(), T(0));
      else
        nodes_[i].grad.clear();
    }
    nodes_[size_t(loss)].grad[0] = T(1);

    for (int id = loss; id >= 0; --id) {
      if (!live[size_t(id)]) continue;
      step_backward(id);
    }

    for (size_t i = 0; i < nodes_.size(); ++i) {
      Node& n = nodes_[i];
      if (n.kind == Op::kLeaf && live[i] && n.external->requires_grad) {
        n.external->ensure_grad();
        for (size_t j = 0; j < n.grad.size(); ++j) n.external->grad[j] += n.grad[j];
      }
    }
  }

 private:
  enum class Op : uint8_t {
    kLeaf, kConstant, kMatMul, kTranspose, kAdd, kMul, kScale, kAddRowVec,
    kScaleRows, kMulScalar, kSigmoid, kRelu, kSoftmaxRows, kLayerNorm,
    kConcat, kSliceRows, kSliceCols, kReshape, kEmbedding, kSum, kCrossEntropy,
  };

  struct Node {
    Op kind;
    std::vector<int> inputs;
    Tensor<T> value;               // owned result; unused for leaves
    Tensor<T>* external = nullptr; // leaf storage
    std::vector<T> grad;           // scratch d(loss)/d(value)
    bool requires_grad = false;
    T attr_scalar = T(0);          // scale constant / layer-norm eps
    int attr_axis = 0;             // concat axis / slice offset
    std::vector<int> attr_indices; // embedding ids / cross-entropy targets
    std::vector<T> aux;            // saved forward intermediates
  };

  const Tensor<T>& val(int id) const {
    const Node& n = nodes_[size_t(id)];
    return n.kind == Op::kLeaf ? *n.external : n.value;
  }

  bool needs_grad(int id) const { return nodes_[size_t(id)].requires_grad; }

  Node unary(Op op, int a, Shape out_shape) {
    Node n;
    n.kind = op;
    n.inputs = {a};
    n.requires_grad = needs_grad(a);
    n.value = Tensor<T>(std::move(out_shape));
    return n;
  }

  Node binary(Op op, int a, int b, Shape out_shape) {
    Node n;
    n.kind = op;
    n.inputs = {a, b};
    n.requires_grad = needs_grad(a) || needs_grad(b);
    n.value = Tensor<T>(std::move(out_shape));
    return n;
  }

  int push(Node n) {
    nodes_.push_back(std::move(n));
    return int(nodes_.size()) - 1;
  }

  static void require(bool ok, const std::string& msg) {
    if (!ok) throw RejectedInput(msg);
  }

  // Adds g into the scratch grad of `id` if it participates in backward.
  T* grad_of(int id) {
    Node& n = nodes_[size_t(id)];
    return n.grad.empty() ? nullptr : n.grad.data();
  }

  void step_backward(int id) {
    Node& n = nodes_[size_t(id)];
    const std::vector<T>& gy = n.grad;
    switch (n.kind) {
      case Op::kLeaf:
      case Op::kConstant:
        break;
      case Op::kMatMul: {
        const Tensor<T>& a = val(n.inputs[0]);
        const Tensor<T>& b = val(n.inputs[1]);
        const int m = a.rows(), k = a.cols(), nn = b.cols();
        if (T* ga = grad_of(n.inputs[0]))
          kernels::acc_matmul_nt(gy.data(), b.data.data(), ga, m, nn, k);
        if (T* gb = grad_of(n.inputs[1]))
          kernels::acc_matmul_tn(a.data.data(), gy.data(), gb, k, m, nn);
        break;
      }
      case Op::kTranspose: {
        const Tensor<T>& out = n.value;
        if (T* ga = grad_of(n.inputs[0]))
          for (int i = 0; i < out.rows(); ++i)
            for (int j = 0; j < out.cols(); ++j)
              ga[size_t(j) * out.rows() + i] += gy[size_t(i) * out.cols() + j];
        break;
      }
      case Op::kAdd:
        for (int pos = 0; pos < 2; ++pos)
          if (T* g = grad_of(n.inputs[size_t(pos)]))
            for (size_t i = 0; i < gy.size(); ++i) g[i] += gy[i];
        break;
      case Op::kMul: {
        const Tensor<T>& a = val(n.inputs[0]);
        const Tensor<T>& b = val(n.inputs[1]);
        if (T* ga = grad_of(n.inputs[0]))
          for (size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * b.data[i];
        if (T* gb = grad_of(n.inputs[1]))
          for (size_t i = 0; i < gy.size(); ++i) gb[i] += gy[i] * a.data[i];
        break;
      }
      case Op::kScale:
        if (T* ga = grad_of(n.inputs[0]))
          for (size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * n.attr_scalar;
        break;
      case Op::kAddRowVec: {
        const Tensor<T>& a = val(n.inputs[0]);
        const int rows = a.rows(), cols = a.cols();
        if (T* ga = grad_of(n.inputs[0]))
          for (size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
        if (T* gv = grad_of(n.inputs[1]))
          for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) gv[j] += gy[size_t(i) * cols + j];
        break;
      }
      case Op::kScaleRows: {
        const Tensor<T>& a = val(n.inputs[0]);
        const Tensor<T>& v = val(n.inputs[1]);
        const int rows = a.rows(), cols = a.cols();
        if (T* ga = grad_of(n.inputs[0]))
          for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j)
              ga[size_t(i) * cols + j] += gy[size_t(i) * cols + j] * v.data[size_t(i)];
        if (T* gv = grad_of(n.inputs[1]))
          for (int i = 0; i < rows; ++i) {
            T acc = T(0);
            for (int j = 0; j < cols; ++j)
              acc += gy[size_t(i) * cols + j] * a.data[size_t(i) * cols + j];
            gv[i] += acc;
          }
        break;
      }
      case Op::kMulScalar: {
        const Tensor<T>& a = val(n.inputs[0]);
        const T sv = val(n.inputs[1]).data[0];
        if (T* ga = grad_of(n.inputs[0]))
          for (size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * sv;
        if (T* gs = grad_of(n.inputs[1])) {
          T acc = T(0);
          for (size_t i = 0; i < gy.size(); ++i) acc += gy[i] * a.data[i];
          gs[0] += acc;
        }
        break;
      }
      case Op::kSigmoid: {
        const Tensor<T>& y = n.value;
        if (T* ga = grad_of(n.inputs[0]))
          for (size_t i = 0; i < gy.size(); ++i)
            ga[i] += gy[i] * y.data[i] * (T(1) - y.data[i]);
        break;
      }
      case Op::kRelu: {
        const Tensor<T>& a = val(n.inputs[0]);
        if (T* ga = grad_of(n.inputs[0]))
          for (size_t i = 0; i < gy.size(); ++i)
            ga[i] += a.data[i] > T(0) ? gy[i] : T(0);
        break;
      }
      case Op::kSoftmaxRows: {
        const Tensor<T>& y = n.value;
        const int rows = y.rows(), cols = y.cols();
        if (T* ga = grad_of(n.inputs[0]))
          for (int i = 0; i < rows; ++i) {
            const T* yr = y.data.data() + size_t(i) * cols;
            const T* gr = gy.data() + size_t(i) * cols;
            T dot = T(0);
            for (int j = 0; j < cols; ++j) dot += gr[j] * yr[j];
            for (int j = 0; j < cols; ++j)
              ga[size_t(i) * cols + j] += yr[j] * (gr[j] - dot);
          }
        break;
      }
      case Op::kLayerNorm: {
        const Tensor<T>& a = val(n.inputs[0]);
        const Tensor<T>& g = val(n.inputs[1]);
        const int rows = a.rows(), cols = a.cols();
        const T* mean = n.aux.data();
        const T* inv = n.aux.data() + rows;
        T* ga = grad_of(n.inputs[0]);
        T* gg = grad_of(n.inputs[1]);
        T* gb = grad_of(n.inputs[2]);
        for (int i = 0; i < rows; ++i) {
          const T* xr = a.data.data() + size_t(i) * cols;
          const T* gr = gy.data() + size_t(i) * cols;
          T sum1 = T(0), sum2 = T(0);
          for (int j = 0; j < cols; ++j) {
            const T xh = (xr[j] - mean[i]) * inv[i];
            sum1 += gr[j] * g.data[size_t(j)];
            sum2 += gr[j] * g.data[size_t(j)] * xh;
            if (gg) gg[j] += gr[j] * xh;
            if (gb) gb[j] += gr[j];
          }
          if (ga) {
            const T inv_n = T(1) / T(cols);
            for (int j = 0; j < cols; ++j) {
              const T xh = (xr[j] - mean[i]) * inv[i];
              ga[size_t(i) * cols + j] +=
                  inv[i] * (gr[j] * g.data[size_t(j)] - sum1 * inv_n - xh * sum2 * inv_n);
            }
          }
        }
        break;
      }
      case Op::kConcat: {
        const int axis = n.attr_axis;
        if (axis == 0) {
          int r = 0;
          const int cols = n.value.cols();
          for (int in : n.inputs) {
            const Tensor<T>& t = val(in);
            if (T* g = grad_of(in))
              for (size_t i = 0; i < t.data.size(); ++i)
                g[i] += gy[size_t(r) * cols + i];
            r += t.rows();
          }
        } else {
          int c = 0;
          const int total = n.value.cols();
          const int rows = n.value.rows();
          for (int in : n.inputs) {
            const Tensor<T>& t = val(in);
            if (T* g = grad_of(in))
              for (int i = 0; i < rows; ++i)
                for (int j = 0; j < t.cols(); ++j)
                  g[size_t(i) * t.cols() + j] += gy[size_t(i) * total + c + j];
            c += t.cols();
          }
        }
        break;
      }
      case Op::kSliceRows: {
        const int cols = n.value.cols();
        if (T* ga = grad_of(n.inputs[0]))
          for (size_t i = 0; i < gy.size(); ++i)
            ga[size_t(n.attr_axis) * cols + i] += gy[i];
        break;
      }
      case Op::kSliceCols: {
        const Tensor<T>& a = val(n.inputs[0]);
        const int out_cols = n.value.cols();
        if (T* ga = grad_of(n.inputs[0]))
          for (int i = 0; i < n.value.rows(); ++i)
            for (int j = 0; j < out_cols; ++j)
              ga[size_t(i) * a.cols() + n.attr_axis + j] += gy[size_t(i) * out_cols + j];
        break;
      }
      case Op::kReshape:
        if (T* ga = grad_of(n.inputs[0]))
          for (size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
        break;
      case Op::kEmbedding: {
        const int cols = n.value.cols();
        if (T* gt = grad_of(n.inputs[0]))
          for (size_t i = 0; i < n.attr_indices.size(); ++i)
            for (int j = 0; j < cols; ++j)
              gt[size_t(n.attr_indices[i]) * cols + j] += gy[i * size_t(cols) + j];
        break;
      }
      case Op::kSum:
        if (T* ga = grad_of(n.inputs[0])) {
          const int64_t count = val(n.inputs[0]).size();
          for (int64_t i = 0; i < count; ++i) ga[i] += gy[0];
        }
        break;
      case Op::kCrossEntropy: {
        const Tensor<T>& logits = val(n.inputs[0]);
        const int rows = logits.rows(), cols = logits.cols();
        const T inv_rows = T(1) / T(rows);
        if (T* ga = grad_of(n.inputs[0]))
          for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) {
              const T p = n.aux[size_t(i) * cols + j];
              const T onehot = j == n.attr_indices[size_t(i)] ? T(1) : T(0);
              ga[size_t(i) * cols + j] += gy[0] * (p - onehot) * inv_rows;
            }
        break;
      }
    }
  }

  std::vector<Node> nodes_;
};

}  // namespace apt
