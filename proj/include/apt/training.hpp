#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "apt/data.hpp"
#include "apt/error.hpp"
#include "apt/gating.hpp"
#include "apt/metrics.hpp"
#include "apt/model.hpp"
#include "apt/rng.hpp"
#include "apt/tape.hpp"
#include "apt/tensor.hpp"

namespace apt {

enum class Precision { f32, f64 };

inline Precision parse_precision(const std::string& s) {
  if (s == "f32") return Precision::f32;
  if (s == "f64") return Precision::f64;
  throw RejectedInput("unknown precision '" + s + "' (expected f32|f64)");
}

inline const char* precision_name(Precision p) {
  return p == Precision::f32 ? "f32" : "f64";
}

// Hyper-parameter grids used by sweeps; single runs may use any value.
inline const std::vector<double> kDefaultLrGrid = {5e-3, 7e-3, 1e-2, 1e-4};
inline const std::vector<int> kEpochGrid = {20, 40, 60, 80, 100, 120};
inline const std::vector<int> kBatchGrid = {8, 16, 32};
inline const std::vector<int> kSeedList = {11, 21, 42, 87, 100};
inline constexpr int kLowResourceBatch = 2;

struct TrainConfig {
  double learning_rate = 5e-3;
  int epochs = 20;
  int batch_size = 8;
  int seed = 42;
  GateMode mode = GateMode::apt;
  Precision precision = Precision::f32;
  std::vector<double> lr_grid;  // empty unless a grid search is requested
  int max_steps = 0;            // 0: run the full epoch budget
  uint64_t backbone_seed = 7;   // identity of the synthetic pretrained fixture

  void validate() const {
    if (learning_rate < 0) throw RejectedInput("train config: learning_rate must be >= 0");
    if (epochs < 0) throw RejectedInput("train config: epochs must be >= 0");
    if (batch_size < 1) throw RejectedInput("train config: batch_size must be >= 1");
    if (max_steps < 0) throw RejectedInput("train config: max_steps must be >= 0");
    for (double lr : lr_grid)
      if (std::find(kDefaultLrGrid.begin(), kDefaultLrGrid.end(), lr) ==
          kDefaultLrGrid.end())
        throw RejectedInput("train config: lr grid entries must come from the default grid");
  }
};

template <typename T>
struct TaskHead {
  TaskKind kind = TaskKind::sequence;
  Tensor<T> w, b;

  // The head starts at zero so logits begin uniform and the first updates
  // follow the true gradient instead of undoing a random projection; rng is
  // kept in the signature so a nonzero scheme stays a local change.
  static TaskHead make(TaskKind kind, int model_dim, int classes, const Rng& rng) {
    (void)rng;
    TaskHead h;
    h.kind = kind;
    h.w = Tensor<T>::zeros({model_dim, classes});
    h.b = Tensor<T>::zeros({classes});
    h.w.requires_grad = h.b.requires_grad = true;
    return h;
  }

  template <typename F>
  void visit(F&& fn) {
    fn("head.w", w);
    fn("head.b", b);
  }
};

template <typename T>
void freeze_base(Backbone<T>& backbone) {
  backbone.visit([](const std::string&, Tensor<T>& t) {
    t.requires_grad = false;
    t.clear_grad();
  });
}

template <typename T>
using NamedParams = std::vector<std::pair<std::string, Tensor<T>*>>;

// The trainable set: PrefixBank + GateParams(mode) + TaskHead.
template <typename T>
NamedParams<T> collect_trainables(GatingModule<T>& module, TaskHead<T>& head) {
  NamedParams<T> out;
  module.visit([&](const std::string& name, Tensor<T>& t) { out.emplace_back(name, &t); });
  head.visit([&](const std::string& name, Tensor<T>& t) { out.emplace_back(name, &t); });
  return out;
}

// Adam with bias correction, beta=(0.9, 0.999), eps=1e-8, no weight decay.
// Per-element math runs in double regardless of T so f32 training follows
// the same trajectory on any platform with IEEE doubles.
template <typename T>
class Adam {
 public:
  explicit Adam(double lr) : lr_(lr) {}

  void step(const NamedParams<T>& params) {
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, double(t_));
    const double c2 = 1.0 - std::pow(kBeta2, double(t_));
    for (const auto& [name, p] : params) {
      Slot& s = slots_[name];
      if (s.m.empty()) {
        s.m.assign(p->data.size(), T(0));
        s.v.assign(p->data.size(), T(0));
      } else if (s.m.size() != p->data.size()) {
        throw ContractViolation("Adam: parameter '" + name +
                                "' changed size between steps");
      }
      p->ensure_grad();  // a parameter untouched this step has zero gradient
      for (size_t i = 0; i < p->data.size(); ++i) {
        const double g = double(p->grad[i]);
        const double m = kBeta1 * double(s.m[i]) + (1.0 - kBeta1) * g;
        const double v = kBeta2 * double(s.v[i]) + (1.0 - kBeta2) * g * g;
        s.m[i] = T(m);
        s.v[i] = T(v);
        p->data[i] = T(double(p->data[i]) - lr_ * (m / c1) / (std::sqrt(v / c2) + kEps));
      }
      p->clear_grad();
    }
  }

  int64_t steps() const { return t_; }
  std::vector<std::string> state_keys() const {
    std::vector<std::string> keys;
    for (const auto& [k, s] : slots_) keys.push_back(k);
    return keys;
  }

 private:
  static constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  struct Slot {
    std::vector<T> m, v;
  };
  double lr_;
  int64_t t_ = 0;
  std::map<std::string, Slot> slots_;
};

// A padded batch plus its labels (one per example, or per-token tags).
struct Batch {
  TokenBatch tokens;
  std::vector<int> seq_labels;
  std::vector<std::vector<int>> tag_labels;

  bool empty() const { return tokens.batch == 0; }
};

inline Batch make_batch(const std::vector<Example>& pool, const std::vector<int>& indices,
                        TaskKind kind) {
  Batch b;
  std::vector<std::vector<int>> rows;
  for (int idx : indices) {
    const Example& e = pool.at(size_t(idx));
    rows.push_back(e.tokens);
    if (kind == TaskKind::sequence)
      b.seq_labels.push_back(e.label);
    else
      b.tag_labels.push_back(e.tags);
  }
  b.tokens = TokenBatch::from_rows(rows, kPadId);
  return b;
}

// Logits node for a batch: sequence heads read the first-token final hidden
// state, tagging heads read every real token (padding rows dropped before
// the loss, so padded positions never contribute).
template <typename T>
int head_logits(Tape<T>& tape, const EncoderState<T>& state, TaskHead<T>& head,
                const TokenBatch& batch) {
  std::vector<int> rows;
  const auto& last = state.hidden.back();
  for (int e = 0; e < batch.batch; ++e) {
    if (head.kind == TaskKind::sequence)
      rows.push_back(tape.slice_rows(last[size_t(e)], 0, 1));
    else if (batch.lengths[size_t(e)] == batch.seq)
      rows.push_back(last[size_t(e)]);
    else
      rows.push_back(tape.slice_rows(last[size_t(e)], 0, batch.lengths[size_t(e)]));
  }
  int x = rows.size() == 1 ? rows[0] : tape.concat(rows, 0);
  return tape.add_rowvec(tape.matmul(x, tape.leaf(head.w)), tape.leaf(head.b));
}

inline std::vector<int> flat_targets(const Batch& batch, TaskKind kind) {
  if (kind == TaskKind::sequence) return batch.seq_labels;
  std::vector<int> t;
  for (const auto& tags : batch.tag_labels) t.insert(t.end(), tags.begin(), tags.end());
  return t;
}

// One optimizer update over one batch; returns the batch loss.
template <typename T>
double train_step(GatingModule<T>& module, Backbone<T>& backbone, TaskHead<T>& head,
                  const Batch& batch, Adam<T>& optim, DropoutCtx* dropout = nullptr) {
  if (batch.empty()) throw RejectedInput("train_step: empty batch");
  Tape<T> tape;
  module.attach(tape);
  EncoderState<T> state = encode(tape, batch.tokens, module.config(), backbone, &module,
                                 dropout);
  int logits = head_logits(tape, state, head, batch.tokens);
  int loss = tape.cross_entropy(logits, flat_targets(batch, head.kind));
  tape.backward(loss);
  NamedParams<T> params = collect_trainables(module, head);
  optim.step(params);
  return double(tape.value(loss).data[0]);
}

struct LogEntry {
  int step;
  int epoch;
  double loss;
};

struct FitResult {
  std::vector<LogEntry> log;
  int steps = 0;
};

// Epoch loop with seeded shuffling. The batch order depends only on the
// seed (not the mode), so every ablation arm sees the same data order.
template <typename T>
FitResult fit(GatingModule<T>& module, Backbone<T>& backbone, TaskHead<T>& head,
              const Dataset& dataset, const TrainConfig& cfg) {
  cfg.validate();
  if (dataset.train.empty()) throw RejectedInput("fit: train split is empty");
  Adam<T> optim(cfg.learning_rate);
  Rng order_rng = Rng(uint64_t(cfg.seed)).fork("batch-order");
  Rng dropout_rng = Rng(uint64_t(cfg.seed)).fork("dropout");
  DropoutCtx dropout{&dropout_rng, module.config().dropout};

  FitResult res;
  std::vector<int> indices(dataset.train.size());
  for (size_t i = 0; i < indices.size(); ++i) indices[i] = int(i);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    order_rng.shuffle(indices);
    for (size_t at = 0; at < indices.size(); at += size_t(cfg.batch_size)) {
      std::vector<int> chunk(indices.begin() + long(at),
                             indices.begin() + long(std::min(indices.size(),
                                                             at + size_t(cfg.batch_size))));
      Batch batch = make_batch(dataset.train, chunk, head.kind);
      double loss = train_step(module, backbone, head, batch, optim,
                               dropout.p > 0.0 ? &dropout : nullptr);
      ++res.steps;
      res.log.push_back({res.steps, epoch, loss});
      if (cfg.max_steps > 0 && res.steps >= cfg.max_steps) return res;
    }
  }
  return res;
}

// Greedy (argmax) evaluation. Sequence tasks report accuracy; tagging tasks
// report span micro-F1 under the exact span+type convention.
template <typename T>
Metrics evaluate(GatingModule<T>& module, Backbone<T>& backbone, TaskHead<T>& head,
                 const Dataset& dataset, const std::vector<Example>& split) {
  if (head.kind != dataset.task_kind)
    throw ContractViolation("evaluate: task head does not match dataset task kind");
  Metrics out;
  int64_t correct = 0;
  F1Counts counts;
  const int eval_batch = 32;
  for (size_t at = 0; at < split.size(); at += size_t(eval_batch)) {
    std::vector<int> chunk;
    for (size_t i = at; i < std::min(split.size(), at + size_t(eval_batch)); ++i)
      chunk.push_back(int(i));
    Batch batch = make_batch(split, chunk, head.kind);
    Tape<T> tape;
    module.attach(tape);
    EncoderState<T> state =
        encode(tape, batch.tokens, module.config(), backbone, &module);
    const Tensor<T>& logits = tape.value(head_logits(tape, state, head, batch.tokens));
    int row = 0;
    for (size_t b = 0; b < chunk.size(); ++b) {
      if (head.kind == TaskKind::sequence) {
        int best = 0;
        for (int c = 1; c < logits.cols(); ++c)
          if (logits.at(row, c) > logits.at(row, best)) best = c;
        correct += best == batch.seq_labels[b];
        ++row;
      } else {
        std::vector<int> pred;
        for (int i = 0; i < batch.tokens.lengths[b]; ++i, ++row) {
          int best = 0;
          for (int c = 1; c < logits.cols(); ++c)
            if (logits.at(row, c) > logits.at(row, best)) best = c;
          pred.push_back(best);
        }
        counts.add_sentence(extract_spans(pred, dataset.label_names),
                            extract_spans(batch.tag_labels[b], dataset.label_names));
      }
    }
  }
  if (head.kind == TaskKind::sequence)
    out.accuracy = split.empty() ? 0.0 : double(correct) / double(split.size());
  else
    out.span_micro_f1 = counts.f1();
  return out;
}

}  // namespace apt
