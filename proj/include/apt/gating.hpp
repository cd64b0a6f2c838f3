#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "apt/error.hpp"
#include "apt/model.hpp"
#include "apt/rng.hpp"
#include "apt/tape.hpp"
#include "apt/tensor.hpp"

namespace apt {

// Prefix variants. apt gates each prefix token by sigmoid(h W_i) and
// rescales the layer by a learnable lambda_i; the no_* modes drop one of
// those ingredients. pt2 is the plain pass-through baseline, pt2_plus the
// same with every length grown to ceil(1.5 l), pt2_star the same with
// per-layer lengths taken from a probe-derived plan.
enum class GateMode { apt, no_token_gate, no_layer_gate, no_hidden, pt2, pt2_plus, pt2_star };

inline const char* gate_mode_name(GateMode m) {
  switch (m) {
    case GateMode::apt: return "apt";
    case GateMode::no_token_gate: return "no_token_gate";
    case GateMode::no_layer_gate: return "no_layer_gate";
    case GateMode::no_hidden: return "no_hidden";
    case GateMode::pt2: return "pt2";
    case GateMode::pt2_plus: return "pt2_plus";
    case GateMode::pt2_star: return "pt2_star";
  }
  throw ContractViolation("gate_mode_name: unknown mode");
}

inline GateMode parse_gate_mode(const std::string& s) {
  for (GateMode m : {GateMode::apt, GateMode::no_token_gate, GateMode::no_layer_gate,
                     GateMode::no_hidden, GateMode::pt2, GateMode::pt2_plus,
                     GateMode::pt2_star})
    if (s == gate_mode_name(m)) return m;
  throw RejectedInput("unknown gate mode '" + s +
                      "' (expected apt|no_token_gate|no_layer_gate|no_hidden|pt2|"
                      "pt2_plus|pt2_star)");
}

// Which ingredients a mode trains.
inline bool mode_has_token_gate(GateMode m) {
  return m == GateMode::apt || m == GateMode::no_layer_gate || m == GateMode::no_hidden;
}
inline bool mode_has_layer_scale(GateMode m) {
  return m == GateMode::apt || m == GateMode::no_token_gate || m == GateMode::no_hidden;
}
inline bool mode_uses_hidden(GateMode m) {
  return m == GateMode::apt || m == GateMode::no_layer_gate;
}
inline bool mode_is_passthrough(GateMode m) {
  return m == GateMode::pt2 || m == GateMode::pt2_plus || m == GateMode::pt2_star;
}

// Per-layer prefix lengths a mode actually allocates. pt2_plus grows every
// layer to ceil(1.5 l); all other modes keep the configured lengths.
inline std::vector<int> effective_prefix_lengths(const ModelConfig& cfg, GateMode mode) {
  std::vector<int> out;
  out.reserve(size_t(cfg.num_layers));
  for (int i = 0; i < cfg.num_layers; ++i) {
    int l = cfg.prefix_len_at(i);
    if (mode == GateMode::pt2_plus) l = (3 * l + 1) / 2;
    out.push_back(l);
  }
  return out;
}

// Trainable parameters excluding the task head, in closed form: every mode
// pays 2 l_i d for the prefix K/V; gated modes add their gate parameters.
inline long long trainable_param_count(const ModelConfig& cfg, GateMode mode) {
  const long long d = cfg.model_dim;
  long long n = 0;
  for (int l : effective_prefix_lengths(cfg, mode)) {
    n += 2LL * l * d;
    if (mode_uses_hidden(mode)) n += d * l;             // W_i
    else if (mode == GateMode::no_hidden) n += l;       // b_i
    if (mode_has_layer_scale(mode)) n += 1;             // lambda_i
  }
  return n;
}

inline long long head_param_count(int model_dim, int num_classes) {
  return (long long)model_dim * num_classes + num_classes;
}

// Trainable per-layer prefix keys/values, each [l_i x d], drawn N(0, 0.02)
// from name-keyed streams so every mode (and every gate arm) starts from
// the same prefix values at equal lengths.
template <typename T>
struct PrefixBank {
  std::vector<Tensor<T>> key, value;

  template <typename F>
  void visit(F&& fn) {
    for (size_t i = 0; i < key.size(); ++i) {
      if (key[i].size() == 0) continue;
      fn("prefix.layer" + std::to_string(i) + ".key", key[i]);
      fn("prefix.layer" + std::to_string(i) + ".value", value[i]);
    }
  }
};

// Gate parameters for one layer; absent tensors stay empty. W starts at
// zero so every token gate opens at sigmoid(0) = 0.5, lambda starts at 1.
template <typename T>
struct GateParams {
  Tensor<T> w;       // d x l_i, token gate from hidden state
  Tensor<T> b;       // l_i, token gate without hidden state
  Tensor<T> lambda;  // scalar layer rescale
};

// Diagnostic switch: pin alpha to ones and lambda to 1.0 while still running
// the gating arithmetic, to show the gated path reproduces pass-through.
struct GateOverride {
  bool force_identity = false;
};

// Owns the prefix bank and gate parameters for one run and serves gated
// per-layer prefixes to the encoder. attach() must be called once per tape
// before encoding; shared (example-independent) gate nodes are cached per
// tape so pass-through and lambda-only modes reuse one node per layer.
template <typename T>
class GatingModule : public PrefixProvider<T> {
 public:
  GatingModule(const ModelConfig& cfg, GateMode mode, const Rng& rng,
               GateOverride override = {})
      : mode_(mode), override_(override), cfg_(cfg) {
    cfg_.validate();
    cfg_.layer_prefix_len = effective_prefix_lengths(cfg, mode);
    const int d = cfg_.model_dim;
    bank_.key.resize(size_t(cfg_.num_layers));
    bank_.value.resize(size_t(cfg_.num_layers));
    gates_.resize(size_t(cfg_.num_layers));
    for (int i = 0; i < cfg_.num_layers; ++i) {
      const int l = cfg_.prefix_len_at(i);
      if (l == 0) continue;
      const std::string tag = "layer" + std::to_string(i);
      Rng rk = rng.fork("prefix." + tag + ".key");
      Rng rv = rng.fork("prefix." + tag + ".value");
      bank_.key[size_t(i)] = Tensor<T>::randn({l, d}, rk, 0.02);
      bank_.value[size_t(i)] = Tensor<T>::randn({l, d}, rv, 0.02);
      bank_.key[size_t(i)].requires_grad = true;
      bank_.value[size_t(i)].requires_grad = true;
      auto& g = gates_[size_t(i)];
      if (mode_uses_hidden(mode_)) g.w = Tensor<T>::zeros({d, l});
      else if (mode_ == GateMode::no_hidden) g.b = Tensor<T>::zeros({l});
      if (mode_has_layer_scale(mode_)) g.lambda = Tensor<T>::full({1}, T(1));
      for (Tensor<T>* t : {&g.w, &g.b, &g.lambda})
        if (t->size() > 0) t->requires_grad = true;
    }
  }

  GateMode mode() const { return mode_; }
  // Model config with this mode's effective per-layer lengths baked in; the
  // encoder must be driven with this one so masks line up with the prefixes.
  const ModelConfig& config() const { return cfg_; }
  PrefixBank<T>& bank() { return bank_; }
  std::vector<GateParams<T>>& gate_params() { return gates_; }

  template <typename F>
  void visit(F&& fn) {
    bank_.visit(fn);
    for (size_t i = 0; i < gates_.size(); ++i) {
      const std::string tag = "gate.layer" + std::to_string(i);
      auto& g = gates_[i];
      if (g.w.size() > 0) fn(tag + ".w", g.w);
      if (g.b.size() > 0) fn(tag + ".b", g.b);
      if (g.lambda.size() > 0) fn(tag + ".lambda", g.lambda);
    }
  }

  void attach(Tape<T>& tape) {
    tape_ = &tape;
    slots_.assign(size_t(cfg_.num_layers), Slot{});
    for (int i = 0; i < cfg_.num_layers; ++i) {
      if (cfg_.prefix_len_at(i) == 0) continue;
      Slot& s = slots_[size_t(i)];
      s.pk = tape.leaf(bank_.key[size_t(i)]);
      s.pv = tape.leaf(bank_.value[size_t(i)]);
      auto& g = gates_[size_t(i)];
      if (g.w.size() > 0) s.w = tape.leaf(g.w);
      if (g.b.size() > 0) s.b = tape.leaf(g.b);
      if (g.lambda.size() > 0) s.lambda = tape.leaf(g.lambda);
    }
  }

  // Record token-gate node ids per (layer, example) for inspection; pass
  // nullptr to turn recording off. sink->at(layer) grows one id per example.
  void set_alpha_sink(std::vector<std::vector<int>>* sink) {
    alpha_sink_ = sink;
    if (sink) sink->assign(size_t(cfg_.num_layers), {});
  }

  std::optional<std::pair<int, int>> gated_prefix(Tape<T>& tape, int layer,
                                                  int h_first_id, int example) override {
    if (&tape != tape_)
      throw ContractViolation("gating module: attach() was not called for this tape");
    const int l = cfg_.prefix_len_at(layer);
    if (l == 0) return std::nullopt;
    Slot& s = slots_[size_t(layer)];
    (void)example;

    const bool per_example = !override_.force_identity && mode_uses_hidden(mode_);
    if (!per_example && s.shared_k != Tape<T>::kNone) {
      if (alpha_sink_) alpha_sink_->at(size_t(layer)).push_back(s.shared_alpha);
      return std::make_pair(s.shared_k, s.shared_v);
    }

    int alpha = Tape<T>::kNone;
    if (override_.force_identity) {
      if (mode_has_token_gate(mode_))
        alpha = tape.constant({l}, std::vector<T>(size_t(l), T(1)));
    } else if (mode_uses_hidden(mode_)) {
      // [1 x d] x [d x l] -> [1 x l], flattened to a length-l gate vector.
      alpha = tape.reshape(tape.sigmoid(tape.matmul(h_first_id, s.w)), {l});
    } else if (mode_ == GateMode::no_hidden) {
      alpha = tape.sigmoid(s.b);
    }

    int k = s.pk, v = s.pv;
    if (alpha != Tape<T>::kNone) {
      k = tape.scale_rows(k, alpha);
      v = tape.scale_rows(v, alpha);
    }
    if (mode_has_layer_scale(mode_)) {
      int lam = override_.force_identity ? tape.constant({1}, {T(1)}) : s.lambda;
      k = tape.mul_scalar(k, lam);
      v = tape.mul_scalar(v, lam);
    }
    if (!per_example) {
      s.shared_k = k;
      s.shared_v = v;
      s.shared_alpha = alpha;
    }
    if (alpha_sink_) alpha_sink_->at(size_t(layer)).push_back(alpha);
    return std::make_pair(k, v);
  }

 private:
  struct Slot {
    int pk = Tape<T>::kNone, pv = Tape<T>::kNone;
    int w = Tape<T>::kNone, b = Tape<T>::kNone, lambda = Tape<T>::kNone;
    int shared_k = Tape<T>::kNone, shared_v = Tape<T>::kNone;
    int shared_alpha = Tape<T>::kNone;
  };

  GateMode mode_;
  GateOverride override_;
  ModelConfig cfg_;
  PrefixBank<T> bank_;
  std::vector<GateParams<T>> gates_;
  Tape<T>* tape_ = nullptr;
  std::vector<Slot> slots_;
  std::vector<std::vector<int>>* alpha_sink_ = nullptr;
};

}  // namespace apt
