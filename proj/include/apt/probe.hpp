#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "apt/data.hpp"
#include "apt/error.hpp"
#include "apt/gating.hpp"
#include "apt/model.hpp"
#include "apt/tape.hpp"

namespace apt {

// Token-gate activations accumulated over a split. Sums are kept (rather
// than means) so partial results merge exactly; means are derived on demand.
struct GateStats {
  std::vector<std::vector<double>> alpha_sum;  // [layer][prefix token]
  std::vector<double> lambda;                  // per layer; 1.0 when the mode has none
  int64_t examples = 0;

  void merge(const GateStats& other) {
    if (alpha_sum.size() != other.alpha_sum.size())
      throw ContractViolation("GateStats::merge: layer count mismatch");
    for (size_t i = 0; i < alpha_sum.size(); ++i) {
      if (alpha_sum[i].size() != other.alpha_sum[i].size())
        throw ContractViolation("GateStats::merge: prefix length mismatch");
      for (size_t j = 0; j < alpha_sum[i].size(); ++j)
        alpha_sum[i][j] += other.alpha_sum[i][j];
    }
    examples += other.examples;
  }

  std::vector<std::vector<double>> mean_alpha() const {
    if (examples == 0) throw ContractViolation("GateStats: no examples collected");
    auto out = alpha_sum;
    for (auto& layer : out)
      for (double& v : layer) v /= double(examples);
    return out;
  }
};

// Run the encoder over a split (no gradients, no dropout) and average the
// token-gate values. Only modes with a token gate can be probed.
template <typename T>
GateStats collect_gates(GatingModule<T>& module, Backbone<T>& backbone,
                        const std::vector<Example>& split) {
  if (!mode_has_token_gate(module.mode()))
    throw RejectedInput("checkpoint has no gates");
  if (split.empty()) throw RejectedInput("collect_gates: empty split");

  const ModelConfig& cfg = module.config();
  GateStats stats;
  stats.alpha_sum.resize(size_t(cfg.num_layers));
  for (int i = 0; i < cfg.num_layers; ++i)
    stats.alpha_sum[size_t(i)].assign(size_t(cfg.prefix_len_at(i)), 0.0);
  stats.lambda.assign(size_t(cfg.num_layers), 1.0);
  if (mode_has_layer_scale(module.mode()))
    for (int i = 0; i < cfg.num_layers; ++i)
      if (module.gate_params()[size_t(i)].lambda.size() > 0)
        stats.lambda[size_t(i)] = double(module.gate_params()[size_t(i)].lambda.data[0]);

  const int eval_batch = 32;
  for (size_t at = 0; at < split.size(); at += size_t(eval_batch)) {
    std::vector<std::vector<int>> rows;
    for (size_t i = at; i < std::min(split.size(), at + size_t(eval_batch)); ++i)
      rows.push_back(split[i].tokens);
    Tape<T> tape;
    module.attach(tape);
    std::vector<std::vector<int>> sink;
    module.set_alpha_sink(&sink);
    encode(tape, TokenBatch::from_rows(rows, kPadId), cfg, backbone, &module);
    module.set_alpha_sink(nullptr);
    for (int i = 0; i < cfg.num_layers; ++i) {
      const int l = cfg.prefix_len_at(i);
      if (l == 0) continue;
      for (int id : sink[size_t(i)]) {
        const Tensor<T>& a = tape.value(id);
        for (int j = 0; j < l; ++j)
          stats.alpha_sum[size_t(i)][size_t(j)] += double(a.data[size_t(j)]);
      }
    }
    stats.examples += int64_t(rows.size());
  }
  return stats;
}

// Keep, per layer, the prefix tokens whose mean gate clears the threshold
// (never fewer than min_len so no layer loses its prefix entirely).
inline std::vector<int> derive_variable_lengths(
    const std::vector<std::vector<double>>& mean_alpha, double tau = 0.5,
    int min_len = 1) {
  if (tau < 0.0 || tau > 1.0)
    throw RejectedInput("derive_variable_lengths: tau must be in [0, 1]");
  if (min_len < 0) throw RejectedInput("derive_variable_lengths: min_len must be >= 0");
  std::vector<int> lengths;
  for (const auto& layer : mean_alpha) {
    int keep = 0;
    for (double a : layer)
      if (a >= tau) ++keep;
    lengths.push_back(std::max(min_len, keep));
  }
  return lengths;
}

// Per-layer length plan derived from a probe, carried between runs as JSON.
struct VariablePrefixPlan {
  std::vector<int> lengths;
  double tau = 0.5;
  std::string source;  // which checkpoint the plan was probed from
};

std::string plan_to_json(const VariablePrefixPlan& plan);
VariablePrefixPlan plan_from_json(const std::string& text);

// Apply a probe-derived plan to a base config. The plan must name exactly
// one length per layer and may only shrink the configured prefix.
inline ModelConfig build_pt2star_config(const ModelConfig& base,
                                        const std::vector<int>& lengths) {
  if (int(lengths.size()) != base.num_layers)
    throw RejectedInput("prefix plan names " + std::to_string(lengths.size()) +
                        " layers but the model has " + std::to_string(base.num_layers));
  ModelConfig cfg = base;
  cfg.layer_prefix_len = lengths;
  for (int i = 0; i < base.num_layers; ++i) {
    if (lengths[size_t(i)] < 0)
      throw RejectedInput("prefix plan: negative length at layer " + std::to_string(i));
    if (lengths[size_t(i)] > base.prefix_len_at(i))
      throw RejectedInput("prefix plan: layer " + std::to_string(i) +
                          " exceeds the configured prefix length");
  }
  cfg.validate();
  return cfg;
}

// Gate heatmap serialization: CSV for exact values, SVG for a quick look.
std::string heatmap_csv(const std::vector<std::vector<double>>& mean_alpha);
std::vector<std::vector<double>> parse_heatmap_csv(const std::string& text);
std::string lambda_csv(const std::vector<double>& lambda);
std::vector<double> parse_lambda_csv(const std::string& text);
std::string heatmap_svg(const std::vector<std::vector<double>>& mean_alpha);

}  // namespace apt
