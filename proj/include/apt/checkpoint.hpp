#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "apt/data.hpp"
#include "apt/error.hpp"
#include "apt/gating.hpp"
#include "apt/model.hpp"
#include "apt/rng.hpp"
#include "apt/tensor.hpp"
#include "apt/training.hpp"

namespace apt {

inline constexpr char kCheckpointMagic[4] = {'A', 'P', 'T', 'C'};
inline constexpr uint32_t kCheckpointVersion = 1;

// Everything needed to rebuild a trained model: the requested model config
// (per-layer rescaling for derived modes is re-applied on restore), the gate
// mode, the task description, and a named tensor table stored as f32.
struct Checkpoint {
  ModelConfig config;
  GateMode mode = GateMode::apt;
  TaskKind task_kind = TaskKind::sequence;
  std::vector<std::string> label_names;
  nlohmann::json extra = nlohmann::json::object();  // free-form provenance
  std::vector<std::pair<std::string, Tensor<float>>> tensors;

  const Tensor<float>* find(const std::string& name) const {
    for (const auto& [n, t] : tensors)
      if (n == name) return &t;
    return nullptr;
  }
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

// Snapshot a model into a canonical (name-sorted) tensor table.
template <typename T>
Checkpoint make_checkpoint(const ModelConfig& requested, Backbone<T>& backbone,
                           GatingModule<T>& module, TaskHead<T>& head,
                           const std::vector<std::string>& label_names) {
  Checkpoint ck;
  ck.config = requested;
  ck.mode = module.mode();
  ck.task_kind = head.kind;
  ck.label_names = label_names;
  auto put = [&](const std::string& name, Tensor<T>& t) {
    std::vector<float> data(t.data.begin(), t.data.end());
    ck.tensors.emplace_back(name, Tensor<float>(t.shape, std::move(data)));
  };
  backbone.visit(put);
  module.visit(put);
  head.visit(put);
  std::sort(ck.tensors.begin(), ck.tensors.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return ck;
}

template <typename T>
struct ModelBundle {
  ModelConfig requested;  // pre-rescale config, as stored in the checkpoint
  Backbone<T> backbone;
  GatingModule<T> module;
  TaskHead<T> head;
};

// Rebuild a model from a checkpoint. Every model tensor must be present
// with the right shape and every stored tensor must be consumed.
template <typename T>
ModelBundle<T> restore_model(const Checkpoint& ck) {
  ck.config.validate();
  const Rng zero(0);
  ModelBundle<T> bundle{
      ck.config, init_backbone<T>(ck.config, zero), GatingModule<T>(ck.config, ck.mode, zero),
      TaskHead<T>::make(ck.task_kind, ck.config.model_dim, int(ck.label_names.size()),
                        zero)};

  std::map<std::string, Tensor<T>*> live;
  auto reg = [&](const std::string& name, Tensor<T>& t) { live[name] = &t; };
  bundle.backbone.visit(reg);
  bundle.module.visit(reg);
  bundle.head.visit(reg);

  size_t filled = 0;
  for (const auto& [name, stored] : ck.tensors) {
    auto it = live.find(name);
    if (it == live.end()) throw IoError("checkpoint: unknown tensor '" + name + "'");
    Tensor<T>& dst = *it->second;
    if (dst.shape != stored.shape)
      throw IoError("checkpoint: tensor '" + name + "' has mismatched shape");
    std::copy(stored.data.begin(), stored.data.end(), dst.data.begin());
    ++filled;
  }
  if (filled != live.size())
    throw IoError("checkpoint: missing " + std::to_string(live.size() - filled) +
                  " model tensor(s)");
  freeze_base(bundle.backbone);
  return bundle;
}

}  // namespace apt
