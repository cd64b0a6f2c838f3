#pragma once

#include <string>

#include <json.hpp>

#include "apt/error.hpp"
#include "apt/model.hpp"

namespace apt {

inline nlohmann::json config_to_json(const ModelConfig& c) {
  nlohmann::json j{{"num_layers", c.num_layers},   {"num_heads", c.num_heads},
                   {"model_dim", c.model_dim},     {"ffn_dim", c.ffn_dim},
                   {"vocab_size", c.vocab_size},   {"max_seq_len", c.max_seq_len},
                   {"prefix_len", c.prefix_len},   {"dropout", c.dropout}};
  if (!c.layer_prefix_len.empty()) j["layer_prefix_len"] = c.layer_prefix_len;
  return j;
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.num_layers = j.at("num_layers").get<int>();
    c.num_heads = j.at("num_heads").get<int>();
    c.model_dim = j.at("model_dim").get<int>();
    c.ffn_dim = j.at("ffn_dim").get<int>();
    c.vocab_size = j.at("vocab_size").get<int>();
    c.max_seq_len = j.at("max_seq_len").get<int>();
    c.prefix_len = j.at("prefix_len").get<int>();
    c.dropout = j.value("dropout", 0.0);
    if (j.contains("layer_prefix_len"))
      c.layer_prefix_len = j.at("layer_prefix_len").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    throw RejectedInput(std::string("model config JSON: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace apt
