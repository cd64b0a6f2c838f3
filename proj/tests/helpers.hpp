#pragma once

// Shared fixtures for the unit tests: small configs, random batches, and a
// first-token classification head built straight on the tape.

#include <vector>

#include "apt/model.hpp"
#include "apt/rng.hpp"
#include "apt/tape.hpp"
#include "apt/tensor.hpp"

namespace apt::testutil {

inline ModelConfig small_config(int vocab = 13) {
  ModelConfig cfg;
  cfg.num_layers = 2;
  cfg.num_heads = 2;
  cfg.model_dim = 8;
  cfg.ffn_dim = 12;
  cfg.vocab_size = vocab;
  cfg.max_seq_len = 10;
  cfg.prefix_len = 3;
  return cfg;
}

inline TokenBatch random_batch(int batch, int min_len, int max_len, int vocab, Rng rng) {
  std::vector<std::vector<int>> rows;
  for (int e = 0; e < batch; ++e) {
    int len = min_len + int(rng.next_below(uint64_t(max_len - min_len + 1)));
    std::vector<int> row;
    for (int i = 0; i < len; ++i) row.push_back(int(rng.next_below(uint64_t(vocab))));
    rows.push_back(std::move(row));
  }
  return TokenBatch::from_rows(rows, 0);
}

// Stack each example's first-token hidden state and apply a linear head.
template <typename T>
int sequence_logits(Tape<T>& tape, const EncoderState<T>& state, int head_w, int head_b) {
  std::vector<int> firsts;
  const auto& last = state.hidden.back();
  for (int id : last) firsts.push_back(tape.slice_rows(id, 0, 1));
  return tape.add_rowvec(tape.matmul(tape.concat(firsts, 0), head_w), head_b);
}

}  // namespace apt::testutil
