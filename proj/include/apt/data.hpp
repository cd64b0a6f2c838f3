#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "apt/error.hpp"

namespace apt {

enum class TaskKind { sequence, tagging };

inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr const char* kPadWord = "<pad>";
inline constexpr const char* kUnkWord = "<unk>";

// One sentence. Sequence tasks use `label`; tagging tasks use `tags`,
// aligned 1:1 with tokens.
struct Example {
  std::vector<int> tokens;
  int label = -1;
  std::vector<int> tags;
};

// Immutable after construction; safe for concurrent readers.
struct Dataset {
  std::string name;
  TaskKind task_kind = TaskKind::sequence;
  std::vector<std::string> vocab;        // id -> word; [0]=<pad>, [1]=<unk>
  std::vector<std::string> label_names;  // class names or BIO tag names
  std::vector<Example> train, dev, test;

  int num_classes() const { return int(label_names.size()); }
  // Content hash over every split, the vocab, and the label set.
  uint64_t fingerprint() const;
  std::string fingerprint_hex() const;
};

// CoNLL column format: one token per line ("token ... tag", first column is
// the word, last the BIO tag), blank line between sentences. The whole text
// becomes the train split; vocabularies are built from it in first-seen
// order. Malformed BIO sequences raise ParseError with the line number.
Dataset parse_conll(const std::string& text);

// Same format with explicit splits. Word and tag vocabularies come from the
// train text; unknown dev/test words map to <unk>, unknown tags are errors.
Dataset parse_conll_splits(const std::string& train_text, const std::string& dev_text,
                           const std::string& test_text);

// Inverse of parse_conll for tagging datasets (split is "train", "dev" or
// "test"). Sequence datasets have no tag column and are rejected.
std::string render_conll(const Dataset& ds, const std::string& split);

enum class SynthKind { seq_parity, seq_keyword, tag_span };

SynthKind parse_synth_kind(const std::string& s);
const char* synth_kind_name(SynthKind k);

struct SynthOptions {
  int min_len = 4;
  int max_len = 8;
  bool force_negative = false;  // seq_keyword: never emit a keyword
};

// Deterministic synthetic tasks, n train examples plus n/4 dev and n/4 test
// (at least one each). All randomness flows through the documented PRNG, so
// a seed produces identical datasets on every platform.
Dataset gen_synthetic(SynthKind kind, uint64_t seed, int n, SynthOptions opts = {});

// The fixed-seed k-shot protocol for sequence tasks: k train and k dev
// examples per class, sampled after sorting by content hash so the draw is
// independent of input order; the test split is the full original dev split.
Dataset kshot_sample(const Dataset& dataset, int k, uint64_t seed);

}  // namespace apt
