#include "apt/data.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>
#include <tuple>

#include "apt/rng.hpp"

namespace apt {

namespace {

struct RawSentence {
  std::vector<std::string> words, tags;
  std::vector<int> lines;  // 1-based source line per token
};

bool is_blank(const std::string& line) {
  for (char c : line)
    if (c != ' ' && c != '\t' && c != '\r') return false;
  return true;
}

void check_tag_syntax(const std::string& tag, int line_no) {
  if (tag == "O") return;
  if (tag.size() >= 3 && (tag[0] == 'B' || tag[0] == 'I') && tag[1] == '-') return;
  throw ParseError("malformed tag '" + tag + "' (expected O, B-X or I-X)", line_no);
}

// BIO continuity: I-X must continue a B-X or I-X run.
void check_bio(const RawSentence& s) {
  for (size_t i = 0; i < s.tags.size(); ++i) {
    const std::string& t = s.tags[i];
    if (t[0] != 'I') continue;
    const std::string type = t.substr(2);
    bool ok = i > 0 && (s.tags[i - 1] == "B-" + type || s.tags[i - 1] == "I-" + type);
    if (!ok) throw ParseError("tag " + t + " does not continue a " + type + " span",
                              s.lines[i]);
  }
}

std::vector<RawSentence> parse_sentences(const std::string& text) {
  std::vector<RawSentence> out;
  RawSentence cur;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  auto flush = [&] {
    if (cur.words.empty()) return;
    check_bio(cur);
    out.push_back(std::move(cur));
    cur = {};
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) {
      flush();
      continue;
    }
    std::istringstream fields(line);
    std::vector<std::string> cols;
    std::string f;
    while (fields >> f) cols.push_back(f);
    if (cols.size() < 2)
      throw ParseError("expected at least 'token tag', got '" + line + "'", line_no);
    check_tag_syntax(cols.back(), line_no);
    cur.words.push_back(cols.front());
    cur.tags.push_back(cols.back());
    cur.lines.push_back(line_no);
  }
  flush();
  return out;
}

class VocabBuilder {
 public:
  VocabBuilder() {
    add(kPadWord);
    add(kUnkWord);
  }
  int add(const std::string& w) {
    auto [it, fresh] = index_.try_emplace(w, int(words_.size()));
    if (fresh) words_.push_back(w);
    return it->second;
  }
  int lookup(const std::string& w) const {
    auto it = index_.find(w);
    return it == index_.end() ? kUnkId : it->second;
  }
  std::vector<std::string> take() { return std::move(words_); }

 private:
  std::map<std::string, int> index_;
  std::vector<std::string> words_;
};

class LabelBuilder {
 public:
  int add(const std::string& name) {
    auto [it, fresh] = index_.try_emplace(name, int(names_.size()));
    if (fresh) names_.push_back(name);
    return it->second;
  }
  // -1 when the label was never seen in train
  int lookup(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? -1 : it->second;
  }
  std::vector<std::string> take() { return std::move(names_); }

 private:
  std::map<std::string, int> index_;
  std::vector<std::string> names_;
};

std::vector<Example> map_split(const std::vector<RawSentence>& sents,
                               const VocabBuilder& vocab, const LabelBuilder& labels) {
  std::vector<Example> out;
  for (const auto& s : sents) {
    Example e;
    for (size_t i = 0; i < s.words.size(); ++i) {
      e.tokens.push_back(vocab.lookup(s.words[i]));
      int tag = labels.lookup(s.tags[i]);
      if (tag < 0)
        throw ParseError("tag '" + s.tags[i] + "' does not occur in the train split",
                         s.lines[i]);
      e.tags.push_back(tag);
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::string example_key(const Example& e) {
  std::string key = std::to_string(e.label) + "|";
  for (int t : e.tokens) {
    key += std::to_string(t);
    key += ',';
  }
  key += '|';
  for (int t : e.tags) {
    key += std::to_string(t);
    key += ',';
  }
  return key;
}

}  // namespace

uint64_t Dataset::fingerprint() const {
  std::string canon = name + '\x1f' + (task_kind == TaskKind::sequence ? "seq" : "tag");
  for (const auto& w : vocab) canon += '\x1f' + w;
  for (const auto& l : label_names) canon += '\x1f' + l;
  for (const auto* split : {&train, &dev, &test}) {
    canon += '\x1e';
    for (const auto& e : *split) canon += '\x1f' + example_key(e);
  }
  return Rng::fnv1a64(canon);
}

std::string Dataset::fingerprint_hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)fingerprint());
  return buf;
}

Dataset parse_conll(const std::string& text) {
  return parse_conll_splits(text, "", "");
}

Dataset parse_conll_splits(const std::string& train_text, const std::string& dev_text,
                           const std::string& test_text) {
  Dataset ds;
  ds.name = "conll";
  ds.task_kind = TaskKind::tagging;

  auto train_raw = parse_sentences(train_text);
  VocabBuilder vocab;
  LabelBuilder labels;
  for (const auto& s : train_raw) {
    for (const auto& w : s.words) vocab.add(w);
    for (const auto& t : s.tags) labels.add(t);
  }
  ds.train = map_split(train_raw, vocab, labels);
  ds.dev = map_split(parse_sentences(dev_text), vocab, labels);
  ds.test = map_split(parse_sentences(test_text), vocab, labels);
  ds.vocab = vocab.take();
  ds.label_names = labels.take();
  return ds;
}

std::string render_conll(const Dataset& ds, const std::string& split) {
  if (ds.task_kind != TaskKind::tagging)
    throw RejectedInput("render_conll: only tagging datasets have a tag column");
  const std::vector<Example>* exs = nullptr;
  if (split == "train") exs = &ds.train;
  else if (split == "dev") exs = &ds.dev;
  else if (split == "test") exs = &ds.test;
  else throw RejectedInput("render_conll: unknown split '" + split + "'");

  std::string out;
  for (const auto& e : *exs) {
    for (size_t i = 0; i < e.tokens.size(); ++i) {
      out += ds.vocab.at(size_t(e.tokens[i]));
      out += ' ';
      out += ds.label_names.at(size_t(e.tags[i]));
      out += '\n';
    }
    out += '\n';
  }
  return out;
}

SynthKind parse_synth_kind(const std::string& s) {
  if (s == "seq_parity") return SynthKind::seq_parity;
  if (s == "seq_keyword") return SynthKind::seq_keyword;
  if (s == "tag_span") return SynthKind::tag_span;
  throw RejectedInput("unknown task '" + s +
                      "' (expected seq_parity|seq_keyword|tag_span)");
}

const char* synth_kind_name(SynthKind k) {
  switch (k) {
    case SynthKind::seq_parity: return "seq_parity";
    case SynthKind::seq_keyword: return "seq_keyword";
    case SynthKind::tag_span: return "tag_span";
  }
  throw ContractViolation("synth_kind_name: unknown kind");
}

namespace {

const std::vector<std::string> kFillers = {
    "w0",  "w1",  "w2",  "w3",  "w4",  "w5",  "w6",  "w7",  "w8",  "w9",
    "w10", "w11", "w12", "w13", "w14", "w15", "w16", "w17", "w18", "w19"};
const std::vector<std::string> kKeywords = {"alpha", "beta", "gamma"};
const char* kMarker = "flag";
const std::vector<std::string> kPerNames = {"anna", "boris", "clara", "dmitri", "elena"};
const std::vector<std::string> kLocNames = {"paris", "lagos", "quito", "rome", "sofia"};

int sentence_len(Rng& rng, const SynthOptions& o) {
  return o.min_len + int(rng.next_below(uint64_t(o.max_len - o.min_len + 1)));
}

Example gen_parity(Rng& rng, const SynthOptions& o, int marker_id, int n_fillers) {
  Example e;
  int count = 0;
  const int len = sentence_len(rng, o);
  for (int i = 0; i < len; ++i) {
    if (rng.next_double() < 0.25) {
      e.tokens.push_back(marker_id);
      ++count;
    } else {
      e.tokens.push_back(2 + int(rng.next_below(uint64_t(n_fillers))));
    }
  }
  e.label = count % 2;
  return e;
}

// Labels are drawn as a fair coin so the classes stay balanced; positive
// sentences plant keywords densely (with at least one guaranteed) so the
// signal does not vanish in long sentences.
Example gen_keyword(Rng& rng, const SynthOptions& o, int first_kw_id, int n_fillers) {
  Example e;
  const int len = sentence_len(rng, o);
  const bool positive = !o.force_negative && rng.next_below(2) == 1;
  int planted = 0;
  for (int i = 0; i < len; ++i) {
    if (positive && rng.next_double() < 0.7) {
      e.tokens.push_back(first_kw_id + int(rng.next_below(kKeywords.size())));
      ++planted;
    } else {
      e.tokens.push_back(2 + int(rng.next_below(uint64_t(n_fillers))));
    }
  }
  if (positive && planted == 0) {
    const size_t at = size_t(rng.next_below(uint64_t(len)));
    e.tokens[at] = first_kw_id + int(rng.next_below(kKeywords.size()));
  }
  e.label = positive ? 1 : 0;
  return e;
}

// Filler-separated spans: sentences alternate one-or-more fillers with at
// most one planted span, so entity words never touch across spans and a
// dictionary oracle can recover every span exactly.
Example gen_span(Rng& rng, const SynthOptions& o, int first_per_id, int first_loc_id,
                 int n_fillers) {
  Example e;
  const int len = sentence_len(rng, o);
  while (int(e.tokens.size()) < len) {
    e.tokens.push_back(2 + int(rng.next_below(uint64_t(n_fillers))));
    e.tags.push_back(0);  // O
    const int room = len - int(e.tokens.size());
    if (room >= 1 && rng.next_double() < 0.5) {
      const bool per = rng.next_below(2) == 0;
      const int base = per ? first_per_id : first_loc_id;
      const int dict = per ? int(kPerNames.size()) : int(kLocNames.size());
      const int b_tag = per ? 1 : 3;  // B-PER / B-LOC
      const int span_len = 1 + int(rng.next_below(uint64_t(std::min(room, 3))));
      for (int j = 0; j < span_len; ++j) {
        e.tokens.push_back(base + int(rng.next_below(uint64_t(dict))));
        e.tags.push_back(j == 0 ? b_tag : b_tag + 1);
      }
    }
  }
  return e;
}

}  // namespace

Dataset gen_synthetic(SynthKind kind, uint64_t seed, int n, SynthOptions opts) {
  if (n <= 0) throw RejectedInput("gen_synthetic: n must be positive");
  if (opts.min_len < 1 || opts.max_len < opts.min_len)
    throw RejectedInput("gen_synthetic: need 1 <= min_len <= max_len");

  Dataset ds;
  ds.name = synth_kind_name(kind);
  VocabBuilder vocab;
  for (const auto& w : kFillers) vocab.add(w);
  const int n_fillers = int(kFillers.size());

  int marker_id = -1, first_kw_id = -1, first_per_id = -1, first_loc_id = -1;
  switch (kind) {
    case SynthKind::seq_parity:
      ds.task_kind = TaskKind::sequence;
      ds.label_names = {"even", "odd"};
      marker_id = vocab.add(kMarker);
      break;
    case SynthKind::seq_keyword:
      ds.task_kind = TaskKind::sequence;
      ds.label_names = {"absent", "present"};
      for (const auto& w : kKeywords) {
        int id = vocab.add(w);
        if (first_kw_id < 0) first_kw_id = id;
      }
      break;
    case SynthKind::tag_span:
      ds.task_kind = TaskKind::tagging;
      ds.label_names = {"O", "B-PER", "I-PER", "B-LOC", "I-LOC"};
      for (const auto& w : kPerNames) {
        int id = vocab.add(w);
        if (first_per_id < 0) first_per_id = id;
      }
      for (const auto& w : kLocNames) {
        int id = vocab.add(w);
        if (first_loc_id < 0) first_loc_id = id;
      }
      break;
  }
  ds.vocab = vocab.take();

  Rng root(seed);
  auto fill = [&](std::vector<Example>& split, const char* tag, int count) {
    Rng rng = root.fork(tag);
    for (int i = 0; i < count; ++i) {
      switch (kind) {
        case SynthKind::seq_parity:
          split.push_back(gen_parity(rng, opts, marker_id, n_fillers));
          break;
        case SynthKind::seq_keyword:
          split.push_back(gen_keyword(rng, opts, first_kw_id, n_fillers));
          break;
        case SynthKind::tag_span:
          split.push_back(gen_span(rng, opts, first_per_id, first_loc_id, n_fillers));
          break;
      }
    }
  };
  fill(ds.train, "train", n);
  fill(ds.dev, "dev", std::max(1, n / 4));
  fill(ds.test, "test", std::max(1, n / 4));
  return ds;
}

Dataset kshot_sample(const Dataset& dataset, int k, uint64_t seed) {
  if (dataset.task_kind != TaskKind::sequence)
    throw RejectedInput("kshot_sample: defined for sequence tasks only");
  if (k <= 0) throw RejectedInput("kshot_sample: k must be positive");

  Dataset out;
  out.name = dataset.name;
  out.task_kind = dataset.task_kind;
  out.vocab = dataset.vocab;
  out.label_names = dataset.label_names;
  out.test = dataset.dev;  // the entire development set is treated as test

  Rng root(seed);
  auto sample_split = [&](const std::vector<Example>& pool, const char* split_tag,
                          std::vector<Example>& into) {
    for (int c = 0; c < dataset.num_classes(); ++c) {
      std::vector<const Example*> group;
      for (const auto& e : pool)
        if (e.label == c) group.push_back(&e);
      if (int(group.size()) < k)
        throw RejectedInput("kshot_sample: class '" + dataset.label_names[size_t(c)] +
                            "' has only " + std::to_string(group.size()) +
                            " examples in " + split_tag + ", need " + std::to_string(k));
      // order by content, not by position, so shuffled inputs sample the same
      std::sort(group.begin(), group.end(), [](const Example* a, const Example* b) {
        auto ka = Rng::fnv1a64(example_key(*a));
        auto kb = Rng::fnv1a64(example_key(*b));
        return std::tie(ka, a->tokens, a->label) < std::tie(kb, b->tokens, b->label);
      });
      std::vector<int> order(group.size());
      for (size_t i = 0; i < order.size(); ++i) order[i] = int(i);
      Rng rng = root.fork(split_tag).fork(dataset.label_names[size_t(c)]);
      rng.shuffle(order);
      for (int i = 0; i < k; ++i) into.push_back(*group[size_t(order[size_t(i)])]);
    }
  };
  sample_split(dataset.train, "train", out.train);
  sample_split(dataset.dev, "dev", out.dev);
  return out;
}

}  // namespace apt
