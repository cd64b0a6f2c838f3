#pragma once

#include <cmath>
#include <cstdio>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "apt/error.hpp"

namespace apt {

// Half-open token range [start, end) carrying an entity type.
struct Span {
  int start = 0, end = 0;
  std::string type;
  auto operator<=>(const Span&) const = default;
};

// BIO tag ids -> spans, conlleval convention: B-X always opens a span; a
// stray I-X (after O, sentence start, or a different type) opens one too.
inline std::vector<Span> extract_spans(const std::vector<int>& tags,
                                       const std::vector<std::string>& tag_names) {
  std::vector<Span> spans;
  Span open;
  bool has_open = false;
  auto close = [&](int end) {
    if (has_open) {
      open.end = end;
      spans.push_back(open);
      has_open = false;
    }
  };
  for (int i = 0; i < int(tags.size()); ++i) {
    const std::string& name = tag_names.at(size_t(tags[size_t(i)]));
    if (name == "O") {
      close(i);
      continue;
    }
    if (name.size() < 3 || name[1] != '-')
      throw RejectedInput("extract_spans: malformed tag name '" + name + "'");
    const std::string type = name.substr(2);
    if (name[0] == 'B' || !has_open || open.type != type) {
      close(i);
      open = Span{i, i, type};
      has_open = true;
    }
  }
  close(int(tags.size()));
  return spans;
}

struct F1Counts {
  int64_t tp = 0, fp = 0, fn = 0;

  void add_sentence(const std::vector<Span>& pred, const std::vector<Span>& gold) {
    std::set<std::tuple<int, int, std::string>> gold_set;
    for (const auto& s : gold) gold_set.emplace(s.start, s.end, s.type);
    for (const auto& s : pred) {
      if (gold_set.erase({s.start, s.end, s.type}))
        ++tp;
      else
        ++fp;
    }
    fn += int64_t(gold_set.size());
  }

  // Degenerate denominators are defined as 0 rather than NaN.
  double precision() const { return tp + fp == 0 ? 0.0 : double(tp) / double(tp + fp); }
  double recall() const { return tp + fn == 0 ? 0.0 : double(tp) / double(tp + fn); }
  double f1() const {
    const double p = precision(), r = recall();
    return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
  }
};

// Fractions in [0,1]; exactly one of the two is set depending on task kind.
struct Metrics {
  std::optional<double> accuracy;
  std::optional<double> span_micro_f1;

  double primary() const {
    if (accuracy) return *accuracy;
    if (span_micro_f1) return *span_micro_f1;
    throw ContractViolation("Metrics: no metric recorded");
  }
};

inline double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / double(xs.size());
}

// Population standard deviation (N in the denominator).
inline double std_of(const std::vector<double>& xs) {
  const double m = mean_of(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / double(xs.size()));
}

// "55.7_6.5"-style summary of percent-scale values.
inline std::string mean_std_string(double mean, double stddev) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f_%.1f", mean, stddev);
  return buf;
}

}  // namespace apt
