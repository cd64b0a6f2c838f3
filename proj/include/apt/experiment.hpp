#pragma once

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "apt/data.hpp"
#include "apt/error.hpp"
#include "apt/gating.hpp"
#include "apt/metrics.hpp"
#include "apt/model.hpp"
#include "apt/training.hpp"

namespace apt {

// One (arm, seed) measurement, as a percent-scale value.
struct ReportRow {
  std::string arm;
  int seed = 0;
  double value = 0.0;
};

struct ArmSummary {
  double mean = 0.0;
  double stddev = 0.0;
};

struct Report {
  std::string metric_name;
  std::vector<ReportRow> rows;  // ordered: arms in input order, seeds in input order

  std::map<std::string, ArmSummary> summaries() const {
    std::map<std::string, std::vector<double>> by_arm;
    for (const auto& r : rows) by_arm[r.arm].push_back(r.value);
    std::map<std::string, ArmSummary> out;
    for (const auto& [arm, vals] : by_arm) out[arm] = {mean_of(vals), std_of(vals)};
    return out;
  }

  std::string to_csv() const {
    auto sums = summaries();
    std::string csv = "arm,seed,metric,mean,std\n";
    char buf[160];
    for (const auto& r : rows) {
      const ArmSummary& s = sums.at(r.arm);
      std::snprintf(buf, sizeof buf, "%s,%d,%.17g,%.17g,%.17g\n", r.arm.c_str(), r.seed,
                    r.value, s.mean, s.stddev);
      csv += buf;
    }
    return csv;
  }
};

inline int worker_count() {
  if (const char* env = std::getenv("APT_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return 1;
}

struct ExperimentArm {
  std::string name;
  GateMode mode = GateMode::apt;
  ModelConfig config;  // requested config; pt2_plus rescaling happens inside the module
};

// Train + evaluate one configuration from scratch and return the dev-split
// metric. The backbone is rebuilt from backbone_seed and frozen, so every
// arm and seed starts from the same base model bytes.
template <typename T>
double run_single(const ExperimentArm& arm, const Dataset& dataset, TrainConfig cfg,
                  int seed, FitResult* fit_log = nullptr,
                  const std::vector<Example>* eval_split = nullptr) {
  cfg.seed = seed;
  cfg.mode = arm.mode;
  ModelConfig mc = arm.config;
  mc.vocab_size = int(dataset.vocab.size());
  mc.validate();

  Rng base(cfg.backbone_seed);
  Backbone<T> backbone = init_backbone<T>(mc, base);
  freeze_base(backbone);

  Rng trainable{uint64_t(seed)};
  GatingModule<T> module(mc, arm.mode, trainable);
  TaskHead<T> head =
      TaskHead<T>::make(dataset.task_kind, mc.model_dim, dataset.num_classes(), trainable);

  FitResult fit_res = fit(module, backbone, head, dataset, cfg);
  if (fit_log) *fit_log = fit_res;
  Metrics m = evaluate(module, backbone, head, dataset,
                       eval_split ? *eval_split : dataset.dev);
  return m.primary();
}

// Full grid of arms x seeds. Jobs may run on a small thread pool
// (APT_THREADS, default 1); row order is by job index either way.
template <typename T>
Report run_experiment(const std::vector<ExperimentArm>& arms, const Dataset& dataset,
                      const TrainConfig& base_cfg, const std::vector<int>& seeds) {
  if (arms.empty()) throw RejectedInput("run_experiment: no arms");
  if (seeds.empty()) throw RejectedInput("run_experiment: no seeds");
  Report report;
  report.metric_name =
      dataset.task_kind == TaskKind::sequence ? "accuracy" : "span_micro_f1";
  report.rows.resize(arms.size() * seeds.size());

  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (size_t job = next.fetch_add(1); job < report.rows.size();
         job = next.fetch_add(1)) {
      const ExperimentArm& arm = arms[job / seeds.size()];
      const int seed = seeds[job % seeds.size()];
      double frac = run_single<T>(arm, dataset, base_cfg, seed);
      report.rows[job] = {arm.name, seed, 100.0 * frac};
    }
  };
  const int n = std::min<int>(worker_count(), int(report.rows.size()));
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int i = 0; i < n; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  return report;
}

// The standard gate ablation: full gating plus the three knockouts.
inline std::vector<ExperimentArm> ablation_arms(const ModelConfig& config) {
  return {
      {"apt", GateMode::apt, config},
      {"no_token_gate", GateMode::no_token_gate, config},
      {"no_layer_gate", GateMode::no_layer_gate, config},
      {"no_hidden", GateMode::no_hidden, config},
  };
}

}  // namespace apt
