// Command-line workbench for prefix tuning with gated (adaptive) prefixes:
// train, ablate, probe, fewshot, and sweep subcommands over the library.
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "apt/checkpoint.hpp"
#include "apt/data.hpp"
#include "apt/error.hpp"
#include "apt/experiment.hpp"
#include "apt/gating.hpp"
#include "apt/io.hpp"
#include "apt/manifest.hpp"
#include "apt/metrics.hpp"
#include "apt/model.hpp"
#include "apt/probe.hpp"
#include "apt/serialize.hpp"
#include "apt/training.hpp"
#include "apt/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using apt::ModelConfig;

namespace {

struct Opts {
  std::string task = "seq_keyword";
  uint64_t data_seed = 1;
  int data_size = 512;
  std::string mode = "apt";
  int prefix_len = 4;
  double lr = 5e-3;
  int epochs = 20;
  int batch = 8;
  int seed = 42;
  std::vector<int> seeds;  // multi-seed commands; falls back to {seed}
  std::string out = "out";
  std::string config_path;
  std::string plan_path;
  std::string checkpoint_path;
  std::string precision = "f32";
  std::string split = "dev";
  int layers = 2;
  int heads = 2;
  int model_dim = 32;
  int ffn_dim = 64;
  int max_seq = 16;
  double dropout = 0.0;
  uint64_t backbone_seed = 7;
  int max_steps = 0;
  double tau = 0.5;
  int min_len = 1;
  std::vector<int> ks = {16, 32};
  std::vector<int> lengths = {2, 4, 8, 16};
};

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Options shared by every subcommand. Each option's config-file key is its
// long name without the leading dashes.
void add_common(CLI::App* sub, Opts& o) {
  sub->add_option("--task", o.task, "synthetic task: seq_parity|seq_keyword|tag_span")
      ->capture_default_str();
  sub->add_option("--data-seed", o.data_seed, "dataset generation seed")
      ->capture_default_str();
  sub->add_option("--data-size", o.data_size, "train split size")->capture_default_str();
  sub->add_option("--prefix-len", o.prefix_len, "prefix length per layer")
      ->capture_default_str();
  sub->add_option("--lr", o.lr, "learning rate")->capture_default_str();
  sub->add_option("--epochs", o.epochs, "training epochs")->capture_default_str();
  sub->add_option("--seed", o.seed, "training seed")->capture_default_str();
  sub->add_option("--out", o.out, "output directory")->capture_default_str();
  sub->add_option("--config", o.config_path,
                  "JSON config file (flat keys = flag names); flags override");
  sub->add_option("--precision", o.precision, "f32|f64")->capture_default_str();
  sub->add_option("--layers", o.layers, "encoder layers")->capture_default_str();
  sub->add_option("--heads", o.heads, "attention heads")->capture_default_str();
  sub->add_option("--model-dim", o.model_dim, "model width")->capture_default_str();
  sub->add_option("--ffn-dim", o.ffn_dim, "feed-forward width")->capture_default_str();
  sub->add_option("--max-seq", o.max_seq, "maximum sequence length")
      ->capture_default_str();
  sub->add_option("--dropout", o.dropout, "dropout probability")->capture_default_str();
  sub->add_option("--backbone-seed", o.backbone_seed,
                  "seed of the frozen backbone fixture")
      ->capture_default_str();
  sub->add_option("--max-steps", o.max_steps, "stop after this many steps (0 = all)")
      ->capture_default_str();
}

ModelConfig model_config(const Opts& o) {
  ModelConfig cfg;
  cfg.num_layers = o.layers;
  cfg.num_heads = o.heads;
  cfg.model_dim = o.model_dim;
  cfg.ffn_dim = o.ffn_dim;
  cfg.max_seq_len = o.max_seq;
  cfg.prefix_len = o.prefix_len;
  cfg.dropout = o.dropout;
  return cfg;
}

apt::Dataset load_dataset(const Opts& o) {
  return apt::gen_synthetic(apt::parse_synth_kind(o.task), o.data_seed, o.data_size);
}

apt::TrainConfig train_config(const Opts& o) {
  apt::TrainConfig tc;
  tc.learning_rate = o.lr;
  tc.epochs = o.epochs;
  tc.batch_size = o.batch;
  tc.seed = o.seed;
  tc.mode = apt::parse_gate_mode(o.mode);
  tc.precision = apt::parse_precision(o.precision);
  tc.max_steps = o.max_steps;
  tc.backbone_seed = o.backbone_seed;
  return tc;
}

std::vector<int> resolved_seeds(const Opts& o) {
  return o.seeds.empty() ? std::vector<int>{o.seed} : o.seeds;
}

// Everything that determines the run, keyed by flag name, for the manifest.
json flags_json(const Opts& o) {
  return json{{"task", o.task},
              {"data-seed", o.data_seed},
              {"data-size", o.data_size},
              {"mode", o.mode},
              {"prefix-len", o.prefix_len},
              {"lr", o.lr},
              {"epochs", o.epochs},
              {"batch", o.batch},
              {"seed", o.seed},
              {"out", o.out},
              {"precision", o.precision},
              {"layers", o.layers},
              {"heads", o.heads},
              {"model-dim", o.model_dim},
              {"ffn-dim", o.ffn_dim},
              {"max-seq", o.max_seq},
              {"dropout", o.dropout},
              {"backbone-seed", o.backbone_seed},
              {"max-steps", o.max_steps}};
}

void emit_manifest(const Opts& o, const std::string& command, json flags,
                   const std::vector<int>& seeds, const std::string& fingerprint) {
  apt::RunManifest m;
  m.command = command;
  m.tool_version = apt::kToolVersion;
  m.flags = std::move(flags);
  m.seeds = seeds;
  m.mode = o.mode;
  m.dataset_fingerprint = fingerprint;
  apt::write_manifest((fs::path(o.out) / "manifest.json").string(), m);
}

// Per-mode trainable parameter counts at this configuration, so length
// rescaling (pt2_plus) and gate overhead are explicit side by side.
std::string params_table(const ModelConfig& cfg, int num_classes) {
  std::string csv = "mode,prefix_and_gate_params,head_params,total\n";
  const long long head = apt::head_param_count(cfg.model_dim, num_classes);
  for (apt::GateMode mode :
       {apt::GateMode::pt2, apt::GateMode::pt2_plus, apt::GateMode::pt2_star,
        apt::GateMode::apt, apt::GateMode::no_token_gate, apt::GateMode::no_layer_gate,
        apt::GateMode::no_hidden}) {
    const long long p = apt::trainable_param_count(cfg, mode);
    csv += std::string(apt::gate_mode_name(mode)) + ',' + std::to_string(p) + ',' +
           std::to_string(head) + ',' + std::to_string(p + head) + '\n';
  }
  return csv;
}

ModelConfig apply_plan_if_needed(const Opts& o, ModelConfig cfg) {
  if (o.mode != "pt2_star") return cfg;
  if (o.plan_path.empty())
    throw apt::RejectedInput("--mode pt2_star requires --plan <plan.json>");
  apt::VariablePrefixPlan plan = apt::plan_from_json(apt::read_file(o.plan_path));
  return apt::build_pt2star_config(cfg, plan.lengths);
}

template <typename T>
void do_train(const Opts& o) {
  apt::Dataset ds = load_dataset(o);
  ModelConfig cfg = model_config(o);
  cfg.vocab_size = int(ds.vocab.size());
  cfg = apply_plan_if_needed(o, cfg);
  cfg.validate();
  apt::TrainConfig tc = train_config(o);
  tc.validate();

  apt::Backbone<T> backbone = apt::init_backbone<T>(cfg, apt::Rng(o.backbone_seed));
  apt::freeze_base(backbone);
  apt::GatingModule<T> module(cfg, tc.mode, apt::Rng(uint64_t(o.seed)));
  apt::TaskHead<T> head = apt::TaskHead<T>::make(ds.task_kind, cfg.model_dim,
                                                 ds.num_classes(), apt::Rng(uint64_t(o.seed)));

  apt::FitResult res = apt::fit(module, backbone, head, ds, tc);
  apt::Metrics metrics = apt::evaluate(module, backbone, head, ds, ds.dev);

  std::string log;
  for (const auto& e : res.log)
    log += "step=" + std::to_string(e.step) + " epoch=" + std::to_string(e.epoch) +
           " loss=" + fmt17(e.loss) + " lr=" + fmt17(o.lr) + " mode=" + o.mode + "\n";
  apt::write_file((fs::path(o.out) / "train_log.txt").string(), log);

  apt::Checkpoint ck = apt::make_checkpoint(cfg, backbone, module, head, ds.label_names);
  ck.extra = {{"task", o.task},
              {"data-seed", o.data_seed},
              {"data-size", o.data_size},
              {"seed", o.seed},
              {"dataset_fingerprint", ds.fingerprint_hex()}};
  apt::save_checkpoint((fs::path(o.out) / "checkpoint.bin").string(), ck);

  const char* metric_name = ds.task_kind == apt::TaskKind::sequence ? "accuracy"
                                                                    : "span_micro_f1";
  json mj{{"split", "dev"},
          {"metric", metric_name},
          {"value", metrics.primary()},
          {"steps", res.steps},
          {"trainable_params", apt::trainable_param_count(cfg, tc.mode)},
          {"head_params", apt::head_param_count(cfg.model_dim, ds.num_classes())}};
  apt::write_file((fs::path(o.out) / "metrics.json").string(), mj.dump(2) + "\n");
  apt::write_file((fs::path(o.out) / "params.csv").string(),
                  params_table(cfg, ds.num_classes()));

  json flags = flags_json(o);
  if (!o.plan_path.empty()) flags["plan"] = o.plan_path;
  emit_manifest(o, "train", flags, {o.seed}, ds.fingerprint_hex());
  std::cout << "train: dev " << metric_name << '=' << fmt17(metrics.primary())
            << " steps=" << res.steps << " out=" << o.out << "\n";
}

template <typename T>
void do_ablate(const Opts& o) {
  apt::Dataset ds = load_dataset(o);
  ModelConfig cfg = model_config(o);
  apt::TrainConfig tc = train_config(o);
  tc.mode = apt::GateMode::apt;
  tc.validate();
  const std::vector<int> seeds = resolved_seeds(o);

  apt::Report report =
      apt::run_experiment<T>(apt::ablation_arms(cfg), ds, tc, seeds);
  apt::write_file((fs::path(o.out) / "report.csv").string(), report.to_csv());

  std::string summary;
  for (const auto& [arm, s] : report.summaries())
    summary += arm + ' ' + report.metric_name + ' ' +
               apt::mean_std_string(s.mean, s.stddev) + '\n';
  apt::write_file((fs::path(o.out) / "summary.txt").string(), summary);

  json flags = flags_json(o);
  flags["seeds"] = seeds;
  emit_manifest(o, "ablate", flags, seeds, ds.fingerprint_hex());
  std::cout << "ablate: " << report.rows.size() << " rows over " << seeds.size()
            << " seed(s) out=" << o.out << "\n" << summary;
}

void do_probe(const Opts& o, bool task_overridden, bool data_seed_overridden,
              bool data_size_overridden) {
  if (o.checkpoint_path.empty())
    throw apt::RejectedInput("probe requires --checkpoint <file>");
  apt::Checkpoint ck = apt::load_checkpoint(o.checkpoint_path);
  Opts manifest_opts = o;
  manifest_opts.mode = apt::gate_mode_name(ck.mode);

  Opts data_opts = o;  // dataset identity defaults to the checkpoint's own
  if (!task_overridden && ck.extra.contains("task"))
    data_opts.task = ck.extra["task"].get<std::string>();
  if (!data_seed_overridden && ck.extra.contains("data-seed"))
    data_opts.data_seed = ck.extra["data-seed"].get<uint64_t>();
  if (!data_size_overridden && ck.extra.contains("data-size"))
    data_opts.data_size = ck.extra["data-size"].get<int>();

  apt::Dataset ds = load_dataset(data_opts);
  const std::vector<apt::Example>* split = &ds.dev;
  if (o.split == "train") split = &ds.train;
  else if (o.split == "dev") split = &ds.dev;
  else if (o.split == "test") split = &ds.test;
  else throw apt::RejectedInput("probe: unknown split '" + o.split + "'");

  apt::ModelBundle<float> bundle = apt::restore_model<float>(ck);
  apt::GateStats stats = apt::collect_gates(bundle.module, bundle.backbone, *split);
  const auto mean = stats.mean_alpha();

  apt::write_file((fs::path(o.out) / "gates.csv").string(), apt::heatmap_csv(mean));
  apt::write_file((fs::path(o.out) / "lambda.csv").string(),
                  apt::lambda_csv(stats.lambda));
  apt::write_file((fs::path(o.out) / "gates.svg").string(), apt::heatmap_svg(mean));

  apt::VariablePrefixPlan plan;
  plan.lengths = apt::derive_variable_lengths(mean, o.tau, o.min_len);
  plan.tau = o.tau;
  plan.source = o.checkpoint_path;
  apt::build_pt2star_config(ck.config, plan.lengths);  // must be applicable
  apt::write_file((fs::path(o.out) / "plan.json").string(), apt::plan_to_json(plan));

  json flags = flags_json(manifest_opts);
  flags["checkpoint"] = o.checkpoint_path;
  flags["tau"] = o.tau;
  flags["min-len"] = o.min_len;
  flags["split"] = o.split;
  flags["task"] = data_opts.task;
  flags["data-seed"] = data_opts.data_seed;
  flags["data-size"] = data_opts.data_size;
  emit_manifest(manifest_opts, "probe", flags, {}, ds.fingerprint_hex());

  std::cout << "probe: examples=" << stats.examples << " plan=[";
  for (size_t i = 0; i < plan.lengths.size(); ++i)
    std::cout << (i ? "," : "") << plan.lengths[i];
  std::cout << "] out=" << o.out << "\n";
}

template <typename T>
void do_fewshot(const Opts& o) {
  apt::Dataset full = load_dataset(o);
  ModelConfig cfg = model_config(o);
  cfg.vocab_size = int(full.vocab.size());
  cfg.validate();
  apt::TrainConfig tc = train_config(o);
  tc.validate();
  const std::vector<int> seeds = o.seeds.empty() ? apt::kSeedList : o.seeds;

  std::string summary;
  for (int k : o.ks) {
    apt::Report report;
    report.metric_name = "accuracy";
    std::string dump;
    for (int seed : seeds) {
      apt::Dataset ds_k = apt::kshot_sample(full, k, uint64_t(seed));
      for (const char* split : {"train", "dev"}) {
        const auto& exs = std::string(split) == "train" ? ds_k.train : ds_k.dev;
        for (size_t i = 0; i < exs.size(); ++i) {
          dump += "k=" + std::to_string(k) + " seed=" + std::to_string(seed) +
                  " split=" + split + " i=" + std::to_string(i) +
                  " label=" + full.label_names[size_t(exs[i].label)] + " tokens=";
          for (size_t t = 0; t < exs[i].tokens.size(); ++t)
            dump += (t ? " " : "") + full.vocab[size_t(exs[i].tokens[t])];
          dump += '\n';
        }
      }
      apt::ExperimentArm arm{"k" + std::to_string(k), tc.mode, cfg};
      const double frac =
          apt::run_single<T>(arm, ds_k, tc, seed, nullptr, &ds_k.test);
      report.rows.push_back({arm.name, seed, 100.0 * frac});
    }
    apt::write_file((fs::path(o.out) / ("fewshot_k" + std::to_string(k) + ".csv")).string(),
                    report.to_csv());
    apt::write_file(
        (fs::path(o.out) / ("splits_k" + std::to_string(k) + ".txt")).string(), dump);
    const auto s = report.summaries().at("k" + std::to_string(k));
    summary += "k=" + std::to_string(k) + " accuracy " +
               apt::mean_std_string(s.mean, s.stddev) + '\n';
  }
  apt::write_file((fs::path(o.out) / "summary.txt").string(), summary);

  json flags = flags_json(o);
  flags["k"] = o.ks;
  flags["seeds"] = seeds;
  emit_manifest(o, "fewshot", flags, seeds, full.fingerprint_hex());
  std::cout << "fewshot: seeds=" << seeds.size() << " out=" << o.out << "\n" << summary;
}

template <typename T>
void do_sweep(const Opts& o) {
  apt::Dataset ds = load_dataset(o);
  apt::TrainConfig tc = train_config(o);
  tc.validate();
  const std::vector<int> seeds = resolved_seeds(o);

  apt::Report report;
  report.metric_name =
      ds.task_kind == apt::TaskKind::sequence ? "accuracy" : "span_micro_f1";
  std::string sweep_csv = "mode,prefix_len,seed,metric\n";
  for (apt::GateMode mode : {apt::GateMode::apt, apt::GateMode::pt2}) {
    for (int len : o.lengths) {
      Opts run = o;
      run.prefix_len = len;
      ModelConfig cfg = model_config(run);
      apt::ExperimentArm arm{std::string(apt::gate_mode_name(mode)) + "_l" +
                                 std::to_string(len),
                             mode, cfg};
      for (int seed : seeds) {
        const double pct = 100.0 * apt::run_single<T>(arm, ds, tc, seed);
        report.rows.push_back({arm.name, seed, pct});
        sweep_csv += std::string(apt::gate_mode_name(mode)) + ',' +
                     std::to_string(len) + ',' + std::to_string(seed) + ',' +
                     fmt17(pct) + '\n';
      }
    }
  }
  apt::write_file((fs::path(o.out) / "sweep.csv").string(), sweep_csv);
  apt::write_file((fs::path(o.out) / "report.csv").string(), report.to_csv());

  json flags = flags_json(o);
  flags["lengths"] = o.lengths;
  flags["seeds"] = seeds;
  emit_manifest(o, "sweep", flags, seeds, ds.fingerprint_hex());
  std::cout << "sweep: " << report.rows.size() << " runs out=" << o.out << "\n";
}

template <typename Fn>
void dispatch_precision(const std::string& precision, Fn&& fn) {
  if (apt::parse_precision(precision) == apt::Precision::f32)
    fn(float{});
  else
    fn(double{});
}

// --config support: JSON files (or run manifests, via their "flags" object)
// supply defaults as if typed before the user's flags; explicit flags win.
// Keys the chosen subcommand does not define are skipped, so a manifest
// written by one command can seed another where the options overlap.
std::vector<std::string> expand_config_tokens(const CLI::App& app,
                                              const std::vector<std::string>& args) {
  std::string config_path;
  std::set<std::string> user_keys;
  size_t insert_at = 0;
  const CLI::App* sub = nullptr;
  for (size_t i = 1; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (insert_at == 0 && a.rfind("-", 0) != 0) {
      for (const CLI::App* s : app.get_subcommands(nullptr))
        if (s->get_name() == a) {
          insert_at = i + 1;
          sub = s;
        }
    }
    if (a.rfind("--", 0) != 0) continue;
    std::string key = a.substr(2);
    std::string inline_val;
    if (auto eq = key.find('='); eq != std::string::npos) {
      inline_val = key.substr(eq + 1);
      key = key.substr(0, eq);
    }
    user_keys.insert(key);
    if (key == "config") {
      if (!inline_val.empty()) config_path = inline_val;
      else if (i + 1 < args.size()) config_path = args[i + 1];
    }
  }
  if (config_path.empty() || sub == nullptr) return args;

  std::set<std::string> known;
  for (const CLI::Option* opt : sub->get_options())
    for (const std::string& name : opt->get_lnames()) known.insert(name);

  json j;
  try {
    j = json::parse(apt::read_file(config_path));
  } catch (const json::exception& e) {
    throw apt::RejectedInput("config '" + config_path + "': " + e.what());
  }
  if (j.contains("flags") && j["flags"].is_object()) j = j["flags"];  // manifest
  if (!j.is_object())
    throw apt::RejectedInput("config '" + config_path + "': expected a JSON object");

  std::vector<std::string> tokens;
  for (const auto& [key, value] : j.items()) {
    if (key == "config" || user_keys.count(key) || !known.count(key)) continue;
    auto push_one = [&](const json& v) {
      tokens.push_back("--" + key);
      tokens.push_back(v.is_string() ? v.get<std::string>() : v.dump());
    };
    if (value.is_array())
      for (const auto& v : value) push_one(v);
    else
      push_one(value);
  }
  std::vector<std::string> out(args.begin(), args.begin() + long(insert_at));
  out.insert(out.end(), tokens.begin(), tokens.end());
  out.insert(out.end(), args.begin() + long(insert_at), args.end());
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  Opts o;
  CLI::App app{"prefix tuning with adaptive gated prefixes on a small encoder"};
  app.set_version_flag("--version", apt::kToolVersion);
  app.require_subcommand(1);

  CLI::App* train = app.add_subcommand("train", "train one model, write a checkpoint");
  add_common(train, o);
  train->add_option("--mode", o.mode,
                    "apt|no_token_gate|no_layer_gate|no_hidden|pt2|pt2_plus|pt2_star")
      ->capture_default_str();
  train->add_option("--batch", o.batch, "batch size")->capture_default_str();
  train->add_option("--plan", o.plan_path, "prefix-length plan (for pt2_star)");

  CLI::App* ablate = app.add_subcommand("ablate", "run the four gate-ablation arms");
  add_common(ablate, o);
  ablate->add_option("--batch", o.batch, "batch size")->capture_default_str();
  ablate->add_option("--seeds", o.seeds, "seed list (default: --seed)");

  CLI::App* probe = app.add_subcommand("probe", "read gate activations from a checkpoint");
  add_common(probe, o);
  probe->add_option("--checkpoint", o.checkpoint_path, "trained checkpoint to probe");
  probe->add_option("--tau", o.tau, "gate threshold for the length plan")
      ->capture_default_str();
  probe->add_option("--min-len", o.min_len, "minimum prefix length per layer")
      ->capture_default_str();
  probe->add_option("--split", o.split, "split to probe: train|dev|test")
      ->capture_default_str();

  CLI::App* fewshot = app.add_subcommand("fewshot", "fixed-seed k-shot protocol");
  add_common(fewshot, o);
  fewshot->add_option("--mode", o.mode, "gate mode")->capture_default_str();
  o.batch = apt::kLowResourceBatch;  // low-resource default, other commands use 8
  fewshot->add_option("--batch", o.batch, "batch size")->capture_default_str();
  fewshot->add_option("--k", o.ks, "shots per class (repeatable)")
      ->capture_default_str();
  fewshot->add_option("--seeds", o.seeds, "seed list (default: 11 21 42 87 100)");

  CLI::App* sweep = app.add_subcommand("sweep", "apt vs pt2 across prefix lengths");
  add_common(sweep, o);
  sweep->add_option("--batch", o.batch, "batch size")->capture_default_str();
  sweep->add_option("--lengths", o.lengths, "prefix lengths to sweep")
      ->capture_default_str();
  sweep->add_option("--seeds", o.seeds, "seed list (default: --seed)");

  try {
    std::vector<std::string> args(argv, argv + argc);
    args = expand_config_tokens(app, args);
    std::vector<const char*> ptrs;
    for (const auto& a : args) ptrs.push_back(a.c_str());
    app.parse(int(ptrs.size()), ptrs.data());

    // fewshot registered --batch after mutating the default; undo the
    // mutation for the commands that keep the standard default.
    if (!fewshot->parsed() && fewshot->get_option("--batch")->count() == 0 &&
        o.batch == apt::kLowResourceBatch && !train->get_option("--batch")->count() &&
        !ablate->get_option("--batch")->count() && !sweep->get_option("--batch")->count())
      o.batch = 8;

    fs::create_directories(o.out);
    if (train->parsed()) {
      dispatch_precision(o.precision, [&](auto tag) { do_train<decltype(tag)>(o); });
    } else if (ablate->parsed()) {
      dispatch_precision(o.precision, [&](auto tag) { do_ablate<decltype(tag)>(o); });
    } else if (probe->parsed()) {
      do_probe(o, probe->get_option("--task")->count() > 0,
               probe->get_option("--data-seed")->count() > 0,
               probe->get_option("--data-size")->count() > 0);
    } else if (fewshot->parsed()) {
      dispatch_precision(o.precision, [&](auto tag) { do_fewshot<decltype(tag)>(o); });
    } else if (sweep->parsed()) {
      dispatch_precision(o.precision, [&](auto tag) { do_sweep<decltype(tag)>(o); });
    }
    return 0;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const apt::RejectedInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
