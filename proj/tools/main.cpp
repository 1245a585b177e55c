#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "specfil/bundle.hpp"
#include "specfil/config.hpp"
#include "specfil/contrastive.hpp"
#include "specfil/error.hpp"
#include "specfil/head.hpp"
#include "specfil/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace specfil;

namespace {

struct CommonArgs {
  std::string config_file;
  std::vector<std::string> overrides;
  std::string dataset;
  std::string output;
  std::string checkpoint;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_checkpoint = false) {
  cmd->add_option("--config", args.config_file, "TOML run configuration");
  cmd->add_option("--set", args.overrides, "Override a config key (key=value), repeatable");
  cmd->add_option("--dataset", args.dataset, "Bundle directory (overrides config)");
  cmd->add_option("--out", args.output, "Output directory (overrides config)");
  if (with_checkpoint) {
    cmd->add_option("--checkpoint", args.checkpoint, "Checkpoint file (overrides eval.checkpoint)");
  }
}

RunConfig resolve_config(const CommonArgs& args) {
  std::optional<fs::path> file;
  if (!args.config_file.empty()) file = fs::path(args.config_file);
  RunConfig cfg = RunConfig::load(file ? &*file : nullptr, args.overrides);
  if (!args.dataset.empty()) cfg.dataset = args.dataset;
  if (!args.output.empty()) cfg.output = args.output;
  if (!args.checkpoint.empty()) cfg.eval_checkpoint = args.checkpoint;
  return cfg;
}

GraphBundle load_dataset(const RunConfig& cfg) {
  if (cfg.dataset.empty()) throw ConfigError("no dataset given (set 'dataset' or pass --dataset)");
  if (!fs::is_directory(cfg.dataset)) throw ConfigError("dataset path not found: " + cfg.dataset);
  std::vector<std::string> warnings;
  GraphBundle bundle = load_bundle(cfg.dataset, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  if (cfg.row_normalize) row_normalize_features(bundle);
  return bundle;
}

fs::path prepare_output(const RunConfig& cfg) {
  const fs::path out(cfg.output);
  fs::create_directories(out);
  std::ofstream resolved(out / "resolved_config.toml");
  resolved << cfg.to_toml();
  return out;
}

Checkpoint run_training(const GraphBundle& bundle, const RunConfig& cfg, const fs::path& out) {
  const TrainConfig tc = cfg.train_config();
  Checkpoint ckpt;
  ckpt.bank = tc.bank;
  ckpt.per_channel_slope = tc.per_channel_slope;
  ckpt.independent_encoders = cfg.independent_encoders;
  ckpt.seed = cfg.seed;

  if (cfg.independent_encoders) {
    auto results = train_independent(bundle, tc);
    for (std::size_t j = 0; j < results.size(); ++j) {
      ckpt.states.push_back(results[j].state);
      write_train_log(results[j].log, out / ("train_log_f" + std::to_string(j) + ".jsonl"));
    }
    ckpt.rng_state = results.back().rng_state;
    ckpt.best_epoch = results.back().best_epoch;
    ckpt.best_loss = results.back().best_loss;
    std::cout << "trained " << results.size() << " independent encoders\n";
  } else {
    auto result = train(bundle, tc);
    ckpt.states.push_back(result.state);
    ckpt.rng_state = result.rng_state;
    ckpt.best_epoch = result.best_epoch;
    ckpt.best_loss = result.best_loss;
    write_train_log(result.log, out / "train_log.jsonl");
    std::cout << "trained " << result.log.size() << " epochs, best loss " << result.best_loss
              << " at epoch " << result.best_epoch << "\n";
  }
  return ckpt;
}

int cmd_train(const CommonArgs& args) {
  const RunConfig cfg = resolve_config(args);
  const GraphBundle bundle = load_dataset(cfg);
  const fs::path out = prepare_output(cfg);
  const Checkpoint ckpt = run_training(bundle, cfg, out);
  const fs::path ckpt_file = out / "checkpoint.bin";
  save_checkpoint(ckpt, ckpt_file);
  std::cout << "checkpoint: " << ckpt_file.string() << "\n";
  return 0;
}

Checkpoint load_run_checkpoint(const RunConfig& cfg) {
  if (cfg.eval_checkpoint.empty())
    throw ConfigError("no checkpoint given (set 'eval.checkpoint' or pass --checkpoint)");
  if (!fs::exists(cfg.eval_checkpoint)) throw ConfigError("checkpoint not found: " + cfg.eval_checkpoint);
  return load_checkpoint(cfg.eval_checkpoint);
}

std::vector<Matrix> embeddings_from(const Checkpoint& ckpt, const GraphBundle& bundle) {
  if (ckpt.independent_encoders) return embed_full_independent(ckpt.states, bundle, ckpt.bank);
  return embed_full(ckpt.states.front(), bundle, ckpt.bank);
}

int cmd_embed(const CommonArgs& args) {
  const RunConfig cfg = resolve_config(args);
  const GraphBundle bundle = load_dataset(cfg);
  const Checkpoint ckpt = load_run_checkpoint(cfg);
  const fs::path out = prepare_output(cfg);

  const auto embeddings = embeddings_from(ckpt, bundle);
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    const fs::path file = out / ("embedding_f" + std::to_string(i) + ".bin");
    write_matrix(embeddings[i], file);
    json sidecar = {{"rows", embeddings[i].rows()},
                    {"cols", embeddings[i].cols()},
                    {"filter_index", i},
                    {"bank", ckpt.bank.describe()},
                    {"dtype", "f64le"},
                    {"order", "row_major"}};
    std::ofstream side(out / ("embedding_f" + std::to_string(i) + ".json"));
    side << sidecar.dump(2) << "\n";
  }
  std::cout << "wrote " << embeddings.size() << " embedding files under " << out.string() << "\n";
  return 0;
}

json report_to_json(const EvalReport& report) {
  json splits = json::array();
  for (const auto& sp : report.splits) {
    json trial = {{"lr", sp.trial.lr},
                  {"alpha_lr", sp.trial.alpha_lr},
                  {"weight_decay", sp.trial.weight_decay},
                  {"activation", to_string(sp.trial.activation)}};
    if (report.rff.enabled) trial["gamma"] = sp.trial.gamma;
    std::vector<double> alphas(sp.alphas.data(), sp.alphas.data() + sp.alphas.size());
    std::vector<double> masks(sp.masks.data(), sp.masks.data() + sp.masks.size());
    std::vector<double> effective(sp.effective.data(), sp.effective.data() + sp.effective.size());
    splits.push_back({{"acc", sp.test_acc},
                      {"val_acc", sp.val_acc},
                      {"best_epoch", sp.best_epoch},
                      {"alphas", alphas},
                      {"masks", masks},
                      {"effective", effective},
                      {"best_hparams", trial}});
  }
  return {{"dataset", report.dataset},
          {"dims", report.head_dim},
          {"raw_dim", report.raw_dim},
          {"bank", report.bank},
          {"rff",
           {{"enabled", report.rff.enabled},
            {"out_dim", report.rff.out_dim},
            {"stage", report.rff.post_stage ? "post" : "pre"},
            {"standardize", report.rff.standardize}}},
          {"splits", splits},
          {"mean", report.mean_acc},
          {"std", report.std_acc},
          {"wallclock_ms",
           {{"embed", report.embed_ms}, {"lift", report.lift_ms}, {"sweep", report.sweep_ms}}}};
}

void append_summary_csv(const EvalReport& report, const fs::path& file) {
  const bool fresh = !fs::exists(file);
  std::ofstream out(file, std::ios::app);
  if (fresh) {
    out << "dataset,bank,raw_dim,head_dim,rff_enabled,rff_out_dim,rff_stage,n_splits,mean_acc,std_acc\n";
  }
  char line[512];
  std::snprintf(line, sizeof(line), "%s,%s,%lld,%lld,%d,%lld,%s,%zu,%.6f,%.6f\n",
                report.dataset.c_str(), report.bank.c_str(),
                static_cast<long long>(report.raw_dim), static_cast<long long>(report.head_dim),
                report.rff.enabled ? 1 : 0, static_cast<long long>(report.rff.out_dim),
                report.rff.post_stage ? "post" : "pre", report.splits.size(), report.mean_acc,
                report.std_acc);
  out << line;
}

int cmd_evaluate(const CommonArgs& args) {
  const RunConfig cfg = resolve_config(args);
  const GraphBundle bundle = load_dataset(cfg);
  const Checkpoint ckpt = load_run_checkpoint(cfg);
  const fs::path out = prepare_output(cfg);

  const auto embeddings = embeddings_from(ckpt, bundle);
  const EvalReport report = evaluate_embeddings(bundle, embeddings, cfg.rff_settings(),
                                                cfg.sweep_settings(), bundle.name,
                                                ckpt.bank.describe());

  std::ofstream rep(out / "report.json");
  rep << report_to_json(report).dump(2) << "\n";
  append_summary_csv(report, out / "summary.csv");
  std::printf("%s: mean accuracy %.4f (std %.4f) over %zu splits\n", report.dataset.c_str(),
              report.mean_acc, report.std_acc, report.splits.size());
  return 0;
}

int cmd_bench(const CommonArgs& args) {
  const RunConfig cfg = resolve_config(args);
  const GraphBundle bundle = load_dataset(cfg);
  const fs::path out = prepare_output(cfg);

  TrainConfig tc = cfg.train_config();
  tc.max_epochs = cfg.bench_warmup + cfg.bench_epochs;
  tc.patience = tc.max_epochs + 1;  // never stop early while timing
  const auto result = train(bundle, tc);
  if (static_cast<int>(result.log.size()) < tc.max_epochs)
    throw Error("bench: training stopped before the measurement window");

  double mean = 0.0;
  for (int e = cfg.bench_warmup; e < tc.max_epochs; ++e) {
    mean += result.log[static_cast<std::size_t>(e)].wallclock_ms;
  }
  mean /= static_cast<double>(cfg.bench_epochs);
  double var = 0.0;
  for (int e = cfg.bench_warmup; e < tc.max_epochs; ++e) {
    const double d = result.log[static_cast<std::size_t>(e)].wallclock_ms - mean;
    var += d * d;
  }
  const double stddev = std::sqrt(var / static_cast<double>(cfg.bench_epochs));

  json j = {{"dataset", bundle.name}, {"embed_dim", tc.embed_dim},   {"mean_ms", mean},
            {"std_ms", stddev},       {"n_epochs", cfg.bench_epochs}, {"warmup", cfg.bench_warmup}};
  std::ofstream rep(out / "bench.json");
  rep << j.dump(2) << "\n";
  std::printf("%s d'=%lld: epoch %.3f ms (std %.3f) over %d epochs\n", bundle.name.c_str(),
              static_cast<long long>(tc.embed_dim), mean, stddev, cfg.bench_epochs);
  return 0;
}

int cmd_dump_response(const CommonArgs& args, const std::string& out_file, int points) {
  const RunConfig cfg = resolve_config(args);
  const FilterBank bank = cfg.bank();
  std::FILE* f = std::fopen(out_file.c_str(), "w");
  if (!f) throw Error("dump-response: cannot open " + out_file);
  std::fprintf(f, "lambda");
  for (int i = 0; i < bank.size(); ++i) std::fprintf(f, ",g%d", i);
  std::fprintf(f, "\n");
  for (int p = 0; p < points; ++p) {
    const double lambda = 2.0 * static_cast<double>(p) / static_cast<double>(points - 1);
    std::fprintf(f, "%.12g", lambda);
    for (int i = 0; i < bank.size(); ++i) {
      std::fprintf(f, ",%.12g", spectral_response(bank, i, lambda));
    }
    std::fprintf(f, "\n");
  }
  std::fclose(f);
  std::cout << "wrote " << points << "-point response grid for " << bank.describe() << " to "
            << out_file << "\n";
  return 0;
}

struct CsbmArgs {
  long long n = 600;
  long long d = 16;
  int classes = 3;
  double p_in = 0.1;
  double p_out = 0.01;
  double feature_signal = 1.0;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_gen_csbm(const CsbmArgs& args) {
  if (args.out.empty()) throw ConfigError("gen-csbm: --out directory is required");
  const GraphBundle bundle = generate_csbm(args.n, args.d, args.classes, args.p_in, args.p_out,
                                           args.feature_signal, args.seed);
  save_bundle(bundle, args.out);
  std::cout << "wrote bundle '" << bundle.name << "' (" << bundle.num_nodes() << " nodes, "
            << bundle.adjacency.nnz() / 2 << " edges) to " << args.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"specfil: spectral filter-bank node representations"};
  app.require_subcommand(1);
  app.footer("Config keys (all settable via --config or --set):\n" + RunConfig::describe_keys());

  CommonArgs train_args, embed_args, eval_args, bench_args, resp_args;
  auto* train_cmd = app.add_subcommand("train", "Contrastive training; writes checkpoint + log");
  add_common(train_cmd, train_args);
  auto* embed_cmd = app.add_subcommand("embed", "Write per-filter embedding files from a checkpoint");
  add_common(embed_cmd, embed_args, /*with_checkpoint=*/true);
  auto* eval_cmd = app.add_subcommand("evaluate", "Downstream evaluation; writes report.json + summary.csv");
  add_common(eval_cmd, eval_args, /*with_checkpoint=*/true);
  auto* bench_cmd = app.add_subcommand("bench", "Measure mean epoch time");
  add_common(bench_cmd, bench_args);

  auto* resp_cmd = app.add_subcommand("dump-response", "Emit the bank's spectral responses as CSV");
  add_common(resp_cmd, resp_args);
  std::string resp_out = "response.csv";
  int resp_points = 512;
  resp_cmd->add_option("--out-file", resp_out, "Output CSV path");
  resp_cmd->add_option("--points", resp_points, "Grid size on [0, 2]")->check(CLI::Range(2, 1 << 20));

  CsbmArgs csbm;
  auto* csbm_cmd = app.add_subcommand("gen-csbm", "Generate a synthetic contextual-SBM bundle");
  csbm_cmd->add_option("--n", csbm.n, "Number of nodes")->check(CLI::PositiveNumber);
  csbm_cmd->add_option("--d", csbm.d, "Feature dimension")->check(CLI::PositiveNumber);
  csbm_cmd->add_option("--classes", csbm.classes, "Number of classes")->check(CLI::Range(2, 1024));
  csbm_cmd->add_option("--p-in", csbm.p_in, "Within-class edge probability");
  csbm_cmd->add_option("--p-out", csbm.p_out, "Cross-class edge probability");
  csbm_cmd->add_option("--feature-signal", csbm.feature_signal, "Norm of the class feature means");
  csbm_cmd->add_option("--seed", csbm.seed, "Generator seed");
  csbm_cmd->add_option("--out", csbm.out, "Output bundle directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(train_args);
    if (embed_cmd->parsed()) return cmd_embed(embed_args);
    if (eval_cmd->parsed()) return cmd_evaluate(eval_args);
    if (bench_cmd->parsed()) return cmd_bench(bench_args);
    if (resp_cmd->parsed()) return cmd_dump_response(resp_args, resp_out, resp_points);
    if (csbm_cmd->parsed()) return cmd_gen_csbm(csbm);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
