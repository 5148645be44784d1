#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "uwrange/checkpoint.hpp"
#include "uwrange/config.hpp"
#include "uwrange/experiment.hpp"
#include "uwrange/plot.hpp"

namespace fs = std::filesystem;
using namespace uwrange;

namespace {

struct CommonArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
};

void add_common(CLI::App* cmd, CommonArgs* args) {
  cmd->add_option("--config", args->config_path, "experiment config file (key = value)");
  cmd->add_option("--seed", args->seed, "master seed (overrides the config)");
  cmd->add_option("--out", args->out_dir, "output directory")->capture_default_str();
}

ExperimentConfig load_config(const CommonArgs& args) {
  ExperimentConfig cfg = args.config_path.empty()
                             ? default_experiment_config()
                             : parse_experiment_config(args.config_path);
  if (args.seed.has_value()) cfg.master_seed = *args.seed;
  fs::create_directories(args.out_dir);
  return cfg;
}

void write_dataset_summary(const std::string& path, const std::vector<ScmFeature>& set) {
  std::ofstream os(path);
  os << "index,range_m,energy\n";
  char buf[96];
  for (std::size_t i = 0; i < set.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.6f,%.12g\n", i,
                  set[i].true_range_m.value_or(-1.0), set[i].energy);
    os << buf;
  }
}

void write_train_log(const std::string& path, const std::vector<EpochLog>& log) {
  std::ofstream os(path);
  os << "epoch,train_loss,val_loss,learning_rate\n";
  char buf[128];
  for (const EpochLog& e : log) {
    std::snprintf(buf, sizeof(buf), "%d,%.10g,%.10g,%.10g\n", e.epoch, e.train_loss,
                  e.val_loss, e.learning_rate);
    os << buf;
  }
}

void write_adapt_report(const std::string& path, const AdaptReport& report) {
  std::ofstream os(path);
  os << "kind,index,loss,s_size,bin_before,bin_after,confident\n";
  char buf[160];
  for (std::size_t s = 0; s < report.step_loss.size(); ++s) {
    std::snprintf(buf, sizeof(buf), "step,%zu,%.10g,%zu,,,\n", s, report.step_loss[s],
                  report.confident_count);
    os << buf;
  }
  for (std::size_t i = 0; i < report.bin_before.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "sample,%zu,,,%d,%d,%d\n", i, report.bin_before[i],
                  report.bin_after[i], report.confident[i] ? 1 : 0);
    os << buf;
  }
}

NetworkParams train_from_config(const ExperimentConfig& cfg, const std::string& out_dir) {
  const std::vector<ScmFeature> features = generate_training_set(cfg);
  const std::vector<TrainSample> samples =
      make_training_samples(features, cfg.grid, cfg.label);
  std::cout << "training on " << samples.size() << " samples...\n";
  TrainConfig train_cfg = cfg.train;
  train_cfg.seed = derive_seed(cfg.master_seed, "training");
  const TrainResult result = train(samples, arch_from_config(cfg), train_cfg);
  std::cout << "best validation loss " << result.best_val_loss << " at epoch "
            << result.best_epoch << " (" << result.log.size() << " epochs run)\n";
  const std::string model_path = (fs::path(out_dir) / "model.uwar").string();
  save_checkpoint(model_path, result.params, cfg.grid);
  write_train_log((fs::path(out_dir) / "train_log.csv").string(), result.log);
  std::cout << "checkpoint written to " << model_path << "\n";
  return result.params;
}

std::vector<ScmFeature> single_run_test_set(const ExperimentConfig& cfg) {
  return generate_test_set(cfg, cfg.env_delta_c, cfg.eval_snr_db,
                           derive_seed(cfg.master_seed, "single-run"));
}

std::vector<double> true_ranges_of(const std::vector<ScmFeature>& set) {
  std::vector<double> out;
  out.reserve(set.size());
  for (const ScmFeature& f : set) out.push_back(*f.true_range_m);
  return out;
}

int run_gen_data(const CommonArgs& args) {
  const ExperimentConfig cfg = load_config(args);
  const fs::path out(args.out_dir);

  const std::vector<ScmFeature> train_set = generate_training_set(cfg);
  save_dataset((out / "train.uwad").string(), train_set);
  write_dataset_summary((out / "train_summary.csv").string(), train_set);

  const std::vector<ScmFeature> test_set = single_run_test_set(cfg);
  save_dataset((out / "test.uwad").string(), test_set);
  write_dataset_summary((out / "test_summary.csv").string(), test_set);

  std::cout << "wrote " << train_set.size() << " training and " << test_set.size()
            << " test samples (delta_c = " << cfg.env_delta_c << ", test SNR = "
            << cfg.eval_snr_db << " dB) under " << out << "\n";
  return 0;
}

int run_train(const CommonArgs& args) {
  const ExperimentConfig cfg = load_config(args);
  train_from_config(cfg, args.out_dir);
  return 0;
}

int run_adapt(const CommonArgs& args, const std::string& method,
              const std::string& checkpoint_path) {
  const ExperimentConfig cfg = load_config(args);
  const Checkpoint checkpoint = load_checkpoint(checkpoint_path);
  const std::vector<ScmFeature> test_set = single_run_test_set(cfg);

  AdaptReport report;
  NetworkParams adapted;
  if (method == "shot") {
    adapted = shot_adapt(checkpoint.params, test_set, cfg.adapt, &report);
  } else {
    adapted = jsea_adapt(checkpoint.params, test_set, cfg.adapt, checkpoint.grid, &report);
  }

  const fs::path out(args.out_dir);
  save_checkpoint((out / "adapted.uwar").string(), adapted, checkpoint.grid);
  write_adapt_report((out / "adapt_report.csv").string(), report);

  const std::vector<double> truth = true_ranges_of(test_set);
  std::vector<double> before, after;
  for (std::size_t i = 0; i < test_set.size(); ++i) {
    before.push_back(checkpoint.grid.bin_range_m(report.bin_before[i]));
    after.push_back(checkpoint.grid.bin_range_m(report.bin_after[i]));
  }
  std::printf("%s: |S| = %zu of %zu, loss %.6g -> %.6g\n", method.c_str(),
              report.confident_count, test_set.size(), report.step_loss.front(),
              report.step_loss.back());
  std::printf("  before: MAE %.1f m, PCL %.1f%%\n", mae(truth, before), pcl(truth, before));
  std::printf("  after:  MAE %.1f m, PCL %.1f%%\n", mae(truth, after), pcl(truth, after));
  std::cout << "adapted checkpoint and report written under " << out << "\n";
  return 0;
}

int run_eval(const CommonArgs& args, std::vector<std::string> methods,
             const std::string& checkpoint_path) {
  ExperimentConfig cfg = load_config(args);
  if (!methods.empty()) cfg.methods = methods;

  std::optional<Checkpoint> checkpoint;
  if (!checkpoint_path.empty()) checkpoint = load_checkpoint(checkpoint_path);

  const std::vector<ScmFeature> test_set = single_run_test_set(cfg);
  const std::vector<double> truth = true_ranges_of(test_set);

  std::vector<Replica> replicas;
  if (std::find(cfg.methods.begin(), cfg.methods.end(), "mfp") != cfg.methods.end()) {
    replicas = build_replica_table(
        cfg.env, grid_ranges(cfg.grid.d_min_m, cfg.grid.d_max_m, cfg.train_range_step_m));
  }

  const fs::path out(args.out_dir);
  std::ofstream os(out / "eval.csv");
  os << "method,snr_db,delta_c,mae_m,pcl_pct\n";
  for (const std::string& method : cfg.methods) {
    const std::vector<double> estimates = estimate_ranges_with_method(
        method, cfg, test_set, checkpoint ? &checkpoint->params : nullptr, replicas);
    const double mae_m = mae(truth, estimates);
    const double pcl_pct = pcl(truth, estimates);
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s,%g,%g,%.6f,%.6f\n", method.c_str(),
                  cfg.eval_snr_db, cfg.env_delta_c, mae_m, pcl_pct);
    os << buf;
    std::printf("%-9s MAE %8.1f m   PCL %6.2f%%\n", method.c_str(), mae_m, pcl_pct);
  }
  std::cout << "per-method metrics written to " << (out / "eval.csv") << "\n";
  return 0;
}

int run_sweep(const CommonArgs& args, const std::string& checkpoint_path) {
  const ExperimentConfig cfg = load_config(args);

  std::optional<NetworkParams> pretrained;
  const bool wants_network =
      std::any_of(cfg.methods.begin(), cfg.methods.end(),
                  [](const std::string& m) { return m != "mfp"; });
  if (wants_network) {
    if (!checkpoint_path.empty()) {
      pretrained = load_checkpoint(checkpoint_path).params;
    } else if (cfg.train_enabled) {
      pretrained = train_from_config(cfg, args.out_dir);
    } else {
      std::cerr << "error: CNN methods requested, training disabled and no --checkpoint\n";
      return 1;
    }
  }

  const std::vector<ResultRow> rows =
      run_experiment(cfg, pretrained ? &*pretrained : nullptr, args.out_dir);
  std::cout << rows.size() << " result rows written under " << args.out_dir << "\n";
  for (const SummaryRow& s : summarize(rows)) {
    std::printf("%-9s snr %6.1f dB  dc %4.2f  MAE %8.1f +- %6.1f m  PCL %6.2f +- %5.2f %%\n",
                s.method.c_str(), s.snr_db, s.delta_c, s.mae_mean, s.mae_std, s.pcl_mean,
                s.pcl_std);
  }
  return 0;
}

int run_plot(const std::string& in_csv, const std::string& out_svg, const PlotSpec& spec) {
  emit_plot(in_csv, spec, out_svg);
  std::cout << "plot written to " << out_svg << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"uwrange: underwater acoustic source ranging with source-free adaptation"};
  app.require_subcommand(1);

  CommonArgs gen_args, train_args, adapt_args, eval_args, sweep_args;

  CLI::App* gen = app.add_subcommand("gen-data", "synthesize and export datasets");
  add_common(gen, &gen_args);

  CLI::App* train_cmd = app.add_subcommand("train", "train the range classifier");
  add_common(train_cmd, &train_args);

  CLI::App* adapt = app.add_subcommand("adapt", "source-free adaptation of a checkpoint");
  add_common(adapt, &adapt_args);
  std::string adapt_method;
  std::string adapt_checkpoint;
  adapt->add_option("--method", adapt_method, "adaptation method")
      ->required()
      ->check(CLI::IsMember({"shot", "jsea"}));
  adapt->add_option("--checkpoint", adapt_checkpoint, "pre-trained model (.uwar)")
      ->required();

  CLI::App* eval = app.add_subcommand("eval", "evaluate methods on a fresh test set");
  add_common(eval, &eval_args);
  std::vector<std::string> eval_methods;
  std::string eval_checkpoint;
  eval->add_option("--method", eval_methods, "methods to run (default: config list)")
      ->check(CLI::IsMember({"mfp", "cnn", "cnn_shot", "cnn_jsea"}));
  eval->add_option("--checkpoint", eval_checkpoint, "pre-trained model (.uwar)");

  CLI::App* sweep = app.add_subcommand("sweep", "full SNR x delta_c x realization sweep");
  add_common(sweep, &sweep_args);
  std::string sweep_checkpoint;
  sweep->add_option("--checkpoint", sweep_checkpoint,
                    "pre-trained model (.uwar); trains one if absent");

  CLI::App* plot = app.add_subcommand("plot", "render a summary CSV as an SVG");
  std::string plot_in, plot_out = "plot.svg";
  PlotSpec spec;
  double fix_snr = 0.0, fix_dc = 0.0;
  plot->add_option("--in", plot_in, "summary.csv from sweep")->required();
  plot->add_option("--out", plot_out, "output SVG path")->capture_default_str();
  plot->add_option("--x", spec.x_axis, "x axis column")
      ->check(CLI::IsMember({"snr_db", "delta_c"}))
      ->capture_default_str();
  plot->add_option("--metric", spec.metric, "metric to draw")
      ->check(CLI::IsMember({"pcl", "mae"}))
      ->capture_default_str();
  CLI::Option* fix_snr_opt = plot->add_option("--fix-snr", fix_snr, "pin snr_db");
  CLI::Option* fix_dc_opt = plot->add_option("--fix-delta-c", fix_dc, "pin delta_c");
  plot->add_option("--title", spec.title, "plot title");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return run_gen_data(gen_args);
    if (train_cmd->parsed()) return run_train(train_args);
    if (adapt->parsed()) return run_adapt(adapt_args, adapt_method, adapt_checkpoint);
    if (eval->parsed()) return run_eval(eval_args, eval_methods, eval_checkpoint);
    if (sweep->parsed()) return run_sweep(sweep_args, sweep_checkpoint);
    if (plot->parsed()) {
      if (*fix_snr_opt) spec.fixed_snr_db = fix_snr;
      if (*fix_dc_opt) spec.fixed_delta_c = fix_dc;
      return run_plot(plot_in, plot_out, spec);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
