#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "uwrange/adaptation.hpp"
#include "uwrange/features.hpp"
#include "uwrange/labels.hpp"
#include "uwrange/localizer.hpp"
#include "uwrange/ocean.hpp"
#include "uwrange/signal.hpp"

namespace uwrange {

/// Mean absolute range error in meters.
double mae(const std::vector<double>& true_ranges, const std::vector<double>& estimates);

/// Probability of credible localization: percentage of estimates within 10%
/// relative error (boundary inclusive).
double pcl(const std::vector<double>& true_ranges, const std::vector<double>& estimates);

struct DatasetConfig {
  int num_snapshots = 5;
  double snr_db = std::numeric_limits<double>::infinity();  // +inf = noise-free
  NoiseSource noise;
};

/// One labeled SCM feature per requested range, deterministic given the seed.
std::vector<ScmFeature> generate_dataset(const Environment& env,
                                         const std::vector<double>& ranges_m,
                                         const DatasetConfig& cfg, std::uint64_t seed);

/// num_samples ranges uniform in [d_min, d_max], then generate_dataset.
std::vector<ScmFeature> generate_random_dataset(const Environment& env, int num_samples,
                                                double d_min_m, double d_max_m,
                                                const DatasetConfig& cfg,
                                                std::uint64_t seed);

/// Soft-label training pairs on the on-grid ranges.
std::vector<TrainSample> make_training_samples(const std::vector<ScmFeature>& features,
                                               const RangeGrid& grid,
                                               const LabelConfig& label);

// --- Experiment orchestration --------------------------------------------------

struct ExperimentConfig {
  Environment env;           // base (training) environment
  double env_delta_c = 0.0;  // test perturbation for single-run commands

  int num_snapshots = 5;
  double train_snr_db = std::numeric_limits<double>::infinity();
  double eval_snr_db = 0.0;  // test SNR for single-run commands (gen-data/adapt/eval)
  std::vector<double> snr_db_list = {-10.0, -5.0, 0.0, 5.0, 10.0, 20.0};
  std::vector<double> delta_c_list = {0.0, 0.1, 0.25, 0.5, 1.0};
  int realizations = 20;
  int num_test = 500;
  bool test_on_grid = false;  // sample test ranges from the training grid
  NoiseSource noise;

  RangeGrid grid;
  LabelConfig label;
  TrainConfig train;
  bool train_enabled = true;
  double train_range_step_m = 10.0;
  AdaptConfig adapt;

  std::vector<std::string> methods = {"mfp", "cnn", "cnn_shot", "cnn_jsea"};
  std::uint64_t master_seed = 0;
  int threads = 0;  // 0 = hardware concurrency
};

/// Network layout implied by the array size and range grid.
ArchConfig arch_from_config(const ExperimentConfig& cfg);

/// Training set: one sample per on-grid range at the training SNR.
std::vector<ScmFeature> generate_training_set(const ExperimentConfig& cfg);

/// Test set for one (delta_c, snr, realization) cell.
std::vector<ScmFeature> generate_test_set(const ExperimentConfig& cfg, double delta_c,
                                          double snr_db, std::uint64_t cell_seed);

/// Seed for the test data of one sweep cell; shared by all methods so that
/// comparisons are paired.
std::uint64_t test_cell_seed(std::uint64_t master_seed, std::size_t snr_index,
                             std::size_t delta_c_index, int realization);

struct ResultRow {
  std::string method;
  double snr_db = 0.0;
  double delta_c = 0.0;
  int realization = 0;
  double mae_m = 0.0;
  double pcl_pct = 0.0;
};

struct SummaryRow {
  std::string method;
  double snr_db = 0.0;
  double delta_c = 0.0;
  int realizations = 0;
  double mae_mean = 0.0, mae_std = 0.0;
  double pcl_mean = 0.0, pcl_std = 0.0;
};

/// Full sweep over methods x SNR x delta_c x realizations.  Adaptation
/// methods restart from `pretrained` for every cell; `pretrained` may be null
/// only when no CNN-based method is requested.  Writes results.csv and
/// summary.csv under out_dir and returns the raw rows (sorted).
std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg,
                                      const NetworkParams* pretrained,
                                      const std::string& out_dir);

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows);

void write_results_csv(const std::string& path, const std::vector<ResultRow>& rows);
void write_summary_csv(const std::string& path, const std::vector<SummaryRow>& rows);
std::vector<ResultRow> read_results_csv(const std::string& path);
std::vector<SummaryRow> read_summary_csv(const std::string& path);

/// Per-method range estimates on one test set (runs adaptation when asked).
std::vector<double> estimate_ranges_with_method(const std::string& method,
                                                const ExperimentConfig& cfg,
                                                const std::vector<ScmFeature>& test_set,
                                                const NetworkParams* pretrained,
                                                const std::vector<Replica>& replicas,
                                                AdaptReport* report = nullptr);

// --- Dataset container (UWAD) ---------------------------------------------------
// Little-endian binary: magic "UWAD", u32 version = 1, u32 sample count,
// u32 array size L; per sample f64 true range (NaN when unlabeled), f64
// energy, then L*L (re, im) f64 pairs row-major.

void save_dataset(const std::string& path, const std::vector<ScmFeature>& features);
std::vector<ScmFeature> load_dataset(const std::string& path);

}  // namespace uwrange
