#include "uwrange/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace uwrange {

double mae(const std::vector<double>& true_ranges, const std::vector<double>& estimates) {
  if (true_ranges.empty() || true_ranges.size() != estimates.size()) {
    throw std::invalid_argument("mae: empty or mismatched inputs");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < true_ranges.size(); ++i) {
    sum += std::abs(true_ranges[i] - estimates[i]);
  }
  return sum / static_cast<double>(true_ranges.size());
}

double pcl(const std::vector<double>& true_ranges, const std::vector<double>& estimates) {
  if (true_ranges.empty() || true_ranges.size() != estimates.size()) {
    throw std::invalid_argument("pcl: empty or mismatched inputs");
  }
  int credible = 0;
  for (std::size_t i = 0; i < true_ranges.size(); ++i) {
    if (std::abs(true_ranges[i] - estimates[i]) <= 0.1 * true_ranges[i]) ++credible;
  }
  return 100.0 * static_cast<double>(credible) / static_cast<double>(true_ranges.size());
}

std::vector<ScmFeature> generate_dataset(const Environment& env,
                                         const std::vector<double>& ranges_m,
                                         const DatasetConfig& cfg, std::uint64_t seed) {
  validate(env);
  const ModeSet modes = compute_modes(env);
  Rng rng(seed);
  std::vector<ScmFeature> features;
  features.reserve(ranges_m.size());
  for (double range : ranges_m) {
    const Eigen::VectorXcd greens = greens_vector(env, modes, range);
    SnapshotMatrix snapshots =
        generate_snapshots(greens, cfg.num_snapshots, env.frequency_hz, rng);
    snapshots = add_noise(snapshots, cfg.snr_db, cfg.noise, rng);
    ScmFeature feature = compute_scm(snapshots);
    feature.true_range_m = range;
    features.push_back(std::move(feature));
  }
  return features;
}

std::vector<ScmFeature> generate_random_dataset(const Environment& env, int num_samples,
                                                double d_min_m, double d_max_m,
                                                const DatasetConfig& cfg,
                                                std::uint64_t seed) {
  Rng range_rng(derive_seed(seed, "test-ranges"));
  std::vector<double> ranges(num_samples);
  for (double& r : ranges) r = range_rng.uniform(d_min_m, d_max_m);
  return generate_dataset(env, ranges, cfg, derive_seed(seed, "test-data"));
}

std::vector<TrainSample> make_training_samples(const std::vector<ScmFeature>& features,
                                               const RangeGrid& grid,
                                               const LabelConfig& label) {
  std::vector<TrainSample> samples;
  samples.reserve(features.size());
  for (const ScmFeature& f : features) {
    if (!f.true_range_m.has_value()) {
      throw std::invalid_argument("make_training_samples: unlabeled feature");
    }
    const int bin = quantize_range(*f.true_range_m, grid);
    samples.push_back({f, soften(bin, label, grid.num_classes())});
  }
  return samples;
}

ArchConfig arch_from_config(const ExperimentConfig& cfg) {
  ArchConfig arch;
  arch.input_size = static_cast<int>(cfg.env.array_depths_m.size());
  arch.num_classes = cfg.grid.num_classes();
  return arch;
}

std::vector<ScmFeature> generate_training_set(const ExperimentConfig& cfg) {
  DatasetConfig data_cfg{cfg.num_snapshots, cfg.train_snr_db, cfg.noise};
  const std::vector<double> ranges =
      grid_ranges(cfg.grid.d_min_m, cfg.grid.d_max_m, cfg.train_range_step_m);
  return generate_dataset(cfg.env, ranges, data_cfg,
                          derive_seed(cfg.master_seed, "train-data"));
}

std::uint64_t test_cell_seed(std::uint64_t master_seed, std::size_t snr_index,
                             std::size_t delta_c_index, int realization) {
  const std::uint64_t key = (static_cast<std::uint64_t>(snr_index) << 40) |
                            (static_cast<std::uint64_t>(delta_c_index) << 20) |
                            static_cast<std::uint64_t>(realization);
  return derive_seed(master_seed, "test-cell", key);
}

std::vector<ScmFeature> generate_test_set(const ExperimentConfig& cfg, double delta_c,
                                          double snr_db, std::uint64_t cell_seed) {
  const Environment test_env = perturb_ssp(cfg.env, delta_c);
  DatasetConfig data_cfg{cfg.num_snapshots, snr_db, cfg.noise};
  if (cfg.test_on_grid) {
    const std::vector<double> grid_points =
        grid_ranges(cfg.grid.d_min_m, cfg.grid.d_max_m, cfg.train_range_step_m);
    Rng range_rng(derive_seed(cell_seed, "test-ranges"));
    std::vector<double> ranges(cfg.num_test);
    for (double& r : ranges) r = grid_points[range_rng.index(grid_points.size())];
    return generate_dataset(test_env, ranges, data_cfg, derive_seed(cell_seed, "test-data"));
  }
  return generate_random_dataset(test_env, cfg.num_test, cfg.grid.d_min_m, cfg.grid.d_max_m,
                                 data_cfg, cell_seed);
}

std::vector<double> estimate_ranges_with_method(const std::string& method,
                                                const ExperimentConfig& cfg,
                                                const std::vector<ScmFeature>& test_set,
                                                const NetworkParams* pretrained,
                                                const std::vector<Replica>& replicas,
                                                AdaptReport* report) {
  std::vector<double> estimates;
  estimates.reserve(test_set.size());
  if (method == "mfp") {
    for (const ScmFeature& f : test_set) {
      estimates.push_back(bartlett_mfp(f, replicas));
    }
    return estimates;
  }
  if (pretrained == nullptr) {
    throw std::invalid_argument("method " + method + " requires a pre-trained network");
  }
  const NetworkParams* model = pretrained;
  NetworkParams adapted;
  if (method == "cnn_shot") {
    adapted = shot_adapt(*pretrained, test_set, cfg.adapt, report);
    model = &adapted;
  } else if (method == "cnn_jsea") {
    adapted = jsea_adapt(*pretrained, test_set, cfg.adapt, cfg.grid, report);
    model = &adapted;
  } else if (method != "cnn") {
    throw std::invalid_argument("unknown method " + method);
  }
  for (const Pmf& prediction : predict_all(*model, test_set)) {
    estimates.push_back(estimate_range(prediction, cfg.grid));
  }
  return estimates;
}

namespace {

bool needs_network(const std::vector<std::string>& methods) {
  return std::any_of(methods.begin(), methods.end(),
                     [](const std::string& m) { return m != "mfp"; });
}

struct Cell {
  std::size_t snr_index;
  std::size_t delta_c_index;
  int realization;
};

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string format_param(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

}  // namespace

std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg,
                                      const NetworkParams* pretrained,
                                      const std::string& out_dir) {
  if (cfg.methods.empty()) throw std::invalid_argument("run_experiment: no methods");
  if (cfg.realizations < 1) throw std::invalid_argument("run_experiment: realizations < 1");
  if (needs_network(cfg.methods) && pretrained == nullptr) {
    throw std::invalid_argument(
        "run_experiment: CNN-based methods need a checkpoint (training disabled)");
  }
  validate(cfg.env);

  const bool wants_mfp =
      std::find(cfg.methods.begin(), cfg.methods.end(), "mfp") != cfg.methods.end();
  std::vector<Replica> replicas;
  if (wants_mfp) {
    replicas = build_replica_table(
        cfg.env, grid_ranges(cfg.grid.d_min_m, cfg.grid.d_max_m, cfg.train_range_step_m));
  }

  std::vector<Cell> cells;
  for (std::size_t si = 0; si < cfg.snr_db_list.size(); ++si) {
    for (std::size_t di = 0; di < cfg.delta_c_list.size(); ++di) {
      for (int r = 0; r < cfg.realizations; ++r) {
        cells.push_back({si, di, r});
      }
    }
  }

  // Each cell owns a derived seed and a result slot, so cells can run on any
  // thread without affecting the output.
  std::vector<std::vector<ResultRow>> cell_rows(cells.size());
  std::atomic<std::size_t> next_cell{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t index = next_cell.fetch_add(1);
      if (index >= cells.size()) break;
      const Cell& cell = cells[index];
      const double snr_db = cfg.snr_db_list[cell.snr_index];
      const double delta_c = cfg.delta_c_list[cell.delta_c_index];
      const std::uint64_t seed =
          test_cell_seed(cfg.master_seed, cell.snr_index, cell.delta_c_index,
                         cell.realization);
      const std::vector<ScmFeature> test_set =
          generate_test_set(cfg, delta_c, snr_db, seed);
      std::vector<double> true_ranges;
      true_ranges.reserve(test_set.size());
      for (const ScmFeature& f : test_set) true_ranges.push_back(*f.true_range_m);

      for (const std::string& method : cfg.methods) {
        const std::vector<double> estimates =
            estimate_ranges_with_method(method, cfg, test_set, pretrained, replicas);
        cell_rows[index].push_back({method, snr_db, delta_c, cell.realization,
                                    mae(true_ranges, estimates),
                                    pcl(true_ranges, estimates)});
      }
    }
  };

  unsigned num_threads = cfg.threads > 0
                             ? static_cast<unsigned>(cfg.threads)
                             : std::max(1u, std::thread::hardware_concurrency());
  num_threads = std::min<unsigned>(num_threads, static_cast<unsigned>(cells.size()));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < num_threads; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();

  std::vector<ResultRow> rows;
  for (const auto& cell : cell_rows) {
    rows.insert(rows.end(), cell.begin(), cell.end());
  }
  std::sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
    if (a.method != b.method) return a.method < b.method;
    if (a.snr_db != b.snr_db) return a.snr_db < b.snr_db;
    if (a.delta_c != b.delta_c) return a.delta_c < b.delta_c;
    return a.realization < b.realization;
  });

  std::filesystem::create_directories(out_dir);
  write_results_csv((std::filesystem::path(out_dir) / "results.csv").string(), rows);
  write_summary_csv((std::filesystem::path(out_dir) / "summary.csv").string(),
                    summarize(rows));
  return rows;
}

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows) {
  std::vector<SummaryRow> summary;
  for (const ResultRow& row : rows) {
    auto it = std::find_if(summary.begin(), summary.end(), [&](const SummaryRow& s) {
      return s.method == row.method && s.snr_db == row.snr_db && s.delta_c == row.delta_c;
    });
    if (it == summary.end()) {
      summary.push_back({row.method, row.snr_db, row.delta_c, 0, 0.0, 0.0, 0.0, 0.0});
      it = std::prev(summary.end());
    }
    ++it->realizations;
    it->mae_mean += row.mae_m;
    it->mae_std += row.mae_m * row.mae_m;
    it->pcl_mean += row.pcl_pct;
    it->pcl_std += row.pcl_pct * row.pcl_pct;
  }
  for (SummaryRow& s : summary) {
    const double n = static_cast<double>(s.realizations);
    s.mae_mean /= n;
    s.pcl_mean /= n;
    // Sample standard deviation; zero for a single realization.
    s.mae_std = s.realizations > 1
                    ? std::sqrt(std::max(0.0, (s.mae_std - n * s.mae_mean * s.mae_mean) /
                                                  (n - 1.0)))
                    : 0.0;
    s.pcl_std = s.realizations > 1
                    ? std::sqrt(std::max(0.0, (s.pcl_std - n * s.pcl_mean * s.pcl_mean) /
                                                  (n - 1.0)))
                    : 0.0;
  }
  std::sort(summary.begin(), summary.end(), [](const SummaryRow& a, const SummaryRow& b) {
    if (a.method != b.method) return a.method < b.method;
    if (a.snr_db != b.snr_db) return a.snr_db < b.snr_db;
    return a.delta_c < b.delta_c;
  });
  return summary;
}

void write_results_csv(const std::string& path, const std::vector<ResultRow>& rows) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_results_csv: cannot open " + path);
  os << "method,snr_db,delta_c,realization,mae_m,pcl_pct\n";
  for (const ResultRow& r : rows) {
    os << r.method << ',' << format_param(r.snr_db) << ',' << format_param(r.delta_c)
       << ',' << r.realization << ',' << format_double(r.mae_m) << ','
       << format_double(r.pcl_pct) << '\n';
  }
}

void write_summary_csv(const std::string& path, const std::vector<SummaryRow>& rows) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_summary_csv: cannot open " + path);
  os << "method,snr_db,delta_c,realizations,mae_mean,mae_std,pcl_mean,pcl_std\n";
  for (const SummaryRow& r : rows) {
    os << r.method << ',' << format_param(r.snr_db) << ',' << format_param(r.delta_c)
       << ',' << r.realizations << ',' << format_double(r.mae_mean) << ','
       << format_double(r.mae_std) << ',' << format_double(r.pcl_mean) << ','
       << format_double(r.pcl_std) << '\n';
  }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  return fields;
}

}  // namespace

std::vector<ResultRow> read_results_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("read_results_csv: cannot open " + path);
  std::string line;
  if (!std::getline(is, line) || line != "method,snr_db,delta_c,realization,mae_m,pcl_pct") {
    throw std::runtime_error("read_results_csv: bad header in " + path);
  }
  std::vector<ResultRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 6) throw std::runtime_error("read_results_csv: bad row " + line);
    rows.push_back({fields[0], std::stod(fields[1]), std::stod(fields[2]),
                    std::stoi(fields[3]), std::stod(fields[4]), std::stod(fields[5])});
  }
  return rows;
}

std::vector<SummaryRow> read_summary_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("read_summary_csv: cannot open " + path);
  std::string line;
  if (!std::getline(is, line) ||
      line != "method,snr_db,delta_c,realizations,mae_mean,mae_std,pcl_mean,pcl_std") {
    throw std::runtime_error("read_summary_csv: bad header in " + path);
  }
  std::vector<SummaryRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 8) throw std::runtime_error("read_summary_csv: bad row " + line);
    rows.push_back({fields[0], std::stod(fields[1]), std::stod(fields[2]),
                    std::stoi(fields[3]), std::stod(fields[4]), std::stod(fields[5]),
                    std::stod(fields[6]), std::stod(fields[7])});
  }
  return rows;
}

// --- UWAD dataset container ------------------------------------------------------

namespace {
constexpr char kDatasetMagic[4] = {'U', 'W', 'A', 'D'};

template <typename T>
void write_pod(std::ofstream& os, T value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& is) {
  T value{};
  is.read(reinterpret_cast<char*>(&value), sizeof(T));
  return value;
}
}  // namespace

void save_dataset(const std::string& path, const std::vector<ScmFeature>& features) {
  if (features.empty()) throw std::invalid_argument("save_dataset: empty dataset");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_dataset: cannot open " + path);
  const std::uint32_t side = static_cast<std::uint32_t>(features.front().scm.rows());
  os.write(kDatasetMagic, 4);
  write_pod<std::uint32_t>(os, 1);
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(features.size()));
  write_pod<std::uint32_t>(os, side);
  for (const ScmFeature& f : features) {
    write_pod<double>(os, f.true_range_m.value_or(std::nan("")));
    write_pod<double>(os, f.energy);
    for (std::uint32_t r = 0; r < side; ++r) {
      for (std::uint32_t c = 0; c < side; ++c) {
        const auto z = f.scm(r, c);
        write_pod<double>(os, z.real());
        write_pod<double>(os, z.imag());
      }
    }
  }
}

std::vector<ScmFeature> load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_dataset: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kDatasetMagic, 4) != 0) {
    throw std::runtime_error("load_dataset: bad magic in " + path);
  }
  if (read_pod<std::uint32_t>(is) != 1) {
    throw std::runtime_error("load_dataset: unsupported version");
  }
  const auto count = read_pod<std::uint32_t>(is);
  const auto side = read_pod<std::uint32_t>(is);
  std::vector<ScmFeature> features(count);
  for (auto& f : features) {
    const double range = read_pod<double>(is);
    if (!std::isnan(range)) f.true_range_m = range;
    f.energy = read_pod<double>(is);
    f.scm.resize(side, side);
    for (std::uint32_t r = 0; r < side; ++r) {
      for (std::uint32_t c = 0; c < side; ++c) {
        const double re = read_pod<double>(is);
        const double im = read_pod<double>(is);
        f.scm(r, c) = {re, im};
      }
    }
  }
  if (!is) throw std::runtime_error("load_dataset: truncated file " + path);
  return features;
}

}  // namespace uwrange
