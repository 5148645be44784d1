#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "uwrange/checkpoint.hpp"
#include "uwrange/features.hpp"
#include "uwrange/localizer.hpp"
#include "uwrange/rng.hpp"

using namespace uwrange;

namespace {

ArchConfig tiny_arch(int classes = 4) {
  ArchConfig arch;
  arch.input_size = 7;
  arch.conv_layers = {{2, 3}, {2, 3}};
  arch.feature_dim = 8;
  arch.num_classes = classes;
  return arch;
}

ScmFeature rank_one_feature(int side, Rng& rng) {
  Eigen::VectorXcd g(side);
  for (int l = 0; l < side; ++l) g[l] = rng.complex_normal(1.0);
  const Eigen::VectorXcd unit = g / g.norm();
  ScmFeature f;
  f.scm = unit * unit.adjoint();
  f.energy = g.squaredNorm();
  return f;
}

bool same_tensors(const NetworkParams& a, const NetworkParams& b) {
  const auto ta = a.tensors(true);
  const auto tb = b.tensors(true);
  if (ta.size() != tb.size()) return false;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (ta[i]->shape != tb[i]->shape || ta[i]->data != tb[i]->data) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("default architecture reproduces the documented shape chain") {
  ArchConfig arch;  // 2x21x21 -> 6x19x19 -> 38x15x15 -> 40x11x11 -> 4840 -> 256 -> 82
  CHECK(arch.conv_output_size() == 11);
  CHECK(arch.flatten_dim() == 4840);

  Rng rng(1);
  const NetworkParams params = init_network(arch, rng);
  CHECK(params.conv_kernels[0].shape == std::vector<std::size_t>({6, 2, 3, 3}));
  CHECK(params.conv_kernels[1].shape == std::vector<std::size_t>({38, 6, 5, 5}));
  CHECK(params.conv_kernels[2].shape == std::vector<std::size_t>({40, 38, 5, 5}));
  CHECK(params.feature_weight.shape == std::vector<std::size_t>({256, 4840}));
  CHECK(params.classifier_weight.shape == std::vector<std::size_t>({82, 256}));

  Tensor input({2, 2, 21, 21});
  Rng in_rng(2);
  for (double& v : input.data) v = in_rng.normal();
  const Tensor logits = network_logits(params, input, nullptr);
  CHECK(logits.shape == std::vector<std::size_t>({2, 82}));
  CHECK(logits.all_finite());

  ArchConfig bad;
  bad.input_size = 9;  // 9 -> 7 -> 3, then a 5-kernel cannot fit
  CHECK_THROWS(bad.conv_output_size());
}

TEST_CASE("init_network is seeded and bounded by 1/sqrt(fan_in)") {
  const ArchConfig arch = tiny_arch();
  Rng a(derive_seed(9, "net-init")), b(derive_seed(9, "net-init")), c(derive_seed(10, "net-init"));
  const NetworkParams pa = init_network(arch, a);
  const NetworkParams pb = init_network(arch, b);
  const NetworkParams pc = init_network(arch, c);
  CHECK(same_tensors(pa, pb));
  CHECK_FALSE(same_tensors(pa, pc));

  const double conv1_bound = std::sqrt(1.0 / (2.0 * 3.0 * 3.0));
  for (double v : pa.conv_kernels[0].data) {
    CHECK(std::abs(v) <= conv1_bound);
  }
}

TEST_CASE("predict: valid pmf, deterministic, invariant to source gain") {
  const ArchConfig arch = tiny_arch();
  Rng rng(derive_seed(3, "net-init"));
  const NetworkParams params = init_network(arch, rng);

  Rng feat_rng(21);
  SnapshotMatrix snaps;
  snaps.frequency_hz = 130.0;
  snaps.coefficients.resize(7, 5);
  for (int p = 0; p < 5; ++p) {
    for (int l = 0; l < 7; ++l) snaps.coefficients(l, p) = feat_rng.complex_normal(1.0);
  }
  const ScmFeature feature = compute_scm(snaps);
  const Pmf first = predict(params, feature);
  const Pmf second = predict(params, feature);
  CHECK(is_valid_pmf(first));
  CHECK(first == second);

  SnapshotMatrix louder = snaps;
  louder.coefficients *= 2.0;  // power-of-two gain keeps the SCM bit-identical
  const Pmf scaled = predict(params, compute_scm(louder));
  CHECK(first == scaled);
}

TEST_CASE("train: separable 4-sample toy problem reaches < 0.01 nats") {
  const ArchConfig arch = tiny_arch(4);
  Rng feat_rng(33);
  std::vector<TrainSample> dataset;
  for (int k = 0; k < 4; ++k) {
    TrainSample sample;
    sample.feature = rank_one_feature(7, feat_rng);
    sample.label = soften(k, LabelConfig{1e-6}, 4);  // near one-hot
    dataset.push_back(std::move(sample));
  }

  TrainConfig cfg;
  cfg.learning_rate = 3e-3;
  cfg.batch_size = 4;
  cfg.val_fraction = 0.25;
  cfg.patience_decay = 400;
  cfg.patience_stop = 500;
  cfg.max_epochs = 500;
  cfg.seed = 7;

  const TrainResult result = train(dataset, arch, cfg);
  REQUIRE_FALSE(result.log.empty());
  double best_train_loss = result.log.front().train_loss;
  for (const EpochLog& entry : result.log) {
    best_train_loss = std::min(best_train_loss, entry.train_loss);
  }
  CHECK(best_train_loss < 0.01);

  // split bookkeeping: one held-out sample, valid index, disjointness by
  // construction (val indices are the tail of the seeded shuffle)
  CHECK(result.val_indices.size() == 1);
  CHECK(result.val_indices[0] < 4);
  CHECK(result.best_epoch >= 0);
  CHECK(result.best_val_loss == doctest::Approx(result.log[result.best_epoch].val_loss));
}

TEST_CASE("train: same seed gives identical parameters, empty dataset throws") {
  const ArchConfig arch = tiny_arch(3);
  Rng feat_rng(5);
  std::vector<TrainSample> dataset;
  for (int k = 0; k < 3; ++k) {
    TrainSample sample;
    sample.feature = rank_one_feature(7, feat_rng);
    sample.label = soften(k, LabelConfig{0.5}, 3);
    dataset.push_back(std::move(sample));
  }
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.batch_size = 2;
  cfg.val_fraction = 0.34;
  cfg.max_epochs = 25;
  cfg.patience_decay = 20;
  cfg.patience_stop = 24;
  cfg.seed = 11;

  const TrainResult a = train(dataset, arch, cfg);
  const TrainResult b = train(dataset, arch, cfg);
  CHECK(same_tensors(a.params, b.params));
  CHECK(a.log.size() == b.log.size());

  CHECK_THROWS(train({}, arch, cfg));
}

TEST_CASE("train: frozen classifier stays bit-identical to its initialization") {
  const ArchConfig arch = tiny_arch(3);
  Rng feat_rng(6);
  std::vector<TrainSample> dataset;
  for (int k = 0; k < 3; ++k) {
    TrainSample sample;
    sample.feature = rank_one_feature(7, feat_rng);
    sample.label = soften(k, LabelConfig{0.5}, 3);
    dataset.push_back(std::move(sample));
  }
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.batch_size = 3;
  cfg.val_fraction = 0.34;
  cfg.max_epochs = 20;
  cfg.patience_decay = 15;
  cfg.patience_stop = 19;
  cfg.seed = 13;
  cfg.classifier_frozen = true;

  const TrainResult result = train(dataset, arch, cfg);
  Rng init_rng(derive_seed(cfg.seed, "net-init"));
  const NetworkParams reference = init_network(arch, init_rng);
  CHECK(result.params.classifier_weight.data == reference.classifier_weight.data);
  // the feature extractor did move (some tensors may sit behind dead ReLUs
  // in a net this small, so accept movement anywhere upstream)
  bool extractor_moved = false;
  const auto trained = result.params.tensors(false);
  const auto initial = reference.tensors(false);
  for (std::size_t t = 0; t < trained.size(); ++t) {
    if (trained[t]->data != initial[t]->data) extractor_moved = true;
  }
  CHECK(extractor_moved);
}

TEST_CASE("checkpoint: UWAR round trip preserves everything") {
  const ArchConfig arch = tiny_arch(5);
  Rng rng(derive_seed(17, "net-init"));
  NetworkParams params = init_network(arch, rng);
  params.classifier_frozen = true;
  RangeGrid grid;
  grid.d_min_m = 800.0;
  grid.d_max_m = 1200.0;
  grid.bin_width_m = 100.0;

  const auto path =
      (std::filesystem::temp_directory_path() / "uwrange_ckpt_test.uwar").string();
  save_checkpoint(path, params, grid);
  const Checkpoint loaded = load_checkpoint(path);

  CHECK(same_tensors(loaded.params, params));
  CHECK(loaded.params.classifier_frozen == true);
  CHECK(loaded.params.arch.input_size == 7);
  CHECK(loaded.params.arch.conv_layers == arch.conv_layers);
  CHECK(loaded.grid.d_min_m == 800.0);
  CHECK(loaded.grid.d_max_m == 1200.0);
  CHECK(loaded.grid.bin_width_m == 100.0);

  CHECK_THROWS(load_checkpoint("/nonexistent/model.uwar"));
}

TEST_CASE("grid_ranges: 811 training ranges at 10 m steps") {
  const std::vector<double> ranges = grid_ranges(900.0, 9000.0, 10.0);
  CHECK(ranges.size() == 811);
  CHECK(ranges.front() == 900.0);
  CHECK(ranges.back() == 9000.0);
  CHECK(ranges[1] - ranges[0] == doctest::Approx(10.0));
}

TEST_CASE("build_replica_table: 811 unit-norm deterministic replicas") {
  const Environment env = default_environment();
  const std::vector<double> ranges = grid_ranges(900.0, 9000.0, 10.0);
  const std::vector<Replica> table = build_replica_table(env, ranges);
  REQUIRE(table.size() == 811);
  for (std::size_t i = 0; i < table.size(); i += 97) {
    CHECK(table[i].field.norm() == doctest::Approx(1.0).epsilon(1e-12));
  }
  const std::vector<Replica> again = build_replica_table(env, ranges);
  for (std::size_t i = 0; i < table.size(); i += 97) {
    CHECK(table[i].field == again[i].field);
  }
}

TEST_CASE("bartlett_mfp: self-match recovery, bounds, tie-break") {
  const Environment env = default_environment();
  const std::vector<double> ranges = grid_ranges(900.0, 9000.0, 10.0);
  const std::vector<Replica> table = build_replica_table(env, ranges);

  // a rank-1 SCM built from a replica recovers that exact range
  for (std::size_t i = 5; i < table.size(); i += 90) {
    ScmFeature feature;
    feature.scm = table[i].field * table[i].field.adjoint();
    feature.energy = 1.0;
    CHECK(bartlett_mfp(feature, table) == table[i].range_m);
  }

  // duplicated field at two ranges: the smaller range wins
  std::vector<Replica> tie{{2000.0, table[0].field}, {1000.0, table[0].field}};
  std::sort(tie.begin(), tie.end(),
            [](const Replica& a, const Replica& b) { return a.range_m < b.range_m; });
  ScmFeature feature;
  feature.scm = table[0].field * table[0].field.adjoint();
  feature.energy = 1.0;
  CHECK(bartlett_mfp(feature, tie) == 1000.0);

  CHECK_THROWS(bartlett_mfp(feature, {}));
}
