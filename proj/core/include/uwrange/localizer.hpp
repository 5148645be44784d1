#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "uwrange/features.hpp"
#include "uwrange/labels.hpp"
#include "uwrange/nn.hpp"
#include "uwrange/ocean.hpp"
#include "uwrange/rng.hpp"
#include "uwrange/tensor.hpp"

namespace uwrange {

/// Network layout: stacked valid convolutions with ReLU, a linear feature
/// layer with ReLU, then a bias-free linear classifier and softmax.
struct ArchConfig {
  int input_size = 21;  // SCM side length L
  int in_channels = 2;  // [Re C | Im C]
  std::vector<std::pair<int, int>> conv_layers = {{6, 3}, {38, 5}, {40, 5}};  // (channels, kernel)
  int feature_dim = 256;
  int num_classes = 82;

  /// Spatial size after the conv stack; throws if a kernel does not fit.
  int conv_output_size() const;
  int flatten_dim() const;
};

/// All trainable tensors of the feature extractor plus the classifier.
struct NetworkParams {
  ArchConfig arch;
  std::vector<Tensor> conv_kernels;  // [C_out, C_in, k, k] each
  std::vector<Tensor> conv_biases;   // [C_out] each
  Tensor feature_weight;             // [feature_dim, flatten_dim]
  Tensor feature_bias;               // [feature_dim]
  Tensor classifier_weight;          // [num_classes, feature_dim], no bias
  bool classifier_frozen = false;

  /// Feature-extractor tensors, then (unless frozen_only) the classifier.
  std::vector<Tensor*> trainable_tensors(bool include_classifier);
  std::vector<const Tensor*> tensors(bool include_classifier) const;
};

/// Uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)) initialization per layer.
NetworkParams init_network(const ArchConfig& arch, Rng& rng);

/// Gradients with the same tensor layout as NetworkParams.
struct NetworkGrads {
  std::vector<Tensor> conv_kernels;
  std::vector<Tensor> conv_biases;
  Tensor feature_weight;
  Tensor feature_bias;
  Tensor classifier_weight;

  static NetworkGrads zeros_like(const NetworkParams& params);
  void accumulate(const NetworkGrads& other);
  void scale(double s);
  std::vector<const Tensor*> tensors(bool include_classifier) const;
};

/// Per-layer activations of one forward pass, kept for the backward pass.
struct ForwardCache {
  Tensor input;                      // [B, C, L, L]
  std::vector<Tensor> conv_pre;      // pre-ReLU conv outputs
  std::vector<Tensor> conv_post;     // post-ReLU conv outputs
  Tensor flat;                       // [B, flatten_dim]
  Tensor feature_pre;                // [B, feature_dim] pre-ReLU
  Tensor feature_post;               // [B, feature_dim]
  Tensor logits;                     // [B, num_classes]
};

/// Batched forward pass to logits; cache may be null when no backward follows.
Tensor network_logits(const NetworkParams& params, const Tensor& input, ForwardCache* cache);

/// Backward pass from d(loss)/d(logits); accumulates into grads.
void network_backward(const NetworkParams& params, const ForwardCache& cache,
                      const Tensor& grad_logits, NetworkGrads* grads);

/// [2, L, L] input tensor from the real and imaginary parts of the SCM.
Tensor scm_to_input(const Eigen::MatrixXcd& scm);

/// Batch assembly: features[index_list] -> [B, 2, L, L].
Tensor batch_inputs(const std::vector<ScmFeature>& features,
                    const std::vector<std::size_t>& indices);

/// Softmax output of the network on one SCM feature.
Pmf predict(const NetworkParams& params, const ScmFeature& feature);

/// Batched prediction over a whole feature list.
std::vector<Pmf> predict_all(const NetworkParams& params,
                             const std::vector<ScmFeature>& features);

// --- Training ----------------------------------------------------------------

struct TrainConfig {
  double learning_rate = 1e-4;
  int batch_size = 128;
  double val_fraction = 0.15;
  double lr_decay_factor = 0.1;
  int patience_decay = 75;   // epochs without val improvement before lr decay
  int patience_stop = 125;   // epochs without val improvement before stopping
  int max_epochs = 2000;
  bool classifier_frozen = false;
  std::uint64_t seed = 0;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double learning_rate = 0.0;
};

struct TrainResult {
  NetworkParams params;      // best-validation checkpoint
  std::vector<EpochLog> log;
  int best_epoch = -1;
  double best_val_loss = 0.0;
  std::vector<std::size_t> val_indices;  // held-out sample indices
};

struct TrainSample {
  ScmFeature feature;
  Pmf label;
};

/// Minimizes mean JSD(label, output) with Adam; 85/15 split by seed, learning
/// rate decay and early stopping on validation plateaus; returns the
/// best-validation parameters and the per-epoch log.
TrainResult train(const std::vector<TrainSample>& dataset, const ArchConfig& arch,
                  const TrainConfig& cfg);

// --- Bartlett MFP baseline ----------------------------------------------------

struct Replica {
  double range_m = 0.0;
  Eigen::VectorXcd field;  // unit norm
};

/// Normalized replica fields at each requested range in the given environment.
std::vector<Replica> build_replica_table(const Environment& env,
                                         const std::vector<double>& ranges_m);

/// Training-grid ranges d_min : step : d_max inclusive.
std::vector<double> grid_ranges(double d_min_m, double d_max_m, double step_m);

/// argmax_d R(d)^H C R(d); ties go to the smaller range.
double bartlett_mfp(const ScmFeature& feature, const std::vector<Replica>& replicas);

}  // namespace uwrange
