#include "uwrange/localizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace uwrange {

int ArchConfig::conv_output_size() const {
  int size = input_size;
  for (const auto& [channels, kernel] : conv_layers) {
    (void)channels;
    size = size - kernel + 1;
    if (size < 1) {
      throw std::invalid_argument("arch: kernel size " + std::to_string(kernel) +
                                  " does not fit remaining spatial extent");
    }
  }
  return size;
}

int ArchConfig::flatten_dim() const {
  const int side = conv_output_size();
  const int channels = conv_layers.empty() ? in_channels : conv_layers.back().first;
  return channels * side * side;
}

std::vector<Tensor*> NetworkParams::trainable_tensors(bool include_classifier) {
  std::vector<Tensor*> out;
  for (std::size_t i = 0; i < conv_kernels.size(); ++i) {
    out.push_back(&conv_kernels[i]);
    out.push_back(&conv_biases[i]);
  }
  out.push_back(&feature_weight);
  out.push_back(&feature_bias);
  if (include_classifier) out.push_back(&classifier_weight);
  return out;
}

std::vector<const Tensor*> NetworkParams::tensors(bool include_classifier) const {
  std::vector<const Tensor*> out;
  for (std::size_t i = 0; i < conv_kernels.size(); ++i) {
    out.push_back(&conv_kernels[i]);
    out.push_back(&conv_biases[i]);
  }
  out.push_back(&feature_weight);
  out.push_back(&feature_bias);
  if (include_classifier) out.push_back(&classifier_weight);
  return out;
}

namespace {

void fill_uniform(Tensor& t, double bound, Rng& rng) {
  for (double& v : t.data) v = rng.uniform(-bound, bound);
}

}  // namespace

NetworkParams init_network(const ArchConfig& arch, Rng& rng) {
  NetworkParams params;
  params.arch = arch;
  int in_channels = arch.in_channels;
  for (const auto& [channels, kernel] : arch.conv_layers) {
    Tensor k({static_cast<std::size_t>(channels), static_cast<std::size_t>(in_channels),
              static_cast<std::size_t>(kernel), static_cast<std::size_t>(kernel)});
    Tensor b({static_cast<std::size_t>(channels)});
    const double bound = std::sqrt(1.0 / (in_channels * kernel * kernel));
    fill_uniform(k, bound, rng);
    fill_uniform(b, bound, rng);
    params.conv_kernels.push_back(std::move(k));
    params.conv_biases.push_back(std::move(b));
    in_channels = channels;
  }
  const int flatten = arch.flatten_dim();
  params.feature_weight = Tensor({static_cast<std::size_t>(arch.feature_dim),
                                  static_cast<std::size_t>(flatten)});
  params.feature_bias = Tensor({static_cast<std::size_t>(arch.feature_dim)});
  const double feature_bound = std::sqrt(1.0 / flatten);
  fill_uniform(params.feature_weight, feature_bound, rng);
  fill_uniform(params.feature_bias, feature_bound, rng);

  params.classifier_weight = Tensor({static_cast<std::size_t>(arch.num_classes),
                                     static_cast<std::size_t>(arch.feature_dim)});
  fill_uniform(params.classifier_weight, std::sqrt(1.0 / arch.feature_dim), rng);
  return params;
}

NetworkGrads NetworkGrads::zeros_like(const NetworkParams& params) {
  NetworkGrads grads;
  for (const Tensor& k : params.conv_kernels) grads.conv_kernels.push_back(Tensor::zeros_like(k));
  for (const Tensor& b : params.conv_biases) grads.conv_biases.push_back(Tensor::zeros_like(b));
  grads.feature_weight = Tensor::zeros_like(params.feature_weight);
  grads.feature_bias = Tensor::zeros_like(params.feature_bias);
  grads.classifier_weight = Tensor::zeros_like(params.classifier_weight);
  return grads;
}

void NetworkGrads::accumulate(const NetworkGrads& other) {
  for (std::size_t i = 0; i < conv_kernels.size(); ++i) {
    conv_kernels[i] += other.conv_kernels[i];
    conv_biases[i] += other.conv_biases[i];
  }
  feature_weight += other.feature_weight;
  feature_bias += other.feature_bias;
  classifier_weight += other.classifier_weight;
}

void NetworkGrads::scale(double s) {
  for (Tensor& t : conv_kernels) t *= s;
  for (Tensor& t : conv_biases) t *= s;
  feature_weight *= s;
  feature_bias *= s;
  classifier_weight *= s;
}

std::vector<const Tensor*> NetworkGrads::tensors(bool include_classifier) const {
  std::vector<const Tensor*> out;
  for (std::size_t i = 0; i < conv_kernels.size(); ++i) {
    out.push_back(&conv_kernels[i]);
    out.push_back(&conv_biases[i]);
  }
  out.push_back(&feature_weight);
  out.push_back(&feature_bias);
  if (include_classifier) out.push_back(&classifier_weight);
  return out;
}

Tensor network_logits(const NetworkParams& params, const Tensor& input, ForwardCache* cache) {
  if (input.shape.size() != 4 ||
      input.dim(1) != static_cast<std::size_t>(params.arch.in_channels) ||
      input.dim(2) != static_cast<std::size_t>(params.arch.input_size) ||
      input.dim(3) != static_cast<std::size_t>(params.arch.input_size)) {
    throw std::invalid_argument("network_logits: input shape mismatch");
  }
  const std::size_t batch = input.dim(0);
  if (cache != nullptr) {
    *cache = ForwardCache{};
    cache->input = input;
  }

  Tensor activation_storage;
  const Tensor* activation = &input;
  for (std::size_t layer = 0; layer < params.conv_kernels.size(); ++layer) {
    Tensor pre = conv2d_forward(*activation, params.conv_kernels[layer],
                                params.conv_biases[layer]);
    Tensor post = relu_forward(pre);
    if (cache != nullptr) {
      cache->conv_pre.push_back(std::move(pre));
      cache->conv_post.push_back(std::move(post));
      activation = &cache->conv_post.back();
    } else {
      activation_storage = std::move(post);
      activation = &activation_storage;
    }
  }

  Tensor flat = *activation;
  flat.shape = {batch, flat.numel() / batch};

  Tensor feature_pre = linear_forward(flat, params.feature_weight, &params.feature_bias);
  Tensor feature_post = relu_forward(feature_pre);
  Tensor logits = linear_forward(feature_post, params.classifier_weight, nullptr);
  if (cache != nullptr) {
    cache->flat = std::move(flat);
    cache->feature_pre = std::move(feature_pre);
    cache->feature_post = std::move(feature_post);
    cache->logits = logits;
  }
  return logits;
}

void network_backward(const NetworkParams& params, const ForwardCache& cache,
                      const Tensor& grad_logits, NetworkGrads* grads) {
  // Classifier (no bias).
  Tensor grad_feature_post, grad_classifier;
  linear_backward(cache.feature_post, params.classifier_weight, grad_logits,
                  &grad_feature_post, &grad_classifier, nullptr);
  grads->classifier_weight += grad_classifier;

  // Feature layer.
  Tensor grad_feature_pre = relu_backward(cache.feature_pre, grad_feature_post);
  Tensor grad_flat, grad_feature_weight, grad_feature_bias;
  linear_backward(cache.flat, params.feature_weight, grad_feature_pre, &grad_flat,
                  &grad_feature_weight, &grad_feature_bias);
  grads->feature_weight += grad_feature_weight;
  grads->feature_bias += grad_feature_bias;

  // Conv stack, last to first.
  Tensor grad_activation = grad_flat;
  grad_activation.shape = cache.conv_post.back().shape;
  for (std::size_t layer = params.conv_kernels.size(); layer-- > 0;) {
    Tensor grad_pre = relu_backward(cache.conv_pre[layer], grad_activation);
    const Tensor& layer_input = layer == 0 ? cache.input : cache.conv_post[layer - 1];
    Tensor grad_input, grad_kernel, grad_bias;
    conv2d_backward(layer_input, params.conv_kernels[layer], grad_pre,
                    layer > 0 ? &grad_input : nullptr, &grad_kernel, &grad_bias);
    grads->conv_kernels[layer] += grad_kernel;
    grads->conv_biases[layer] += grad_bias;
    if (layer > 0) grad_activation = std::move(grad_input);
  }
}

Tensor scm_to_input(const Eigen::MatrixXcd& scm) {
  const std::size_t side = static_cast<std::size_t>(scm.rows());
  Tensor input({2, side, side});
  for (std::size_t r = 0; r < side; ++r) {
    for (std::size_t c = 0; c < side; ++c) {
      const auto& z = scm(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
      input.data[r * side + c] = z.real();
      input.data[side * side + r * side + c] = z.imag();
    }
  }
  return input;
}

Tensor batch_inputs(const std::vector<ScmFeature>& features,
                    const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw std::invalid_argument("batch_inputs: empty index list");
  const std::size_t side = static_cast<std::size_t>(features[indices[0]].scm.rows());
  Tensor batch({indices.size(), 2, side, side});
  const std::size_t stride = 2 * side * side;
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const Tensor one = scm_to_input(features[indices[b]].scm);
    std::copy(one.data.begin(), one.data.end(), batch.data.begin() + b * stride);
  }
  return batch;
}

Pmf predict(const NetworkParams& params, const ScmFeature& feature) {
  Tensor input = scm_to_input(feature.scm);
  input.shape = {1, input.dim(0), input.dim(1), input.dim(2)};
  const Tensor logits = network_logits(params, input, nullptr);
  return softmax(std::span<const double>(logits.data.data(), logits.data.size()));
}

std::vector<Pmf> predict_all(const NetworkParams& params,
                             const std::vector<ScmFeature>& features) {
  constexpr std::size_t kChunk = 128;
  std::vector<Pmf> out;
  out.reserve(features.size());
  std::vector<std::size_t> indices;
  for (std::size_t start = 0; start < features.size(); start += kChunk) {
    const std::size_t stop = std::min(features.size(), start + kChunk);
    indices.resize(stop - start);
    std::iota(indices.begin(), indices.end(), start);
    const Tensor logits = network_logits(params, batch_inputs(features, indices), nullptr);
    const Tensor probs = softmax_rows(logits);
    const std::size_t classes = probs.dim(1);
    for (std::size_t b = 0; b < probs.dim(0); ++b) {
      out.emplace_back(probs.data.begin() + b * classes,
                       probs.data.begin() + (b + 1) * classes);
    }
  }
  return out;
}

// --- Training ----------------------------------------------------------------

namespace {

double mean_jsd_loss(const NetworkParams& params, const std::vector<ScmFeature>& features,
                     const std::vector<Pmf>& labels, const std::vector<std::size_t>& indices,
                     int chunk_size) {
  double total = 0.0;
  std::vector<std::size_t> chunk;
  for (std::size_t start = 0; start < indices.size();
       start += static_cast<std::size_t>(chunk_size)) {
    const std::size_t stop =
        std::min(indices.size(), start + static_cast<std::size_t>(chunk_size));
    chunk.assign(indices.begin() + start, indices.begin() + stop);
    const Tensor logits = network_logits(params, batch_inputs(features, chunk), nullptr);
    const Tensor probs = softmax_rows(logits);
    const std::size_t classes = probs.dim(1);
    for (std::size_t b = 0; b < chunk.size(); ++b) {
      Pmf prob_row(probs.data.begin() + b * classes, probs.data.begin() + (b + 1) * classes);
      total += jsd(labels[chunk[b]], prob_row);
    }
  }
  return total / static_cast<double>(indices.size());
}

}  // namespace

TrainResult train(const std::vector<TrainSample>& dataset, const ArchConfig& arch,
                  const TrainConfig& cfg) {
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  if (!(cfg.val_fraction > 0.0 && cfg.val_fraction < 1.0)) {
    throw std::invalid_argument("train: val_fraction must be in (0, 1)");
  }
  if (cfg.patience_stop <= cfg.patience_decay) {
    throw std::invalid_argument("train: patience_stop must exceed patience_decay");
  }
  const std::size_t num_samples = dataset.size();
  std::vector<ScmFeature> features;
  std::vector<Pmf> labels;
  features.reserve(num_samples);
  labels.reserve(num_samples);
  for (const TrainSample& s : dataset) {
    if (!is_valid_pmf(s.label)) throw std::invalid_argument("train: invalid label pmf");
    features.push_back(s.feature);
    labels.push_back(s.label);
  }

  // Seeded 85/15 split.
  std::vector<std::size_t> order(num_samples);
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng(derive_seed(cfg.seed, "train-split"));
  split_rng.shuffle(order);
  std::size_t num_val = static_cast<std::size_t>(
      std::lround(cfg.val_fraction * static_cast<double>(num_samples)));
  num_val = std::clamp<std::size_t>(num_val, 1, num_samples - 1);
  std::vector<std::size_t> train_idx(order.begin(), order.end() - num_val);
  std::vector<std::size_t> val_idx(order.end() - num_val, order.end());

  Rng init_rng(derive_seed(cfg.seed, "net-init"));
  NetworkParams params = init_network(arch, init_rng);
  params.classifier_frozen = cfg.classifier_frozen;

  AdamConfig adam_cfg;
  adam_cfg.learning_rate = cfg.learning_rate;
  const bool with_classifier = !params.classifier_frozen;
  AdamState adam = AdamState::init(params.tensors(with_classifier), adam_cfg);

  TrainResult result;
  result.val_indices = val_idx;
  NetworkParams best = params;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = -1;
  int since_best = 0;
  double lr = cfg.learning_rate;
  const std::size_t classes = static_cast<std::size_t>(arch.num_classes);

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    Rng epoch_rng(derive_seed(cfg.seed, "epoch-shuffle", static_cast<std::uint64_t>(epoch)));
    epoch_rng.shuffle(train_idx);

    double epoch_loss = 0.0;
    std::vector<std::size_t> batch;
    for (std::size_t start = 0; start < train_idx.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop =
          std::min(train_idx.size(), start + static_cast<std::size_t>(cfg.batch_size));
      batch.assign(train_idx.begin() + start, train_idx.begin() + stop);
      const std::size_t batch_n = batch.size();

      ForwardCache cache;
      const Tensor logits = network_logits(params, batch_inputs(features, batch), &cache);
      const Tensor probs = softmax_rows(logits);

      double batch_loss = 0.0;
      Tensor grad_logits({batch_n, classes});
      std::vector<double> grad_probs(classes);
      for (std::size_t b = 0; b < batch_n; ++b) {
        std::span<const double> prob_row(probs.data.data() + b * classes, classes);
        Pmf prob_vec(prob_row.begin(), prob_row.end());
        batch_loss += jsd(labels[batch[b]], prob_vec);
        std::fill(grad_probs.begin(), grad_probs.end(), 0.0);
        jsd_grad_q(labels[batch[b]], prob_row, 1.0 / static_cast<double>(batch_n),
                   grad_probs);
        softmax_backward_row(prob_row, grad_probs,
                             std::span<double>(grad_logits.data.data() + b * classes, classes));
      }
      batch_loss /= static_cast<double>(batch_n);
      if (!std::isfinite(batch_loss)) {
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                 ", batch offset " + std::to_string(start));
      }
      epoch_loss += batch_loss * static_cast<double>(batch_n);

      NetworkGrads grads = NetworkGrads::zeros_like(params);
      network_backward(params, cache, grad_logits, &grads);
      adam.config.learning_rate = lr;
      adam_step(params.trainable_tensors(with_classifier), grads.tensors(with_classifier),
                adam);
    }
    epoch_loss /= static_cast<double>(train_idx.size());

    const double val_loss =
        mean_jsd_loss(params, features, labels, val_idx, cfg.batch_size);
    if (!std::isfinite(val_loss)) {
      throw std::runtime_error("train: non-finite validation loss at epoch " +
                               std::to_string(epoch));
    }
    result.log.push_back({epoch, epoch_loss, val_loss, lr});

    if (val_loss < best_val) {
      best_val = val_loss;
      best = params;
      best_epoch = epoch;
      since_best = 0;
    } else {
      ++since_best;
      if (since_best >= cfg.patience_stop) break;
      if (since_best % cfg.patience_decay == 0) lr *= cfg.lr_decay_factor;
    }
  }

  result.params = std::move(best);
  result.best_epoch = best_epoch;
  result.best_val_loss = best_val;
  return result;
}

// --- Bartlett MFP baseline ----------------------------------------------------

std::vector<double> grid_ranges(double d_min_m, double d_max_m, double step_m) {
  const int count = static_cast<int>(std::lround((d_max_m - d_min_m) / step_m)) + 1;
  std::vector<double> ranges(count);
  for (int i = 0; i < count; ++i) ranges[i] = d_min_m + step_m * i;
  return ranges;
}

std::vector<Replica> build_replica_table(const Environment& env,
                                         const std::vector<double>& ranges_m) {
  const ModeSet modes = compute_modes(env);
  std::vector<Replica> table;
  table.reserve(ranges_m.size());
  for (double range : ranges_m) {
    table.push_back({range, normalize_snapshot(greens_vector(env, modes, range))});
  }
  return table;
}

double bartlett_mfp(const ScmFeature& feature, const std::vector<Replica>& replicas) {
  if (replicas.empty()) throw std::invalid_argument("bartlett_mfp: empty replica table");
  double best_objective = -1.0;
  double best_range = replicas.front().range_m;
  for (const Replica& replica : replicas) {
    const std::complex<double> quad =
        (replica.field.adjoint() * feature.scm * replica.field)(0);
    const double objective = quad.real();
    if (objective > best_objective) {
      best_objective = objective;
      best_range = replica.range_m;
    }
  }
  return best_range;
}

}  // namespace uwrange
