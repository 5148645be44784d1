#include "uwrange/adaptation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>

namespace uwrange {

namespace {
constexpr double kTiny = 1e-300;
}

std::vector<int> find_peaks(const Pmf& pmf) {
  const int classes = static_cast<int>(pmf.size());
  if (classes == 0) throw std::invalid_argument("find_peaks: empty pmf");
  std::vector<int> peaks;
  if (classes == 1) {
    peaks.push_back(0);
    return peaks;
  }
  for (int k = 0; k < classes; ++k) {
    const bool left_ok = k == 0 || pmf[k] > pmf[k - 1];
    const bool right_ok = k == classes - 1 || pmf[k] > pmf[k + 1];
    if (left_ok && right_ok) peaks.push_back(k);
  }
  std::stable_sort(peaks.begin(), peaks.end(),
                   [&](int a, int b) { return pmf[a] > pmf[b]; });
  return peaks;
}

bool ConfidentSet::contains(std::size_t i) const {
  return std::binary_search(indices.begin(), indices.end(), i);
}

ConfidentSet select_confident(const std::vector<Pmf>& predictions, const AdaptConfig& cfg) {
  ConfidentSet confident;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const std::vector<int> peaks = find_peaks(predictions[i]);
    if (peaks.size() == 1) {
      confident.indices.push_back(i);
    } else if (peaks.size() >= 2 &&
               predictions[i][peaks[0]] > cfg.peak_dominance * predictions[i][peaks[1]]) {
      confident.indices.push_back(i);
    }
  }
  return confident;
}

int TransmissionLossEstimate::num_defined() const {
  int n = 0;
  for (int c : support_count) {
    if (c > 0) ++n;
  }
  return n;
}

TransmissionLossEstimate estimate_gamma(const ConfidentSet& confident,
                                        const std::vector<double>& energies,
                                        const std::vector<double>& ranges_hat,
                                        const AdaptConfig& cfg, const RangeGrid& grid) {
  if (energies.size() != ranges_hat.size()) {
    throw std::invalid_argument("estimate_gamma: energies/ranges length mismatch");
  }
  const int classes = grid.num_classes();
  TransmissionLossEstimate gamma;
  gamma.mean_energy.assign(classes, 0.0);
  gamma.sigma_energy.assign(classes, 0.0);
  gamma.support_count.assign(classes, 0);
  for (int k = 0; k < classes; ++k) {
    const double center = grid.bin_range_m(k);
    double sum = 0.0, sum_sq = 0.0;
    int count = 0;
    for (std::size_t i : confident.indices) {
      if (std::abs(center - ranges_hat[i]) <= cfg.delta_m) {
        sum += energies[i];
        sum_sq += energies[i] * energies[i];
        ++count;
      }
    }
    gamma.support_count[k] = count;
    if (count > 0) {
      const double mean = sum / count;
      gamma.mean_energy[k] = mean;
      double variance = 0.0;
      if (count > 1) {
        variance = std::max(0.0, (sum_sq - count * mean * mean) / (count - 1));
      }
      gamma.sigma_energy[k] = std::max(std::sqrt(variance), 0.1 * std::abs(mean));
    }
  }
  return gamma;
}

Pmf energy_pseudo_label(const Pmf& prediction, double energy,
                        const TransmissionLossEstimate& gamma, const AdaptConfig& cfg,
                        const RangeGrid& grid) {
  const int classes = grid.num_classes();
  if (static_cast<int>(prediction.size()) != classes) {
    throw std::invalid_argument("energy_pseudo_label: pmf/grid size mismatch");
  }
  std::vector<int> peaks = find_peaks(prediction);
  std::sort(peaks.begin(), peaks.end());  // ascending bin for deterministic ties

  int best_bin = -1;
  double best_mismatch = std::numeric_limits<double>::infinity();
  for (int k : peaks) {
    if (!gamma.defined(k)) continue;
    const double mismatch = std::abs(energy - gamma.mean_energy[k]);
    if (mismatch < best_mismatch) {
      best_mismatch = mismatch;
      best_bin = k;
    }
  }
  if (best_bin < 0) best_bin = argmax_index(prediction);  // declared fallback
  return soften(best_bin, LabelConfig{cfg.sigma_label}, classes);
}

namespace {

Pmf gaussian_energy_posterior(double energy, const TransmissionLossEstimate& gamma,
                              const std::function<double(int)>& sigma_of_bin,
                              const RangeGrid& grid) {
  const int classes = grid.num_classes();
  if (static_cast<int>(gamma.mean_energy.size()) != classes) {
    throw std::invalid_argument("energy_posterior: gamma/grid size mismatch");
  }
  if (gamma.num_defined() == 0) {
    throw std::invalid_argument("energy_posterior: transmission loss undefined everywhere");
  }
  Pmf posterior(classes, 0.0);
  double sum = 0.0;
  for (int k = 0; k < classes; ++k) {
    if (!gamma.defined(k)) continue;
    const double sigma = std::max(sigma_of_bin(k), kTiny);
    const double z = (energy - gamma.mean_energy[k]) / sigma;
    posterior[k] = std::exp(-0.5 * z * z);
    sum += posterior[k];
  }
  if (sum <= 0.0) {
    // Underflowed likelihood on every defined bin: fall back to uniform there.
    for (int k = 0; k < classes; ++k) {
      if (gamma.defined(k)) posterior[k] = 1.0;
      sum += posterior[k];
    }
  }
  for (double& p : posterior) p /= sum;
  return posterior;
}

}  // namespace

Pmf energy_posterior(double energy, const TransmissionLossEstimate& gamma, double sigma_s,
                     const RangeGrid& grid) {
  if (sigma_s <= 0.0) throw std::invalid_argument("energy_posterior: sigma_s must be positive");
  return gaussian_energy_posterior(energy, gamma, [&](int) { return sigma_s; }, grid);
}

Pmf energy_posterior_auto(double energy, const TransmissionLossEstimate& gamma,
                          const RangeGrid& grid) {
  return gaussian_energy_posterior(energy, gamma,
                                   [&](int k) { return gamma.sigma_energy[k]; }, grid);
}

Pmf fuse_posteriors(const Pmf& p_scm, const Pmf& p_energy) {
  if (p_scm.size() != p_energy.size()) {
    throw std::invalid_argument("fuse_posteriors: size mismatch");
  }
  Pmf fused(p_scm.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < fused.size(); ++k) {
    fused[k] = p_scm[k] * p_energy[k];
    sum += fused[k];
  }
  if (sum <= 0.0) {
    throw std::runtime_error("fuse_posteriors: incompatible posteriors (zero product)");
  }
  for (double& p : fused) p /= sum;
  return fused;
}

// --- Adaptation loops ----------------------------------------------------------

namespace {

/// One full-batch gradient pass, chunked: a single forward keeps every
/// chunk's activations and outputs, so losses that couple the samples (the
/// SHOT diversity term) can inspect all outputs before the backward phase.
class BatchPass {
 public:
  static constexpr std::size_t kChunk = 128;

  BatchPass(const NetworkParams& params, const std::vector<ScmFeature>& features)
      : params_(params), classes_(static_cast<std::size_t>(params.arch.num_classes)) {
    std::vector<std::size_t> chunk;
    for (std::size_t start = 0; start < features.size(); start += kChunk) {
      const std::size_t stop = std::min(features.size(), start + kChunk);
      chunk.resize(stop - start);
      std::iota(chunk.begin(), chunk.end(), start);
      ForwardCache cache;
      const Tensor logits = network_logits(params, batch_inputs(features, chunk), &cache);
      chunk_probs_.push_back(softmax_rows(logits));
      caches_.push_back(std::move(cache));
    }
  }

  std::span<const double> output(std::size_t i) const {
    return {chunk_probs_[i / kChunk].data.data() + (i % kChunk) * classes_, classes_};
  }

  std::size_t size() const {
    std::size_t n = 0;
    for (const Tensor& probs : chunk_probs_) n += probs.dim(0);
    return n;
  }

  /// fill(i, probs_row, grad_probs_row) -> per-sample loss contribution.
  double backward(const std::function<double(std::size_t, std::span<const double>,
                                             std::span<double>)>& fill,
                  NetworkGrads* grads) {
    double loss = 0.0;
    std::vector<double> grad_probs(classes_);
    for (std::size_t c = 0; c < caches_.size(); ++c) {
      const Tensor& probs = chunk_probs_[c];
      const std::size_t chunk_size = probs.dim(0);
      Tensor grad_logits({chunk_size, classes_});
      for (std::size_t b = 0; b < chunk_size; ++b) {
        std::span<const double> prob_row(probs.data.data() + b * classes_, classes_);
        std::fill(grad_probs.begin(), grad_probs.end(), 0.0);
        loss += fill(c * kChunk + b, prob_row, grad_probs);
        softmax_backward_row(
            prob_row, grad_probs,
            std::span<double>(grad_logits.data.data() + b * classes_, classes_));
      }
      network_backward(params_, caches_[c], grad_logits, grads);
    }
    return loss;
  }

 private:
  const NetworkParams& params_;
  std::size_t classes_;
  std::vector<ForwardCache> caches_;
  std::vector<Tensor> chunk_probs_;
};

NetworkParams run_adaptation(const NetworkParams& initial, int num_steps, double mu_da,
                             const std::function<double(const NetworkParams&,
                                                        NetworkGrads*)>& loss_and_grad,
                             std::vector<double>* step_losses) {
  NetworkParams params = initial;
  params.classifier_frozen = true;
  AdamConfig adam_cfg;
  adam_cfg.learning_rate = mu_da;
  AdamState adam = AdamState::init(params.tensors(false), adam_cfg);
  for (int step = 0; step < num_steps; ++step) {
    NetworkGrads grads = NetworkGrads::zeros_like(params);
    const double loss = loss_and_grad(params, &grads);
    if (!std::isfinite(loss)) {
      throw std::runtime_error("adaptation: non-finite loss at step " + std::to_string(step));
    }
    if (step_losses != nullptr) step_losses->push_back(loss);
    adam_step(params.trainable_tensors(false), grads.tensors(false), adam);
  }
  return params;
}

std::vector<int> argmax_bins(const std::vector<Pmf>& predictions) {
  std::vector<int> bins;
  bins.reserve(predictions.size());
  for (const Pmf& p : predictions) bins.push_back(argmax_index(p));
  return bins;
}

void fill_report(AdaptReport* report, const std::vector<Pmf>& before,
                 const std::vector<Pmf>& after, const ConfidentSet& confident) {
  if (report == nullptr) return;
  report->confident_count = confident.indices.size();
  report->bin_before = argmax_bins(before);
  report->bin_after = argmax_bins(after);
  report->confident.assign(before.size(), false);
  for (std::size_t i : confident.indices) report->confident[i] = true;
}

}  // namespace

NetworkParams shot_adapt(const NetworkParams& params,
                         const std::vector<ScmFeature>& test_features,
                         const AdaptConfig& cfg, AdaptReport* report) {
  const std::vector<Pmf> pre_predictions = predict_all(params, test_features);
  const ConfidentSet confident = select_confident(pre_predictions, cfg);
  if (confident.indices.empty()) {
    throw std::runtime_error(
        "shot_adapt: empty self-supervising set; relax peak_dominance or provide more data");
  }
  const std::size_t num_samples = test_features.size();
  const int classes = params.arch.num_classes;

  // Pseudo-labels fixed once from the pre-adaptation outputs.
  std::vector<Pmf> pseudo(num_samples);
  for (std::size_t i : confident.indices) {
    pseudo[i] = soften(argmax_index(pre_predictions[i]), LabelConfig{cfg.sigma_label}, classes);
  }
  const double jsd_weight = cfg.beta / static_cast<double>(confident.indices.size());

  auto loss_and_grad = [&](const NetworkParams& p, NetworkGrads* grads) {
    BatchPass pass(p, test_features);

    // Mean output over the full test set drives the diversity term.
    Pmf mean_output(classes, 0.0);
    for (std::size_t i = 0; i < num_samples; ++i) {
      const auto row = pass.output(i);
      for (int k = 0; k < classes; ++k) mean_output[k] += row[k];
    }
    for (double& v : mean_output) v /= static_cast<double>(num_samples);

    std::vector<double> entropy_grad(classes);
    for (int k = 0; k < classes; ++k) {
      // d(-H(mean))/d(mean_k), spread over samples by the 1/N of the mean.
      entropy_grad[k] = (std::log(std::max(mean_output[k], kTiny)) + 1.0) /
                        static_cast<double>(num_samples);
    }

    double jsd_sum = 0.0;
    pass.backward(
        [&](std::size_t i, std::span<const double> prob_row, std::span<double> grad_probs) {
          for (int k = 0; k < classes; ++k) grad_probs[k] = entropy_grad[k];
          if (confident.contains(i)) {
            jsd_grad_q(pseudo[i], prob_row, jsd_weight, grad_probs);
            Pmf prob_vec(prob_row.begin(), prob_row.end());
            jsd_sum += jsd(pseudo[i], prob_vec);
          }
          return 0.0;
        },
        grads);
    return -entropy(mean_output) + jsd_weight * jsd_sum;
  };

  std::vector<double> losses;
  NetworkParams adapted =
      run_adaptation(params, cfg.num_steps, cfg.mu_da, loss_and_grad, &losses);
  if (report != nullptr) {
    report->step_loss = std::move(losses);
    fill_report(report, pre_predictions, predict_all(adapted, test_features), confident);
  }
  return adapted;
}

NetworkParams jsea_adapt(const NetworkParams& params,
                         const std::vector<ScmFeature>& test_features,
                         const AdaptConfig& cfg, const RangeGrid& grid,
                         AdaptReport* report) {
  const std::vector<Pmf> pre_predictions = predict_all(params, test_features);
  const ConfidentSet confident = select_confident(pre_predictions, cfg);
  if (confident.indices.empty()) {
    throw std::runtime_error(
        "jsea_adapt: empty self-supervising set, transmission loss undefined everywhere; "
        "relax peak_dominance or provide more data");
  }
  const std::size_t num_samples = test_features.size();
  const int classes = params.arch.num_classes;

  std::vector<double> energies(num_samples), ranges_hat(num_samples);
  for (std::size_t i = 0; i < num_samples; ++i) {
    energies[i] = test_features[i].energy;
    ranges_hat[i] = estimate_range(pre_predictions[i], grid);
  }
  const TransmissionLossEstimate gamma =
      estimate_gamma(confident, energies, ranges_hat, cfg, grid);

  // Pseudo-labels computed once: confident samples keep their own argmax,
  // the rest take the energy-matched peak.
  std::vector<Pmf> pseudo(num_samples);
  for (std::size_t i = 0; i < num_samples; ++i) {
    if (confident.contains(i)) {
      pseudo[i] =
          soften(argmax_index(pre_predictions[i]), LabelConfig{cfg.sigma_label}, classes);
    } else {
      pseudo[i] = energy_pseudo_label(pre_predictions[i], energies[i], gamma, cfg, grid);
    }
  }

  auto loss_and_grad = [&](const NetworkParams& p, NetworkGrads* grads) {
    BatchPass pass(p, test_features);
    return pass.backward(
        [&](std::size_t i, std::span<const double> prob_row, std::span<double> grad_probs) {
          jsd_grad_q(pseudo[i], prob_row, 1.0, grad_probs);
          Pmf prob_vec(prob_row.begin(), prob_row.end());
          return jsd(pseudo[i], prob_vec);
        },
        grads);
  };

  std::vector<double> losses;
  NetworkParams adapted =
      run_adaptation(params, cfg.num_steps, cfg.mu_da, loss_and_grad, &losses);
  if (report != nullptr) {
    report->step_loss = std::move(losses);
    fill_report(report, pre_predictions, predict_all(adapted, test_features), confident);
  }
  return adapted;
}

}  // namespace uwrange
