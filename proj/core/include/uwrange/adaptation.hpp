#pragma once

#include <optional>
#include <vector>

#include "uwrange/features.hpp"
#include "uwrange/labels.hpp"
#include "uwrange/localizer.hpp"

namespace uwrange {

/// Source-free adaptation hyperparameters.  sigma_s absent selects the
/// data-driven per-bin likelihood scale (windowed energy std, floored at 10%
/// of the window mean).
struct AdaptConfig {
  double mu_da = 5e-6;              // adaptation learning rate
  double beta = 1.0;                // SHOT pseudo-label weight
  double delta_m = 500.0;           // transmission-loss window half-width
  std::optional<double> sigma_s;    // energy-likelihood std; absent = auto
  double peak_dominance = 10.0;     // single-significant-peak ratio
  int num_steps = 100;              // full-batch gradient steps
  double sigma_label = 5.0;         // pseudo-label softening, in bins
};

/// Strict local maxima of a PMF, sorted by descending probability (ties by
/// ascending index).  Plateaus produce no peak; a 1-bin PMF is its own peak.
std::vector<int> find_peaks(const Pmf& pmf);

/// Indices of the self-supervising subset: exactly one peak, or a largest
/// peak more than peak_dominance times the runner-up.
struct ConfidentSet {
  std::vector<std::size_t> indices;

  bool contains(std::size_t i) const;
};

ConfidentSet select_confident(const std::vector<Pmf>& predictions, const AdaptConfig& cfg);

/// Piecewise-constant received-energy curve over range bins, estimated from
/// confident samples within +-delta of each bin.  Bins with no support are
/// undefined, never silently zero.
struct TransmissionLossEstimate {
  std::vector<double> mean_energy;   // per bin; meaningful only where defined
  std::vector<double> sigma_energy;  // windowed std, floored at 10% of the mean
  std::vector<int> support_count;    // |S_delta(d_k)|

  bool defined(int bin) const { return support_count[bin] > 0; }
  int num_defined() const;
};

/// energies and ranges_hat are full per-sample lists; only indices in the
/// confident set contribute.  ranges_hat must come from pre-adaptation
/// predictions decoded with estimate_range.
TransmissionLossEstimate estimate_gamma(const ConfidentSet& confident,
                                        const std::vector<double>& energies,
                                        const std::vector<double>& ranges_hat,
                                        const AdaptConfig& cfg, const RangeGrid& grid);

/// Pseudo-label for an uncertain sample: among its peaks with defined
/// transmission loss, pick the one whose energy matches best and soften it.
/// Falls back to the softened argmax when no peak is usable.
Pmf energy_pseudo_label(const Pmf& prediction, double energy,
                        const TransmissionLossEstimate& gamma, const AdaptConfig& cfg,
                        const RangeGrid& grid);

/// Gaussian energy likelihood normalized over defined bins (uniform prior);
/// undefined bins get probability zero.  Throws when nothing is defined.
Pmf energy_posterior(double energy, const TransmissionLossEstimate& gamma, double sigma_s,
                     const RangeGrid& grid);

/// energy_posterior with the per-bin data-driven sigma.
Pmf energy_posterior_auto(double energy, const TransmissionLossEstimate& gamma,
                          const RangeGrid& grid);

/// Elementwise product of two posteriors, renormalized; the Bayesian-fusion
/// diagnostic path.  Throws when the product vanishes everywhere.
Pmf fuse_posteriors(const Pmf& p_scm, const Pmf& p_energy);

/// Per-run adaptation record: full-batch loss trace plus before/after
/// predicted bins for every test sample.
struct AdaptReport {
  std::vector<double> step_loss;
  std::size_t confident_count = 0;
  std::vector<int> bin_before;
  std::vector<int> bin_after;
  std::vector<bool> confident;
};

/// SHOT: freezes the classifier, fine-tunes the feature extractor with
///   L = -H(mean output) + beta/|S| * sum_{i in S} JSD(pseudo_i, output_i),
/// pseudo-labels fixed from pre-adaptation outputs.  Throws when the
/// confident set is empty.
NetworkParams shot_adapt(const NetworkParams& params,
                         const std::vector<ScmFeature>& test_features,
                         const AdaptConfig& cfg, AdaptReport* report = nullptr);

/// JSEA: pseudo-labels from the confident set (softened argmax) and from the
/// energy match (energy_pseudo_label) for the rest; minimizes
///   L = sum_i JSD(pseudo_i, output_i)
/// over the feature extractor with the classifier frozen.
NetworkParams jsea_adapt(const NetworkParams& params,
                         const std::vector<ScmFeature>& test_features,
                         const AdaptConfig& cfg, const RangeGrid& grid,
                         AdaptReport* report = nullptr);

}  // namespace uwrange
