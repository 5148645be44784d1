#pragma once

#include <vector>

namespace uwrange {

/// Probability mass function over range bins (labels and predictions).
using Pmf = std::vector<double>;

/// True when entries are nonnegative and sum to 1 within tol.
bool is_valid_pmf(const Pmf& pmf, double tol = 1e-9);

/// Argmax with ties broken toward the smaller index.
int argmax_index(const Pmf& pmf);

/// Uniform quantization of the range interval [d_min, d_max] into
/// num_classes() bins of bin_width meters.
struct RangeGrid {
  double d_min_m = 900.0;
  double d_max_m = 9000.0;
  double bin_width_m = 100.0;

  int num_classes() const;
  /// Representative range of bin k, as used by estimate_range.
  double bin_range_m(int k) const { return d_min_m + bin_width_m * k; }
};

struct LabelConfig {
  double sigma = 5.0;  // label-softening scale, in bins
};

/// floor((d - d_min)/bin_width + 0.5); throws when d is outside [d_min, d_max].
int quantize_range(double range_m, const RangeGrid& grid);

/// Truncated-Laplace soft label: y_k proportional to exp(-|k - dq| / sigma).
Pmf soften(int quantized_bin, const LabelConfig& cfg, int num_classes);

/// bin_width * argmax(p) + d_min, ties toward the smaller index.
double estimate_range(const Pmf& pmf, const RangeGrid& grid);

}  // namespace uwrange
