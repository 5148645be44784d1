#include "uwrange/labels.hpp"

#include <cmath>
#include <stdexcept>

namespace uwrange {

bool is_valid_pmf(const Pmf& pmf, double tol) {
  if (pmf.empty()) return false;
  double sum = 0.0;
  for (double p : pmf) {
    if (!(p >= 0.0) || !std::isfinite(p)) return false;
    sum += p;
  }
  return std::abs(sum - 1.0) <= tol;
}

int argmax_index(const Pmf& pmf) {
  if (pmf.empty()) {
    throw std::invalid_argument("argmax_index: empty pmf");
  }
  int best = 0;
  for (int k = 1; k < static_cast<int>(pmf.size()); ++k) {
    if (pmf[k] > pmf[best]) best = k;
  }
  return best;
}

int RangeGrid::num_classes() const {
  return static_cast<int>(std::lround((d_max_m - d_min_m) / bin_width_m)) + 1;
}

int quantize_range(double range_m, const RangeGrid& grid) {
  if (range_m < grid.d_min_m || range_m > grid.d_max_m) {
    throw std::invalid_argument("quantize_range: range outside grid");
  }
  const int bin =
      static_cast<int>(std::floor((range_m - grid.d_min_m) / grid.bin_width_m + 0.5));
  return bin < grid.num_classes() ? bin : grid.num_classes() - 1;
}

Pmf soften(int quantized_bin, const LabelConfig& cfg, int num_classes) {
  if (quantized_bin < 0 || quantized_bin >= num_classes) {
    throw std::invalid_argument("soften: bin outside [0, M)");
  }
  if (cfg.sigma <= 0.0) {
    throw std::invalid_argument("soften: sigma must be positive");
  }
  Pmf label(num_classes);
  double sum = 0.0;
  for (int k = 0; k < num_classes; ++k) {
    label[k] = std::exp(-std::abs(k - quantized_bin) / cfg.sigma);
    sum += label[k];
  }
  for (double& p : label) p /= sum;
  return label;
}

double estimate_range(const Pmf& pmf, const RangeGrid& grid) {
  if (!is_valid_pmf(pmf)) {
    throw std::invalid_argument("estimate_range: invalid pmf");
  }
  return grid.bin_range_m(argmax_index(pmf));
}

}  // namespace uwrange
