#pragma once

#include <Eigen/Dense>
#include <vector>

namespace uwrange {

struct SspSample {
  double depth_m = 0.0;
  double speed_mps = 0.0;
};

/// Shallow-water waveguide description.  The sound speed profile is stored as
/// the unperturbed base profile plus a constant-gradient perturbation
/// magnitude delta_c; the effective profile is
///   c(z) = c0(z) + delta_c/215 * (z - 215)
/// which keeps repeated perturbations exactly reversible.
struct Environment {
  double water_depth_m = 216.0;
  std::vector<SspSample> ssp_base;       // monotone in depth, covers [0, water_depth]
  double delta_c_mps = 0.0;              // applied SSP perturbation magnitude
  double source_depth_m = 54.0;
  double frequency_hz = 130.0;
  std::vector<double> array_depths_m;    // strictly increasing, length L >= 2
};

/// SWellEx-96-like downward-refracting profile for a 216 m water column.
std::vector<SspSample> default_ssp();

/// 21 equispaced hydrophone depths from 94.125 m to 212.25 m.
std::vector<double> default_array_depths();

/// Environment with all default fields populated.
Environment default_environment();

/// Throws std::invalid_argument when an Environment invariant is violated.
void validate(const Environment& env);

/// Effective sound speed at one of the stored profile depths.
double sound_speed_at(const Environment& env, double depth_m);

/// Effective profile (base plus perturbation) sampled at the base depths.
std::vector<SspSample> effective_ssp(const Environment& env);

/// Adds a constant-gradient perturbation of magnitude delta_c; all other
/// fields are unchanged.  delta_c may be negative, and perturbing by -delta_c
/// restores the base profile exactly.
Environment perturb_ssp(const Environment& env, double delta_c_mps);

/// Trapezoidal average of the effective profile over [0, water_depth].
double depth_averaged_speed(const Environment& env);

/// Propagating modes of an ideal isovelocity waveguide (pressure-release
/// surface, rigid bottom) at the depth-averaged speed.
struct ModeSet {
  double wavenumber_k = 0.0;                  // 2*pi*f / c_bar, rad/m
  std::vector<double> vertical_wavenumbers;   // k_z,m = (m - 1/2) pi / D
  std::vector<double> horizontal_wavenumbers; // k_r,m = sqrt(k^2 - k_z,m^2) > 0

  std::size_t count() const { return horizontal_wavenumbers.size(); }
};

/// Throws std::runtime_error when no mode propagates (frequency too low).
ModeSet compute_modes(const Environment& env);

/// Complex pressure at each array element for a source at the given range,
/// via the asymptotic modal sum
///   g_l(d) = sum_m sin(kz_m z_s) sin(kz_m z_l) sqrt(2/(pi kr_m d)) e^{i(kr_m d - pi/4)}.
/// Requires range_m >= 100 (far-field asymptotics).
Eigen::VectorXcd greens_vector(const Environment& env, const ModeSet& modes, double range_m);

}  // namespace uwrange
