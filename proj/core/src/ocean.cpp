#include "uwrange/ocean.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace uwrange {

namespace {
constexpr double kPi = std::numbers::pi;

// Gradient pivot from the perturbation formula c(z) = c0(z) + dc/215 (z - 215).
constexpr double kPerturbPivot = 215.0;
}  // namespace

std::vector<SspSample> default_ssp() {
  // Smoothed SWellEx-96-style CTD profile: warm surface layer over a weak
  // thermocline, nearly iso-speed near the bottom.
  return {
      {0.0, 1521.95}, {5.0, 1521.6},  {10.0, 1520.5}, {15.0, 1518.0},
      {20.0, 1514.0}, {30.0, 1506.0}, {40.0, 1500.0}, {50.0, 1496.5},
      {60.0, 1494.0}, {75.0, 1491.5}, {100.0, 1488.5}, {125.0, 1486.9},
      {150.0, 1485.9}, {175.0, 1485.2}, {200.0, 1484.8}, {216.0, 1484.5},
  };
}

std::vector<double> default_array_depths() {
  // 21 elements from 94.125 m to 212.25 m.
  std::vector<double> depths(21);
  const double top = 94.125;
  const double bottom = 212.25;
  for (int i = 0; i < 21; ++i) {
    depths[i] = top + (bottom - top) * static_cast<double>(i) / 20.0;
  }
  return depths;
}

Environment default_environment() {
  Environment env;
  env.ssp_base = default_ssp();
  env.array_depths_m = default_array_depths();
  return env;
}

void validate(const Environment& env) {
  if (env.water_depth_m <= 0.0) {
    throw std::invalid_argument("environment: water depth must be positive");
  }
  if (env.ssp_base.size() < 2) {
    throw std::invalid_argument("environment: need at least 2 SSP samples");
  }
  if (env.ssp_base.front().depth_m != 0.0 ||
      env.ssp_base.back().depth_m != env.water_depth_m) {
    throw std::invalid_argument("environment: SSP must cover [0, water_depth]");
  }
  for (std::size_t i = 0; i < env.ssp_base.size(); ++i) {
    const auto& s = env.ssp_base[i];
    if (s.depth_m < 0.0 || s.depth_m > env.water_depth_m) {
      throw std::invalid_argument("environment: SSP depth outside water column");
    }
    if (i > 0 && s.depth_m <= env.ssp_base[i - 1].depth_m) {
      throw std::invalid_argument("environment: SSP depths must be strictly increasing");
    }
    if (s.speed_mps < 1400.0 || s.speed_mps > 1600.0) {
      throw std::invalid_argument("environment: SSP speed outside [1400, 1600] m/s");
    }
  }
  if (env.source_depth_m < 0.0 || env.source_depth_m > env.water_depth_m) {
    throw std::invalid_argument("environment: source depth outside water column");
  }
  if (env.frequency_hz <= 0.0) {
    throw std::invalid_argument("environment: frequency must be positive");
  }
  if (env.array_depths_m.size() < 2) {
    throw std::invalid_argument("environment: array needs at least 2 elements");
  }
  for (std::size_t i = 0; i < env.array_depths_m.size(); ++i) {
    const double z = env.array_depths_m[i];
    if (z < 0.0 || z > env.water_depth_m) {
      throw std::invalid_argument("environment: array depth outside water column");
    }
    if (i > 0 && z <= env.array_depths_m[i - 1]) {
      throw std::invalid_argument("environment: array depths must be strictly increasing");
    }
  }
}

double sound_speed_at(const Environment& env, double depth_m) {
  if (depth_m < 0.0) {
    throw std::invalid_argument("sound_speed_at: negative depth");
  }
  // Piecewise-linear interpolation of the base profile.
  const auto& ssp = env.ssp_base;
  double base;
  if (depth_m <= ssp.front().depth_m) {
    base = ssp.front().speed_mps;
  } else if (depth_m >= ssp.back().depth_m) {
    base = ssp.back().speed_mps;
  } else {
    std::size_t i = 1;
    while (ssp[i].depth_m < depth_m) ++i;
    const auto& a = ssp[i - 1];
    const auto& b = ssp[i];
    const double t = (depth_m - a.depth_m) / (b.depth_m - a.depth_m);
    base = a.speed_mps + t * (b.speed_mps - a.speed_mps);
  }
  return base + env.delta_c_mps / kPerturbPivot * (depth_m - kPerturbPivot);
}

std::vector<SspSample> effective_ssp(const Environment& env) {
  std::vector<SspSample> out = env.ssp_base;
  for (auto& s : out) {
    s.speed_mps += env.delta_c_mps / kPerturbPivot * (s.depth_m - kPerturbPivot);
  }
  return out;
}

Environment perturb_ssp(const Environment& env, double delta_c_mps) {
  validate(env);
  Environment out = env;
  out.delta_c_mps = env.delta_c_mps + delta_c_mps;
  return out;
}

double depth_averaged_speed(const Environment& env) {
  if (env.ssp_base.size() < 2) {
    throw std::invalid_argument("depth_averaged_speed: need at least 2 SSP samples");
  }
  const std::vector<SspSample> ssp = effective_ssp(env);
  double integral = 0.0;
  for (std::size_t i = 1; i < ssp.size(); ++i) {
    const double dz = ssp[i].depth_m - ssp[i - 1].depth_m;
    integral += 0.5 * (ssp[i].speed_mps + ssp[i - 1].speed_mps) * dz;
  }
  return integral / (ssp.back().depth_m - ssp.front().depth_m);
}

ModeSet compute_modes(const Environment& env) {
  validate(env);
  const double c_bar = depth_averaged_speed(env);
  const double depth = env.water_depth_m;
  ModeSet modes;
  modes.wavenumber_k = 2.0 * kPi * env.frequency_hz / c_bar;
  for (int m = 1;; ++m) {
    const double kz = (static_cast<double>(m) - 0.5) * kPi / depth;
    if (kz >= modes.wavenumber_k) break;
    modes.vertical_wavenumbers.push_back(kz);
    modes.horizontal_wavenumbers.push_back(
        std::sqrt(modes.wavenumber_k * modes.wavenumber_k - kz * kz));
  }
  if (modes.count() == 0) {
    throw std::runtime_error("compute_modes: no propagating mode at " +
                             std::to_string(env.frequency_hz) + " Hz");
  }
  return modes;
}

Eigen::VectorXcd greens_vector(const Environment& env, const ModeSet& modes, double range_m) {
  if (range_m < 100.0) {
    throw std::invalid_argument("greens_vector: range below 100 m far-field limit");
  }
  const std::size_t num_elements = env.array_depths_m.size();
  Eigen::VectorXcd field = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(num_elements));
  for (std::size_t m = 0; m < modes.count(); ++m) {
    const double kz = modes.vertical_wavenumbers[m];
    const double kr = modes.horizontal_wavenumbers[m];
    const double spread = std::sqrt(2.0 / (kPi * kr * range_m));
    const double source_term = std::sin(kz * env.source_depth_m);
    const std::complex<double> phase = std::polar(1.0, kr * range_m - kPi / 4.0);
    for (std::size_t l = 0; l < num_elements; ++l) {
      field[static_cast<Eigen::Index>(l)] +=
          source_term * std::sin(kz * env.array_depths_m[l]) * spread * phase;
    }
  }
  return field;
}

}  // namespace uwrange
