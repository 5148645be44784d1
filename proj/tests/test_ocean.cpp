#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "uwrange/ocean.hpp"

using namespace uwrange;

namespace {

Environment isovelocity_env(double depth, double speed, double frequency) {
  Environment env;
  env.water_depth_m = depth;
  env.ssp_base = {{0.0, speed}, {depth, speed}};
  env.source_depth_m = depth / 4.0;
  env.frequency_hz = frequency;
  env.array_depths_m = {depth * 0.4, depth * 0.8};
  return env;
}

}  // namespace

TEST_CASE("default environment is valid and matches the stated geometry") {
  const Environment env = default_environment();
  CHECK_NOTHROW(validate(env));
  CHECK(env.water_depth_m == 216.0);
  CHECK(env.source_depth_m == 54.0);
  CHECK(env.frequency_hz == 130.0);
  REQUIRE(env.array_depths_m.size() == 21);
  CHECK(env.array_depths_m.front() == doctest::Approx(94.125));
  CHECK(env.array_depths_m.back() == doctest::Approx(212.25));
  // equispaced
  const double spacing = env.array_depths_m[1] - env.array_depths_m[0];
  for (std::size_t i = 1; i < env.array_depths_m.size(); ++i) {
    CHECK(env.array_depths_m[i] - env.array_depths_m[i - 1] == doctest::Approx(spacing));
  }
}

TEST_CASE("environment invariants are enforced") {
  Environment env = default_environment();
  env.array_depths_m = {120.0, 110.0};
  CHECK_THROWS(validate(env));
  env = default_environment();
  env.ssp_base[3].speed_mps = 1399.0;
  CHECK_THROWS(validate(env));
  env = default_environment();
  env.source_depth_m = 300.0;
  CHECK_THROWS(validate(env));
  env = default_environment();
  env.ssp_base = {{0.0, 1500.0}};
  CHECK_THROWS(validate(env));
}

TEST_CASE("perturb_ssp: zero perturbation leaves the profile unchanged") {
  const Environment env = default_environment();
  const Environment same = perturb_ssp(env, 0.0);
  const auto base = effective_ssp(env);
  const auto perturbed = effective_ssp(same);
  for (std::size_t i = 0; i < base.size(); ++i) {
    CHECK(perturbed[i].speed_mps == base[i].speed_mps);
  }
}

TEST_CASE("perturb_ssp: gradient formula c(z) = c0(z) + dc/215 (z - 215)") {
  const Environment env = default_environment();
  const Environment perturbed = perturb_ssp(env, 1.0);
  // pivot point z = 215
  CHECK(sound_speed_at(perturbed, 215.0) == doctest::Approx(sound_speed_at(env, 215.0)));
  // z = 0 shifts down by exactly delta_c
  CHECK(sound_speed_at(perturbed, 0.0) ==
        doctest::Approx(sound_speed_at(env, 0.0) - 1.0).epsilon(1e-12));
  // direct evaluation at every stored sample
  const auto base = effective_ssp(env);
  const auto eff = effective_ssp(perturbed);
  for (std::size_t i = 0; i < base.size(); ++i) {
    CHECK(eff[i].speed_mps ==
          doctest::Approx(base[i].speed_mps + (1.0 / 215.0) * (base[i].depth_m - 215.0))
              .epsilon(1e-14));
  }
}

TEST_CASE("perturb_ssp: negating the perturbation restores the base profile exactly") {
  const Environment env = default_environment();
  const Environment round_trip = perturb_ssp(perturb_ssp(env, 1.3), -1.3);
  CHECK(round_trip.delta_c_mps == 0.0);
  const auto base = effective_ssp(env);
  const auto restored = effective_ssp(round_trip);
  for (std::size_t i = 0; i < base.size(); ++i) {
    CHECK(restored[i].speed_mps == base[i].speed_mps);  // bit-exact
  }
}

TEST_CASE("depth_averaged_speed: constant, linear and perturbed profiles") {
  // constant profile
  CHECK(depth_averaged_speed(isovelocity_env(216.0, 1500.0, 130.0)) ==
        doctest::Approx(1500.0).epsilon(1e-14));

  // linear profile: midpoint
  Environment linear = isovelocity_env(216.0, 1500.0, 130.0);
  linear.ssp_base = {{0.0, 1480.0}, {216.0, 1520.0}};
  CHECK(depth_averaged_speed(linear) == doctest::Approx(1500.0).epsilon(1e-14));

  // constant 1500 with dc = 1 over a 215 m column: mean of (z-215)/215 is -1/2
  Environment pivot = isovelocity_env(215.0, 1500.0, 130.0);
  const Environment perturbed = perturb_ssp(pivot, 1.0);
  CHECK(depth_averaged_speed(perturbed) == doctest::Approx(1499.5).epsilon(1e-12));
}

TEST_CASE("compute_modes: kD/pi = 1.2 yields exactly one propagating mode") {
  // k = 2 pi f / c, so kD/pi = 2 f D / c = 1.2 at f = 1.2 c / (2 D)
  const double depth = 216.0, speed = 1500.0;
  const double frequency = 1.2 * speed / (2.0 * depth);
  const ModeSet modes = compute_modes(isovelocity_env(depth, speed, frequency));
  CHECK(modes.count() == 1);
  // independent count oracle: floor(kD/pi + 1/2)
  const double k = 2.0 * std::numbers::pi * frequency / speed;
  CHECK(static_cast<std::size_t>(std::floor(k * depth / std::numbers::pi + 0.5)) ==
        modes.count());
}

TEST_CASE("compute_modes: monotone wavenumbers and the dispersion identity") {
  const ModeSet modes = compute_modes(default_environment());
  for (std::size_t m = 1; m < modes.count(); ++m) {
    CHECK(modes.vertical_wavenumbers[m] > modes.vertical_wavenumbers[m - 1]);
    CHECK(modes.horizontal_wavenumbers[m] < modes.horizontal_wavenumbers[m - 1]);
  }
  const double k2 = modes.wavenumber_k * modes.wavenumber_k;
  for (std::size_t m = 0; m < modes.count(); ++m) {
    const double kz = modes.vertical_wavenumbers[m];
    const double kr = modes.horizontal_wavenumbers[m];
    CHECK(std::abs(kz * kz + kr * kr - k2) / k2 < 1e-9);
    CHECK(kr > 0.0);
  }
}

TEST_CASE("compute_modes: default environment propagates 30 to 45 modes") {
  const Environment env = default_environment();
  const ModeSet modes = compute_modes(env);
  CHECK(modes.count() >= 30);
  CHECK(modes.count() <= 45);
  // direct computation from the depth-averaged speed
  const double c_bar = depth_averaged_speed(env);
  const double k = 2.0 * std::numbers::pi * env.frequency_hz / c_bar;
  const auto expected = static_cast<std::size_t>(
      std::floor(k * env.water_depth_m / std::numbers::pi + 0.5));
  CHECK(modes.count() == expected);
}

TEST_CASE("compute_modes: no propagating mode is an explicit error") {
  CHECK_THROWS(compute_modes(isovelocity_env(216.0, 1500.0, 1.0)));
}

TEST_CASE("mode orthogonality: distinct retained modes integrate to zero over depth") {
  const Environment env = default_environment();
  const ModeSet modes = compute_modes(env);
  const double depth = env.water_depth_m;
  const double diagonal = depth / 2.0;  // integral of sin^2 for these k_z

  // closed form of the cross integral with the mode set's actual k_z values
  auto cross_integral = [&](double a, double b) {
    return std::sin((a - b) * depth) / (2.0 * (a - b)) -
           std::sin((a + b) * depth) / (2.0 * (a + b));
  };
  for (std::size_t m = 0; m < modes.count(); ++m) {
    for (std::size_t n = m + 1; n < modes.count(); ++n) {
      const double integral =
          cross_integral(modes.vertical_wavenumbers[m], modes.vertical_wavenumbers[n]);
      CHECK(std::abs(integral) / diagonal < 1e-6);
    }
  }

  // quadrature spot check for a few pairs (trapezoid, 200k intervals)
  auto quadrature = [&](double a, double b) {
    const int n = 200000;
    double sum = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double z = depth * i / n;
      const double f = std::sin(a * z) * std::sin(b * z);
      sum += (i == 0 || i == n) ? 0.5 * f : f;
    }
    return sum * depth / n;
  };
  const auto& kz = modes.vertical_wavenumbers;
  CHECK(std::abs(quadrature(kz[0], kz[1])) / diagonal < 1e-5);
  CHECK(std::abs(quadrature(kz[0], kz.back())) / diagonal < 1e-5);
  CHECK(quadrature(kz[1], kz[1]) == doctest::Approx(diagonal).epsilon(1e-6));
}

TEST_CASE("greens_vector: single-mode cylindrical spreading gives the 1/2 amplitude ratio") {
  const double depth = 216.0, speed = 1500.0;
  const double frequency = 1.2 * speed / (2.0 * depth);
  Environment env = isovelocity_env(depth, speed, frequency);
  const ModeSet modes = compute_modes(env);
  REQUIRE(modes.count() == 1);

  const double d0 = 1000.0;
  const Eigen::VectorXcd g1 = greens_vector(env, modes, d0);
  const Eigen::VectorXcd g4 = greens_vector(env, modes, 4.0 * d0);
  for (Eigen::Index l = 0; l < g1.size(); ++l) {
    CHECK(std::abs(g4[l]) == doctest::Approx(0.5 * std::abs(g1[l])).epsilon(1e-12));
    // closed-form modulus
    const double kz = modes.vertical_wavenumbers[0];
    const double kr = modes.horizontal_wavenumbers[0];
    const double expected = std::abs(std::sin(kz * env.source_depth_m) *
                                     std::sin(kz * env.array_depths_m[l])) *
                            std::sqrt(2.0 / (std::numbers::pi * kr * d0));
    CHECK(std::abs(g1[l]) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("greens_vector: a modal node nulls the element response") {
  Environment env = isovelocity_env(100.0, 1500.0, 9.0);  // kD/pi = 1.2
  env.frequency_hz = 1.2 * 1500.0 / (2.0 * 100.0);
  // Manual single-mode set with k_z = pi / 100 so sin(k_z * 100) = 0.
  ModeSet modes;
  modes.wavenumber_k = 0.05;
  modes.vertical_wavenumbers = {std::numbers::pi / 100.0};
  modes.horizontal_wavenumbers = {
      std::sqrt(0.05 * 0.05 - modes.vertical_wavenumbers[0] * modes.vertical_wavenumbers[0])};
  env.array_depths_m = {50.0, 100.0};
  const Eigen::VectorXcd g = greens_vector(env, modes, 500.0);
  CHECK(std::abs(g[1]) < 1e-15);
  CHECK(std::abs(g[0]) > 0.0);
}

TEST_CASE("greens_vector: range below the far-field limit is rejected") {
  const Environment env = default_environment();
  const ModeSet modes = compute_modes(env);
  CHECK_THROWS(greens_vector(env, modes, 99.0));
  CHECK_NOTHROW(greens_vector(env, modes, 100.0));
}

TEST_CASE("greens_vector: continuity in range") {
  const Environment env = default_environment();
  const ModeSet modes = compute_modes(env);
  // The carrier phase alone moves by k_r * eps, so the complex difference is
  // bounded by the wavenumber (Lipschitz in range) and shrinks linearly with
  // eps; the magnitude envelope converges much faster.
  const double k = modes.wavenumber_k;
  for (double d : {900.0, 3000.0, 9000.0}) {
    const Eigen::VectorXcd a = greens_vector(env, modes, d);

    const double change_1e3 =
        (greens_vector(env, modes, d + 1e-3) - a).norm() / a.norm();
    const double change_1e4 =
        (greens_vector(env, modes, d + 1e-4) - a).norm() / a.norm();
    const double change_1e5 =
        (greens_vector(env, modes, d + 1e-5) - a).norm() / a.norm();
    CHECK(change_1e3 < 2.0 * k * 1e-3);
    CHECK(change_1e4 < 2.0 * k * 1e-4);
    CHECK(change_1e5 < 2.0 * k * 1e-5);
    // first-order vanishing: one decade of eps buys one decade of change
    CHECK(change_1e4 < 0.2 * change_1e3);
    CHECK(change_1e5 < 0.2 * change_1e4);
    // the 1e-4 relative threshold is reached once eps drops below ~1e-4/k
    CHECK(change_1e5 < 1e-4);
  }
}

TEST_CASE("greens_vector: window-averaged array energy decreases with range") {
  const Environment env = default_environment();
  const ModeSet modes = compute_modes(env);
  // 10 m sampling, 500 m smoothing windows over [900, 9000]
  std::vector<double> window_means;
  for (double window_start = 900.0; window_start + 500.0 <= 9000.0 + 1.0;
       window_start += 500.0) {
    double sum = 0.0;
    int count = 0;
    for (double d = window_start; d < window_start + 500.0; d += 10.0) {
      sum += greens_vector(env, modes, d).squaredNorm();
      ++count;
    }
    window_means.push_back(sum / count);
  }
  REQUIRE(window_means.size() >= 10);
  for (std::size_t w = 1; w < window_means.size(); ++w) {
    CHECK(window_means[w] < window_means[w - 1]);
  }
}

TEST_CASE("greens_vector is deterministic in its inputs") {
  const Environment env = default_environment();
  const ModeSet modes = compute_modes(env);
  const Eigen::VectorXcd a = greens_vector(env, modes, 4321.0);
  const Eigen::VectorXcd b = greens_vector(env, modes, 4321.0);
  CHECK(a == b);
}
