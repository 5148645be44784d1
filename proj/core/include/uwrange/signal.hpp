#pragma once

#include <Eigen/Dense>
#include <string>

#include "uwrange/ocean.hpp"
#include "uwrange/rng.hpp"

namespace uwrange {

/// Frequency-domain array data: one column per snapshot, one row per
/// hydrophone, holding the complex Fourier coefficient at the source
/// frequency.
struct SnapshotMatrix {
  Eigen::MatrixXcd coefficients;  // L x P
  double frequency_hz = 0.0;

  Eigen::Index num_elements() const { return coefficients.rows(); }
  Eigen::Index num_snapshots() const { return coefficients.cols(); }
};

/// Time-domain segmentation used by the reference pipeline: 3 s of signal,
/// 1 s segments with 50% overlap (five segments), Kaiser-tapered.
struct SegmentationConfig {
  double total_duration_s = 3.0;
  double segment_duration_s = 1.0;
  double overlap_fraction = 0.5;
  double kaiser_beta = 9.24;
  double sample_rate_hz = 2000.0;

  int segment_samples() const;
  int hop_samples() const;
  int total_samples() const;
  int num_segments() const;
};

enum class NoiseKind { gaussian, file };

/// Noise model for add_noise.  `gaussian` draws iid circular complex samples;
/// `file` slices a recorded-noise file (UWAN format, see noise record I/O
/// below) so that real ocean records can stand in for the synthetic model.
struct NoiseSource {
  NoiseKind kind = NoiseKind::gaussian;
  std::string file_path;
};

/// Columns are e^{i theta_p} g with theta_p ~ U[0, 2pi) iid per snapshot.
SnapshotMatrix generate_snapshots(const Eigen::VectorXcd& greens, int num_snapshots,
                                  double frequency_hz, Rng& rng);

/// Adds noise at the requested average array SNR,
///   SNR[dB] = 10 log10( sum_l E_l / (L E_w) ),
/// with E_l the snapshot-averaged per-element signal energy and E_w the
/// per-entry noise power.  snr_db = +infinity returns the input unchanged.
SnapshotMatrix add_noise(const SnapshotMatrix& snapshots, double snr_db,
                         const NoiseSource& noise, Rng& rng);

/// Real sensor time series: x_l(t) = Re{ g_l e^{i(2 pi f t + theta)} } with a
/// single random phase per realization, sampled at cfg.sample_rate_hz for
/// cfg.total_duration_s.  Requires sample_rate > 2f.
Eigen::MatrixXd synthesize_time_series(const Environment& env, const ModeSet& modes,
                                       double range_m, const SegmentationConfig& cfg,
                                       Rng& rng);

/// Kaiser-windowed single-bin DFT of each overlapping segment at the bin
/// nearest frequency_hz; output is L x P.
SnapshotMatrix extract_fourier_coefficients(const Eigen::MatrixXd& time_series,
                                            double frequency_hz,
                                            const SegmentationConfig& cfg);

// --- Noise record file (UWAN) -----------------------------------------------
// Little-endian binary: magic "UWAN", u32 version = 1, u32 channel count,
// u64 complex samples per channel, then f32 (re, im) pairs channel-major.

struct NoiseRecord {
  std::uint32_t channels = 0;
  std::uint64_t samples_per_channel = 0;
  std::vector<std::complex<double>> data;  // channel-major, channels * samples entries
};

NoiseRecord load_noise_record(const std::string& path);
void save_noise_record(const std::string& path, const NoiseRecord& record);

}  // namespace uwrange
