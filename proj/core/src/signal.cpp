#include "uwrange/signal.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace uwrange {

namespace {
constexpr double kPi = std::numbers::pi;

double kaiser_window(double beta, int n, int length) {
  // w[n] = I0(beta sqrt(1 - (2n/(N-1) - 1)^2)) / I0(beta)
  const double x = 2.0 * static_cast<double>(n) / (length - 1) - 1.0;
  return std::cyl_bessel_i(0.0, beta * std::sqrt(1.0 - x * x)) /
         std::cyl_bessel_i(0.0, beta);
}
}  // namespace

int SegmentationConfig::segment_samples() const {
  return static_cast<int>(std::lround(segment_duration_s * sample_rate_hz));
}

int SegmentationConfig::hop_samples() const {
  return static_cast<int>(std::lround(segment_samples() * (1.0 - overlap_fraction)));
}

int SegmentationConfig::total_samples() const {
  return static_cast<int>(std::lround(total_duration_s * sample_rate_hz));
}

int SegmentationConfig::num_segments() const {
  const int seg = segment_samples();
  const int hop = hop_samples();
  if (seg <= 0 || hop <= 0 || total_samples() < seg) {
    throw std::invalid_argument("segmentation: degenerate segment/hop sizes");
  }
  return 1 + (total_samples() - seg) / hop;
}

SnapshotMatrix generate_snapshots(const Eigen::VectorXcd& greens, int num_snapshots,
                                  double frequency_hz, Rng& rng) {
  if (num_snapshots < 1) {
    throw std::invalid_argument("generate_snapshots: need at least one snapshot");
  }
  SnapshotMatrix out;
  out.frequency_hz = frequency_hz;
  out.coefficients.resize(greens.size(), num_snapshots);
  for (int p = 0; p < num_snapshots; ++p) {
    const std::complex<double> phase = std::polar(1.0, rng.uniform(0.0, 2.0 * kPi));
    out.coefficients.col(p) = phase * greens;
  }
  return out;
}

SnapshotMatrix add_noise(const SnapshotMatrix& snapshots, double snr_db,
                         const NoiseSource& noise, Rng& rng) {
  if (!snapshots.coefficients.allFinite()) {
    throw std::invalid_argument("add_noise: non-finite snapshot input");
  }
  if (std::isinf(snr_db) && snr_db > 0.0) {
    return snapshots;  // noise-free flag
  }
  const Eigen::Index num_elements = snapshots.num_elements();
  const Eigen::Index num_snaps = snapshots.num_snapshots();

  // Snapshot-averaged per-element energy E_l, then invert the SNR definition.
  double total_energy = 0.0;
  for (Eigen::Index l = 0; l < num_elements; ++l) {
    total_energy += snapshots.coefficients.row(l).squaredNorm() /
                    static_cast<double>(num_snaps);
  }
  const double noise_power =
      total_energy / (static_cast<double>(num_elements) * std::pow(10.0, snr_db / 10.0));

  SnapshotMatrix out = snapshots;
  if (noise.kind == NoiseKind::gaussian) {
    for (Eigen::Index p = 0; p < num_snaps; ++p) {
      for (Eigen::Index l = 0; l < num_elements; ++l) {
        out.coefficients(l, p) += rng.complex_normal(noise_power);
      }
    }
    return out;
  }

  // File-backed noise: slice L*P consecutive complex samples from the record
  // pool at a random offset and rescale the slice to the target power.
  const NoiseRecord record = load_noise_record(noise.file_path);
  const std::uint64_t needed =
      static_cast<std::uint64_t>(num_elements) * static_cast<std::uint64_t>(num_snaps);
  if (record.data.size() < needed) {
    throw std::runtime_error("add_noise: noise record too short (" +
                             std::to_string(record.data.size()) + " < " +
                             std::to_string(needed) + " complex samples)");
  }
  const std::size_t start = rng.index(record.data.size() - needed + 1);
  double slice_power = 0.0;
  for (std::uint64_t i = 0; i < needed; ++i) {
    slice_power += std::norm(record.data[start + i]);
  }
  slice_power /= static_cast<double>(needed);
  if (slice_power <= 0.0) {
    throw std::runtime_error("add_noise: noise record slice has zero power");
  }
  const double scale = std::sqrt(noise_power / slice_power);
  std::uint64_t i = 0;
  for (Eigen::Index p = 0; p < num_snaps; ++p) {
    for (Eigen::Index l = 0; l < num_elements; ++l) {
      out.coefficients(l, p) += scale * record.data[start + i++];
    }
  }
  return out;
}

Eigen::MatrixXd synthesize_time_series(const Environment& env, const ModeSet& modes,
                                       double range_m, const SegmentationConfig& cfg,
                                       Rng& rng) {
  if (cfg.sample_rate_hz <= 2.0 * env.frequency_hz) {
    throw std::invalid_argument("synthesize_time_series: sample rate below Nyquist");
  }
  const Eigen::VectorXcd greens = greens_vector(env, modes, range_m);
  const int total = cfg.total_samples();
  const double theta = rng.uniform(0.0, 2.0 * kPi);
  Eigen::MatrixXd series(greens.size(), total);
  for (int t = 0; t < total; ++t) {
    const double time_s = static_cast<double>(t) / cfg.sample_rate_hz;
    const std::complex<double> carrier =
        std::polar(1.0, 2.0 * kPi * env.frequency_hz * time_s + theta);
    for (Eigen::Index l = 0; l < greens.size(); ++l) {
      series(l, t) = (greens[l] * carrier).real();
    }
  }
  return series;
}

SnapshotMatrix extract_fourier_coefficients(const Eigen::MatrixXd& time_series,
                                            double frequency_hz,
                                            const SegmentationConfig& cfg) {
  const int seg = cfg.segment_samples();
  const int hop = cfg.hop_samples();
  const int num_segments = cfg.num_segments();
  if (time_series.cols() < seg + hop * (num_segments - 1)) {
    throw std::invalid_argument("extract_fourier_coefficients: time series too short");
  }

  std::vector<double> window(seg);
  for (int n = 0; n < seg; ++n) {
    window[n] = kaiser_window(cfg.kaiser_beta, n, seg);
  }
  const int bin = static_cast<int>(std::lround(frequency_hz * seg / cfg.sample_rate_hz));

  SnapshotMatrix out;
  out.frequency_hz = frequency_hz;
  out.coefficients.resize(time_series.rows(), num_segments);
  for (int p = 0; p < num_segments; ++p) {
    const int offset = p * hop;
    for (Eigen::Index l = 0; l < time_series.rows(); ++l) {
      std::complex<double> coeff = 0.0;
      for (int n = 0; n < seg; ++n) {
        const double angle = -2.0 * kPi * bin * n / static_cast<double>(seg);
        coeff += window[n] * time_series(l, offset + n) * std::polar(1.0, angle);
      }
      out.coefficients(l, p) = coeff;
    }
  }
  return out;
}

// --- UWAN noise record I/O ---------------------------------------------------

namespace {
constexpr char kNoiseMagic[4] = {'U', 'W', 'A', 'N'};

template <typename T>
void write_pod(std::ofstream& os, T value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& is) {
  T value{};
  is.read(reinterpret_cast<char*>(&value), sizeof(T));
  return value;
}
}  // namespace

NoiseRecord load_noise_record(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw std::runtime_error("load_noise_record: cannot open " + path);
  }
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kNoiseMagic, 4) != 0) {
    throw std::runtime_error("load_noise_record: bad magic in " + path);
  }
  const auto version = read_pod<std::uint32_t>(is);
  if (version != 1) {
    throw std::runtime_error("load_noise_record: unsupported version " +
                             std::to_string(version));
  }
  NoiseRecord record;
  record.channels = read_pod<std::uint32_t>(is);
  record.samples_per_channel = read_pod<std::uint64_t>(is);
  const std::uint64_t total = record.channels * record.samples_per_channel;
  record.data.resize(total);
  for (std::uint64_t i = 0; i < total; ++i) {
    const float re = read_pod<float>(is);
    const float im = read_pod<float>(is);
    record.data[i] = {static_cast<double>(re), static_cast<double>(im)};
  }
  if (!is) {
    throw std::runtime_error("load_noise_record: truncated file " + path);
  }
  return record;
}

void save_noise_record(const std::string& path, const NoiseRecord& record) {
  if (record.data.size() !=
      static_cast<std::size_t>(record.channels) * record.samples_per_channel) {
    throw std::invalid_argument("save_noise_record: data size mismatch");
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) {
    throw std::runtime_error("save_noise_record: cannot open " + path);
  }
  os.write(kNoiseMagic, 4);
  write_pod<std::uint32_t>(os, 1);
  write_pod<std::uint32_t>(os, record.channels);
  write_pod<std::uint64_t>(os, record.samples_per_channel);
  for (const auto& z : record.data) {
    write_pod<float>(os, static_cast<float>(z.real()));
    write_pod<float>(os, static_cast<float>(z.imag()));
  }
}

}  // namespace uwrange
