#include "uwrange/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

namespace uwrange {

namespace {

constexpr char kMagic[4] = {'U', 'W', 'A', 'R'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint8_t kDtypeF64 = 0;

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

void write_tensor(std::ofstream& os, const std::string& name, const Tensor& tensor) {
  write_pod<std::uint16_t>(os, static_cast<std::uint16_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_pod<std::uint8_t>(os, kDtypeF64);
  write_pod<std::uint8_t>(os, static_cast<std::uint8_t>(tensor.shape.size()));
  for (std::size_t d : tensor.shape) {
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(d));
  }
  os.write(reinterpret_cast<const char*>(tensor.data.data()),
           static_cast<std::streamsize>(tensor.data.size() * sizeof(double)));
}

Tensor vector_tensor(const std::vector<double>& values) {
  Tensor t({values.size()});
  t.data = values;
  return t;
}

}  // namespace

void save_checkpoint(const std::string& path, const NetworkParams& params,
                     const RangeGrid& grid) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path);

  std::vector<std::pair<std::string, Tensor>> entries;

  // Provenance echo: architecture, grid and flags as meta tensors.
  std::vector<double> arch_vec = {
      static_cast<double>(params.arch.input_size),
      static_cast<double>(params.arch.in_channels),
      static_cast<double>(params.arch.feature_dim),
      static_cast<double>(params.arch.num_classes),
      static_cast<double>(params.arch.conv_layers.size()),
  };
  for (const auto& [channels, kernel] : params.arch.conv_layers) {
    arch_vec.push_back(static_cast<double>(channels));
    arch_vec.push_back(static_cast<double>(kernel));
  }
  entries.emplace_back("meta.arch", vector_tensor(arch_vec));
  entries.emplace_back("meta.grid",
                       vector_tensor({grid.d_min_m, grid.d_max_m, grid.bin_width_m}));
  entries.emplace_back("meta.flags",
                       vector_tensor({params.classifier_frozen ? 1.0 : 0.0}));

  for (std::size_t i = 0; i < params.conv_kernels.size(); ++i) {
    const std::string stem = "conv" + std::to_string(i);
    entries.emplace_back(stem + ".kernel", params.conv_kernels[i]);
    entries.emplace_back(stem + ".bias", params.conv_biases[i]);
  }
  entries.emplace_back("feature.weight", params.feature_weight);
  entries.emplace_back("feature.bias", params.feature_bias);
  entries.emplace_back("classifier.weight", params.classifier_weight);

  os.write(kMagic, 4);
  write_pod<std::uint32_t>(os, kVersion);
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(entries.size()));
  for (const auto& [name, tensor] : entries) {
    write_tensor(os, name, tensor);
  }
  if (!os) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path);

  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("load_checkpoint: bad magic in " + path);
  }
  const auto version = read_pod<std::uint32_t>(is);
  if (version != kVersion) {
    throw std::runtime_error("load_checkpoint: unsupported version " +
                             std::to_string(version));
  }
  const auto count = read_pod<std::uint32_t>(is);
  std::map<std::string, Tensor> tensors;
  for (std::uint32_t t = 0; t < count; ++t) {
    const auto name_len = read_pod<std::uint16_t>(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const auto dtype = read_pod<std::uint8_t>(is);
    if (dtype != kDtypeF64) {
      throw std::runtime_error("load_checkpoint: unsupported dtype");
    }
    const auto ndim = read_pod<std::uint8_t>(is);
    std::vector<std::size_t> shape(ndim);
    for (auto& d : shape) d = read_pod<std::uint32_t>(is);
    Tensor tensor(shape);
    is.read(reinterpret_cast<char*>(tensor.data.data()),
            static_cast<std::streamsize>(tensor.data.size() * sizeof(double)));
    tensors.emplace(std::move(name), std::move(tensor));
  }
  if (!is) throw std::runtime_error("load_checkpoint: truncated file " + path);

  auto fetch = [&](const std::string& name) -> Tensor& {
    auto it = tensors.find(name);
    if (it == tensors.end()) {
      throw std::runtime_error("load_checkpoint: missing tensor " + name);
    }
    return it->second;
  };

  const Tensor& arch_vec = fetch("meta.arch");
  if (arch_vec.numel() < 5) throw std::runtime_error("load_checkpoint: bad meta.arch");
  Checkpoint out;
  ArchConfig arch;
  arch.input_size = static_cast<int>(arch_vec.data[0]);
  arch.in_channels = static_cast<int>(arch_vec.data[1]);
  arch.feature_dim = static_cast<int>(arch_vec.data[2]);
  arch.num_classes = static_cast<int>(arch_vec.data[3]);
  arch.conv_layers.clear();
  const int num_convs = static_cast<int>(arch_vec.data[4]);
  for (int i = 0; i < num_convs; ++i) {
    arch.conv_layers.emplace_back(static_cast<int>(arch_vec.data[5 + 2 * i]),
                                  static_cast<int>(arch_vec.data[6 + 2 * i]));
  }
  const Tensor& grid_vec = fetch("meta.grid");
  out.grid = {grid_vec.data[0], grid_vec.data[1], grid_vec.data[2]};

  out.params.arch = arch;
  out.params.classifier_frozen = fetch("meta.flags").data[0] != 0.0;
  for (int i = 0; i < num_convs; ++i) {
    const std::string stem = "conv" + std::to_string(i);
    out.params.conv_kernels.push_back(fetch(stem + ".kernel"));
    out.params.conv_biases.push_back(fetch(stem + ".bias"));
  }
  out.params.feature_weight = fetch("feature.weight");
  out.params.feature_bias = fetch("feature.bias");
  out.params.classifier_weight = fetch("classifier.weight");
  return out;
}

}  // namespace uwrange
