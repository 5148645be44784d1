#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <vector>

namespace uwrange {

/// Dense row-major tensor of 64-bit floats.  Shapes are plain dim lists; all
/// layer ops below interpret them positionally ([B,C,H,W], [B,N], ...).
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims) : shape(std::move(dims)) {
    data.assign(numel_of(shape), 0.0);
  }

  static std::size_t numel_of(const std::vector<std::size_t>& dims) {
    std::size_t n = 1;
    for (std::size_t d : dims) n *= d;
    return n;
  }

  static Tensor zeros(std::vector<std::size_t> dims) { return Tensor(std::move(dims)); }

  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape); }

  std::size_t numel() const { return data.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }

  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }

  bool all_finite() const {
    for (double v : data) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  void fill(double value) { data.assign(data.size(), value); }

  Tensor& operator+=(const Tensor& other) {
    if (!same_shape(other)) throw std::invalid_argument("tensor: shape mismatch in +=");
    for (std::size_t i = 0; i < data.size(); ++i) data[i] += other.data[i];
    return *this;
  }

  Tensor& operator*=(double s) {
    for (double& v : data) v *= s;
    return *this;
  }
};

}  // namespace uwrange
