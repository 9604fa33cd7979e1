#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace vinrs {

/// Dense row-major tensor of doubles. The shape is a list of positive
/// dimension sizes and data.size() always equals the product of the shape.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;

  explicit Tensor(std::vector<int> s, double fill = 0.0) : shape(std::move(s)) {
    data.assign(static_cast<std::size_t>(count(shape)), fill);
  }

  Tensor(std::vector<int> s, std::vector<double> values)
      : shape(std::move(s)), data(std::move(values)) {
    if (static_cast<long long>(data.size()) != count(shape))
      throw std::invalid_argument("Tensor: data length does not match shape");
  }

  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  static long long count(const std::vector<int>& s) {
    long long n = 1;
    for (int d : s) {
      if (d <= 0) throw std::invalid_argument("Tensor: non-positive dimension");
      n *= d;
    }
    return n;
  }

  int numel() const { return static_cast<int>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

  double& operator[](int i) { return data[static_cast<std::size_t>(i)]; }
  double operator[](int i) const { return data[static_cast<std::size_t>(i)]; }

  /// Flat index for a [C,H,W] tensor.
  int idx3(int c, int i, int j) const {
    return (c * shape[1] + i) * shape[2] + j;
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  void fill(double v) { data.assign(data.size(), v); }

  std::string shape_str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (i) s += "x";
      s += std::to_string(shape[i]);
    }
    return s + "]";
  }
};

}  // namespace vinrs
