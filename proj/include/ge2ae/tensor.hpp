#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ge2ae {

std::string shape_str(const std::vector<int>& shape);

// Dense row-major real tensor. All math runs in double precision; training
// and tests share the same representation so checkpoints are bit-exact.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;
  bool requires_grad = false;

  Tensor() = default;
  explicit Tensor(std::vector<int> s);
  Tensor(std::vector<int> s, std::vector<double> d);

  static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
  static Tensor full(std::vector<int> s, double v);
  static Tensor ones(std::vector<int> s) { return full(std::move(s), 1.0); }
  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  std::size_t numel() const { return data.size(); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
  bool is_scalar() const { return data.size() == 1; }
  double scalar_value() const;
  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  // Flat index helpers for the common ranks.
  double& at2(int i, int j) { return data[static_cast<std::size_t>(i) * shape[1] + j]; }
  double at2(int i, int j) const { return data[static_cast<std::size_t>(i) * shape[1] + j]; }
  double& at3(int i, int j, int k) {
    return data[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k];
  }
  double at3(int i, int j, int k) const {
    return data[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k];
  }
};

// Complex companion to Tensor: separate real/imaginary planes, same layout.
struct ComplexTensor {
  std::vector<int> shape;
  std::vector<double> re, im;

  ComplexTensor() = default;
  explicit ComplexTensor(std::vector<int> s);
  ComplexTensor(std::vector<int> s, std::vector<double> r, std::vector<double> i);

  std::size_t numel() const { return re.size(); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

  Tensor real_part() const;
  Tensor imag_part() const;
};

std::size_t checked_numel(const std::vector<int>& shape);

}  // namespace ge2ae
