#include "ge2ae/tensor.hpp"

namespace ge2ae {

std::string shape_str(const std::vector<int>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

std::size_t checked_numel(const std::vector<int>& shape) {
  if (shape.empty()) throw std::invalid_argument("tensor shape must have rank >= 1");
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 1) throw std::invalid_argument("tensor dims must be >= 1, got " + shape_str(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)), data(checked_numel(shape), 0.0) {}

Tensor::Tensor(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
  if (checked_numel(shape) != data.size())
    throw std::invalid_argument("tensor data length " + std::to_string(data.size()) +
                                " does not match shape " + shape_str(shape));
}

Tensor Tensor::full(std::vector<int> s, double v) {
  Tensor t(std::move(s));
  for (auto& x : t.data) x = v;
  return t;
}

double Tensor::scalar_value() const {
  if (data.size() != 1) throw std::invalid_argument("expected scalar tensor, got " + shape_str(shape));
  return data[0];
}

ComplexTensor::ComplexTensor(std::vector<int> s)
    : shape(std::move(s)), re(checked_numel(shape), 0.0), im(re.size(), 0.0) {}

ComplexTensor::ComplexTensor(std::vector<int> s, std::vector<double> r, std::vector<double> i)
    : shape(std::move(s)), re(std::move(r)), im(std::move(i)) {
  const std::size_t n = checked_numel(shape);
  if (re.size() != n || im.size() != n)
    throw std::invalid_argument("complex tensor planes must both have length " + std::to_string(n));
}

Tensor ComplexTensor::real_part() const { return Tensor(shape, re); }
Tensor ComplexTensor::imag_part() const { return Tensor(shape, im); }

}  // namespace ge2ae
