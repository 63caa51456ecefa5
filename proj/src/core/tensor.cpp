#include "voxtr/core/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace voxtr {

long shape_numel(const Shape& shape) {
  long n = 1;
  for (long d : shape) {
    if (d < 0) throw std::invalid_argument("negative dimension in shape " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (static_cast<long>(data_.size()) != shape_numel(shape_)) {
    throw std::invalid_argument("tensor data size " + std::to_string(data_.size()) +
                                " does not match shape " + shape_str(shape_));
  }
}

Tensor Tensor::full(Shape shape, double value) {
  Tensor t(std::move(shape));
  t.fill(value);
  return t;
}

double& Tensor::at(std::initializer_list<long> idx) {
  long flat = 0;
  size_t k = 0;
  for (long i : idx) {
    flat = flat * shape_[k] + i;
    ++k;
  }
  return data_[static_cast<size_t>(flat)];
}

double Tensor::at(std::initializer_list<long> idx) const {
  return const_cast<Tensor*>(this)->at(idx);
}

Tensor Tensor::reshaped(Shape new_shape) const {
  if (shape_numel(new_shape) != numel()) {
    throw std::invalid_argument("reshape from " + shape_str(shape_) + " to " + shape_str(new_shape));
  }
  Tensor t;
  t.shape_ = std::move(new_shape);
  t.data_ = data_;
  return t;
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace voxtr
