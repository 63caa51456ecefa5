#ifndef VOXTR_CORE_TENSOR_HPP_
#define VOXTR_CORE_TENSOR_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace voxtr {

using Shape = std::vector<long>;

long shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major double tensor. The last axis runs fastest.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<size_t>(shape_numel(shape_)), 0.0);
  }
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value) { return full({1}, value); }

  long numel() const { return static_cast<long>(data_.size()); }
  int rank() const { return static_cast<int>(shape_.size()); }
  long dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  const Shape& shape() const { return shape_; }
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double& operator[](long i) { return data_[static_cast<size_t>(i)]; }
  double operator[](long i) const { return data_[static_cast<size_t>(i)]; }

  // Row-major multi-index access; bounds are the caller's responsibility.
  double& at(std::initializer_list<long> idx);
  double at(std::initializer_list<long> idx) const;

  Tensor reshaped(Shape new_shape) const;
  void fill(double value) { data_.assign(data_.size(), value); }
  bool all_finite() const;
  double item() const { return data_.at(0); }

 private:
  Shape shape_;
  std::vector<double> data_;
};

}  // namespace voxtr

#endif  // VOXTR_CORE_TENSOR_HPP_
