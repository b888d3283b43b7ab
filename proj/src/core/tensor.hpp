#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace agman {

// Dense row-major tensor of doubles. Rank is small (0..4); shape [] is a scalar
// with one element.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<long> shape);
  Tensor(std::vector<long> shape, std::vector<double> data);

  static Tensor zeros(std::vector<long> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<long> shape, double v);
  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  long size() const { return static_cast<long>(data_.size()); }
  int ndim() const { return static_cast<int>(shape_.size()); }
  long dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  const std::vector<long>& shape() const { return shape_; }
  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](long i) { return data_[static_cast<size_t>(i)]; }
  double operator[](long i) const { return data_[static_cast<size_t>(i)]; }

  // [c,h,w] indexing
  double& at(long c, long h, long w) { return data_[static_cast<size_t>((c * shape_[1] + h) * shape_[2] + w)]; }
  double at(long c, long h, long w) const { return data_[static_cast<size_t>((c * shape_[1] + h) * shape_[2] + w)]; }
  // [r,c] indexing
  double& at(long r, long c) { return data_[static_cast<size_t>(r * shape_[1] + c)]; }
  double at(long r, long c) const { return data_[static_cast<size_t>(r * shape_[1] + c)]; }

  void fill(double v);
  bool all_finite() const;
  double item() const;  // single-element tensors only

  std::vector<double> to_vector() const { return data_; }
  static std::string shape_str(const std::vector<long>& shape);

 private:
  std::vector<long> shape_;
  std::vector<double> data_;
};

long shape_numel(const std::vector<long>& shape);

}  // namespace agman
