// Dense row-major N-dimensional array of reals.
#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "mdgru/error.hpp"
#include "mdgru/scalar.hpp"

namespace mdgru {

class Tensor {
 public:
  Tensor() = default;

  // Zero-filled tensor of the given extents.
  explicit Tensor(std::vector<int64_t> shape);
  Tensor(std::vector<int64_t> shape, std::vector<real> values);

  static Tensor zeros(std::vector<int64_t> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int64_t> shape, real value);
  static Tensor scalar(real value) { return Tensor({1}, {value}); }

  const std::vector<int64_t>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int64_t extent(int axis) const { return shape_[static_cast<size_t>(axis)]; }
  int64_t size() const { return static_cast<int64_t>(v_.size()); }
  bool empty() const { return v_.empty(); }

  real* data() { return v_.data(); }
  const real* data() const { return v_.data(); }
  std::vector<real>& vec() { return v_; }
  const std::vector<real>& vec() const { return v_; }

  real& operator[](int64_t i) { return v_[static_cast<size_t>(i)]; }
  real operator[](int64_t i) const { return v_[static_cast<size_t>(i)]; }

  // Multi-index access; bounds-checked, intended for tests and small code paths.
  real& at(std::initializer_list<int64_t> idx);
  real at(std::initializer_list<int64_t> idx) const;

  int64_t flat_index(std::span<const int64_t> idx) const;

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool all_finite() const;

  void fill(real v);

  std::string shape_str() const;

  static int64_t shape_product(std::span<const int64_t> shape);

 private:
  std::vector<int64_t> shape_;
  std::vector<real> v_;
};

// Largest absolute elementwise difference; shapes must match.
real max_abs_diff(const Tensor& a, const Tensor& b);

std::string shape_to_string(std::span<const int64_t> shape);

}  // namespace mdgru
