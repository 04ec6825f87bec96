#include "mdgru/tensor.hpp"

#include <cmath>
#include <sstream>

namespace mdgru {

int64_t Tensor::shape_product(std::span<const int64_t> shape) {
  int64_t n = 1;
  for (int64_t e : shape) {
    if (e <= 0) throw_shape("tensor extents must be positive, got " + shape_to_string(shape));
    n *= e;
  }
  return n;
}

Tensor::Tensor(std::vector<int64_t> shape) : shape_(std::move(shape)) {
  v_.assign(static_cast<size_t>(shape_product(shape_)), real(0));
}

Tensor::Tensor(std::vector<int64_t> shape, std::vector<real> values)
    : shape_(std::move(shape)), v_(std::move(values)) {
  if (shape_product(shape_) != static_cast<int64_t>(v_.size())) {
    throw_shape("tensor data length " + std::to_string(v_.size()) +
                " does not match shape " + shape_to_string(shape_));
  }
}

Tensor Tensor::full(std::vector<int64_t> shape, real value) {
  Tensor t(std::move(shape));
  t.fill(value);
  return t;
}

int64_t Tensor::flat_index(std::span<const int64_t> idx) const {
  if (idx.size() != shape_.size()) {
    throw_index("index rank " + std::to_string(idx.size()) + " vs tensor rank " +
                std::to_string(shape_.size()));
  }
  int64_t flat = 0;
  for (size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] < 0 || idx[k] >= shape_[k]) {
      throw_index("index out of range on axis " + std::to_string(k));
    }
    flat = flat * shape_[k] + idx[k];
  }
  return flat;
}

real& Tensor::at(std::initializer_list<int64_t> idx) {
  return v_[static_cast<size_t>(flat_index(std::span<const int64_t>(idx.begin(), idx.size())))];
}

real Tensor::at(std::initializer_list<int64_t> idx) const {
  return v_[static_cast<size_t>(flat_index(std::span<const int64_t>(idx.begin(), idx.size())))];
}

bool Tensor::all_finite() const {
  for (real x : v_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

void Tensor::fill(real v) {
  for (auto& x : v_) x = v;
}

std::string Tensor::shape_str() const { return shape_to_string(shape_); }

real max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw_shape("max_abs_diff: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  }
  real m = 0;
  for (int64_t i = 0; i < a.size(); ++i) {
    real d = std::fabs(a[i] - b[i]);
    if (d > m) m = d;
  }
  return m;
}

std::string shape_to_string(std::span<const int64_t> shape) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

}  // namespace mdgru
