#include "relstab/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "relstab/errors.hpp"

namespace relstab {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ',';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

namespace {
void check_shape(const Shape& shape) {
  if (shape.empty()) throw InputError("tensor shape must have rank >= 1");
  for (std::size_t d : shape)
    if (d == 0)
      throw InputError("tensor dimensions must be >= 1, got " +
                       shape_string(shape));
}
}  // namespace

Tensor::Tensor(Shape shape, float fill)
    : shape_(std::move(shape)), data_() {
  check_shape(shape_);
  data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (data_.size() != shape_size(shape_))
    throw InputError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_string(shape_));
}

Tensor::Tensor(Shape shape, std::initializer_list<float> data)
    : Tensor(std::move(shape), std::vector<float>(data)) {}

Tensor Tensor::reshaped(Shape shape) const {
  return Tensor(std::move(shape), data_);
}

void Tensor::fill(float value) { std::fill(data_.begin(), data_.end(), value); }

Tensor Tensor::slice(std::size_t i) const {
  if (shape_.size() < 2 || i >= shape_[0])
    throw InputError("slice index out of range");
  Shape inner(shape_.begin() + 1, shape_.end());
  const std::size_t n = shape_size(inner);
  std::vector<float> part(data_.begin() + i * n, data_.begin() + (i + 1) * n);
  return Tensor(std::move(inner), std::move(part));
}

Tensor stack(std::span<const Tensor> items) {
  if (items.empty()) throw InputError("cannot stack an empty list");
  Shape shape = items.front().shape();
  std::vector<float> data;
  data.reserve(items.size() * items.front().size());
  for (const Tensor& t : items) {
    if (t.shape() != shape)
      throw InputError("stack: shape " + shape_string(t.shape()) +
                       " differs from " + shape_string(shape));
    data.insert(data.end(), t.values().begin(), t.values().end());
  }
  shape.insert(shape.begin(), items.size());
  return Tensor(std::move(shape), std::move(data));
}

bool bit_identical(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

bool all_finite(const Tensor& t) {
  return std::all_of(t.values().begin(), t.values().end(),
                     [](float v) { return std::isfinite(v); });
}

}  // namespace relstab
