#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace relstab {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

// Dense row-major float array. Images are [1,H,W] (or [H,W]), batches
// [N,C,H,W], logits [N,K].
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> data);
  Tensor(Shape shape, std::initializer_list<float> data);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<float> values() { return data_; }
  std::span<const float> values() const { return data_; }
  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  // Row-major index helpers for 2-d and 4-d tensors.
  float& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  float at(std::size_t i, std::size_t j) const {
    return data_[i * shape_[1] + j];
  }

  // Same buffer, new shape; the element count must match.
  Tensor reshaped(Shape shape) const;
  void fill(float value);

  // Slice along the leading axis: returns element [i] with rank - 1 dims.
  Tensor slice(std::size_t i) const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<float> data_;
};

// Stack equally shaped tensors along a new leading axis.
Tensor stack(std::span<const Tensor> items);

bool bit_identical(const Tensor& a, const Tensor& b);
bool all_finite(const Tensor& t);

}  // namespace relstab
