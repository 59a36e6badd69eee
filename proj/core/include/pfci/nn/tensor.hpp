#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pfci/errors.hpp"

namespace pfci::nn {

/// NCHW shape. Scalars are (1, 1, 1, 1).
struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t numel() const noexcept { return sample() * static_cast<std::size_t>(n); }
  std::size_t sample() const noexcept { return static_cast<std::size_t>(c) * plane(); }
  std::size_t plane() const noexcept { return static_cast<std::size_t>(h) * static_cast<std::size_t>(w); }
  bool operator==(const Shape&) const = default;
  std::string str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," + std::to_string(w) + ")";
  }
};

inline constexpr Shape kScalar{1, 1, 1, 1};

/// Dense NCHW buffer with value semantics.
template <class T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape s, T fill = T(0)) : shape_(s), data_(s.numel(), fill) {}
  Tensor(Shape s, std::vector<T> data) : shape_(s), data_(std::move(data)) {
    if (data_.size() != shape_.numel()) throw ShapeError("tensor data does not match shape " + shape_.str());
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t numel() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> span() & noexcept { return data_; }
  std::span<const T> span() const& noexcept { return data_; }
  std::span<const T> span() && = delete;
  std::vector<T>& storage() noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  T* sample(int n) noexcept { return data_.data() + static_cast<std::size_t>(n) * shape_.sample(); }
  const T* sample(int n) const noexcept { return data_.data() + static_cast<std::size_t>(n) * shape_.sample(); }
  T* channel(int n, int c) noexcept { return sample(n) + static_cast<std::size_t>(c) * shape_.plane(); }
  const T* channel(int n, int c) const noexcept { return sample(n) + static_cast<std::size_t>(c) * shape_.plane(); }

  T& at(int n, int c, int h, int w) noexcept {
    return channel(n, c)[static_cast<std::size_t>(h) * shape_.w + static_cast<std::size_t>(w)];
  }
  const T& at(int n, int c, int h, int w) const noexcept {
    return channel(n, c)[static_cast<std::size_t>(h) * shape_.w + static_cast<std::size_t>(w)];
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

}  // namespace pfci::nn
