#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace numcore {

// Dense float32 tensor, row-major.
struct Array {
  std::vector<int> shape;
  std::vector<float> data;

  Array() = default;
  explicit Array(std::vector<int> s);  // zero-filled
  Array(std::vector<int> s, std::vector<float> d);

  static Array full(std::vector<int> s, float v);
  static Array scalar(float v) { return Array({1}, {v}); }

  int64_t numel() const;
  int rank() const { return static_cast<int>(shape.size()); }

  float at(std::initializer_list<int> idx) const;
  float& at(std::initializer_list<int> idx);

  bool same_shape(const Array& o) const { return shape == o.shape; }
  bool all_finite() const;
  float abs_max() const;
};

int64_t numel_of(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

}  // namespace numcore
