#include "gridnav/numcore/array.hpp"

#include <cmath>
#include <stdexcept>

namespace numcore {

int64_t numel_of(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int e : shape) {
    if (e < 0) throw std::invalid_argument("negative extent in shape " + shape_str(shape));
    n *= e;
  }
  return n;
}

std::string shape_str(const std::vector<int>& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Array::Array(std::vector<int> s) : shape(std::move(s)), data(numel_of(shape), 0.0f) {}

Array::Array(std::vector<int> s, std::vector<float> d) : shape(std::move(s)), data(std::move(d)) {
  if (numel_of(shape) != static_cast<int64_t>(data.size()))
    throw std::invalid_argument("Array: shape " + shape_str(shape) + " does not match data size " +
                                std::to_string(data.size()));
}

Array Array::full(std::vector<int> s, float v) {
  Array a(std::move(s));
  std::fill(a.data.begin(), a.data.end(), v);
  return a;
}

int64_t Array::numel() const { return static_cast<int64_t>(data.size()); }

float Array::at(std::initializer_list<int> idx) const {
  return const_cast<Array*>(this)->at(idx);
}

float& Array::at(std::initializer_list<int> idx) {
  if (static_cast<int>(idx.size()) != rank())
    throw std::invalid_argument("Array::at: index rank mismatch");
  int64_t off = 0;
  int d = 0;
  for (int i : idx) {
    if (i < 0 || i >= shape[d]) throw std::out_of_range("Array::at: index out of range");
    off = off * shape[d] + i;
    ++d;
  }
  return data[off];
}

bool Array::all_finite() const {
  for (float v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

float Array::abs_max() const {
  float m = 0.0f;
  for (float v : data) m = std::max(m, std::fabs(v));
  return m;
}

}  // namespace numcore
