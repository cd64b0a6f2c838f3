#pragma once

#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "apt/error.hpp"
#include "apt/rng.hpp"

namespace apt {

using Shape = std::vector<int>;

inline int64_t numel(const Shape& shape) {
  int64_t n = 1;
  for (int e : shape) n *= e;
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

// Row-major n-d value with an optional gradient slot. An empty grad vector
// means "absent"; frozen tensors keep it absent through backward.
template <typename T>
struct Tensor {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;
  bool requires_grad = false;

  Tensor() = default;
  explicit Tensor(Shape s, T fill = T(0))
      : shape(std::move(s)), data(size_t(numel(shape)), fill) {}
  Tensor(Shape s, std::vector<T> values) : shape(std::move(s)), data(std::move(values)) {
    if (int64_t(data.size()) != numel(shape))
      throw RejectedInput("tensor data length " + std::to_string(data.size()) +
                          " does not match shape " + shape_str(shape));
  }

  static Tensor zeros(Shape s) { return Tensor(std::move(s)); }
  static Tensor full(Shape s, T v) { return Tensor(std::move(s), v); }
  static Tensor randn(Shape s, Rng& rng, double stddev) {
    Tensor t(std::move(s));
    for (T& x : t.data) x = T(rng.next_normal() * stddev);
    return t;
  }

  int rank() const { return int(shape.size()); }
  int64_t size() const { return int64_t(data.size()); }
  int rows() const { return shape.at(0); }
  int cols() const { return shape.at(1); }

  T& at(int i, int j) { return data[size_t(i) * cols() + j]; }
  const T& at(int i, int j) const { return data[size_t(i) * cols() + j]; }

  bool has_grad() const { return !grad.empty(); }
  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
  }
  void clear_grad() { grad.clear(); }
};

}  // namespace apt
