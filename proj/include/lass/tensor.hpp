#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace lass::ad {

using Shape = std::vector<size_t>;

inline size_t shape_numel(const Shape& s) {
  size_t n = 1;
  for (size_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

// Dense row-major tensor. The gradient buffer is allocated lazily the first
// time the tape writes into it; requires_grad marks leaves the optimizer owns
// and propagates through every recorded op.
template <typename S>
struct Tensor {
  Shape shape;
  std::vector<S> data;
  std::vector<S> grad;
  bool requires_grad = false;

  Tensor() = default;
  explicit Tensor(Shape sh, S fill = S(0))
      : shape(std::move(sh)), data(shape_numel(shape), fill) {}
  Tensor(Shape sh, std::vector<S> values) : shape(std::move(sh)), data(std::move(values)) {
    if (data.size() != shape_numel(shape))
      throw std::invalid_argument("tensor: " + std::to_string(data.size()) +
                                  " values do not fill shape " + shape_str(shape));
  }

  size_t numel() const { return data.size(); }
  size_t rank() const { return shape.size(); }
  size_t dim(size_t i) const { return shape.at(i); }

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), S(0));
  }
  void zero_grad() { std::fill(grad.begin(), grad.end(), S(0)); }

  bool all_finite() const {
    for (S v : data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }
};

template <typename S>
using TensorPtr = std::shared_ptr<Tensor<S>>;

template <typename S>
TensorPtr<S> make_tensor(Shape sh, S fill = S(0)) {
  return std::make_shared<Tensor<S>>(std::move(sh), fill);
}

template <typename S>
TensorPtr<S> make_tensor(Shape sh, std::vector<S> values) {
  return std::make_shared<Tensor<S>>(std::move(sh), std::move(values));
}

// Leaf owned by an optimizer.
template <typename S>
TensorPtr<S> make_param(Shape sh, S fill = S(0)) {
  auto t = make_tensor<S>(std::move(sh), fill);
  t->requires_grad = true;
  t->ensure_grad();
  return t;
}

template <typename S>
struct NamedParam {
  std::string name;
  TensorPtr<S> tensor;
};

inline void check_same_shape(const Shape& a, const Shape& b, const char* op) {
  if (a != b)
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a) +
                                " vs " + shape_str(b));
}

}  // namespace lass::ad
