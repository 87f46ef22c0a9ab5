#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

#include "lass/tensor.hpp"

namespace lass::ad {

// Records one backward rule per differentiable op, in creation order.
// Creation order is a topological order by construction (an op's inputs exist
// before its output), so backward() is a single reverse sweep; each rule runs
// exactly once. Closures capture shared_ptrs to their operands, which keeps
// intermediate activations alive for the sweep. One tape per training step.
template <typename S>
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  void record(BackwardFn fn) { nodes_.push_back(std::move(fn)); }

  void backward(const TensorPtr<S>& loss) {
    if (loss->numel() != 1)
      throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                  shape_str(loss->shape));
    loss->ensure_grad();
    loss->grad[0] = S(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
  }

  size_t node_count() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  std::vector<BackwardFn> nodes_;
};

}  // namespace lass::ad
