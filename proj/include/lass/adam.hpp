#pragma once

#include <cstdint>
#include <vector>

#include "lass/rng.hpp"
#include "lass/tensor.hpp"

namespace lass::ad {

// Bias-corrected Adam over a fixed parameter list. m/v buffers are aligned
// index-for-index with the list they were initialized from.
template <typename S>
struct AdamState {
  S lr = S(3e-4);
  S beta1 = S(0.9);
  S beta2 = S(0.999);
  S eps = S(1e-8);
  uint64_t t = 0;
  std::vector<std::vector<S>> m, v;

  void init(const std::vector<NamedParam<S>>& params) {
    m.clear();
    v.clear();
    for (const auto& p : params) {
      m.emplace_back(p.tensor->numel(), S(0));
      v.emplace_back(p.tensor->numel(), S(0));
    }
    t = 0;
  }
};

// In-place update from the accumulated gradients. Throws on a non-finite
// gradient, naming the parameter.
template <typename S>
void adam_step(const std::vector<NamedParam<S>>& params, AdamState<S>& state);

extern template void adam_step<float>(const std::vector<NamedParam<float>>&,
                                      AdamState<float>&);
extern template void adam_step<double>(const std::vector<NamedParam<double>>&,
                                       AdamState<double>&);

// Kaiming-uniform fan-in fill, the default for conv/linear weights.
template <typename S>
void kaiming_uniform(Tensor<S>& t, size_t fan_in, lass::Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (auto& v : t.data) v = static_cast<S>(rng.uniform(-bound, bound));
}

template <typename S>
void normal_fill(Tensor<S>& t, double stddev, lass::Rng& rng) {
  for (auto& v : t.data) v = static_cast<S>(rng.normal() * stddev);
}

}  // namespace lass::ad
