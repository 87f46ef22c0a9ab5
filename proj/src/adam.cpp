#include <cmath>
#include <stdexcept>

#include "lass/adam.hpp"

namespace lass::ad {

template <typename S>
void adam_step(const std::vector<NamedParam<S>>& params, AdamState<S>& state) {
  if (state.m.size() != params.size())
    throw std::invalid_argument("adam_step: state holds " + std::to_string(state.m.size()) +
                                " buffers for " + std::to_string(params.size()) +
                                " parameters");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(static_cast<double>(state.beta1),
                                    static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(static_cast<double>(state.beta2),
                                    static_cast<double>(state.t));
  for (size_t pi = 0; pi < params.size(); ++pi) {
    auto& p = *params[pi].tensor;
    if (p.grad.size() != p.data.size())
      throw std::invalid_argument("adam_step: parameter '" + params[pi].name +
                                  "' has no gradient buffer");
    if (state.m[pi].size() != p.data.size())
      throw std::invalid_argument("adam_step: state shape mismatch for '" + params[pi].name +
                                  "'");
    auto& m = state.m[pi];
    auto& v = state.v[pi];
    for (size_t i = 0; i < p.data.size(); ++i) {
      const S g = p.grad[i];
      if (!std::isfinite(static_cast<double>(g)))
        throw std::runtime_error("adam_step: non-finite gradient in parameter '" +
                                 params[pi].name + "' at element " + std::to_string(i));
      m[i] = state.beta1 * m[i] + (S(1) - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (S(1) - state.beta2) * g * g;
      const double mhat = static_cast<double>(m[i]) / bc1;
      const double vhat = static_cast<double>(v[i]) / bc2;
      p.data[i] -= static_cast<S>(static_cast<double>(state.lr) * mhat /
                                  (std::sqrt(vhat) + static_cast<double>(state.eps)));
    }
  }
}

template void adam_step<float>(const std::vector<NamedParam<float>>&, AdamState<float>&);
template void adam_step<double>(const std::vector<NamedParam<double>>&, AdamState<double>&);

}  // namespace lass::ad
