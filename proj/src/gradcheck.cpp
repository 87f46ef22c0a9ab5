#include <cmath>

#include "lass/gradcheck.hpp"

namespace lass::ad {

double fd_relative_error(const std::function<double()>& forward,
                         const std::vector<TensorPtr<double>>& inputs, double h) {
  double worst = 0.0;
  for (const auto& t : inputs) {
    if (t->grad.size() != t->data.size())
      throw std::invalid_argument("fd_relative_error: analytic gradient missing for shape " +
                                  shape_str(t->shape));
    double diff_sq = 0.0, a_sq = 0.0, n_sq = 0.0;
    for (size_t i = 0; i < t->data.size(); ++i) {
      const double orig = t->data[i];
      t->data[i] = orig + h;
      const double f1 = forward();
      t->data[i] = orig - h;
      const double f2 = forward();
      t->data[i] = orig;
      const double num = (f1 - f2) / (2.0 * h);
      const double ana = t->grad[i];
      diff_sq += (ana - num) * (ana - num);
      a_sq += ana * ana;
      n_sq += num * num;
    }
    // The denominator is floored at 1e-5 per element: central differences on
    // a double-precision loss carry ~1e-7 absolute noise per element, so
    // gradients below the floor (including structural zeros, e.g. a key bias
    // that cancels in the shift-invariant softmax) are compared against it
    // rather than against their own unresolvable magnitude.
    const double denom = std::max({std::sqrt(a_sq), std::sqrt(n_sq),
                                   1e-5 * std::sqrt(static_cast<double>(t->data.size()))});
    const double err = std::sqrt(diff_sq) / denom;
    if (err > worst) worst = err;
  }
  return worst;
}

}  // namespace lass::ad
