#pragma once

#include <functional>
#include <string>
#include <vector>

#include "lass/tensor.hpp"

namespace lass::ad {

struct GradCheckResult {
  std::string name;
  double rel_err = 0.0;
  double tol = 0.0;
  bool pass() const { return rel_err < tol; }
};

// Central finite differences against the analytic gradients already stored in
// each input's grad buffer. `forward` must recompute the scalar loss from the
// tensors' current values and must not touch their grad buffers. The error is
// per-tensor ||analytic - numeric||_2 / max(norms); the max over inputs is
// returned. This path shares nothing with Tape::backward.
double fd_relative_error(const std::function<double()>& forward,
                         const std::vector<TensorPtr<double>>& inputs, double h = 1e-5);

// Named finite-difference checks for every differentiable op and the composed
// model at toy dimensions. `deep` adds the full end-to-end model check.
std::vector<GradCheckResult> run_gradcheck_suite(bool deep);

}  // namespace lass::ad
