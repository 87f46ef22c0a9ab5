#include <cmath>

#include "lass/kernels.hpp"
#include "lass/ops.hpp"

namespace lass::ad {

namespace {

template <typename S>
bool wants_grad(const TensorPtr<S>& t) {
  return t->requires_grad;
}

}  // namespace

template <typename S>
TensorPtr<S> add(Tape<S>& tape, const TensorPtr<S>& a, const TensorPtr<S>& b) {
  check_same_shape(a->shape, b->shape, "add");
  auto out = make_tensor<S>(a->shape);
  const size_t n = out->numel();
  for (size_t i = 0; i < n; ++i) out->data[i] = a->data[i] + b->data[i];
  out->requires_grad = wants_grad(a) || wants_grad(b);
  if (out->requires_grad) {
    tape.record([a, b, out] {
      if (out->grad.empty()) return;
      if (a->requires_grad) {
        a->ensure_grad();
        for (size_t i = 0; i < out->grad.size(); ++i) a->grad[i] += out->grad[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (size_t i = 0; i < out->grad.size(); ++i) b->grad[i] += out->grad[i];
      }
    });
  }
  return out;
}

template <typename S>
TensorPtr<S> mul(Tape<S>& tape, const TensorPtr<S>& a, const TensorPtr<S>& b) {
  check_same_shape(a->shape, b->shape, "mul");
  auto out = make_tensor<S>(a->shape);
  const size_t n = out->numel();
  for (size_t i = 0; i < n; ++i) out->data[i] = a->data[i] * b->data[i];
  out->requires_grad = wants_grad(a) || wants_grad(b);
  if (out->requires_grad) {
    tape.record([a, b, out] {
      if (out->grad.empty()) return;
      if (a->requires_grad) {
        a->ensure_grad();
        for (size_t i = 0; i < out->grad.size(); ++i) a->grad[i] += out->grad[i] * b->data[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (size_t i = 0; i < out->grad.size(); ++i) b->grad[i] += out->grad[i] * a->data[i];
      }
    });
  }
  return out;
}

template <typename S>
TensorPtr<S> scale(Tape<S>& tape, const TensorPtr<S>& a, S c) {
  auto out = make_tensor<S>(a->shape);
  for (size_t i = 0; i < a->numel(); ++i) out->data[i] = a->data[i] * c;
  out->requires_grad = wants_grad(a);
  if (out->requires_grad) {
    tape.record([a, out, c] {
      if (out->grad.empty()) return;
      a->ensure_grad();
      for (size_t i = 0; i < out->grad.size(); ++i) a->grad[i] += out->grad[i] * c;
    });
  }
  return out;
}

template <typename S>
TensorPtr<S> relu(Tape<S>& tape, const TensorPtr<S>& a) {
  auto out = make_tensor<S>(a->shape);
  for (size_t i = 0; i < a->numel(); ++i) out->data[i] = a->data[i] > S(0) ? a->data[i] : S(0);
  out->requires_grad = wants_grad(a);
  if (out->requires_grad) {
    tape.record([a, out] {
      if (out->grad.empty()) return;
      a->ensure_grad();
      for (size_t i = 0; i < out->grad.size(); ++i)
        if (a->data[i] > S(0)) a->grad[i] += out->grad[i];
    });
  }
  return out;
}

template <typename S>
TensorPtr<S> leaky_relu(Tape<S>& tape, const TensorPtr<S>& a, S negative_slope) {
  auto out = make_tensor<S>(a->shape);
  for (size_t i = 0; i < a->numel(); ++i) {
    const S v = a->data[i];
    out->data[i] = v > S(0) ? v : negative_slope * v;
  }
  out->requires_grad = wants_grad(a);
  if (out->requires_grad) {
    tape.record([a, out, negative_slope] {
      if (out->grad.empty()) return;
      a->ensure_grad();
      for (size_t i = 0; i < out->grad.size(); ++i)
        a->grad[i] += out->grad[i] * (a->data[i] > S(0) ? S(1) : negative_slope);
    });
  }
  return out;
}

template <typename S>
TensorPtr<S> sigmoid(Tape<S>& tape, const TensorPtr<S>& a) {
  auto out = make_tensor<S>(a->shape);
  for (size_t i = 0; i < a->numel(); ++i) {
    const double v = static_cast<double>(a->data[i]);
    double s;
    if (v >= 0.0) {
      s = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      s = e / (1.0 + e);
    }
    out->data[i] = static_cast<S>(s);
  }
  out->requires_grad = wants_grad(a);
  if (out->requires_grad) {
    tape.record([a, out] {
      if (out->grad.empty()) return;
      a->ensure_grad();
      for (size_t i = 0; i < out->grad.size(); ++i) {
        const S s = out->data[i];
        a->grad[i] += out->grad[i] * s * (S(1) - s);
      }
    });
  }
  return out;
}

template <typename S>
TensorPtr<S> mae_loss(Tape<S>& tape, const TensorPtr<S>& pred, const TensorPtr<S>& target) {
  check_same_shape(pred->shape, target->shape, "mae_loss");
  const size_t n = pred->numel();
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i)
    acc += std::abs(static_cast<double>(pred->data[i]) - static_cast<double>(target->data[i]));
  auto out = make_tensor<S>(Shape{1});
  out->data[0] = static_cast<S>(acc / static_cast<double>(n));
  out->requires_grad = wants_grad(pred) || wants_grad(target);
  if (out->requires_grad) {
    tape.record([pred, target, out, n] {
      if (out->grad.empty()) return;
      const S g = out->grad[0] / static_cast<S>(n);
      if (pred->requires_grad) pred->ensure_grad();
      if (target->requires_grad) target->ensure_grad();
      for (size_t i = 0; i < n; ++i) {
        const S d = pred->data[i] - target->data[i];
        const S s = d > S(0) ? g : (d < S(0) ? -g : S(0));
        if (pred->requires_grad) pred->grad[i] += s;
        if (target->requires_grad) target->grad[i] -= s;
      }
    });
  }
  return out;
}

template <typename S>
TensorPtr<S> weighted_sum(Tape<S>& tape, const TensorPtr<S>& x, const TensorPtr<S>& w) {
  check_same_shape(x->shape, w->shape, "weighted_sum");
  auto out = make_tensor<S>(Shape{1});
  out->data[0] = static_cast<S>(dot_n(x->data.data(), w->data.data(), x->numel()));
  out->requires_grad = wants_grad(x);
  if (out->requires_grad) {
    tape.record([x, w, out] {
      if (out->grad.empty()) return;
      x->ensure_grad();
      const S g = out->grad[0];
      for (size_t i = 0; i < x->numel(); ++i) x->grad[i] += g * w->data[i];
    });
  }
  return out;
}

#define LASS_INSTANTIATE(S)                                                                  \
  template TensorPtr<S> add<S>(Tape<S>&, const TensorPtr<S>&, const TensorPtr<S>&);          \
  template TensorPtr<S> mul<S>(Tape<S>&, const TensorPtr<S>&, const TensorPtr<S>&);          \
  template TensorPtr<S> scale<S>(Tape<S>&, const TensorPtr<S>&, S);                          \
  template TensorPtr<S> relu<S>(Tape<S>&, const TensorPtr<S>&);                              \
  template TensorPtr<S> leaky_relu<S>(Tape<S>&, const TensorPtr<S>&, S);                     \
  template TensorPtr<S> sigmoid<S>(Tape<S>&, const TensorPtr<S>&);                           \
  template TensorPtr<S> mae_loss<S>(Tape<S>&, const TensorPtr<S>&, const TensorPtr<S>&);     \
  template TensorPtr<S> weighted_sum<S>(Tape<S>&, const TensorPtr<S>&, const TensorPtr<S>&);

LASS_INSTANTIATE(float)
LASS_INSTANTIATE(double)
#undef LASS_INSTANTIATE

}  // namespace lass::ad
