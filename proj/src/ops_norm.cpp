#include <cmath>

#include "lass/kernels.hpp"
#include "lass/ops.hpp"

namespace lass::ad {

template <typename S>
TensorPtr<S> batch_norm2d(Tape<S>& tape, const TensorPtr<S>& x, const TensorPtr<S>& gamma,
                          const TensorPtr<S>& beta, Tensor<S>& running_mean,
                          Tensor<S>& running_var, BnMode mode, S momentum, S eps) {
  if (x->rank() != 4) throw std::invalid_argument("batch_norm2d: input must be [N, C, T, F]");
  const size_t N = x->dim(0), C = x->dim(1), T = x->dim(2), F = x->dim(3);
  if (gamma->numel() != C || beta->numel() != C || running_mean.numel() != C ||
      running_var.numel() != C)
    throw std::invalid_argument("batch_norm2d: parameter length != channel count " +
                                std::to_string(C));
  const size_t plane = T * F;
  const size_t m = N * plane;
  if (mode == BnMode::Train && m < 2)
    throw std::invalid_argument(
        "batch_norm2d: train mode needs at least 2 elements per channel for a variance, got " +
        std::to_string(m));

  auto out = make_tensor<S>(x->shape);
  // invstd and the centering mean actually used, per channel.
  auto mean_used = std::make_shared<std::vector<S>>(C);
  auto invstd = std::make_shared<std::vector<S>>(C);

  for (size_t c = 0; c < C; ++c) {
    double mu, var;
    if (mode == BnMode::Train) {
      double s = 0.0;
      for (size_t n = 0; n < N; ++n) s += sum_n(&x->data[(n * C + c) * plane], plane);
      mu = s / static_cast<double>(m);
      double sq = 0.0;
      for (size_t n = 0; n < N; ++n) {
        const S* p = &x->data[(n * C + c) * plane];
        double c0 = 0, c1 = 0, c2 = 0, c3 = 0;
        size_t i = 0;
        for (; i + 4 <= plane; i += 4) {
          const double d0 = static_cast<double>(p[i]) - mu;
          const double d1 = static_cast<double>(p[i + 1]) - mu;
          const double d2 = static_cast<double>(p[i + 2]) - mu;
          const double d3 = static_cast<double>(p[i + 3]) - mu;
          c0 += d0 * d0;
          c1 += d1 * d1;
          c2 += d2 * d2;
          c3 += d3 * d3;
        }
        for (; i < plane; ++i) {
          const double d = static_cast<double>(p[i]) - mu;
          c0 += d * d;
        }
        sq += (c0 + c1) + (c2 + c3);
      }
      var = sq / static_cast<double>(m);  // biased, also what the running buffer stores
      running_mean.data[c] =
          (S(1) - momentum) * running_mean.data[c] + momentum * static_cast<S>(mu);
      running_var.data[c] =
          (S(1) - momentum) * running_var.data[c] + momentum * static_cast<S>(var);
    } else {
      mu = static_cast<double>(running_mean.data[c]);
      var = static_cast<double>(running_var.data[c]);
    }
    (*mean_used)[c] = static_cast<S>(mu);
    (*invstd)[c] = static_cast<S>(1.0 / std::sqrt(var + static_cast<double>(eps)));
    const S g = gamma->data[c], b = beta->data[c];
    const S mu_s = (*mean_used)[c], is = (*invstd)[c];
    for (size_t n = 0; n < N; ++n) {
      const S* p = &x->data[(n * C + c) * plane];
      S* o = &out->data[(n * C + c) * plane];
      for (size_t i = 0; i < plane; ++i) o[i] = (p[i] - mu_s) * is * g + b;
    }
  }

  out->requires_grad = x->requires_grad || gamma->requires_grad || beta->requires_grad;
  if (out->requires_grad) {
    const bool train = mode == BnMode::Train;
    tape.record([x, gamma, beta, out, mean_used, invstd, N, C, plane, m, train] {
      if (out->grad.empty()) return;
      if (x->requires_grad) x->ensure_grad();
      if (gamma->requires_grad) gamma->ensure_grad();
      if (beta->requires_grad) beta->ensure_grad();
      for (size_t c = 0; c < C; ++c) {
        const S mu = (*mean_used)[c], is = (*invstd)[c], g = gamma->data[c];
        double sum_g = 0.0, sum_gx = 0.0;  // sums of dout and dout*xhat
        for (size_t n = 0; n < N; ++n) {
          const S* go = &out->grad[(n * C + c) * plane];
          const S* p = &x->data[(n * C + c) * plane];
          const double sg = sum_n(go, plane);
          sum_g += sg;
          sum_gx += (dot_n(go, p, plane) - static_cast<double>(mu) * sg) *
                    static_cast<double>(is);
        }
        if (beta->requires_grad) beta->grad[c] += static_cast<S>(sum_g);
        if (gamma->requires_grad) gamma->grad[c] += static_cast<S>(sum_gx);
        if (!x->requires_grad) continue;
        if (train) {
          const double inv_m = 1.0 / static_cast<double>(m);
          for (size_t n = 0; n < N; ++n) {
            const S* go = &out->grad[(n * C + c) * plane];
            const S* p = &x->data[(n * C + c) * plane];
            S* xg = &x->grad[(n * C + c) * plane];
            for (size_t i = 0; i < plane; ++i) {
              const double xhat = static_cast<double>((p[i] - mu) * is);
              const double d = static_cast<double>(go[i]) - inv_m * (sum_g + xhat * sum_gx);
              xg[i] += static_cast<S>(static_cast<double>(g) * static_cast<double>(is) * d);
            }
          }
        } else {
          const S k = g * is;
          for (size_t n = 0; n < N; ++n) {
            const S* go = &out->grad[(n * C + c) * plane];
            S* xg = &x->grad[(n * C + c) * plane];
            for (size_t i = 0; i < plane; ++i) xg[i] += k * go[i];
          }
        }
      }
    });
  }
  return out;
}

template <typename S>
TensorPtr<S> film(Tape<S>& tape, const TensorPtr<S>& x, const TensorPtr<S>& gamma,
                  const TensorPtr<S>& beta) {
  if (x->rank() != 4) throw std::invalid_argument("film: input must be [N, C, T, F]");
  const size_t N = x->dim(0), C = x->dim(1), plane = x->dim(2) * x->dim(3);
  if (gamma->shape != Shape{N, C} || beta->shape != Shape{N, C})
    throw std::invalid_argument("film: modulation shape must be [N, C] = [" +
                                std::to_string(N) + "," + std::to_string(C) + "], got " +
                                shape_str(gamma->shape) + " / " + shape_str(beta->shape));
  auto out = make_tensor<S>(x->shape);
  for (size_t nc = 0; nc < N * C; ++nc) {
    const S g = gamma->data[nc], b = beta->data[nc];
    const S* p = &x->data[nc * plane];
    S* o = &out->data[nc * plane];
    for (size_t i = 0; i < plane; ++i) o[i] = g * p[i] + b;
  }
  out->requires_grad = x->requires_grad || gamma->requires_grad || beta->requires_grad;
  if (out->requires_grad) {
    tape.record([x, gamma, beta, out, N, C, plane] {
      if (out->grad.empty()) return;
      if (x->requires_grad) x->ensure_grad();
      if (gamma->requires_grad) gamma->ensure_grad();
      if (beta->requires_grad) beta->ensure_grad();
      for (size_t nc = 0; nc < N * C; ++nc) {
        const S* go = &out->grad[nc * plane];
        const S* p = &x->data[nc * plane];
        if (x->requires_grad) {
          const S g = gamma->data[nc];
          S* xg = &x->grad[nc * plane];
          for (size_t i = 0; i < plane; ++i) xg[i] += g * go[i];
        }
        if (gamma->requires_grad) gamma->grad[nc] += static_cast<S>(dot_n(go, p, plane));
        if (beta->requires_grad) beta->grad[nc] += static_cast<S>(sum_n(go, plane));
      }
    });
  }
  return out;
}

template <typename S>
TensorPtr<S> masked_softmax(Tape<S>& tape, const TensorPtr<S>& scores,
                            const std::type_identity_t<TensorPtr<S>>& key_mask) {
  if (scores->rank() != 4)
    throw std::invalid_argument("masked_softmax: scores must be [N, H, Lq, Lk]");
  const size_t N = scores->dim(0), H = scores->dim(1), Lq = scores->dim(2),
               Lk = scores->dim(3);
  if (key_mask && key_mask->shape != Shape{N, Lk})
    throw std::invalid_argument("masked_softmax: key mask must be [N, Lk], got " +
                                shape_str(key_mask->shape));
  auto out = make_tensor<S>(scores->shape);
  const size_t rows = N * H * Lq;
  for (size_t r = 0; r < rows; ++r) {
    const size_t n = r / (H * Lq);
    const S* mrow = key_mask ? &key_mask->data[n * Lk] : nullptr;
    const S* in = &scores->data[r * Lk];
    S* o = &out->data[r * Lk];
    double mx = -1e300;
    bool any_live = false;
    for (size_t k = 0; k < Lk; ++k)
      if (!mrow || mrow[k] != S(0)) {
        any_live = true;
        if (static_cast<double>(in[k]) > mx) mx = static_cast<double>(in[k]);
      }
    if (!any_live) throw std::invalid_argument("masked_softmax: fully masked row");
    if (mx == -1e300)
      throw std::invalid_argument("masked_softmax: non-finite attention scores");
    double sum = 0.0;
    for (size_t k = 0; k < Lk; ++k) {
      const double e =
          (!mrow || mrow[k] != S(0)) ? std::exp(static_cast<double>(in[k]) - mx) : 0.0;
      o[k] = static_cast<S>(e);
      sum += e;
    }
    const double inv = 1.0 / sum;
    for (size_t k = 0; k < Lk; ++k) o[k] = static_cast<S>(static_cast<double>(o[k]) * inv);
  }
  out->requires_grad = scores->requires_grad;
  if (out->requires_grad) {
    tape.record([scores, out, rows, Lk] {
      if (out->grad.empty()) return;
      scores->ensure_grad();
      for (size_t r = 0; r < rows; ++r) {
        const S* o = &out->data[r * Lk];
        const S* go = &out->grad[r * Lk];
        S* sg = &scores->grad[r * Lk];
        double dot = 0.0;
        for (size_t k = 0; k < Lk; ++k) dot += static_cast<double>(go[k]) * o[k];
        for (size_t k = 0; k < Lk; ++k)
          sg[k] += static_cast<S>(o[k] * (static_cast<double>(go[k]) - dot));
      }
    });
  }
  return out;
}

template <typename S>
TensorPtr<S> layer_norm(Tape<S>& tape, const TensorPtr<S>& x, const TensorPtr<S>& gamma,
                        const TensorPtr<S>& beta, S eps) {
  if (x->rank() < 1) throw std::invalid_argument("layer_norm: rank >= 1 required");
  const size_t D = x->shape.back();
  if (gamma->numel() != D || beta->numel() != D)
    throw std::invalid_argument("layer_norm: gamma/beta length != last axis " +
                                std::to_string(D));
  const size_t rows = x->numel() / D;
  auto out = make_tensor<S>(x->shape);
  auto mean = std::make_shared<std::vector<S>>(rows);
  auto invstd = std::make_shared<std::vector<S>>(rows);
  for (size_t r = 0; r < rows; ++r) {
    const S* p = &x->data[r * D];
    double mu = 0.0;
    for (size_t d = 0; d < D; ++d) mu += static_cast<double>(p[d]);
    mu /= static_cast<double>(D);
    double var = 0.0;
    for (size_t d = 0; d < D; ++d) {
      const double dd = static_cast<double>(p[d]) - mu;
      var += dd * dd;
    }
    var /= static_cast<double>(D);
    (*mean)[r] = static_cast<S>(mu);
    (*invstd)[r] = static_cast<S>(1.0 / std::sqrt(var + static_cast<double>(eps)));
    S* o = &out->data[r * D];
    for (size_t d = 0; d < D; ++d)
      o[d] = (p[d] - (*mean)[r]) * (*invstd)[r] * gamma->data[d] + beta->data[d];
  }
  out->requires_grad = x->requires_grad || gamma->requires_grad || beta->requires_grad;
  if (out->requires_grad) {
    tape.record([x, gamma, beta, out, mean, invstd, rows, D] {
      if (out->grad.empty()) return;
      if (x->requires_grad) x->ensure_grad();
      if (gamma->requires_grad) gamma->ensure_grad();
      if (beta->requires_grad) beta->ensure_grad();
      for (size_t r = 0; r < rows; ++r) {
        const S* p = &x->data[r * D];
        const S* go = &out->grad[r * D];
        const S mu = (*mean)[r], is = (*invstd)[r];
        double sum_g = 0.0, sum_gx = 0.0;
        for (size_t d = 0; d < D; ++d) {
          const double xhat = static_cast<double>((p[d] - mu) * is);
          const double gg = static_cast<double>(go[d]) * gamma->data[d];
          sum_g += gg;
          sum_gx += gg * xhat;
          if (gamma->requires_grad) gamma->grad[d] += static_cast<S>(go[d] * xhat);
          if (beta->requires_grad) beta->grad[d] += go[d];
        }
        if (!x->requires_grad) continue;
        const double inv_d = 1.0 / static_cast<double>(D);
        S* xg = &x->grad[r * D];
        for (size_t d = 0; d < D; ++d) {
          const double xhat = static_cast<double>((p[d] - mu) * is);
          const double gg = static_cast<double>(go[d]) * gamma->data[d];
          xg[d] += static_cast<S>(is * (gg - inv_d * (sum_g + xhat * sum_gx)));
        }
      }
    });
  }
  return out;
}

#define LASS_INSTANTIATE(S)                                                                 \
  template TensorPtr<S> batch_norm2d<S>(Tape<S>&, const TensorPtr<S>&, const TensorPtr<S>&, \
                                        const TensorPtr<S>&, Tensor<S>&, Tensor<S>&,        \
                                        BnMode, S, S);                                      \
  template TensorPtr<S> film<S>(Tape<S>&, const TensorPtr<S>&, const TensorPtr<S>&,         \
                                const TensorPtr<S>&);                                       \
  template TensorPtr<S> masked_softmax<S>(Tape<S>&, const TensorPtr<S>&,                    \
                                          const std::type_identity_t<TensorPtr<S>>&);       \
  template TensorPtr<S> layer_norm<S>(Tape<S>&, const TensorPtr<S>&, const TensorPtr<S>&,   \
                                      const TensorPtr<S>&, S);

LASS_INSTANTIATE(float)
LASS_INSTANTIATE(double)
#undef LASS_INSTANTIATE

}  // namespace lass::ad
