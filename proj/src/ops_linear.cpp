#include <array>
#include <cstring>

#include "lass/kernels.hpp"
#include "lass/ops.hpp"

namespace lass::ad {

template <typename S>
TensorPtr<S> linear(Tape<S>& tape, const TensorPtr<S>& x, const TensorPtr<S>& weight,
                    const std::type_identity_t<TensorPtr<S>>& bias) {
  if (weight->rank() != 2)
    throw std::invalid_argument("linear: weight must be [Out, In], got " +
                                shape_str(weight->shape));
  const size_t in = weight->dim(1);
  const size_t out_dim = weight->dim(0);
  if (x->rank() < 1 || x->shape.back() != in)
    throw std::invalid_argument("linear: trailing axis of x " + shape_str(x->shape) +
                                " does not match weight " + shape_str(weight->shape));
  if (bias && bias->numel() != out_dim)
    throw std::invalid_argument("linear: bias length " + std::to_string(bias->numel()) +
                                " != out dim " + std::to_string(out_dim));
  const size_t rows = x->numel() / in;
  Shape out_shape = x->shape;
  out_shape.back() = out_dim;
  auto out = make_tensor<S>(out_shape);

  for (size_t m = 0; m < rows; ++m) {
    const S* xr = &x->data[m * in];
    S* or_ = &out->data[m * out_dim];
    for (size_t o = 0; o < out_dim; ++o) {
      const double acc = dot_n(xr, &weight->data[o * in], in);
      or_[o] = static_cast<S>(bias ? acc + static_cast<double>(bias->data[o]) : acc);
    }
  }

  out->requires_grad =
      x->requires_grad || weight->requires_grad || (bias && bias->requires_grad);
  if (out->requires_grad) {
    tape.record([x, weight, bias, out, rows, in, out_dim] {
      if (out->grad.empty()) return;
      if (x->requires_grad) {
        x->ensure_grad();
        for (size_t m = 0; m < rows; ++m) {
          const S* gr = &out->grad[m * out_dim];
          S* xg = &x->grad[m * in];
          for (size_t o = 0; o < out_dim; ++o) {
            const S g = gr[o];
            if (g == S(0)) continue;
            const S* wr = &weight->data[o * in];
            for (size_t i = 0; i < in; ++i) xg[i] += g * wr[i];
          }
        }
      }
      if (weight->requires_grad) {
        weight->ensure_grad();
        for (size_t m = 0; m < rows; ++m) {
          const S* gr = &out->grad[m * out_dim];
          const S* xr = &x->data[m * in];
          for (size_t o = 0; o < out_dim; ++o) {
            const S g = gr[o];
            if (g == S(0)) continue;
            S* wg = &weight->grad[o * in];
            for (size_t i = 0; i < in; ++i) wg[i] += g * xr[i];
          }
        }
      }
      if (bias && bias->requires_grad) {
        bias->ensure_grad();
        for (size_t m = 0; m < rows; ++m) {
          const S* gr = &out->grad[m * out_dim];
          for (size_t o = 0; o < out_dim; ++o) bias->grad[o] += gr[o];
        }
      }
    });
  }
  return out;
}

template <typename S>
TensorPtr<S> bmm(Tape<S>& tape, const TensorPtr<S>& a, const TensorPtr<S>& b) {
  if (a->rank() != 3 || b->rank() != 3 || a->dim(0) != b->dim(0) || a->dim(2) != b->dim(1))
    throw std::invalid_argument("bmm: incompatible shapes " + shape_str(a->shape) + " x " +
                                shape_str(b->shape));
  const size_t B = a->dim(0), M = a->dim(1), K = a->dim(2), N = b->dim(2);
  auto out = make_tensor<S>(Shape{B, M, N});
  for (size_t bb = 0; bb < B; ++bb) {
    const S* ab = &a->data[bb * M * K];
    const S* bbp = &b->data[bb * K * N];
    S* ob = &out->data[bb * M * N];
    for (size_t m = 0; m < M; ++m)
      for (size_t k = 0; k < K; ++k) {
        const S av = ab[m * K + k];
        const S* br = &bbp[k * N];
        S* or_ = &ob[m * N];
        for (size_t n = 0; n < N; ++n) or_[n] += av * br[n];
      }
  }
  out->requires_grad = a->requires_grad || b->requires_grad;
  if (out->requires_grad) {
    tape.record([a, b, out, B, M, K, N] {
      if (out->grad.empty()) return;
      if (a->requires_grad) {
        a->ensure_grad();
        for (size_t bb = 0; bb < B; ++bb)
          for (size_t m = 0; m < M; ++m)
            for (size_t k = 0; k < K; ++k) {
              const S* br = &b->data[(bb * K + k) * N];
              const S* gr = &out->grad[(bb * M + m) * N];
              double acc = 0.0;
              for (size_t n = 0; n < N; ++n) acc += static_cast<double>(gr[n]) * br[n];
              a->grad[(bb * M + m) * K + k] += static_cast<S>(acc);
            }
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (size_t bb = 0; bb < B; ++bb)
          for (size_t m = 0; m < M; ++m)
            for (size_t k = 0; k < K; ++k) {
              const S av = a->data[(bb * M + m) * K + k];
              if (av == S(0)) continue;
              const S* gr = &out->grad[(bb * M + m) * N];
              S* bg = &b->grad[(bb * K + k) * N];
              for (size_t n = 0; n < N; ++n) bg[n] += av * gr[n];
            }
      }
    });
  }
  return out;
}

template <typename S>
TensorPtr<S> reshape(Tape<S>& tape, const TensorPtr<S>& a, Shape new_shape) {
  if (shape_numel(new_shape) != a->numel())
    throw std::invalid_argument("reshape: cannot view " + shape_str(a->shape) + " as " +
                                shape_str(new_shape));
  auto out = make_tensor<S>(std::move(new_shape));
  out->data = a->data;
  out->requires_grad = a->requires_grad;
  if (out->requires_grad) {
    tape.record([a, out] {
      if (out->grad.empty()) return;
      a->ensure_grad();
      for (size_t i = 0; i < a->numel(); ++i) a->grad[i] += out->grad[i];
    });
  }
  return out;
}

namespace {

// Row-major strides.
inline std::array<size_t, 4> strides4(const Shape& s) {
  std::array<size_t, 4> st{};
  size_t acc = 1;
  for (size_t i = s.size(); i-- > 0;) {
    st[i] = acc;
    acc *= s[i];
  }
  return st;
}

}  // namespace

template <typename S>
TensorPtr<S> permute(Tape<S>& tape, const TensorPtr<S>& a, const std::vector<size_t>& axes) {
  const size_t r = a->rank();
  if (axes.size() != r || r > 4)
    throw std::invalid_argument("permute: bad axes for rank " + std::to_string(r));
  Shape out_shape(r);
  for (size_t i = 0; i < r; ++i) out_shape[i] = a->dim(axes[i]);
  auto out = make_tensor<S>(out_shape);

  const auto src_st = strides4(a->shape);
  std::array<size_t, 4> dims{1, 1, 1, 1};
  std::array<size_t, 4> step{0, 0, 0, 0};
  for (size_t i = 0; i < r; ++i) {
    dims[i] = out_shape[i];
    step[i] = src_st[axes[i]];
  }
  size_t idx = 0;
  for (size_t i0 = 0; i0 < dims[0]; ++i0)
    for (size_t i1 = 0; i1 < dims[1]; ++i1)
      for (size_t i2 = 0; i2 < dims[2]; ++i2)
        for (size_t i3 = 0; i3 < dims[3]; ++i3)
          out->data[idx++] =
              a->data[i0 * step[0] + i1 * step[1] + i2 * step[2] + i3 * step[3]];

  out->requires_grad = a->requires_grad;
  if (out->requires_grad) {
    tape.record([a, out, dims, step] {
      if (out->grad.empty()) return;
      a->ensure_grad();
      size_t idx = 0;
      for (size_t i0 = 0; i0 < dims[0]; ++i0)
        for (size_t i1 = 0; i1 < dims[1]; ++i1)
          for (size_t i2 = 0; i2 < dims[2]; ++i2)
            for (size_t i3 = 0; i3 < dims[3]; ++i3)
              a->grad[i0 * step[0] + i1 * step[1] + i2 * step[2] + i3 * step[3]] +=
                  out->grad[idx++];
    });
  }
  return out;
}

template <typename S>
TensorPtr<S> embedding(Tape<S>& tape, const std::vector<int>& ids, Shape ids_shape,
                       const TensorPtr<S>& table) {
  if (table->rank() != 2)
    throw std::invalid_argument("embedding: table must be [V, D]");
  if (ids.size() != shape_numel(ids_shape))
    throw std::invalid_argument("embedding: ids do not fill shape " + shape_str(ids_shape));
  const size_t V = table->dim(0), D = table->dim(1);
  for (int id : ids)
    if (id < 0 || static_cast<size_t>(id) >= V)
      throw std::invalid_argument("embedding: token id " + std::to_string(id) +
                                  " outside vocabulary of size " + std::to_string(V));
  Shape out_shape = ids_shape;
  out_shape.push_back(D);
  auto out = make_tensor<S>(out_shape);
  for (size_t i = 0; i < ids.size(); ++i)
    std::memcpy(&out->data[i * D], &table->data[static_cast<size_t>(ids[i]) * D],
                D * sizeof(S));
  out->requires_grad = table->requires_grad;
  if (out->requires_grad) {
    tape.record([ids, table, out, D] {
      if (out->grad.empty()) return;
      table->ensure_grad();
      for (size_t i = 0; i < ids.size(); ++i) {
        S* tg = &table->grad[static_cast<size_t>(ids[i]) * D];
        const S* g = &out->grad[i * D];
        for (size_t d = 0; d < D; ++d) tg[d] += g[d];
      }
    });
  }
  return out;
}

template <typename S>
TensorPtr<S> first_token(Tape<S>& tape, const TensorPtr<S>& x) {
  if (x->rank() != 3) throw std::invalid_argument("first_token: expected [N, L, D]");
  const size_t N = x->dim(0), L = x->dim(1), D = x->dim(2);
  auto out = make_tensor<S>(Shape{N, D});
  for (size_t n = 0; n < N; ++n)
    std::memcpy(&out->data[n * D], &x->data[n * L * D], D * sizeof(S));
  out->requires_grad = x->requires_grad;
  if (out->requires_grad) {
    tape.record([x, out, N, L, D] {
      if (out->grad.empty()) return;
      x->ensure_grad();
      for (size_t n = 0; n < N; ++n)
        for (size_t d = 0; d < D; ++d) x->grad[n * L * D + d] += out->grad[n * D + d];
    });
  }
  return out;
}

template <typename S>
TensorPtr<S> slice_cols(Tape<S>& tape, const TensorPtr<S>& x, size_t c0, size_t c1) {
  if (x->rank() != 2 || c1 > x->dim(1) || c0 >= c1)
    throw std::invalid_argument("slice_cols: bad range [" + std::to_string(c0) + "," +
                                std::to_string(c1) + ") for " + shape_str(x->shape));
  const size_t N = x->dim(0), C = x->dim(1), W = c1 - c0;
  auto out = make_tensor<S>(Shape{N, W});
  for (size_t n = 0; n < N; ++n)
    std::memcpy(&out->data[n * W], &x->data[n * C + c0], W * sizeof(S));
  out->requires_grad = x->requires_grad;
  if (out->requires_grad) {
    tape.record([x, out, N, C, W, c0] {
      if (out->grad.empty()) return;
      x->ensure_grad();
      for (size_t n = 0; n < N; ++n)
        for (size_t w = 0; w < W; ++w) x->grad[n * C + c0 + w] += out->grad[n * W + w];
    });
  }
  return out;
}

template <typename S>
TensorPtr<S> concat_channels(Tape<S>& tape, const TensorPtr<S>& a, const TensorPtr<S>& b) {
  if (a->rank() != 4 || b->rank() != 4 || a->dim(0) != b->dim(0) || a->dim(2) != b->dim(2) ||
      a->dim(3) != b->dim(3))
    throw std::invalid_argument("concat_channels: incompatible " + shape_str(a->shape) +
                                " and " + shape_str(b->shape));
  const size_t N = a->dim(0), Ca = a->dim(1), Cb = b->dim(1), T = a->dim(2), F = a->dim(3);
  const size_t plane = T * F;
  auto out = make_tensor<S>(Shape{N, Ca + Cb, T, F});
  for (size_t n = 0; n < N; ++n) {
    std::memcpy(&out->data[n * (Ca + Cb) * plane], &a->data[n * Ca * plane],
                Ca * plane * sizeof(S));
    std::memcpy(&out->data[(n * (Ca + Cb) + Ca) * plane], &b->data[n * Cb * plane],
                Cb * plane * sizeof(S));
  }
  out->requires_grad = a->requires_grad || b->requires_grad;
  if (out->requires_grad) {
    tape.record([a, b, out, N, Ca, Cb, plane] {
      if (out->grad.empty()) return;
      if (a->requires_grad) {
        a->ensure_grad();
        for (size_t n = 0; n < N; ++n) {
          const S* g = &out->grad[n * (Ca + Cb) * plane];
          S* ag = &a->grad[n * Ca * plane];
          for (size_t i = 0; i < Ca * plane; ++i) ag[i] += g[i];
        }
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (size_t n = 0; n < N; ++n) {
          const S* g = &out->grad[(n * (Ca + Cb) + Ca) * plane];
          S* bg = &b->grad[n * Cb * plane];
          for (size_t i = 0; i < Cb * plane; ++i) bg[i] += g[i];
        }
      }
    });
  }
  return out;
}

template <typename S>
TensorPtr<S> pad_tf(Tape<S>& tape, const TensorPtr<S>& x, size_t t0, size_t t1, size_t f0,
                    size_t f1) {
  if (x->rank() != 4) throw std::invalid_argument("pad_tf: expected [N, C, T, F]");
  const size_t N = x->dim(0), C = x->dim(1), T = x->dim(2), F = x->dim(3);
  const size_t To = T + t0 + t1, Fo = F + f0 + f1;
  auto out = make_tensor<S>(Shape{N, C, To, Fo});
  for (size_t nc = 0; nc < N * C; ++nc)
    for (size_t t = 0; t < T; ++t)
      std::memcpy(&out->data[(nc * To + t + t0) * Fo + f0], &x->data[(nc * T + t) * F],
                  F * sizeof(S));
  out->requires_grad = x->requires_grad;
  if (out->requires_grad) {
    tape.record([x, out, N, C, T, F, To, Fo, t0, f0] {
      if (out->grad.empty()) return;
      x->ensure_grad();
      for (size_t nc = 0; nc < N * C; ++nc)
        for (size_t t = 0; t < T; ++t) {
          const S* g = &out->grad[(nc * To + t + t0) * Fo + f0];
          S* xg = &x->grad[(nc * T + t) * F];
          for (size_t f = 0; f < F; ++f) xg[f] += g[f];
        }
    });
  }
  return out;
}

template <typename S>
TensorPtr<S> crop_tf(Tape<S>& tape, const TensorPtr<S>& x, size_t t0, size_t t1, size_t f0,
                     size_t f1) {
  if (x->rank() != 4) throw std::invalid_argument("crop_tf: expected [N, C, T, F]");
  const size_t N = x->dim(0), C = x->dim(1), T = x->dim(2), F = x->dim(3);
  if (t0 + t1 >= T + 1 || f0 + f1 >= F + 1)
    throw std::invalid_argument("crop_tf: crop exceeds extent " + shape_str(x->shape));
  const size_t To = T - t0 - t1, Fo = F - f0 - f1;
  auto out = make_tensor<S>(Shape{N, C, To, Fo});
  for (size_t nc = 0; nc < N * C; ++nc)
    for (size_t t = 0; t < To; ++t)
      std::memcpy(&out->data[(nc * To + t) * Fo], &x->data[(nc * T + t + t0) * F + f0],
                  Fo * sizeof(S));
  out->requires_grad = x->requires_grad;
  if (out->requires_grad) {
    tape.record([x, out, N, C, T, F, To, Fo, t0, f0] {
      if (out->grad.empty()) return;
      x->ensure_grad();
      for (size_t nc = 0; nc < N * C; ++nc)
        for (size_t t = 0; t < To; ++t) {
          const S* g = &out->grad[(nc * To + t) * Fo];
          S* xg = &x->grad[(nc * T + t + t0) * F + f0];
          for (size_t f = 0; f < Fo; ++f) xg[f] += g[f];
        }
    });
  }
  return out;
}

#define LASS_INSTANTIATE(S)                                                                    \
  template TensorPtr<S> linear<S>(Tape<S>&, const TensorPtr<S>&, const TensorPtr<S>&,          \
                                  const std::type_identity_t<TensorPtr<S>>&);                                        \
  template TensorPtr<S> bmm<S>(Tape<S>&, const TensorPtr<S>&, const TensorPtr<S>&);            \
  template TensorPtr<S> reshape<S>(Tape<S>&, const TensorPtr<S>&, Shape);                      \
  template TensorPtr<S> permute<S>(Tape<S>&, const TensorPtr<S>&, const std::vector<size_t>&); \
  template TensorPtr<S> embedding<S>(Tape<S>&, const std::vector<int>&, Shape,                 \
                                     const TensorPtr<S>&);                                     \
  template TensorPtr<S> first_token<S>(Tape<S>&, const TensorPtr<S>&);                         \
  template TensorPtr<S> slice_cols<S>(Tape<S>&, const TensorPtr<S>&, size_t, size_t);          \
  template TensorPtr<S> concat_channels<S>(Tape<S>&, const TensorPtr<S>&,                      \
                                           const TensorPtr<S>&);                              \
  template TensorPtr<S> pad_tf<S>(Tape<S>&, const TensorPtr<S>&, size_t, size_t, size_t,       \
                                  size_t);                                                     \
  template TensorPtr<S> crop_tf<S>(Tape<S>&, const TensorPtr<S>&, size_t, size_t, size_t,      \
                                   size_t);

LASS_INSTANTIATE(float)
LASS_INSTANTIATE(double)
#undef LASS_INSTANTIATE

}  // namespace lass::ad
