#include <cstring>

#include "lass/kernels.hpp"
#include "lass/ops.hpp"

// Direct convolution kernels in [N, C, T, F] layout, F contiguous. Stride-1
// 4-wide kernels run as fused shifted-row accumulations over a zero-padded
// copy of each image, which is what the frequency-innermost layout is for.
namespace lass::ad {

namespace {

// Zero-padded copy of one [C, T, F] image into [C, T+pt+pb, F+pl+pr].
template <typename S>
void pad_image(const S* src, size_t C, size_t T, size_t F, int pt, int pb, int pl, int pr,
               std::vector<S>& dst) {
  const size_t Tp = T + pt + pb, Fp = F + pl + pr;
  dst.assign(C * Tp * Fp, S(0));
  for (size_t c = 0; c < C; ++c)
    for (size_t t = 0; t < T; ++t)
      std::memcpy(&dst[(c * Tp + t + pt) * Fp + pl], &src[(c * T + t) * F], F * sizeof(S));
}

// Adds the interior of a padded gradient image back onto [C, T, F].
template <typename S>
void unpad_add(const std::vector<S>& padded, size_t C, size_t T, size_t F, int pt, int pl,
               size_t Tp, size_t Fp, S* dst) {
  for (size_t c = 0; c < C; ++c)
    for (size_t t = 0; t < T; ++t) {
      const S* src = &padded[(c * Tp + t + pt) * Fp + pl];
      S* d = &dst[(c * T + t) * F];
      for (size_t f = 0; f < F; ++f) d[f] += src[f];
    }
}

template <typename S>
void conv_forward_image(const std::vector<S>& P, const S* kernel, const S* bias, size_t Ci,
                        size_t Co, size_t Tp, size_t Fp, size_t To, size_t Fo, size_t kh,
                        size_t kw, int stride, S* out, std::vector<S>& acc) {
  acc.resize(Fo);
  for (size_t co = 0; co < Co; ++co)
    for (size_t to = 0; to < To; ++to) {
      std::fill(acc.begin(), acc.end(), S(0));
      for (size_t ci = 0; ci < Ci; ++ci)
        for (size_t ky = 0; ky < kh; ++ky) {
          const S* row = &P[(ci * Tp + to * stride + ky) * Fp];
          const S* kr = &kernel[((co * Ci + ci) * kh + ky) * kw];
          if (stride == 1 && kw == 4) {
            const S k0 = kr[0], k1 = kr[1], k2 = kr[2], k3 = kr[3];
            S* a = acc.data();
            for (size_t f = 0; f < Fo; ++f)
              a[f] += k0 * row[f] + k1 * row[f + 1] + k2 * row[f + 2] + k3 * row[f + 3];
          } else {
            for (size_t kx = 0; kx < kw; ++kx) {
              const S k = kr[kx];
              for (size_t f = 0; f < Fo; ++f) acc[f] += k * row[f * stride + kx];
            }
          }
        }
      S* orow = &out[(co * To + to) * Fo];
      const S b = bias ? bias[co] : S(0);
      for (size_t f = 0; f < Fo; ++f) orow[f] = acc[f] + b;
    }
}

}  // namespace

template <typename S>
TensorPtr<S> conv2d(Tape<S>& tape, const TensorPtr<S>& x, const TensorPtr<S>& kernel,
                    const std::type_identity_t<TensorPtr<S>>& bias, int stride, ConvPad pad) {
  if (x->rank() != 4) throw std::invalid_argument("conv2d: input must be [N, C, T, F]");
  if (kernel->rank() != 4)
    throw std::invalid_argument("conv2d: kernel must be [Co, Ci, kh, kw]");
  const size_t N = x->dim(0), Ci = x->dim(1), T = x->dim(2), F = x->dim(3);
  const size_t Co = kernel->dim(0), kh = kernel->dim(2), kw = kernel->dim(3);
  if (kernel->dim(1) != Ci)
    throw std::invalid_argument("conv2d: kernel channel axis " +
                                std::to_string(kernel->dim(1)) + " != input channels " +
                                std::to_string(Ci));
  if (bias && bias->numel() != Co)
    throw std::invalid_argument("conv2d: bias length != output channels");
  if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
  const size_t Tp = T + pad.t0 + pad.t1, Fp = F + pad.f0 + pad.f1;
  if (Tp < kh || Fp < kw)
    throw std::invalid_argument("conv2d: kernel larger than padded input on axis T or F");
  const size_t To = (Tp - kh) / stride + 1, Fo = (Fp - kw) / stride + 1;

  auto out = make_tensor<S>(Shape{N, Co, To, Fo});
  std::vector<S> P, acc;
  for (size_t n = 0; n < N; ++n) {
    pad_image(&x->data[n * Ci * T * F], Ci, T, F, pad.t0, pad.t1, pad.f0, pad.f1, P);
    conv_forward_image(P, kernel->data.data(), bias ? bias->data.data() : nullptr, Ci, Co,
                       Tp, Fp, To, Fo, kh, kw, stride, &out->data[n * Co * To * Fo], acc);
  }

  out->requires_grad =
      x->requires_grad || kernel->requires_grad || (bias && bias->requires_grad);
  if (out->requires_grad) {
    tape.record([x, kernel, bias, out, N, Ci, Co, T, F, Tp, Fp, To, Fo, kh, kw, stride,
                 pad] {
      if (out->grad.empty()) return;
      std::vector<S> P, dP;
      const bool need_dx = x->requires_grad;
      const bool need_dk = kernel->requires_grad;
      if (need_dx) x->ensure_grad();
      if (need_dk) kernel->ensure_grad();
      if (bias && bias->requires_grad) bias->ensure_grad();
      for (size_t n = 0; n < N; ++n) {
        const S* g = &out->grad[n * Co * To * Fo];
        if (need_dk)
          pad_image(&x->data[n * Ci * T * F], Ci, T, F, pad.t0, pad.t1, pad.f0, pad.f1, P);
        if (need_dx) dP.assign(Ci * Tp * Fp, S(0));
        for (size_t co = 0; co < Co; ++co) {
          for (size_t to = 0; to < To; ++to) {
            const S* grow = &g[(co * To + to) * Fo];
            for (size_t ci = 0; ci < Ci; ++ci)
              for (size_t ky = 0; ky < kh; ++ky) {
                const size_t prow_off = (ci * Tp + to * stride + ky) * Fp;
                const S* kr = &kernel->data[((co * Ci + ci) * kh + ky) * kw];
                if (need_dx) {
                  S* drow = &dP[prow_off];
                  if (stride == 1) {
                    for (size_t kx = 0; kx < kw; ++kx) axpy_n(drow + kx, grow, kr[kx], Fo);
                  } else {
                    for (size_t kx = 0; kx < kw; ++kx) {
                      const S k = kr[kx];
                      for (size_t f = 0; f < Fo; ++f) drow[f * stride + kx] += k * grow[f];
                    }
                  }
                }
                if (need_dk) {
                  const S* prow = &P[prow_off];
                  S* kg = &kernel->grad[((co * Ci + ci) * kh + ky) * kw];
                  for (size_t kx = 0; kx < kw; ++kx) {
                    double acc;
                    if (stride == 1) {
                      acc = dot_n(grow, prow + kx, Fo);
                    } else {
                      acc = 0.0;
                      for (size_t f = 0; f < Fo; ++f)
                        acc += static_cast<double>(grow[f]) * prow[f * stride + kx];
                    }
                    kg[kx] += static_cast<S>(acc);
                  }
                }
              }
          }
          if (bias && bias->requires_grad)
            bias->grad[co] += static_cast<S>(sum_n(&g[co * To * Fo], To * Fo));
        }
        if (need_dx)
          unpad_add(dP, Ci, T, F, pad.t0, pad.f0, Tp, Fp, &x->grad[n * Ci * T * F]);
      }
    });
  }
  return out;
}

namespace {

// Stride-2 4x4 transposed conv, output 2T x 2F with one implicit output-side
// pad. Each output pixel of phase (to&1, fo&1) receives exactly four taps;
// the tap tables below give (row offset into the 1-padded input, ky).
struct PhaseTap {
  int off;  // offset into padded axis, base index u
  int k;    // kernel index along that axis
};
constexpr PhaseTap kPhase0[2] = {{1, 1}, {0, 3}};  // in[u]*k1 + in[u-1]*k3
constexpr PhaseTap kPhase1[2] = {{1, 2}, {2, 0}};  // in[u]*k2 + in[u+1]*k0

}  // namespace

template <typename S>
TensorPtr<S> conv_transpose2d(Tape<S>& tape, const TensorPtr<S>& x, const TensorPtr<S>& kernel,
                              const std::type_identity_t<TensorPtr<S>>& bias) {
  if (x->rank() != 4) throw std::invalid_argument("conv_transpose2d: input must be [N, C, T, F]");
  if (kernel->rank() != 4 || kernel->dim(2) != 4 || kernel->dim(3) != 4)
    throw std::invalid_argument("conv_transpose2d: kernel must be [Ci, Co, 4, 4]");
  const size_t N = x->dim(0), Ci = x->dim(1), T = x->dim(2), F = x->dim(3);
  if (kernel->dim(0) != Ci)
    throw std::invalid_argument("conv_transpose2d: kernel input axis " +
                                std::to_string(kernel->dim(0)) + " != input channels " +
                                std::to_string(Ci));
  const size_t Co = kernel->dim(1);
  if (bias && bias->numel() != Co)
    throw std::invalid_argument("conv_transpose2d: bias length != output channels");
  const size_t To = 2 * T, Fo = 2 * F;
  const size_t Tp = T + 2, Fp = F + 2;

  auto out = make_tensor<S>(Shape{N, Co, To, Fo});
  std::vector<S> P, acc(F);
  for (size_t n = 0; n < N; ++n) {
    pad_image(&x->data[n * Ci * T * F], Ci, T, F, 1, 1, 1, 1, P);
    S* onb = &out->data[n * Co * To * Fo];
    for (size_t co = 0; co < Co; ++co) {
      const S b = bias ? bias->data[co] : S(0);
      for (size_t u = 0; u < T; ++u)
        for (int a = 0; a < 2; ++a) {
          const PhaseTap* pt = a ? kPhase1 : kPhase0;
          for (int bph = 0; bph < 2; ++bph) {
            const PhaseTap* pf = bph ? kPhase1 : kPhase0;
            std::fill(acc.begin(), acc.end(), S(0));
            for (size_t ci = 0; ci < Ci; ++ci)
              for (int i = 0; i < 2; ++i) {
                const S* row = &P[(ci * Tp + u + pt[i].off) * Fp];
                const S* kr = &kernel->data[((ci * Co + co) * 4 + pt[i].k) * 4];
                const S ka = kr[pf[0].k], kb = kr[pf[1].k];
                const size_t oa = pf[0].off, ob = pf[1].off;
                for (size_t v = 0; v < F; ++v) acc[v] += ka * row[v + oa] + kb * row[v + ob];
              }
            S* orow = &onb[(co * To + 2 * u + a) * Fo];
            for (size_t v = 0; v < F; ++v) orow[2 * v + bph] = acc[v] + b;
          }
        }
    }
  }

  out->requires_grad =
      x->requires_grad || kernel->requires_grad || (bias && bias->requires_grad);
  if (out->requires_grad) {
    tape.record([x, kernel, bias, out, N, Ci, Co, T, F, To, Fo, Tp, Fp] {
      if (out->grad.empty()) return;
      if (x->requires_grad) x->ensure_grad();
      if (kernel->requires_grad) kernel->ensure_grad();
      if (bias && bias->requires_grad) bias->ensure_grad();
      // Phase planes of the upstream gradient, each padded by one, so both
      // remaining passes run on contiguous rows.
      std::vector<S> Q[2][2];
      std::vector<S> P, acc(F);
      for (size_t n = 0; n < N; ++n) {
        const S* g = &out->grad[n * Co * To * Fo];
        for (int a = 0; a < 2; ++a)
          for (int bb = 0; bb < 2; ++bb) Q[a][bb].assign(Co * Tp * Fp, S(0));
        for (size_t co = 0; co < Co; ++co)
          for (size_t to = 0; to < To; ++to) {
            const S* grow = &g[(co * To + to) * Fo];
            const int a = static_cast<int>(to & 1);
            const size_t u = to >> 1;
            S* q0 = &Q[a][0][(co * Tp + u + 1) * Fp + 1];
            S* q1 = &Q[a][1][(co * Tp + u + 1) * Fp + 1];
            for (size_t v = 0; v < F; ++v) {
              q0[v] = grow[2 * v];
              q1[v] = grow[2 * v + 1];
            }
          }
        if (x->requires_grad) {
          S* dx = &x->grad[n * Ci * T * F];
          for (size_t ci = 0; ci < Ci; ++ci)
            for (size_t t = 0; t < T; ++t) {
              std::fill(acc.begin(), acc.end(), S(0));
              for (size_t co = 0; co < Co; ++co) {
                const S* kbase = &kernel->data[(ci * Co + co) * 16];
                for (int a = 0; a < 2; ++a) {
                  const PhaseTap* pt = a ? kPhase1 : kPhase0;
                  for (int i = 0; i < 2; ++i) {
                    // Transposed row offset: forward read in[u + pt.off - 1],
                    // so the gradient at t comes from plane row t + (2 - pt.off).
                    const S* row = &Q[a][0][(co * Tp + t + 2 - pt[i].off) * Fp];
                    const S* row1 = &Q[a][1][(co * Tp + t + 2 - pt[i].off) * Fp];
                    const S* kr = &kbase[pt[i].k * 4];
                    for (int bb = 0; bb < 2; ++bb) {
                      const PhaseTap* pf = bb ? kPhase1 : kPhase0;
                      const S* r = bb ? row1 : row;
                      const S ka = kr[pf[0].k], kb2 = kr[pf[1].k];
                      const size_t oa = 2 - pf[0].off, ob = 2 - pf[1].off;
                      for (size_t v = 0; v < F; ++v)
                        acc[v] += ka * r[v + oa] + kb2 * r[v + ob];
                    }
                  }
                }
              }
              S* drow = &dx[(ci * T + t) * F];
              for (size_t v = 0; v < F; ++v) drow[v] += acc[v];
            }
        }
        if (kernel->requires_grad) {
          for (size_t ci = 0; ci < Ci; ++ci)
            for (size_t co = 0; co < Co; ++co) {
              S* kg = &kernel->grad[(ci * Co + co) * 16];
              for (int a = 0; a < 2; ++a) {
                const PhaseTap* pt = a ? kPhase1 : kPhase0;
                for (int i = 0; i < 2; ++i)
                  for (int bb = 0; bb < 2; ++bb) {
                    const PhaseTap* pf = bb ? kPhase1 : kPhase0;
                    for (int j = 0; j < 2; ++j) {
                      // d k[ky=pt[i].k, kx=pf[j].k] = sum in[t, v] * q_phase[...]
                      double s = 0.0;
                      for (size_t t = 0; t < T; ++t) {
                        const S* in_row = &x->data[((n * Ci + ci) * T + t) * F];
                        const S* qrow =
                            &Q[a][bb][(co * Tp + t + 2 - pt[i].off) * Fp + 2 - pf[j].off];
                        s += dot_n(in_row, qrow, F);
                      }
                      kg[pt[i].k * 4 + pf[j].k] += static_cast<S>(s);
                    }
                  }
              }
            }
        }
        if (bias && bias->requires_grad) {
          for (size_t co = 0; co < Co; ++co)
            bias->grad[co] += static_cast<S>(sum_n(&g[co * To * Fo], To * Fo));
        }
      }
    });
  }
  return out;
}

template <typename S>
TensorPtr<S> avg_pool2d(Tape<S>& tape, const TensorPtr<S>& x) {
  if (x->rank() != 4) throw std::invalid_argument("avg_pool2d: input must be [N, C, T, F]");
  const size_t N = x->dim(0), C = x->dim(1), T = x->dim(2), F = x->dim(3);
  if (T % 2 != 0 || F % 2 != 0)
    throw std::invalid_argument("avg_pool2d: spatial dims must be even, got " +
                                shape_str(x->shape));
  const size_t To = T / 2, Fo = F / 2;
  auto out = make_tensor<S>(Shape{N, C, To, Fo});
  for (size_t nc = 0; nc < N * C; ++nc)
    for (size_t t = 0; t < To; ++t) {
      const S* r0 = &x->data[(nc * T + 2 * t) * F];
      const S* r1 = r0 + F;
      S* o = &out->data[(nc * To + t) * Fo];
      for (size_t f = 0; f < Fo; ++f)
        o[f] = (r0[2 * f] + r0[2 * f + 1] + r1[2 * f] + r1[2 * f + 1]) * S(0.25);
    }
  out->requires_grad = x->requires_grad;
  if (out->requires_grad) {
    tape.record([x, out, N, C, T, F, To, Fo] {
      if (out->grad.empty()) return;
      x->ensure_grad();
      for (size_t nc = 0; nc < N * C; ++nc)
        for (size_t t = 0; t < To; ++t) {
          const S* g = &out->grad[(nc * To + t) * Fo];
          S* r0 = &x->grad[(nc * T + 2 * t) * F];
          S* r1 = r0 + F;
          for (size_t f = 0; f < Fo; ++f) {
            const S q = g[f] * S(0.25);
            r0[2 * f] += q;
            r0[2 * f + 1] += q;
            r1[2 * f] += q;
            r1[2 * f + 1] += q;
          }
        }
    });
  }
  return out;
}

#define LASS_INSTANTIATE(S)                                                                  \
  template TensorPtr<S> conv2d<S>(Tape<S>&, const TensorPtr<S>&, const TensorPtr<S>&,        \
                                  const std::type_identity_t<TensorPtr<S>>&, int, ConvPad);  \
  template TensorPtr<S> conv_transpose2d<S>(Tape<S>&, const TensorPtr<S>&,                   \
                                            const TensorPtr<S>&,                             \
                                            const std::type_identity_t<TensorPtr<S>>&);      \
  template TensorPtr<S> avg_pool2d<S>(Tape<S>&, const TensorPtr<S>&);

LASS_INSTANTIATE(float)
LASS_INSTANTIATE(double)
#undef LASS_INSTANTIATE

}  // namespace lass::ad
