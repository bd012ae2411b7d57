#pragma once

// Per-sample layer kernels shared by the network engine and relevance
// propagation. Pointers address one sample's contiguous activation block.

#include <algorithm>
#include <cstddef>
#include <vector>

#include "fedprune/network.hpp"

namespace fedprune::detail {

// Dot product with eight independent partial sums, combined in a fixed
// order. The split lets the compiler vectorize while staying deterministic.
template <typename T>
inline T dot(const T* a, const T* b, std::size_t n) {
  T lane[8] = {};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    for (std::size_t k = 0; k < 8; ++k) lane[k] += a[i + k] * b[i + k];
  T tail = 0;
  for (; i < n; ++i) tail += a[i] * b[i];
  return ((lane[0] + lane[1]) + (lane[2] + lane[3])) +
         ((lane[4] + lane[5]) + (lane[6] + lane[7])) + tail;
}

// Unfolds one [C,H,W] sample into cols[fan_in][out_h * out_w]; fan-in rows
// are ordered (channel, ky, kx) to match the weight layout.
template <typename T>
void im2col(const LayerInfo& L, const T* in, T* cols) {
  const std::size_t cin = L.in_shape[0], h = L.in_shape[1], w = L.in_shape[2];
  const std::size_t ho = L.out_shape[1], wo = L.out_shape[2];
  const std::size_t k = L.spec.kernel;
  const std::ptrdiff_t pad = L.spec.same_padding ? static_cast<std::ptrdiff_t>(k / 2) : 0;
  for (std::size_t ic = 0; ic < cin; ++ic) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        T* row = cols + ((ic * k + ky) * k + kx) * ho * wo;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + ky) - pad;
          T* dst = row + oy * wo;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) {
            std::fill(dst, dst + wo, T{0});
            continue;
          }
          const T* src = in + (ic * h + static_cast<std::size_t>(iy)) * w;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox + kx) - pad;
            dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w))
                          ? T{0}
                          : src[static_cast<std::size_t>(ix)];
          }
        }
      }
    }
  }
}

// Adds cols back onto the [C,H,W] sample it was unfolded from.
template <typename T>
void col2im_add(const LayerInfo& L, const T* cols, T* in) {
  const std::size_t cin = L.in_shape[0], h = L.in_shape[1], w = L.in_shape[2];
  const std::size_t ho = L.out_shape[1], wo = L.out_shape[2];
  const std::size_t k = L.spec.kernel;
  const std::ptrdiff_t pad = L.spec.same_padding ? static_cast<std::ptrdiff_t>(k / 2) : 0;
  for (std::size_t ic = 0; ic < cin; ++ic) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        const T* row = cols + ((ic * k + ky) * k + kx) * ho * wo;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + ky) - pad;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          T* dst = in + (ic * h + static_cast<std::size_t>(iy)) * w;
          const T* src = row + oy * wo;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox + kx) - pad;
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(w)) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

template <typename T>
std::vector<T>& scratch(std::size_t slot, std::size_t n) {
  thread_local std::vector<T> buffers[2];
  auto& b = buffers[slot];
  if (b.size() < n) b.resize(n);
  return b;
}

template <typename T>
void conv_forward(const LayerInfo& L, const T* params, const T* in, T* out) {
  const std::size_t area = L.out_shape[1] * L.out_shape[2];
  const std::size_t block = L.block_size();
  T* cols = scratch<T>(0, L.fan_in * area).data();
  im2col(L, in, cols);
  for (std::size_t oc = 0; oc < L.channels; ++oc) {
    const T* wt = params + oc * block;
    T* o = out + oc * area;
    std::fill(o, o + area, wt[L.fan_in]);
    for (std::size_t f = 0; f < L.fan_in; ++f) {
      const T wv = wt[f];
      const T* c = cols + f * area;
      for (std::size_t i = 0; i < area; ++i) o[i] += wv * c[i];
    }
  }
}

// Accumulates weight/bias gradients into `grad` and, when `gin` is non-null,
// the input gradient.
template <typename T>
void conv_backward(const LayerInfo& L, const T* params, const T* in,
                   const T* gout, T* grad, T* gin) {
  const std::size_t area = L.out_shape[1] * L.out_shape[2];
  const std::size_t block = L.block_size();
  T* cols = scratch<T>(0, L.fan_in * area).data();
  im2col(L, in, cols);
  for (std::size_t oc = 0; oc < L.channels; ++oc) {
    const T* g = gout + oc * area;
    T* gw = grad + oc * block;
    T gb = 0;
    for (std::size_t i = 0; i < area; ++i) gb += g[i];
    gw[L.fan_in] += gb;
    for (std::size_t f = 0; f < L.fan_in; ++f) gw[f] += dot(g, cols + f * area, area);
  }
  if (!gin) return;
  T* gcols = scratch<T>(1, L.fan_in * area).data();
  std::fill(gcols, gcols + L.fan_in * area, T{0});
  for (std::size_t oc = 0; oc < L.channels; ++oc) {
    const T* wt = params + oc * block;
    const T* g = gout + oc * area;
    for (std::size_t f = 0; f < L.fan_in; ++f) {
      const T wv = wt[f];
      T* c = gcols + f * area;
      for (std::size_t i = 0; i < area; ++i) c[i] += wv * g[i];
    }
  }
  col2im_add(L, gcols, gin);
}

template <typename T>
void dense_forward(const LayerInfo& L, const T* params, const T* in, T* out) {
  const std::size_t block = L.block_size();
  for (std::size_t j = 0; j < L.channels; ++j) {
    const T* wt = params + j * block;
    out[j] = dot(wt, in, L.fan_in) + wt[L.fan_in];
  }
}

template <typename T>
void dense_backward(const LayerInfo& L, const T* params, const T* in,
                    const T* gout, T* grad, T* gin) {
  const std::size_t block = L.block_size();
  for (std::size_t j = 0; j < L.channels; ++j) {
    const T g = gout[j];
    T* gw = grad + j * block;
    for (std::size_t i = 0; i < L.fan_in; ++i) gw[i] += g * in[i];
    gw[L.fan_in] += g;
    if (gin) {
      const T* wt = params + j * block;
      for (std::size_t i = 0; i < L.fan_in; ++i) gin[i] += g * wt[i];
    }
  }
}

// Flat index of the winning input cell for each pooled output cell; ties go
// to the lowest flat index.
template <typename T>
void maxpool_forward(const LayerInfo& L, const T* in, T* out,
                     std::size_t* argmax) {
  const std::size_t c = L.in_shape[0], h = L.in_shape[1], w = L.in_shape[2];
  const std::size_t ho = L.out_shape[1], wo = L.out_shape[2];
  const std::size_t win = L.spec.window;
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox) {
        std::size_t best = ch * h * w + (oy * win) * w + ox * win;
        for (std::size_t dy = 0; dy < win; ++dy) {
          for (std::size_t dx = 0; dx < win; ++dx) {
            const std::size_t idx = ch * h * w + (oy * win + dy) * w + ox * win + dx;
            if (in[idx] > in[best]) best = idx;
          }
        }
        const std::size_t o = (ch * ho + oy) * wo + ox;
        out[o] = in[best];
        if (argmax) argmax[o] = best;
      }
    }
  }
}

}  // namespace fedprune::detail
