// Copyright 2026 The VP-NTK Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef VPNTK_SRC_CONV_H_
#define VPNTK_SRC_CONV_H_

#include "vpntk/linalg.h"

namespace vpntk::internal {

// Geometry of a square-kernel 2-D convolution over (C, H, W) tensors.
struct ConvGeometry {
  int in_channels;
  int in_height;
  int in_width;
  int out_channels;
  int kernel;
  int stride;
  int pad;

  int conv_out_height() const { return (in_height + 2 * pad - kernel) / stride + 1; }
  int conv_out_width() const { return (in_width + 2 * pad - kernel) / stride + 1; }
  int deconv_out_height() const { return (in_height - 1) * stride - 2 * pad + kernel; }
  int deconv_out_width() const { return (in_width - 1) * stride - 2 * pad + kernel; }
};

// weights: (out_channels, in_channels, k, k); bias: (out_channels).
inline Vector Conv2d(const Vector& in, const float* weights, const float* bias,
                     const ConvGeometry& g) {
  const int oh = g.conv_out_height();
  const int ow = g.conv_out_width();
  Vector out(g.out_channels * oh * ow);
  for (int oc = 0; oc < g.out_channels; ++oc) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        double acc = bias[oc];
        for (int ic = 0; ic < g.in_channels; ++ic) {
          for (int ky = 0; ky < g.kernel; ++ky) {
            const int iy = oy * g.stride - g.pad + ky;
            if (iy < 0 || iy >= g.in_height) continue;
            for (int kx = 0; kx < g.kernel; ++kx) {
              const int ix = ox * g.stride - g.pad + kx;
              if (ix < 0 || ix >= g.in_width) continue;
              acc += static_cast<double>(
                         weights[((oc * g.in_channels + ic) * g.kernel + ky) *
                                     g.kernel + kx]) *
                     in((ic * g.in_height + iy) * g.in_width + ix);
            }
          }
        }
        out((oc * oh + oy) * ow + ox) = acc;
      }
    }
  }
  return out;
}

// Gradient of <grad_out, Conv2d(in)> with respect to `in`.
inline Vector Conv2dInputVjp(const Vector& grad_out, const float* weights,
                             const ConvGeometry& g) {
  const int oh = g.conv_out_height();
  const int ow = g.conv_out_width();
  Vector grad_in = Vector::Zero(g.in_channels * g.in_height * g.in_width);
  for (int oc = 0; oc < g.out_channels; ++oc) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const double go = grad_out((oc * oh + oy) * ow + ox);
        for (int ic = 0; ic < g.in_channels; ++ic) {
          for (int ky = 0; ky < g.kernel; ++ky) {
            const int iy = oy * g.stride - g.pad + ky;
            if (iy < 0 || iy >= g.in_height) continue;
            for (int kx = 0; kx < g.kernel; ++kx) {
              const int ix = ox * g.stride - g.pad + kx;
              if (ix < 0 || ix >= g.in_width) continue;
              grad_in((ic * g.in_height + iy) * g.in_width + ix) +=
                  go * weights[((oc * g.in_channels + ic) * g.kernel + ky) *
                                   g.kernel + kx];
            }
          }
        }
      }
    }
  }
  return grad_in;
}

// Transposed convolution. weights: (in_channels, out_channels, k, k).
inline Vector ConvTranspose2d(const Vector& in, const float* weights,
                              const float* bias, const ConvGeometry& g) {
  const int oh = g.deconv_out_height();
  const int ow = g.deconv_out_width();
  Vector out(g.out_channels * oh * ow);
  for (int oc = 0; oc < g.out_channels; ++oc) {
    out.segment(oc * oh * ow, oh * ow).setConstant(bias[oc]);
  }
  for (int ic = 0; ic < g.in_channels; ++ic) {
    for (int iy = 0; iy < g.in_height; ++iy) {
      for (int ix = 0; ix < g.in_width; ++ix) {
        const double v = in((ic * g.in_height + iy) * g.in_width + ix);
        for (int oc = 0; oc < g.out_channels; ++oc) {
          for (int ky = 0; ky < g.kernel; ++ky) {
            const int oy = iy * g.stride - g.pad + ky;
            if (oy < 0 || oy >= oh) continue;
            for (int kx = 0; kx < g.kernel; ++kx) {
              const int ox = ix * g.stride - g.pad + kx;
              if (ox < 0 || ox >= ow) continue;
              out((oc * oh + oy) * ow + ox) +=
                  v * weights[((ic * g.out_channels + oc) * g.kernel + ky) *
                                  g.kernel + kx];
            }
          }
        }
      }
    }
  }
  return out;
}

}  // namespace vpntk::internal

#endif  // VPNTK_SRC_CONV_H_
