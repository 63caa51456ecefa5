#include "voxtr/core/conv.hpp"

#include <stdexcept>

namespace voxtr {

long conv_out_side(long in, int k, int s, int p) {
  long out = (in + 2 * p - k) / s + 1;
  if (out < 1 || (out - 1) * s + k - 2 * p != in) {
    // Callers pass geometries where the window tiling is exact; anything
    // else is a config bug.
    if (out < 1) throw std::invalid_argument("conv output side < 1");
  }
  return out;
}

long convt_out_side(long in, int k, int s, int p) { return s * (in - 1) - 2 * p + k; }

void im2col_3d(const Tensor& src, int k, int s, int p, Tensor& cols) {
  const long C = src.dim(0), D = src.dim(1), H = src.dim(2), W = src.dim(3);
  const long oD = conv_out_side(D, k, s, p), oH = conv_out_side(H, k, s, p), oW = conv_out_side(W, k, s, p);
  const long cells = oD * oH * oW;
  cols = Tensor({C * k * k * k, cells});
  const double* sp = src.data();
  double* cp = cols.data();
  long row = 0;
  for (long c = 0; c < C; ++c) {
    const double* chan = sp + c * D * H * W;
    for (int kd = 0; kd < k; ++kd) {
      for (int kh = 0; kh < k; ++kh) {
        for (int kw = 0; kw < k; ++kw, ++row) {
          double* out_row = cp + row * cells;
          long cell = 0;
          for (long od = 0; od < oD; ++od) {
            const long d = od * s - p + kd;
            const bool d_ok = d >= 0 && d < D;
            for (long oh = 0; oh < oH; ++oh) {
              const long h = oh * s - p + kh;
              const bool h_ok = h >= 0 && h < H;
              for (long ow = 0; ow < oW; ++ow, ++cell) {
                const long w = ow * s - p + kw;
                out_row[cell] =
                    (d_ok && h_ok && w >= 0 && w < W) ? chan[(d * H + h) * W + w] : 0.0;
              }
            }
          }
        }
      }
    }
  }
}

void col2im_3d(const Tensor& cols, const Shape& dst_shape, int k, int s, int p, Tensor& dst) {
  const long C = dst_shape[0], D = dst_shape[1], H = dst_shape[2], W = dst_shape[3];
  const long oD = conv_out_side(D, k, s, p), oH = conv_out_side(H, k, s, p), oW = conv_out_side(W, k, s, p);
  const long cells = oD * oH * oW;
  dst = Tensor(dst_shape);
  const double* cp = cols.data();
  double* dp = dst.data();
  long row = 0;
  for (long c = 0; c < C; ++c) {
    double* chan = dp + c * D * H * W;
    for (int kd = 0; kd < k; ++kd) {
      for (int kh = 0; kh < k; ++kh) {
        for (int kw = 0; kw < k; ++kw, ++row) {
          const double* in_row = cp + row * cells;
          long cell = 0;
          for (long od = 0; od < oD; ++od) {
            const long d = od * s - p + kd;
            const bool d_ok = d >= 0 && d < D;
            for (long oh = 0; oh < oH; ++oh) {
              const long h = oh * s - p + kh;
              const bool h_ok = h >= 0 && h < H;
              for (long ow = 0; ow < oW; ++ow, ++cell) {
                const long w = ow * s - p + kw;
                if (d_ok && h_ok && w >= 0 && w < W) chan[(d * H + h) * W + w] += in_row[cell];
              }
            }
          }
        }
      }
    }
  }
}

void im2col_2d(const Tensor& src, int k, int s, int p, Tensor& cols) {
  const long C = src.dim(0), H = src.dim(1), W = src.dim(2);
  const long oH = conv_out_side(H, k, s, p), oW = conv_out_side(W, k, s, p);
  const long cells = oH * oW;
  cols = Tensor({C * k * k, cells});
  const double* sp = src.data();
  double* cp = cols.data();
  long row = 0;
  for (long c = 0; c < C; ++c) {
    const double* chan = sp + c * H * W;
    for (int kh = 0; kh < k; ++kh) {
      for (int kw = 0; kw < k; ++kw, ++row) {
        double* out_row = cp + row * cells;
        long cell = 0;
        for (long oh = 0; oh < oH; ++oh) {
          const long h = oh * s - p + kh;
          const bool h_ok = h >= 0 && h < H;
          for (long ow = 0; ow < oW; ++ow, ++cell) {
            const long w = ow * s - p + kw;
            out_row[cell] = (h_ok && w >= 0 && w < W) ? chan[h * W + w] : 0.0;
          }
        }
      }
    }
  }
}

void col2im_2d(const Tensor& cols, const Shape& dst_shape, int k, int s, int p, Tensor& dst) {
  const long C = dst_shape[0], H = dst_shape[1], W = dst_shape[2];
  const long oH = conv_out_side(H, k, s, p), oW = conv_out_side(W, k, s, p);
  const long cells = oH * oW;
  dst = Tensor(dst_shape);
  const double* cp = cols.data();
  double* dp = dst.data();
  long row = 0;
  for (long c = 0; c < C; ++c) {
    double* chan = dp + c * H * W;
    for (int kh = 0; kh < k; ++kh) {
      for (int kw = 0; kw < k; ++kw, ++row) {
        const double* in_row = cp + row * cells;
        long cell = 0;
        for (long oh = 0; oh < oH; ++oh) {
          const long h = oh * s - p + kh;
          const bool h_ok = h >= 0 && h < H;
          for (long ow = 0; ow < oW; ++ow, ++cell) {
            const long w = ow * s - p + kw;
            if (h_ok && w >= 0 && w < W) chan[h * W + w] += in_row[cell];
          }
        }
      }
    }
  }
}

}  // namespace voxtr
