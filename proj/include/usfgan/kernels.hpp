#pragma once

// Hot inner loops for the network stack. Every kernel exists twice: a plain
// serial reference (kernels_serial.cpp) and an OpenMP version
// (kernels_omp.cpp) with identical per-element accumulation order, so the two
// agree bitwise and the tests can hold them against each other. The dispatch
// wrappers pick the backend from a process-global flag.
//
// Layouts: x [B, Ci, Tin], y [B, Co, Tout], w [Co, Ci/groups, K], row-major
// and contiguous. Backward kernels accumulate (+=) into their grad outputs.

#include <cstdint>

namespace usfgan::kernels {

enum class Backend { serial, omp };

void set_backend(Backend b);
Backend backend();

struct ConvDims {
  int64_t batch = 1;
  int64_t c_in = 1;
  int64_t c_out = 1;
  int64_t t_in = 0;
  int64_t t_out = 0;
  int64_t kernel = 1;
  int64_t stride = 1;
  int64_t dilation = 1;
  int64_t groups = 1;
  int64_t pad_left = 0;
};

// Output time length for zero padding pad_left + pad_right.
int64_t conv_out_len(int64_t t_in, int64_t kernel, int64_t stride,
                     int64_t dilation, int64_t pad_left, int64_t pad_right);

namespace serial {
template <class S>
void conv1d_forward(S* y, const S* x, const S* w, const S* bias,
                    const ConvDims& d);
template <class S>
void conv1d_backward_x(S* gx, const S* gy, const S* w, const ConvDims& d);
template <class S>
void conv1d_backward_w(S* gw, S* gb, const S* gy, const S* x,
                       const ConvDims& d);

// Per-sample dilation, stride 1, odd kernel, same-length output. dil has
// t_in entries; taps sit at t + (k - K/2) * dil[t].
template <class S>
void pdconv1d_forward(S* y, const S* x, const S* w, const S* bias,
                      const int* dil, const ConvDims& d);
template <class S>
void pdconv1d_backward_x(S* gx, const S* gy, const S* w, const int* dil,
                         const ConvDims& d);
template <class S>
void pdconv1d_backward_w(S* gw, S* gb, const S* gy, const S* x,
                         const int* dil, const ConvDims& d);

// Non-overlapping window-2 average pool; t_out = t_in / 2 (floor).
template <class S>
void avg_pool2_forward(S* y, const S* x, int64_t batch_channels, int64_t t_in);
template <class S>
void avg_pool2_backward_x(S* gx, const S* gy, int64_t batch_channels,
                          int64_t t_in);
}  // namespace serial

namespace omp {
template <class S>
void conv1d_forward(S* y, const S* x, const S* w, const S* bias,
                    const ConvDims& d);
template <class S>
void conv1d_backward_x(S* gx, const S* gy, const S* w, const ConvDims& d);
template <class S>
void conv1d_backward_w(S* gw, S* gb, const S* gy, const S* x,
                       const ConvDims& d);
template <class S>
void pdconv1d_forward(S* y, const S* x, const S* w, const S* bias,
                      const int* dil, const ConvDims& d);
template <class S>
void pdconv1d_backward_x(S* gx, const S* gy, const S* w, const int* dil,
                         const ConvDims& d);
template <class S>
void pdconv1d_backward_w(S* gw, S* gb, const S* gy, const S* x,
                         const int* dil, const ConvDims& d);
template <class S>
void avg_pool2_forward(S* y, const S* x, int64_t batch_channels, int64_t t_in);
template <class S>
void avg_pool2_backward_x(S* gx, const S* gy, int64_t batch_channels,
                          int64_t t_in);
}  // namespace omp

// Backend-dispatching wrappers used by the op layer.
template <class S>
void conv1d_forward(S* y, const S* x, const S* w, const S* bias,
                    const ConvDims& d);
template <class S>
void conv1d_backward_x(S* gx, const S* gy, const S* w, const ConvDims& d);
template <class S>
void conv1d_backward_w(S* gw, S* gb, const S* gy, const S* x,
                       const ConvDims& d);
template <class S>
void pdconv1d_forward(S* y, const S* x, const S* w, const S* bias,
                      const int* dil, const ConvDims& d);
template <class S>
void pdconv1d_backward_x(S* gx, const S* gy, const S* w, const int* dil,
                         const ConvDims& d);
template <class S>
void pdconv1d_backward_w(S* gw, S* gb, const S* gy, const S* x,
                         const int* dil, const ConvDims& d);
template <class S>
void avg_pool2_forward(S* y, const S* x, int64_t batch_channels, int64_t t_in);
template <class S>
void avg_pool2_backward_x(S* gx, const S* gy, int64_t batch_channels,
                          int64_t t_in);

}  // namespace usfgan::kernels
