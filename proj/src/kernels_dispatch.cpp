#include <atomic>

#include "usfgan/kernels.hpp"

namespace usfgan::kernels {

namespace {
std::atomic<Backend> g_backend{Backend::omp};
}

void set_backend(Backend b) { g_backend.store(b); }
Backend backend() { return g_backend.load(); }

int64_t conv_out_len(int64_t t_in, int64_t kernel, int64_t stride,
                     int64_t dilation, int64_t pad_left, int64_t pad_right) {
  const int64_t span = (kernel - 1) * dilation + 1;
  return (t_in + pad_left + pad_right - span) / stride + 1;
}

#define USFGAN_DISPATCH(call)                  \
  if (g_backend.load() == Backend::serial) {   \
    serial::call;                              \
  } else {                                     \
    omp::call;                                 \
  }

template <class S>
void conv1d_forward(S* y, const S* x, const S* w, const S* bias,
                    const ConvDims& d) {
  USFGAN_DISPATCH(conv1d_forward(y, x, w, bias, d))
}
template <class S>
void conv1d_backward_x(S* gx, const S* gy, const S* w, const ConvDims& d) {
  USFGAN_DISPATCH(conv1d_backward_x(gx, gy, w, d))
}
template <class S>
void conv1d_backward_w(S* gw, S* gb, const S* gy, const S* x,
                       const ConvDims& d) {
  USFGAN_DISPATCH(conv1d_backward_w(gw, gb, gy, x, d))
}
template <class S>
void pdconv1d_forward(S* y, const S* x, const S* w, const S* bias,
                      const int* dil, const ConvDims& d) {
  USFGAN_DISPATCH(pdconv1d_forward(y, x, w, bias, dil, d))
}
template <class S>
void pdconv1d_backward_x(S* gx, const S* gy, const S* w, const int* dil,
                         const ConvDims& d) {
  USFGAN_DISPATCH(pdconv1d_backward_x(gx, gy, w, dil, d))
}
template <class S>
void pdconv1d_backward_w(S* gw, S* gb, const S* gy, const S* x,
                         const int* dil, const ConvDims& d) {
  USFGAN_DISPATCH(pdconv1d_backward_w(gw, gb, gy, x, dil, d))
}
template <class S>
void avg_pool2_forward(S* y, const S* x, int64_t batch_channels,
                       int64_t t_in) {
  USFGAN_DISPATCH(avg_pool2_forward(y, x, batch_channels, t_in))
}
template <class S>
void avg_pool2_backward_x(S* gx, const S* gy, int64_t batch_channels,
                          int64_t t_in) {
  USFGAN_DISPATCH(avg_pool2_backward_x(gx, gy, batch_channels, t_in))
}

#undef USFGAN_DISPATCH

#define USFGAN_INSTANTIATE(S)                                                \
  template void conv1d_forward<S>(S*, const S*, const S*, const S*,          \
                                  const ConvDims&);                          \
  template void conv1d_backward_x<S>(S*, const S*, const S*,                 \
                                     const ConvDims&);                       \
  template void conv1d_backward_w<S>(S*, S*, const S*, const S*,             \
                                     const ConvDims&);                       \
  template void pdconv1d_forward<S>(S*, const S*, const S*, const S*,        \
                                    const int*, const ConvDims&);            \
  template void pdconv1d_backward_x<S>(S*, const S*, const S*, const int*,   \
                                       const ConvDims&);                     \
  template void pdconv1d_backward_w<S>(S*, S*, const S*, const S*,           \
                                       const int*, const ConvDims&);         \
  template void avg_pool2_forward<S>(S*, const S*, int64_t, int64_t);        \
  template void avg_pool2_backward_x<S>(S*, const S*, int64_t, int64_t);

USFGAN_INSTANTIATE(double)
USFGAN_INSTANTIATE(float)
#undef USFGAN_INSTANTIATE

}  // namespace usfgan::kernels
