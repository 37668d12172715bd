#ifndef USFGAN_FFT_HPP
#define USFGAN_FFT_HPP

#include <complex>
#include <cstddef>
#include <vector>

namespace usfgan {

// Real-input FFT helpers backed by FFTW. Plans are cached per size and
// created lazily under a lock; execution on caller-owned buffers is
// thread-safe. Sizes must be powers of two.
namespace fft {

// out has n/2 + 1 bins.
void r2c(const double* in, std::complex<double>* out, int n);

// Inverse of r2c including the 1/n normalization; in has n/2 + 1 bins.
void c2r(const std::complex<double>* in, double* out, int n);

bool is_pow2(int n);

}  // namespace fft

}  // namespace usfgan

#endif  // USFGAN_FFT_HPP
