#pragma once

// Differentiable operations. Each op evaluates eagerly and, when the active
// tape is recording, registers its backward rule. Tensors are [B, C, T]
// unless noted. S is double for training and float for fast inference.

#include <memory>
#include <vector>

#include "usfgan/dsp.hpp"
#include "usfgan/tensor.hpp"

namespace usfgan::nn {

// --- convolutions ---------------------------------------------------------

// Same-length dilated convolution, stride 1, zero padding (K-1)*dilation
// split left-floor/right-ceil. bias may be undefined.
template <class S>
BasicTensor<S> conv1d(const BasicTensor<S>& x, const BasicTensor<S>& w,
                      const BasicTensor<S>& bias, int64_t dilation = 1,
                      int64_t groups = 1);

// General strided form used by the discriminators.
template <class S>
BasicTensor<S> conv1d_strided(const BasicTensor<S>& x, const BasicTensor<S>& w,
                              const BasicTensor<S>& bias, int64_t stride,
                              int64_t pad_left, int64_t pad_right,
                              int64_t dilation = 1, int64_t groups = 1);

// Pitch-dependent dilated convolution: odd kernel, stride 1, same length,
// taps at t + (k - K/2) * dil[t].
template <class S>
BasicTensor<S> pdconv1d(const BasicTensor<S>& x, const BasicTensor<S>& w,
                        const BasicTensor<S>& bias,
                        std::shared_ptr<const std::vector<int>> dil);

// --- pointwise -------------------------------------------------------------

template <class S>
BasicTensor<S> tanh_op(const BasicTensor<S>& x);
template <class S>
BasicTensor<S> sigmoid_op(const BasicTensor<S>& x);
template <class S>
BasicTensor<S> leaky_relu(const BasicTensor<S>& x, S slope = S(0.1));
template <class S>
BasicTensor<S> exp_op(const BasicTensor<S>& x);
// log(max(x, floor)); zero slope inside the floor region
template <class S>
BasicTensor<S> log_floor(const BasicTensor<S>& x, S floor_val);
template <class S>
BasicTensor<S> sqrt_floor(const BasicTensor<S>& x, S floor_val);
template <class S>
BasicTensor<S> abs_op(const BasicTensor<S>& x);

template <class S>
BasicTensor<S> add(const BasicTensor<S>& x, const BasicTensor<S>& y);
template <class S>
BasicTensor<S> sub(const BasicTensor<S>& x, const BasicTensor<S>& y);
template <class S>
BasicTensor<S> mul(const BasicTensor<S>& x, const BasicTensor<S>& y);
template <class S>
BasicTensor<S> div_op(const BasicTensor<S>& x, const BasicTensor<S>& y);
// a*x + b with scalar constants
template <class S>
BasicTensor<S> affine(const BasicTensor<S>& x, S a, S b);

// --- reductions ------------------------------------------------------------

template <class S>
BasicTensor<S> sum_all(const BasicTensor<S>& x);
template <class S>
BasicTensor<S> mean_all(const BasicTensor<S>& x);

// --- structure -------------------------------------------------------------

// Stops gradient flow; shares no autodiff history with x.
template <class S>
BasicTensor<S> detach(const BasicTensor<S>& x);

// Reflection padding on the right up to the next multiple of p.
template <class S>
BasicTensor<S> reflect_pad_to_multiple(const BasicTensor<S>& x, int64_t p);

// [B, C, T] -> [B*p, C, T/p]; sub-batch j holds samples congruent to j mod p.
// Requires T divisible by p.
template <class S>
BasicTensor<S> fold_period(const BasicTensor<S>& x, int64_t p);

// Time-axis slice [start, start + len); gradient scatters back into the range.
template <class S>
BasicTensor<S> narrow_time(const BasicTensor<S>& x, int64_t start, int64_t len);

template <class S>
BasicTensor<S> avg_pool2(const BasicTensor<S>& x);

// --- spectra (double precision only; used by the losses) --------------------

// Amplitude STFT per batch item: [B, 1, T] -> [B, frames, bins].
Tensor stft_amplitude(const Tensor& x, const StftConfig& cfg);

// Mel projection with the amplitude floor: [B, F, bins] -> [B, F, mels].
Tensor apply_filterbank(const Tensor& x,
                        std::shared_ptr<const MelFilterbank> fb);

// Log spectral envelope of an amplitude spectrogram, one smoothing width per
// frame (f0s[item][frame], 0 = unvoiced default width).
Tensor envelope_log(const Tensor& x,
                    std::shared_ptr<const EnvelopeSmoother> smoother,
                    std::shared_ptr<const std::vector<std::vector<double>>> f0s);

}  // namespace usfgan::nn
