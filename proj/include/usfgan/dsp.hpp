#ifndef USFGAN_DSP_HPP
#define USFGAN_DSP_HPP

#include <cstdint>
#include <vector>

#include "usfgan/audio.hpp"

namespace usfgan {

// Frame-by-bin amplitude array (row-major, frames x bins).
struct Spectrogram {
  int frames = 0;
  int bins = 0;
  std::vector<double> values;
  int frame_shift = 0;
  int fft_size = 0;
  int sample_rate = 24000;

  double& at(int t, int k) { return values[size_t(t) * bins + k]; }
  double at(int t, int k) const { return values[size_t(t) * bins + k]; }
  const double* row(int t) const { return values.data() + size_t(t) * bins; }
  double* row(int t) { return values.data() + size_t(t) * bins; }
};

struct StftConfig {
  int fft_size = 1024;
  int frame_shift = 120;
  int win_length = 0;  // 0 means fft_size
};

// Frame count convention used everywhere: centers at t = f * frame_shift,
// f = 0 .. ceil(n/shift) - 1.
inline int n_frames_for(size_t n_samples, int frame_shift) {
  return static_cast<int>((n_samples + frame_shift - 1) / frame_shift);
}

// Periodic Hann.
std::vector<double> hann_window(int length);

// One reflection-padded, windowed analysis frame (win_length samples), as
// fed to the FFT. Exposed so tests can form per-frame sums independently.
std::vector<double> windowed_frame(const AudioBuffer& audio, int frame,
                                   const StftConfig& cfg);

// Amplitude spectrogram |STFT|, centered frames, reflection padding.
// Requires fft_size a power of two, frame_shift <= fft_size, and at least
// fft_size input samples ("input too short" otherwise).
Spectrogram stft(const AudioBuffer& audio, const StftConfig& cfg);

// Pitch-adaptive spectral envelope smoothing: rectangular smoothing of the
// log spectrum (width 2*f0/3 Hz) followed by cepstral liftering with the
// Pitch-adaptive spectral smoother: a rectangular average over the power
// spectrum fills the nulls between harmonics, then a quefrency lifter wipes
// whatever harmonic ripple survives. Both stages are linear maps (boxcar on
// power, lifter on log amplitude) and expose their adjoints so gradients can
// pass through the full chain.
class EnvelopeSmoother {
 public:
  static constexpr double kQ1 = -0.15;
  static constexpr double kDefaultF0 = 160.0;  // used for unvoiced frames

  EnvelopeSmoother(int sample_rate, int fft_size);

  // Rows are fft_size/2 + 1 long throughout.
  void boxcar_row(const double* in, double* out, double f0) const;
  void boxcar_adjoint_row(const double* in, double* out, double f0) const;
  void lifter_row(const double* in, double* out, double f0) const;
  void lifter_adjoint_row(const double* in, double* out, double f0) const;

  // Full chain from an amplitude row to a log-envelope row:
  // log E = lifter(0.5 * log(max(boxcar(A^2), floor^2))).
  // f0 = 0 falls back to the default width.
  void log_envelope_row(const double* amp, double* log_env, double f0) const;

  double width_for(double f0) const { return f0 > 0.0 ? f0 : kDefaultF0; }
  int bins() const { return bins_; }

 private:
  int fs_;
  int fft_size_;
  int bins_;
};

// F0-adaptively smoothed, strictly positive envelope of an amplitude
// spectrogram. Frames with f0 <= 0 use the default smoothing width.
Spectrogram spectral_envelope(const Spectrogram& speech,
                              const std::vector<double>& f0_per_frame);

// Residual spectra S = (|X| / E) * g_t with g_t chosen per frame so that
// mean_k S^2 equals mean_k |X|^2. Zero-power frames become a uniform floor.
Spectrogram residual_spectra(const Spectrogram& speech,
                             const Spectrogram& envelope);

struct MelFilterbank {
  int n_mels = 0;
  int bins = 0;
  std::vector<double> weights;  // n_mels x bins, row-major
  double fmin = 0.0;
  double fmax = 0.0;

  const double* row(int m) const { return weights.data() + size_t(m) * bins; }
};

MelFilterbank make_mel_filterbank(int n_mels, int bins, int sample_rate,
                                  int fft_size, double fmin, double fmax);

// Filterbank projection of an amplitude spectrogram, floored at 1e-8.
// Result is frames x n_mels, row-major.
std::vector<double> mel_project(const Spectrogram& spec,
                                const MelFilterbank& fb);

// Sample-rate generator inputs derived from a frame-rate F0 contour.
struct ExcitationInputs {
  std::vector<double> sine;
  std::vector<double> noise;
  std::vector<double> per_sample_f0;  // Hz, 0 on unvoiced samples
};

// Sinusoid (amplitude 0.1, phase reset at every voiced onset) plus seeded
// standard-normal noise. f0_frames must be 0 exactly where vuv is 0 and
// below Nyquist everywhere.
ExcitationInputs make_excitation_inputs(const std::vector<double>& f0_frames,
                                        const std::vector<int>& vuv,
                                        int frame_shift, int sample_rate,
                                        uint64_t seed);

// d_t = max(1, round(fs / (f0_t * dense_factor))); 1 on unvoiced samples.
std::vector<int> dilation_factors(const std::vector<double>& per_sample_f0,
                                  int sample_rate, int dense_factor);

}  // namespace usfgan

#endif  // USFGAN_DSP_HPP
