#include "usfgan/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>

#include "usfgan/common.hpp"
#include "usfgan/fft.hpp"

namespace usfgan {

std::vector<double> hann_window(int length) {
  std::vector<double> w(length);
  for (int n = 0; n < length; ++n)
    w[n] = 0.5 - 0.5 * std::cos(kTwoPi * n / length);
  return w;
}

namespace {

// Reflected index into [0, n).
inline size_t reflect(long i, long n) {
  if (i < 0) i = -i;
  if (i >= n) i = 2 * n - 2 - i;
  return static_cast<size_t>(i);
}

void validate_stft_config(const AudioBuffer& audio, const StftConfig& cfg) {
  if (!fft::is_pow2(cfg.fft_size))
    throw DataError("fft_size must be a power of two");
  if (cfg.frame_shift <= 0 || cfg.frame_shift > cfg.fft_size)
    throw DataError("frame_shift must be in (0, fft_size]");
  const int win = cfg.win_length > 0 ? cfg.win_length : cfg.fft_size;
  if (win > cfg.fft_size) throw DataError("win_length exceeds fft_size");
  if (audio.samples.size() < static_cast<size_t>(cfg.fft_size))
    throw DataError("input too short");
}

}  // namespace

std::vector<double> windowed_frame(const AudioBuffer& audio, int frame,
                                   const StftConfig& cfg) {
  validate_stft_config(audio, cfg);
  const int win = cfg.win_length > 0 ? cfg.win_length : cfg.fft_size;
  const long n = static_cast<long>(audio.samples.size());
  const long center = static_cast<long>(frame) * cfg.frame_shift;
  std::vector<double> w = hann_window(win);
  std::vector<double> out(win);
  for (int i = 0; i < win; ++i) {
    long pos = center - win / 2 + i;
    out[i] = audio.samples[reflect(pos, n)] * w[i];
  }
  return out;
}

Spectrogram stft(const AudioBuffer& audio, const StftConfig& cfg) {
  validate_stft_config(audio, cfg);
  const int win = cfg.win_length > 0 ? cfg.win_length : cfg.fft_size;
  const int n_frames = n_frames_for(audio.samples.size(), cfg.frame_shift);
  const int bins = cfg.fft_size / 2 + 1;
  const long n = static_cast<long>(audio.samples.size());

  Spectrogram out;
  out.frames = n_frames;
  out.bins = bins;
  out.frame_shift = cfg.frame_shift;
  out.fft_size = cfg.fft_size;
  out.sample_rate = audio.sample_rate;
  out.values.resize(size_t(n_frames) * bins);

  const std::vector<double> w = hann_window(win);
  std::vector<double> buf(cfg.fft_size);
  std::vector<std::complex<double>> spec(bins);
  for (int f = 0; f < n_frames; ++f) {
    const long center = static_cast<long>(f) * cfg.frame_shift;
    std::fill(buf.begin(), buf.end(), 0.0);
    for (int i = 0; i < win; ++i) {
      long pos = center - win / 2 + i;
      buf[i] = audio.samples[reflect(pos, n)] * w[i];
    }
    fft::r2c(buf.data(), spec.data(), cfg.fft_size);
    double* row = out.row(f);
    for (int k = 0; k < bins; ++k) row[k] = std::abs(spec[k]);
  }
  return out;
}

EnvelopeSmoother::EnvelopeSmoother(int sample_rate, int fft_size)
    : fs_(sample_rate), fft_size_(fft_size), bins_(fft_size / 2 + 1) {
  if (!fft::is_pow2(fft_size)) throw DataError("fft_size must be a power of two");
}

void EnvelopeSmoother::boxcar_row(const double* in, double* out,
                                  double f0) const {
  const double bin_hz = static_cast<double>(fs_) / fft_size_;
  const int hw = static_cast<int>(std::lround((width_for(f0) / 3.0) / bin_hz));
  if (hw <= 0) {
    std::copy(in, in + bins_, out);
    return;
  }
  std::vector<double> prefix(bins_ + 1, 0.0);
  for (int k = 0; k < bins_; ++k) prefix[k + 1] = prefix[k] + in[k];
  for (int k = 0; k < bins_; ++k) {
    int lo = std::max(0, k - hw);
    int hi = std::min(bins_ - 1, k + hw);
    out[k] = (prefix[hi + 1] - prefix[lo]) / (hi - lo + 1);
  }
}

void EnvelopeSmoother::boxcar_adjoint_row(const double* in, double* out,
                                          double f0) const {
  const double bin_hz = static_cast<double>(fs_) / fft_size_;
  const int hw = static_cast<int>(std::lround((width_for(f0) / 3.0) / bin_hz));
  if (hw <= 0) {
    std::copy(in, in + bins_, out);
    return;
  }
  std::fill(out, out + bins_, 0.0);
  for (int k = 0; k < bins_; ++k) {
    int lo = std::max(0, k - hw);
    int hi = std::min(bins_ - 1, k + hw);
    const double v = in[k] / (hi - lo + 1);
    for (int j = lo; j <= hi; ++j) out[j] += v;
  }
}

void EnvelopeSmoother::lifter_row(const double* in, double* out,
                                  double f0) const {
  f0 = width_for(f0);
  const int n = fft_size_;
  std::vector<double> ext(n);
  for (int k = 0; k < bins_; ++k) ext[k] = in[k];
  for (int k = 1; k < bins_ - 1; ++k) ext[n - k] = in[k];

  std::vector<std::complex<double>> cep(bins_);
  fft::r2c(ext.data(), cep.data(), n);
  for (int j = 0; j < bins_; ++j) {
    const double q = static_cast<double>(j) / fs_;
    double smooth = 1.0;
    if (j > 0) {
      const double a = kPi * f0 * q;
      smooth = std::sin(a) / a;
    }
    const double comp = (1.0 - 2.0 * kQ1) + 2.0 * kQ1 * std::cos(kTwoPi * f0 * q);
    cep[j] *= smooth * comp;
  }
  std::vector<double> back(n);
  fft::c2r(cep.data(), back.data(), n);
  std::copy(back.begin(), back.begin() + bins_, out);
}

void EnvelopeSmoother::lifter_adjoint_row(const double* in, double* out,
                                          double f0) const {
  // The lifter is self-adjoint under the even-extension weighting
  // rho = [1, 2, ..., 2, 1], so lifter^T = diag(rho) lifter diag(1/rho).
  std::vector<double> scaled(bins_);
  for (int k = 0; k < bins_; ++k) {
    const double rho = (k == 0 || k == bins_ - 1) ? 1.0 : 2.0;
    scaled[k] = in[k] / rho;
  }
  lifter_row(scaled.data(), out, f0);
  for (int k = 0; k < bins_; ++k) {
    const double rho = (k == 0 || k == bins_ - 1) ? 1.0 : 2.0;
    out[k] *= rho;
  }
}

void EnvelopeSmoother::log_envelope_row(const double* amp, double* log_env,
                                        double f0) const {
  std::vector<double> power(bins_), smoothed(bins_);
  for (int k = 0; k < bins_; ++k) power[k] = amp[k] * amp[k];
  boxcar_row(power.data(), smoothed.data(), f0);
  for (int k = 0; k < bins_; ++k)
    smoothed[k] = 0.5 * std::log(std::max(smoothed[k], kAmpFloor * kAmpFloor));
  lifter_row(smoothed.data(), log_env, f0);
}

Spectrogram spectral_envelope(const Spectrogram& speech,
                              const std::vector<double>& f0_per_frame) {
  if (f0_per_frame.size() != static_cast<size_t>(speech.frames))
    throw DataError("f0 length does not match frame count");
  EnvelopeSmoother smoother(speech.sample_rate, speech.fft_size);
  Spectrogram out = speech;
  std::vector<double> log_env(speech.bins);
  for (int t = 0; t < speech.frames; ++t) {
    smoother.log_envelope_row(speech.row(t), log_env.data(), f0_per_frame[t]);
    double* e = out.row(t);
    for (int k = 0; k < speech.bins; ++k) e[k] = std::exp(log_env[k]);
  }
  return out;
}

Spectrogram residual_spectra(const Spectrogram& speech,
                             const Spectrogram& envelope) {
  if (speech.frames != envelope.frames || speech.bins != envelope.bins)
    throw DataError("residual_spectra: shape mismatch");
  Spectrogram out = speech;
  for (int t = 0; t < speech.frames; ++t) {
    const double* x = speech.row(t);
    const double* e = envelope.row(t);
    double* s = out.row(t);
    double power = 0.0;
    for (int k = 0; k < speech.bins; ++k) power += x[k] * x[k];
    if (power <= 0.0) {
      for (int k = 0; k < speech.bins; ++k) s[k] = kAmpFloor;
      continue;
    }
    double ratio_power = 0.0;
    for (int k = 0; k < speech.bins; ++k) {
      if (e[k] <= 0.0) throw DataError("residual_spectra: envelope must be positive");
      s[k] = x[k] / e[k];
      ratio_power += s[k] * s[k];
    }
    const double g = std::sqrt(power / ratio_power);
    for (int k = 0; k < speech.bins; ++k) s[k] *= g;
  }
  return out;
}

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

}  // namespace

MelFilterbank make_mel_filterbank(int n_mels, int bins, int sample_rate,
                                  int fft_size, double fmin, double fmax) {
  if (fmax <= fmin || fmin < 0.0) throw DataError("bad mel range");
  MelFilterbank fb;
  fb.n_mels = n_mels;
  fb.bins = bins;
  fb.fmin = fmin;
  fb.fmax = fmax;
  fb.weights.assign(size_t(n_mels) * bins, 0.0);

  const double mel_lo = hz_to_mel(fmin);
  const double mel_hi = hz_to_mel(fmax);
  std::vector<double> edges(n_mels + 2);
  for (int i = 0; i < n_mels + 2; ++i)
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (n_mels + 1));

  const double bin_hz = static_cast<double>(sample_rate) / fft_size;
  for (int m = 0; m < n_mels; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    double* row = fb.weights.data() + size_t(m) * bins;
    double sum = 0.0;
    for (int k = 0; k < bins; ++k) {
      const double f = k * bin_hz;
      double w = 0.0;
      if (f > lo && f < hi)
        w = f <= mid ? (f - lo) / (mid - lo) : (hi - f) / (hi - mid);
      row[k] = w;
      sum += w;
    }
    if (sum <= 0.0) {
      // Triangle narrower than one bin; pin it to the nearest bin.
      int k = std::min(bins - 1, std::max(0, int(std::lround(mid / bin_hz))));
      row[k] = 1.0;
    }
  }
  return fb;
}

std::vector<double> mel_project(const Spectrogram& spec,
                                const MelFilterbank& fb) {
  if (spec.bins != fb.bins) throw DataError("mel_project: bin count mismatch");
  std::vector<double> out(size_t(spec.frames) * fb.n_mels);
  for (int t = 0; t < spec.frames; ++t) {
    const double* x = spec.row(t);
    for (int m = 0; m < fb.n_mels; ++m) {
      const double* w = fb.row(m);
      double acc = 0.0;
      for (int k = 0; k < spec.bins; ++k) acc += x[k] * w[k];
      out[size_t(t) * fb.n_mels + m] = std::max(acc, kAmpFloor);
    }
  }
  return out;
}

ExcitationInputs make_excitation_inputs(const std::vector<double>& f0_frames,
                                        const std::vector<int>& vuv,
                                        int frame_shift, int sample_rate,
                                        uint64_t seed) {
  const int n_frames = static_cast<int>(f0_frames.size());
  if (vuv.size() != f0_frames.size())
    throw DataError("make_excitation_inputs: f0/vuv length mismatch");
  for (int i = 0; i < n_frames; ++i) {
    if (f0_frames[i] < 0.0) throw DataError("negative F0");
    if (f0_frames[i] > 0.5 * sample_rate) throw DataError("F0 above Nyquist");
    if ((f0_frames[i] == 0.0) != (vuv[i] == 0))
      throw DataError("f0 must be 0 exactly on unvoiced frames");
  }

  const size_t n = size_t(n_frames) * frame_shift;
  ExcitationInputs out;
  out.sine.assign(n, 0.0);
  out.noise.resize(n);
  out.per_sample_f0.assign(n, 0.0);

  for (size_t t = 0; t < n; ++t) {
    const double pos = static_cast<double>(t) / frame_shift;
    const int i0 = std::min(n_frames - 1, static_cast<int>(pos));
    const int i1 = std::min(n_frames - 1, i0 + 1);
    const int nearest = (pos - i0 < 0.5) ? i0 : i1;
    if (!vuv[nearest]) continue;
    double f;
    if (vuv[i0] && vuv[i1]) {
      const double a = pos - i0;
      f = (1.0 - a) * f0_frames[i0] + a * f0_frames[i1];
    } else {
      f = vuv[i0] ? f0_frames[i0] : f0_frames[i1];
    }
    out.per_sample_f0[t] = f;
  }

  constexpr double kSineAmp = 0.1;
  double phase = 0.0;
  bool prev_voiced = false;
  for (size_t t = 0; t < n; ++t) {
    const bool voiced = out.per_sample_f0[t] > 0.0;
    if (voiced) {
      if (!prev_voiced)
        phase = 0.0;  // phase restarts at each voiced onset
      else
        phase += kTwoPi * out.per_sample_f0[t] / sample_rate;
      out.sine[t] = kSineAmp * std::sin(phase);
    }
    prev_voiced = voiced;
  }

  std::mt19937_64 rng(derive_seed(seed, 0x4e4f495345ULL));  // "NOISE"
  std::normal_distribution<double> normal(0.0, 1.0);
  for (size_t t = 0; t < n; ++t) out.noise[t] = normal(rng);
  return out;
}

std::vector<int> dilation_factors(const std::vector<double>& per_sample_f0,
                                  int sample_rate, int dense_factor) {
  if (dense_factor < 1) throw DataError("dense_factor must be >= 1");
  std::vector<int> d(per_sample_f0.size(), 1);
  for (size_t t = 0; t < per_sample_f0.size(); ++t) {
    const double f = per_sample_f0[t];
    if (f > 0.0) {
      const long v = std::lround(sample_rate / (f * dense_factor));
      d[t] = static_cast<int>(std::max(1L, v));
    }
  }
  return d;
}

}  // namespace usfgan
