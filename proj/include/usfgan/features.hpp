#pragma once

#include <string>
#include <utility>
#include <vector>

#include "usfgan/audio.hpp"
#include "usfgan/dsp.hpp"

namespace usfgan {

// Frame-rate acoustic features conditioning the generator. mcep and cap are
// row-major [n_frames x dim].
struct AcousticFeatures {
  static constexpr int kMcepDim = 41;
  static constexpr int kCapDim = 3;
  // cont_f0 + vuv + mcep + cap
  static constexpr int kCondDim = 2 + kMcepDim + kCapDim;

  int n_frames = 0;
  int frame_shift = 120;
  std::vector<double> cont_f0;
  std::vector<int> vuv;
  std::vector<double> mcep;
  std::vector<double> cap;
};

void validate_features(const AcousticFeatures& feat);

struct F0Config {
  double fmin = 70.0;
  double fmax = 340.0;
  int frame_shift = 120;
  int window = 1024;
  double peak_threshold = 0.5;
  double rms_floor = 1e-3;
};

// Normalized-autocorrelation pitch tracker. Returns (f0, vuv) per frame;
// unvoiced frames report f0 = 0.
std::pair<std::vector<double>, std::vector<int>> estimate_f0(
    const AudioBuffer& audio, const F0Config& cfg = {});

// Linear interpolation across unvoiced gaps, edge gaps held.
std::vector<double> continuize_f0(const std::vector<double>& f0,
                                  const std::vector<int>& vuv);

constexpr double kMcepAlpha = 0.466;  // warping for 24 kHz

// Log envelope -> warped-frequency cepstrum, truncated to `order` values
// per frame (row-major [frames x order]).
std::vector<double> mcep_from_envelope(const Spectrogram& envelope,
                                       int order = AcousticFeatures::kMcepDim,
                                       double alpha = kMcepAlpha);

// Cosine-series reconstruction of one log-envelope row from one mcep row.
std::vector<double> log_envelope_from_mcep(const double* mcep, int order,
                                           int bins,
                                           double alpha = kMcepAlpha);

// Per-band (0-3, 3-6, 6-12 kHz) log spectral flatness of the residual
// spectra; unvoiced frames are pinned to 0 (fully noise-like).
std::vector<double> extract_aperiodicity(const Spectrogram& speech,
                                         const Spectrogram& envelope,
                                         const std::vector<int>& vuv);

// Full extraction pipeline used by the CLI and the synthetic corpus checks.
AcousticFeatures extract_features(const AudioBuffer& audio,
                                  const F0Config& cfg = {});

// Contiguous frame range [start, start + n) as a standalone feature set.
AcousticFeatures slice_features(const AcousticFeatures& feat, int start, int n);

// Sample-rate conditioning matrix, row-major [n_samples x dim], columns in
// stream order (cont_f0, vuv, mcep, cap). cont_f0 is linearly interpolated
// between frame centers, everything else held at the nearest frame.
struct SampleConditioning {
  size_t n_samples = 0;
  int dim = 0;
  std::vector<double> values;

  const double* row(size_t s) const { return values.data() + s * dim; }
};

SampleConditioning upsample_conditioning(const AcousticFeatures& feat,
                                         int frame_shift);

AcousticFeatures read_features(const std::string& path);
void write_features(const AcousticFeatures& feat, const std::string& path);

}  // namespace usfgan
