#include "usfgan/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "usfgan/common.hpp"

namespace usfgan {

namespace {

// Reflected read, matching the framing convention of the STFT.
double sample_at(const std::vector<double>& x, long i) {
  const long n = static_cast<long>(x.size());
  if (i < 0) i = -i;
  if (i >= n) i = 2 * n - 2 - i;
  if (i < 0 || i >= n) return 0.0;  // pathologically short input
  return x[static_cast<size_t>(i)];
}

double warp_omega(double omega, double alpha) {
  return omega +
         2.0 * std::atan2(alpha * std::sin(omega),
                          1.0 - alpha * std::cos(omega));
}

}  // namespace

void validate_features(const AcousticFeatures& feat) {
  const size_t n = static_cast<size_t>(feat.n_frames);
  if (feat.cont_f0.size() != n || feat.vuv.size() != n ||
      feat.mcep.size() != n * AcousticFeatures::kMcepDim ||
      feat.cap.size() != n * AcousticFeatures::kCapDim)
    throw DataError("feature stream lengths inconsistent with frame count");
  for (double f : feat.cont_f0)
    if (!(f > 0.0)) throw DataError("continuous F0 must be positive");
  for (int v : feat.vuv)
    if (v != 0 && v != 1) throw DataError("vuv flags must be 0 or 1");
}

std::pair<std::vector<double>, std::vector<int>> estimate_f0(
    const AudioBuffer& audio, const F0Config& cfg) {
  if (audio.samples.empty()) throw DataError("empty audio");
  if (!(cfg.fmin > 0.0 && cfg.fmin < cfg.fmax &&
        cfg.fmax < audio.sample_rate / 2.0))
    throw DataError("bad F0 search range");

  const int fs = audio.sample_rate;
  const int frames = n_frames_for(audio.samples.size(), cfg.frame_shift);
  const int w = cfg.window;
  const int lag_min = std::max(2, static_cast<int>(fs / cfg.fmax));
  const int lag_max =
      std::min(w - 2, static_cast<int>(std::ceil(fs / cfg.fmin)));

  std::vector<double> f0(frames, 0.0);
  std::vector<int> vuv(frames, 0);
  std::vector<double> seg(w), r(lag_max + 2, 0.0);

  for (int t = 0; t < frames; ++t) {
    const long center = static_cast<long>(t) * cfg.frame_shift;
    for (int i = 0; i < w; ++i)
      seg[i] = sample_at(audio.samples, center - w / 2 + i);

    double energy = 0.0;
    for (double v : seg) energy += v * v;
    if (std::sqrt(energy / w) <= cfg.rms_floor) continue;

    // Normalized autocorrelation over the candidate lag range.
    std::vector<double> sq_prefix(w + 1, 0.0);
    for (int i = 0; i < w; ++i) sq_prefix[i + 1] = sq_prefix[i] + seg[i] * seg[i];
    double r_max = 0.0;
    for (int lag = lag_min - 1; lag <= lag_max + 1; ++lag) {
      double acc = 0.0;
      const int n = w - lag;
      for (int i = 0; i < n; ++i) acc += seg[i] * seg[i + lag];
      const double e0 = sq_prefix[n];
      const double e1 = sq_prefix[w] - sq_prefix[lag];
      r[lag - (lag_min - 1)] = acc / std::sqrt(std::max(e0 * e1, 1e-30));
    }
    auto rv = [&](int lag) { return r[lag - (lag_min - 1)]; };
    for (int lag = lag_min; lag <= lag_max; ++lag)
      r_max = std::max(r_max, rv(lag));
    if (r_max <= cfg.peak_threshold) continue;

    // Take the shortest strong local peak to dodge octave-down errors.
    int best = 0;
    for (int lag = lag_min; lag <= lag_max; ++lag) {
      if (rv(lag) >= 0.85 * r_max && rv(lag) >= rv(lag - 1) &&
          rv(lag) >= rv(lag + 1)) {
        best = lag;
        break;
      }
    }
    if (best == 0) continue;

    const double a = rv(best - 1), b = rv(best), c = rv(best + 1);
    double delta = 0.0;
    const double denom = a - 2.0 * b + c;
    if (std::abs(denom) > 1e-12) delta = 0.5 * (a - c) / denom;
    delta = std::clamp(delta, -0.5, 0.5);
    const double hz = fs / (best + delta);
    f0[t] = std::clamp(hz, cfg.fmin, cfg.fmax);
    vuv[t] = 1;
  }
  return {f0, vuv};
}

std::vector<double> continuize_f0(const std::vector<double>& f0,
                                  const std::vector<int>& vuv) {
  if (f0.size() != vuv.size()) throw DataError("f0/vuv length mismatch");
  const int n = static_cast<int>(f0.size());
  std::vector<int> voiced;
  for (int i = 0; i < n; ++i)
    if (vuv[i]) voiced.push_back(i);
  if (voiced.empty()) throw DataError("no voiced frames");

  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) {
    if (vuv[i]) {
      out[i] = f0[i];
      continue;
    }
    auto it = std::lower_bound(voiced.begin(), voiced.end(), i);
    if (it == voiced.begin()) {
      out[i] = f0[voiced.front()];
    } else if (it == voiced.end()) {
      out[i] = f0[voiced.back()];
    } else {
      const int hi = *it, lo = *(it - 1);
      const double a = static_cast<double>(i - lo) / (hi - lo);
      out[i] = (1.0 - a) * f0[lo] + a * f0[hi];
    }
  }
  return out;
}

std::vector<double> mcep_from_envelope(const Spectrogram& envelope, int order,
                                       double alpha) {
  const int bins = envelope.bins;
  const int m = bins;  // warped grid resolution
  std::vector<double> out(static_cast<size_t>(envelope.frames) * order);
  std::vector<double> g(m);
  for (int t = 0; t < envelope.frames; ++t) {
    const double* env = envelope.row(t);
    for (int i = 0; i < m; ++i) {
      const double warped = kPi * i / (m - 1);
      const double omega = warp_omega(warped, -alpha);
      const double pos = omega / kPi * (bins - 1);
      const int k = std::clamp(static_cast<int>(pos), 0, bins - 2);
      const double frac = std::clamp(pos - k, 0.0, 1.0);
      const double e0 = std::log(std::max(env[k], kAmpFloor));
      const double e1 = std::log(std::max(env[k + 1], kAmpFloor));
      g[i] = (1.0 - frac) * e0 + frac * e1;
    }
    // DCT-I with half-weighted endpoints.
    for (int c = 0; c < order; ++c) {
      double acc = 0.5 * (g[0] + (c % 2 == 0 ? g[m - 1] : -g[m - 1]));
      for (int i = 1; i < m - 1; ++i) acc += g[i] * std::cos(kPi * c * i / (m - 1));
      const double scale = (c == 0) ? 1.0 / (m - 1) : 2.0 / (m - 1);
      out[static_cast<size_t>(t) * order + c] = scale * acc;
    }
  }
  return out;
}

std::vector<double> log_envelope_from_mcep(const double* mcep, int order,
                                           int bins, double alpha) {
  std::vector<double> log_env(bins, 0.0);
  for (int k = 0; k < bins; ++k) {
    const double warped = warp_omega(kPi * k / (bins - 1), alpha);
    double acc = 0.0;
    for (int c = 0; c < order; ++c) acc += mcep[c] * std::cos(c * warped);
    log_env[k] = acc;
  }
  return log_env;
}

std::vector<double> extract_aperiodicity(const Spectrogram& speech,
                                         const Spectrogram& envelope,
                                         const std::vector<int>& vuv) {
  if (vuv.size() != static_cast<size_t>(speech.frames))
    throw DataError("vuv length does not match frame count");
  Spectrogram resid = residual_spectra(speech, envelope);
  const double bin_hz = static_cast<double>(speech.sample_rate) /
                        speech.fft_size;
  const double edges_hz[4] = {0.0, 3000.0, 6000.0, 12000.0};
  std::vector<double> cap(static_cast<size_t>(speech.frames) *
                          AcousticFeatures::kCapDim);
  for (int t = 0; t < speech.frames; ++t) {
    for (int b = 0; b < AcousticFeatures::kCapDim; ++b) {
      const int lo = static_cast<int>(edges_hz[b] / bin_hz);
      const int hi =
          std::min(speech.bins, static_cast<int>(edges_hz[b + 1] / bin_hz));
      double log_sum = 0.0, lin_sum = 0.0;
      for (int k = lo; k < hi; ++k) {
        const double a = std::max(resid.at(t, k), kAmpFloor);
        log_sum += std::log(a);
        lin_sum += a;
      }
      const int n = std::max(1, hi - lo);
      const double flatness = std::exp(log_sum / n) / (lin_sum / n);
      const double coded = std::log(std::clamp(flatness, 1e-2, 1.0));
      cap[static_cast<size_t>(t) * AcousticFeatures::kCapDim + b] =
          vuv[t] ? coded : 0.0;
    }
  }
  return cap;
}

AcousticFeatures slice_features(const AcousticFeatures& feat, int start,
                                int n) {
  if (start < 0 || n <= 0 || start + n > feat.n_frames)
    throw DataError("feature slice out of range");
  const size_t s = static_cast<size_t>(start), e = s + static_cast<size_t>(n);
  AcousticFeatures out;
  out.n_frames = n;
  out.frame_shift = feat.frame_shift;
  out.cont_f0.assign(feat.cont_f0.begin() + s, feat.cont_f0.begin() + e);
  out.vuv.assign(feat.vuv.begin() + s, feat.vuv.begin() + e);
  out.mcep.assign(feat.mcep.begin() + s * AcousticFeatures::kMcepDim,
                  feat.mcep.begin() + e * AcousticFeatures::kMcepDim);
  out.cap.assign(feat.cap.begin() + s * AcousticFeatures::kCapDim,
                 feat.cap.begin() + e * AcousticFeatures::kCapDim);
  return out;
}

AcousticFeatures extract_features(const AudioBuffer& audio,
                                  const F0Config& cfg) {
  auto [f0, vuv] = estimate_f0(audio, cfg);
  StftConfig stft_cfg;
  stft_cfg.frame_shift = cfg.frame_shift;
  Spectrogram spec = stft(audio, stft_cfg);
  if (spec.frames != static_cast<int>(f0.size()))
    throw DataError("frame count mismatch between F0 and spectrogram");
  Spectrogram env = spectral_envelope(spec, f0);

  AcousticFeatures feat;
  feat.n_frames = spec.frames;
  feat.frame_shift = cfg.frame_shift;
  feat.cont_f0 = continuize_f0(f0, vuv);
  feat.vuv = vuv;
  feat.mcep = mcep_from_envelope(env);
  feat.cap = extract_aperiodicity(spec, env, vuv);
  validate_features(feat);
  return feat;
}

SampleConditioning upsample_conditioning(const AcousticFeatures& feat,
                                         int frame_shift) {
  if (frame_shift != feat.frame_shift)
    throw DataError("frame shift does not match feature extraction");
  validate_features(feat);
  SampleConditioning cond;
  cond.dim = AcousticFeatures::kCondDim;
  cond.n_samples = static_cast<size_t>(feat.n_frames) * frame_shift;
  cond.values.resize(cond.n_samples * cond.dim);

  const int last = feat.n_frames - 1;
  for (size_t s = 0; s < cond.n_samples; ++s) {
    double* row = cond.values.data() + s * cond.dim;
    const double pos = static_cast<double>(s) / frame_shift;
    const int f0_lo = std::min(static_cast<int>(pos), last);
    const int f0_hi = std::min(f0_lo + 1, last);
    const double frac = std::min(pos - f0_lo, 1.0);
    row[0] = feat.cont_f0[f0_lo] +
             frac * (feat.cont_f0[f0_hi] - feat.cont_f0[f0_lo]);

    const int near = std::min(static_cast<int>(std::lround(pos)), last);
    row[1] = feat.vuv[near];
    const double* mc = feat.mcep.data() +
                       static_cast<size_t>(near) * AcousticFeatures::kMcepDim;
    std::copy(mc, mc + AcousticFeatures::kMcepDim, row + 2);
    const double* cp = feat.cap.data() +
                       static_cast<size_t>(near) * AcousticFeatures::kCapDim;
    std::copy(cp, cp + AcousticFeatures::kCapDim,
              row + 2 + AcousticFeatures::kMcepDim);
  }
  return cond;
}

namespace {

constexpr uint32_t kFeatureVersion = 1;

void wr_u32(std::ofstream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<char*>(b), 4);
}

uint32_t rd_u32(std::ifstream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

void wr_f32_stream(std::ofstream& os, const double* v, size_t n) {
  for (size_t i = 0; i < n; ++i) {
    float f = static_cast<float>(v[i]);
    uint32_t u;
    std::memcpy(&u, &f, 4);
    wr_u32(os, u);
  }
}

}  // namespace

void write_features(const AcousticFeatures& feat, const std::string& path) {
  validate_features(feat);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open for writing: " + path);
  os.write("USFF", 4);
  wr_u32(os, kFeatureVersion);
  wr_u32(os, static_cast<uint32_t>(feat.n_frames));
  wr_u32(os, static_cast<uint32_t>(feat.frame_shift));
  wr_u32(os, 4);  // stream count
  wr_u32(os, 1);
  wr_u32(os, 1);
  wr_u32(os, AcousticFeatures::kMcepDim);
  wr_u32(os, AcousticFeatures::kCapDim);

  const size_t n = static_cast<size_t>(feat.n_frames);
  wr_f32_stream(os, feat.cont_f0.data(), n);
  std::vector<double> vuv_f(feat.vuv.begin(), feat.vuv.end());
  wr_f32_stream(os, vuv_f.data(), n);
  wr_f32_stream(os, feat.mcep.data(), n * AcousticFeatures::kMcepDim);
  wr_f32_stream(os, feat.cap.data(), n * AcousticFeatures::kCapDim);
  if (!os) throw DataError("write failed: " + path);
}

AcousticFeatures read_features(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "USFF", 4) != 0)
    throw DataError("not a feature file: " + path);
  const uint32_t version = rd_u32(is);
  if (version != kFeatureVersion)
    throw DataError("unsupported feature file version");
  AcousticFeatures feat;
  feat.n_frames = static_cast<int>(rd_u32(is));
  feat.frame_shift = static_cast<int>(rd_u32(is));
  const uint32_t n_streams = rd_u32(is);
  if (!is || n_streams != 4) throw DataError("payload size mismatch");
  uint32_t dims[4];
  for (auto& d : dims) d = rd_u32(is);
  if (!is || dims[0] != 1 || dims[1] != 1 ||
      dims[2] != AcousticFeatures::kMcepDim ||
      dims[3] != AcousticFeatures::kCapDim)
    throw DataError("payload size mismatch");

  const size_t n = static_cast<size_t>(feat.n_frames);
  const size_t total = n * (2 + AcousticFeatures::kMcepDim +
                            AcousticFeatures::kCapDim);
  std::vector<unsigned char> raw(total * 4);
  is.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size()));
  if (static_cast<size_t>(is.gcount()) != raw.size())
    throw DataError("payload size mismatch");
  is.peek();
  if (!is.eof()) throw DataError("payload size mismatch");

  std::vector<float> payload(total);
  for (size_t i = 0; i < total; ++i) {
    const uint32_t u = static_cast<uint32_t>(raw[4 * i]) |
                       (static_cast<uint32_t>(raw[4 * i + 1]) << 8) |
                       (static_cast<uint32_t>(raw[4 * i + 2]) << 16) |
                       (static_cast<uint32_t>(raw[4 * i + 3]) << 24);
    std::memcpy(&payload[i], &u, 4);
  }

  size_t off = 0;
  feat.cont_f0.assign(payload.begin(), payload.begin() + n);
  off += n;
  feat.vuv.resize(n);
  for (size_t i = 0; i < n; ++i)
    feat.vuv[i] = payload[off + i] != 0.0f ? 1 : 0;
  off += n;
  feat.mcep.assign(payload.begin() + off,
                   payload.begin() + off + n * AcousticFeatures::kMcepDim);
  off += n * AcousticFeatures::kMcepDim;
  feat.cap.assign(payload.begin() + off,
                  payload.begin() + off + n * AcousticFeatures::kCapDim);
  validate_features(feat);
  return feat;
}

}  // namespace usfgan
