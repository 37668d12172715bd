#include "usfgan/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "usfgan/checkpoint.hpp"
#include "usfgan/ops.hpp"

namespace fs = std::filesystem;

namespace usfgan {

namespace {

// splitmix64: decorrelates (seed, iteration) into per-iteration RNG seeds so
// resuming at iteration k regenerates the same stream without serialized
// RNG state.
uint64_t mix64(uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

uint64_t iter_seed(uint64_t seed, int64_t iteration, uint64_t stream) {
  return mix64(mix64(seed + stream) ^ static_cast<uint64_t>(iteration));
}

}  // namespace

// --- config -----------------------------------------------------------------

GeneratorConfig TrainingConfig::generator_config() const {
  GeneratorConfig g =
      preset == "toy" ? GeneratorConfig::toy() : GeneratorConfig::full();
  g.single_source = single_source;
  return g;
}

DiscriminatorConfig TrainingConfig::discriminator_config() const {
  const bool pwg = weights.adv_mode == LossWeights::Adv::pwg;
  if (preset == "toy")
    return pwg ? DiscriminatorConfig::pwg_toy() : DiscriminatorConfig::toy();
  DiscriminatorConfig d = DiscriminatorConfig::full();
  if (pwg) d.kind = DiscriminatorConfig::Kind::pwg;
  return d;
}

std::string TrainingConfig::compat_string() const {
  std::ostringstream os;
  os << "gen{" << generator_config().compat_string() << "};disc{"
     << (weights.adv_mode == LossWeights::Adv::pwg ? "pwg" : "hifigan") << ","
     << preset << "}";
  return os.str();
}

void TrainingConfig::validate() const {
  if (preset != "toy" && preset != "full")
    throw DataError("training config: preset must be toy or full");
  if (iterations <= 0) throw DataError("training config: iterations must be positive");
  if (batch_size <= 0) throw DataError("training config: batch size must be positive");
  if (lr_g <= 0.0 || lr_d <= 0.0)
    throw DataError("training config: learning rates must be positive");
  if (lr_halve_every < 0)
    throw DataError("training config: decay interval must be >= 0");
  if (checkpoint_every < 0)
    throw DataError("training config: checkpoint interval must be >= 0");
  GeneratorConfig g = generator_config();
  g.validate();
  discriminator_config().validate();
  const int64_t receptive = 2 * g.receptive_per_side() + 1;
  if (segment_length < receptive)
    throw DataError("training config: segment length " +
                    std::to_string(segment_length) +
                    " is below the filter receptive field " +
                    std::to_string(receptive));
}

TrainingConfig TrainingConfig::toy() { return {}; }

TrainingConfig TrainingConfig::full() {
  TrainingConfig cfg;
  cfg.preset = "full";
  cfg.iterations = 600000;
  cfg.segment_length = 15360;
  cfg.lr_halve_every = 200000;
  cfg.checkpoint_every = 10000;
  return cfg;
}

void apply_ablation(TrainingConfig& cfg, const std::string& name) {
  if (name == "none") return;
  if (name == "no-reg") {
    cfg.weights.reg_mode = LossWeights::Reg::off;
  } else if (name == "single-source") {
    cfg.single_source = true;
  } else if (name == "pwg-critic") {
    cfg.weights.adv_mode = LossWeights::Adv::pwg;
  } else if (name == "multires-spc") {
    cfg.weights.spc_mode = LossWeights::Spc::multires_stft;
  } else {
    throw DataError("unknown ablation '" + name +
                    "' (expected none, no-reg, single-source, pwg-critic or "
                    "multires-spc)");
  }
}

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double to_real(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw DataError("config: bad numeric value '" + v + "' for key " + key);
  }
}

int64_t to_int(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    int64_t x = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw DataError("config: bad integer value '" + v + "' for key " + key);
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  throw DataError("config: bad boolean value '" + v + "' for key " + key);
}

}  // namespace

TrainingConfig parse_training_config(const std::string& text) {
  TrainingConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw DataError("config line " + std::to_string(line_no) +
                      ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty() || val.empty())
      throw DataError("config line " + std::to_string(line_no) +
                      ": empty key or value");

    if (key == "preset") {
      if (val == "toy")
        cfg = TrainingConfig::toy();
      else if (val == "full")
        cfg = TrainingConfig::full();
      else
        throw DataError("config: preset must be toy or full");
    } else if (key == "iterations") {
      cfg.iterations = to_int(key, val);
    } else if (key == "batch_size") {
      cfg.batch_size = static_cast<int>(to_int(key, val));
    } else if (key == "segment_length") {
      cfg.segment_length = to_int(key, val);
    } else if (key == "lr_g") {
      cfg.lr_g = to_real(key, val);
    } else if (key == "lr_d") {
      cfg.lr_d = to_real(key, val);
    } else if (key == "lr_halve_every") {
      cfg.lr_halve_every = to_int(key, val);
    } else if (key == "seed") {
      cfg.seed = static_cast<uint64_t>(to_int(key, val));
    } else if (key == "lambda_spc") {
      cfg.weights.lambda_spc = to_real(key, val);
    } else if (key == "lambda_adv") {
      cfg.weights.lambda_adv = to_real(key, val);
    } else if (key == "reg_mode") {
      if (val == "residual")
        cfg.weights.reg_mode = LossWeights::Reg::residual;
      else if (val == "flat")
        cfg.weights.reg_mode = LossWeights::Reg::flat;
      else if (val == "off")
        cfg.weights.reg_mode = LossWeights::Reg::off;
      else
        throw DataError("config: reg_mode must be residual, flat or off");
    } else if (key == "spc_mode") {
      if (val == "mel")
        cfg.weights.spc_mode = LossWeights::Spc::mel;
      else if (val == "multires")
        cfg.weights.spc_mode = LossWeights::Spc::multires_stft;
      else
        throw DataError("config: spc_mode must be mel or multires");
    } else if (key == "adv_mode") {
      if (val == "hifigan")
        cfg.weights.adv_mode = LossWeights::Adv::hifigan;
      else if (val == "pwg")
        cfg.weights.adv_mode = LossWeights::Adv::pwg;
      else
        throw DataError("config: adv_mode must be hifigan or pwg");
    } else if (key == "single_source") {
      cfg.single_source = to_bool(key, val);
    } else if (key == "checkpoint_every") {
      cfg.checkpoint_every = to_int(key, val);
    } else if (key == "out_dir") {
      cfg.out_dir = val;
    } else if (key == "resume") {
      cfg.resume = val;
    } else if (key == "ablation") {
      apply_ablation(cfg, val);
    } else {
      throw DataError("config: unknown key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

TrainingConfig read_training_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_training_config(buf.str());
}

// --- synthetic corpus -------------------------------------------------------

void SyntheticCorpusSpec::validate() const {
  if (n_utterances <= 0)
    throw DataError("corpus spec: utterance count must be positive");
  if (duration_s <= 0.0)
    throw DataError("corpus spec: duration must be positive");
  if (sample_rate <= 0 || frame_shift <= 0)
    throw DataError("corpus spec: bad sample rate or frame shift");
  if (!(f0_min < f0_max))
    throw DataError("corpus spec: need f0_min < f0_max");
  F0Config tracker;
  if (f0_min < tracker.fmin || f0_max > tracker.fmax)
    throw DataError("corpus spec: F0 range outside the tracker search grid");
  if (noise_floor < 0.0)
    throw DataError("corpus spec: noise floor must be >= 0");
}

namespace {

// Two-pole resonator, peak near f_center with bandwidth bw, applied in place.
void resonate(std::vector<double>& x, double f_center, double bw, int fs) {
  const double r = std::exp(-M_PI * bw / fs);
  const double theta = 2.0 * M_PI * f_center / fs;
  const double a1 = 2.0 * r * std::cos(theta);
  const double a2 = -r * r;
  const double g = (1.0 - r * r) * std::sin(theta);
  double y1 = 0.0, y2 = 0.0;
  for (double& v : x) {
    const double y = g * v + a1 * y1 + a2 * y2;
    y2 = y1;
    y1 = y;
    v = y;
  }
}

}  // namespace

std::vector<CorpusItem> make_synthetic_corpus(const SyntheticCorpusSpec& spec,
                                              uint64_t seed) {
  spec.validate();
  const int fs = spec.sample_rate;
  const int shift = spec.frame_shift;
  const int n_frames = n_frames_for(
      static_cast<size_t>(std::ceil(spec.duration_s * fs)), shift);
  const int64_t n = static_cast<int64_t>(n_frames) * shift;

  std::vector<CorpusItem> corpus;
  corpus.reserve(static_cast<size_t>(spec.n_utterances));

  for (int u = 0; u < spec.n_utterances; ++u) {
    std::mt19937_64 rng(mix64(seed + 0x5eedc0de) + static_cast<uint64_t>(u));
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    // F0 contour: base pitch with slow drift and vibrato, clamped to range
    const double span = spec.f0_max / spec.f0_min;
    const double base =
        spec.f0_min * std::pow(span, 0.15 + 0.7 * unit(rng));
    // Keep intra-window pitch drift well under 1%: the analysis window spans
    // ~43 ms and the resonant ring decorrelates fast once period timing
    // slips a couple of samples, which would starve the tracker's peak.
    const double drift_oct = -0.08 + 0.16 * unit(rng);  // octaves over the clip
    const double vib_depth = 0.002 + 0.006 * unit(rng);
    const double vib_rate = 2.0 + 3.0 * unit(rng);
    const double vib_phase = 2.0 * M_PI * unit(rng);
    std::vector<double> contour(static_cast<size_t>(n_frames));
    for (int f = 0; f < n_frames; ++f) {
      const double tt = double(f) / n_frames;
      double v = base * std::pow(2.0, drift_oct * tt) *
                 (1.0 + vib_depth * std::sin(2.0 * M_PI * vib_rate * tt *
                                                 spec.duration_s +
                                             vib_phase));
      contour[size_t(f)] = std::clamp(v, spec.f0_min, spec.f0_max);
    }

    // voiced/unvoiced segmentation: alternating runs, voiced-heavy
    std::vector<int> vuv(static_cast<size_t>(n_frames), 0);
    {
      int f = 0;
      bool voiced = unit(rng) < 0.85;
      while (f < n_frames) {
        const double dur_s = voiced ? 0.15 + 0.25 * unit(rng)
                                    : 0.04 + 0.10 * unit(rng);
        const int run =
            std::max(1, int(dur_s * fs / shift + 0.5));
        for (int i = f; i < std::min(n_frames, f + run); ++i)
          vuv[size_t(i)] = voiced ? 1 : 0;
        f += run;
        voiced = !voiced;
      }
      // both classes must appear so downstream V/UV metrics are defined
      if (std::count(vuv.begin(), vuv.end(), 1) == 0)
        std::fill(vuv.begin() + n_frames / 4, vuv.begin() + (3 * n_frames) / 4,
                  1);
      if (std::count(vuv.begin(), vuv.end(), 0) == 0)
        std::fill(vuv.end() - std::max(1, n_frames / 10), vuv.end(), 0);
    }

    // source: pulse train at the contour frequency in voiced runs, white
    // noise in unvoiced runs, with pulse amplitude equalizing average power.
    // Pulses land at fractional-sample positions (split across neighbours);
    // integer quantization would jitter the resonator phases enough to
    // flatten the autocorrelation peak the pitch tracker relies on.
    std::vector<double> x(static_cast<size_t>(n), 0.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double sigma_v = 0.20, sigma_u = 0.12;
    double phase = 1.0;  // emit a pulse at the first voiced sample
    for (int64_t t = 0; t < n; ++t) {
      const size_t f = size_t(t / shift);
      if (vuv[f]) {
        const double df = contour[f] / fs;
        phase += df;
        if (phase >= 1.0) {
          phase -= 1.0;
          const double amp = sigma_v * std::sqrt(double(fs) / contour[f]);
          const double u = double(t) - phase / df;  // exact crossing time
          const int64_t i0 = int64_t(std::floor(u));
          const double w1 = u - double(i0);
          if (i0 >= 0 && i0 < n) x[size_t(i0)] += amp * (1.0 - w1);
          if (i0 + 1 >= 0 && i0 + 1 < n) x[size_t(i0 + 1)] += amp * w1;
        }
      } else {
        phase = 1.0;
        x[size_t(t)] = sigma_u * gauss(rng);
      }
    }

    // one "vowel": two randomized resonators shaping the whole utterance
    const double f1 = 350.0 + 550.0 * unit(rng);
    const double f2 = 1000.0 + 1000.0 * unit(rng);
    resonate(x, f1, 60.0 + 90.0 * unit(rng), fs);
    resonate(x, f2, 80.0 + 100.0 * unit(rng), fs);

    // The cascaded resonators eat most of the source energy, so bring the
    // speech back to a reference level before adding the noise floor;
    // otherwise the floor swamps the harmonics and nothing is trackable.
    double rms = 0.0;
    for (double v : x) rms += v * v;
    rms = std::sqrt(rms / double(n));
    if (rms > 0.0)
      for (double& v : x) v *= 0.15 / rms;

    for (double& v : x) v += spec.noise_floor * gauss(rng);

    double peak = 0.0;
    for (double v : x) peak = std::max(peak, std::abs(v));
    if (peak > 0.0)
      for (double& v : x) v *= 0.6 / peak;

    CorpusItem item;
    item.audio.sample_rate = fs;
    item.audio.samples = std::move(x);

    // features: F0 and V/UV are the generating truth; envelope-derived
    // streams are extracted from the rendered waveform
    std::vector<double> f0_voiced(static_cast<size_t>(n_frames), 0.0);
    for (int f = 0; f < n_frames; ++f)
      if (vuv[size_t(f)]) f0_voiced[size_t(f)] = contour[size_t(f)];
    StftConfig stft_cfg;
    stft_cfg.frame_shift = shift;
    Spectrogram spec_amp = stft(item.audio, stft_cfg);
    Spectrogram env = spectral_envelope(spec_amp, f0_voiced);
    item.feat.n_frames = n_frames;
    item.feat.frame_shift = shift;
    item.feat.cont_f0 = contour;
    item.feat.vuv = vuv;
    item.feat.mcep = mcep_from_envelope(env);
    item.feat.cap = extract_aperiodicity(spec_amp, env, vuv);
    validate_features(item.feat);
    corpus.push_back(std::move(item));
  }
  return corpus;
}

void write_corpus(const std::vector<CorpusItem>& corpus,
                  const std::string& dir) {
  fs::create_directories(dir);
  char name[32];
  for (size_t u = 0; u < corpus.size(); ++u) {
    std::snprintf(name, sizeof(name), "utt_%04zu", u);
    const std::string stem = (fs::path(dir) / name).string();
    write_wav(stem + ".wav", corpus[u].audio, WavFormat::float32);
    write_features(corpus[u].feat, stem + ".usff");
  }
}

std::vector<CorpusItem> read_corpus(const std::string& dir) {
  if (!fs::is_directory(dir))
    throw DataError("corpus directory not found: " + dir);
  std::vector<std::string> stems;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".wav")
      stems.push_back(entry.path().stem().string());
  }
  std::sort(stems.begin(), stems.end());
  if (stems.empty()) throw DataError("no wav files in corpus dir " + dir);
  std::vector<CorpusItem> corpus;
  corpus.reserve(stems.size());
  for (const auto& stem : stems) {
    const std::string base = (fs::path(dir) / stem).string();
    CorpusItem item;
    item.audio = read_wav(base + ".wav");
    item.feat = read_features(base + ".usff");
    corpus.push_back(std::move(item));
  }
  return corpus;
}

// --- training loop ----------------------------------------------------------

TrainModels::TrainModels(const TrainingConfig& cfg)
    : gen(cfg.generator_config(), cfg.seed),
      disc(cfg.discriminator_config(), cfg.seed),
      ctx(SpectralContext::make(cfg.generator_config().sample_rate)) {
  g_params = gen.parameters();
  d_params = disc.parameters();
}

std::vector<nn::Parameter<double>*> TrainModels::all_params() const {
  std::vector<nn::Parameter<double>*> all = g_params;
  all.insert(all.end(), d_params.begin(), d_params.end());
  return all;
}

TrainBatch sample_batch(const std::vector<CorpusItem>& corpus,
                        const TrainingConfig& cfg, int64_t iteration) {
  if (corpus.empty()) throw DataError("sample_batch: empty corpus");
  const int shift = corpus[0].feat.frame_shift;
  const int seg_frames =
      n_frames_for(static_cast<size_t>(cfg.segment_length), shift);
  std::mt19937_64 rng(iter_seed(cfg.seed, iteration, 0x01));

  TrainBatch b;
  for (int i = 0; i < cfg.batch_size; ++i) {
    std::uniform_int_distribution<size_t> pick(0, corpus.size() - 1);
    const CorpusItem& item = corpus[pick(rng)];
    if (item.feat.n_frames < seg_frames ||
        static_cast<int64_t>(item.audio.size()) < cfg.segment_length)
      throw DataError("sample_batch: utterance shorter than the segment");
    // frame-aligned offset keeping both the frame window and the sample
    // window inside the utterance
    const int max_f0 = std::min<int64_t>(
        item.feat.n_frames - seg_frames,
        (static_cast<int64_t>(item.audio.size()) - cfg.segment_length) /
            shift);
    std::uniform_int_distribution<int> off(0, std::max(0, max_f0));
    const int f0 = off(rng);

    AudioBuffer clip;
    clip.sample_rate = item.audio.sample_rate;
    const size_t s0 = static_cast<size_t>(f0) * shift;
    clip.samples.assign(item.audio.samples.begin() + s0,
                        item.audio.samples.begin() + s0 +
                            static_cast<size_t>(cfg.segment_length));
    b.clips.push_back(std::move(clip));
    b.feats.push_back(slice_features(item.feat, f0, seg_frames));
    b.noise_seeds.push_back(rng());
  }
  return b;
}

namespace {

nn::Tensor wrap_clip(const AudioBuffer& clip) {
  nn::Tensor t = nn::Tensor::zeros({1, 1, int64_t(clip.size())});
  t.storage()->val = clip.samples;
  return t;
}

double lr_at(double lr, int64_t halve_every, int64_t iteration) {
  if (halve_every <= 0) return lr;
  return lr * std::pow(0.5, double(iteration / halve_every));
}

std::vector<double> voiced_f0(const AcousticFeatures& f) {
  std::vector<double> out(f.cont_f0.size(), 0.0);
  for (size_t i = 0; i < out.size(); ++i)
    if (f.vuv[i]) out[i] = f.cont_f0[i];
  return out;
}

}  // namespace

TrainStepResult train_step(const TrainBatch& batch, TrainModels& m,
                           const TrainingConfig& cfg, int64_t iteration) {
  if (batch.clips.empty()) throw DataError("train_step: empty batch");
  const size_t nb = batch.clips.size();
  const double inv_b = 1.0 / double(nb);
  const LossWeights& w = cfg.weights;
  using nn::Tensor;

  TrainStepResult r;

  // generator forward for every clip, recorded once and reused by both the
  // discriminator update (detached) and the generator update
  nn::Tape<double> tape_g;
  std::vector<Tensor> fakes, excs, reals, reg_targets;
  {
    nn::TapeScope<double> scope(tape_g, true);
    for (size_t i = 0; i < nb; ++i) {
      auto in = m.gen.prepare(batch.feats[i], batch.noise_seeds[i]);
      auto so = m.gen.source_forward(in.sine, in.noise, in.cond, in.dilation);
      Tensor x = m.gen.filter_forward(so.l, in.cond);
      fakes.push_back(nn::narrow_time(x, 0, cfg.segment_length));
      excs.push_back(nn::narrow_time(so.e, 0, cfg.segment_length));
      reals.push_back(wrap_clip(batch.clips[i]));
      if (w.reg_mode == LossWeights::Reg::residual)
        reg_targets.push_back(residual_logmel(
            batch.clips[i], voiced_f0(batch.feats[i]), m.ctx));
    }
  }

  // discriminator update on its own tape; the generator graph stays intact
  {
    nn::Tape<double> tape_d;
    nn::TapeScope<double> scope(tape_d, true);
    Tensor ld;
    for (size_t i = 0; i < nb; ++i) {
      auto real_maps = m.disc.forward(reals[i]);
      auto fake_maps = m.disc.forward(nn::detach(fakes[i]));
      Tensor li = discriminator_loss(real_maps, fake_maps);
      ld = ld.defined() ? nn::add(ld, li) : li;
    }
    if (nb > 1) ld = nn::affine(ld, inv_b, 0.0);
    r.d_loss = ld.item();
    tape_d.backward(ld);
  }
  nn::AdamConfig adam_d;
  adam_d.lr = lr_at(cfg.lr_d, cfg.lr_halve_every, iteration);
  nn::adam_step(m.d_params, adam_d);

  // generator update against the refreshed discriminator
  {
    nn::TapeScope<double> scope(tape_g, true);
    Tensor adv, spc, reg;
    for (size_t i = 0; i < nb; ++i) {
      Tensor adv_i = adversarial_loss(m.disc.forward(fakes[i]));
      adv = adv.defined() ? nn::add(adv, adv_i) : adv_i;
      Tensor spc_i = w.spc_mode == LossWeights::Spc::mel
                         ? mel_spectral_loss(fakes[i], reals[i], m.ctx)
                         : multires_stft_loss(fakes[i], reals[i], m.ctx);
      spc = spc.defined() ? nn::add(spc, spc_i) : spc_i;
      if (w.reg_mode == LossWeights::Reg::residual) {
        Tensor reg_i = reg_loss_residual(excs[i], reg_targets[i], m.ctx);
        reg = reg.defined() ? nn::add(reg, reg_i) : reg_i;
      } else if (w.reg_mode == LossWeights::Reg::flat) {
        Tensor reg_i =
            reg_loss_flat(excs[i], voiced_f0(batch.feats[i]), m.ctx);
        reg = reg.defined() ? nn::add(reg, reg_i) : reg_i;
      }
    }
    if (nb > 1) {
      adv = nn::affine(adv, inv_b, 0.0);
      spc = nn::affine(spc, inv_b, 0.0);
      if (reg.defined()) reg = nn::affine(reg, inv_b, 0.0);
    }
    Tensor lg = generator_total(reg, spc, adv, w);
    r.g_loss = lg.item();
    r.adv = adv.item();
    r.spc = spc.item();
    r.reg = reg.defined() ? reg.item() : 0.0;
    tape_g.backward(lg);
  }
  nn::AdamConfig adam_g;
  adam_g.lr = lr_at(cfg.lr_g, cfg.lr_halve_every, iteration);
  nn::adam_step(m.g_params, adam_g);
  // the generator pass also deposited gradients in the critics; drop them so
  // the next discriminator update starts clean
  nn::zero_grads(m.d_params);

  return r;
}

TrainResult train(const TrainingConfig& cfg,
                  const std::vector<CorpusItem>& corpus,
                  const TrainHook& on_step) {
  cfg.validate();
  if (corpus.empty()) throw DataError("train: empty corpus");
  fs::create_directories(cfg.out_dir);

  TrainModels models(cfg);
  auto all = models.all_params();

  int64_t start = 0;
  if (!cfg.resume.empty()) {
    nn::CheckpointMeta meta = nn::load_checkpoint(cfg.resume, all);
    if (meta.config != cfg.compat_string())
      throw DataError("checkpoint/config mismatch: file has '" + meta.config +
                      "', config builds '" + cfg.compat_string() + "'");
    start = meta.iteration;
    if (start >= cfg.iterations)
      throw DataError("checkpoint already at or past the final iteration");
  }

  TrainResult result;
  result.log_path = (fs::path(cfg.out_dir) / "train_log.tsv").string();
  std::ofstream log(result.log_path,
                    start > 0 ? std::ios::app : std::ios::trunc);
  if (!log) throw DataError("cannot open loss log " + result.log_path);
  log << std::setprecision(17);

  const std::string spc_name =
      cfg.weights.spc_mode == LossWeights::Spc::mel ? "mel_loss" : "stft_loss";
  const std::string latest =
      (fs::path(cfg.out_dir) / "checkpoint_latest.usck").string();
  nn::CheckpointMeta meta;
  meta.config = cfg.compat_string();

  for (int64_t it = start; it < cfg.iterations; ++it) {
    TrainBatch batch = sample_batch(corpus, cfg, it);
    TrainStepResult r = train_step(batch, models, cfg, it);

    log << it << "\td_loss\t" << r.d_loss << "\n";
    log << it << "\tg_loss\t" << r.g_loss << "\n";
    if (cfg.weights.reg_mode != LossWeights::Reg::off)
      log << it << "\treg_loss\t" << r.reg << "\n";
    log << it << "\t" << spc_name << "\t" << r.spc << "\n";
    log << it << "\tadv_loss\t" << r.adv << "\n";
    log.flush();

    if (on_step) on_step(it, r);

    if (cfg.checkpoint_every > 0 && (it + 1) % cfg.checkpoint_every == 0 &&
        it + 1 < cfg.iterations) {
      meta.iteration = it + 1;
      nn::save_checkpoint(latest, all, meta);
    }
  }

  meta.iteration = cfg.iterations;
  result.checkpoint_path =
      (fs::path(cfg.out_dir) / "checkpoint_final.usck").string();
  nn::save_checkpoint(result.checkpoint_path, all, meta);
  result.iterations_run = cfg.iterations - start;
  return result;
}

}  // namespace usfgan
