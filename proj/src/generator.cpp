#include "usfgan/generator.hpp"

#include <cmath>
#include <map>
#include <sstream>

#include "usfgan/dsp.hpp"

namespace usfgan {

using nn::BasicTensor;
using nn::Parameter;
using nn::Tensor;

int64_t GeneratorConfig::receptive_per_side() const {
  const int len = filter_layers / filter_cycles;
  return static_cast<int64_t>(filter_cycles) * ((int64_t(1) << len) - 1) *
         ((kernel_size - 1) / 2);
}

void GeneratorConfig::validate() const {
  if (channels <= 0) throw DataError("generator channels must be positive");
  if (kernel_size < 1 || kernel_size % 2 == 0)
    throw DataError("generator kernel size must be odd");
  if (harmonic_cycles <= 0 || harmonic_layers % harmonic_cycles != 0)
    throw DataError("harmonic layers must divide into cycles");
  if (filter_cycles <= 0 || filter_layers % filter_cycles != 0)
    throw DataError("filter layers must divide into cycles");
  if (noise_layers <= 0) throw DataError("noise layers must be positive");
  if (dense_factor <= 0) throw DataError("dense factor must be positive");
  if (sample_rate <= 0 || frame_shift <= 0)
    throw DataError("bad sample rate or frame shift");
}

std::string GeneratorConfig::compat_string() const {
  std::ostringstream os;
  os << (single_source ? "sn" : "hn") << ";ch=" << channels
     << ";k=" << kernel_size << ";h=" << harmonic_layers << "/"
     << harmonic_cycles << ";n=" << noise_layers << ";f=" << filter_layers
     << "/" << filter_cycles << ";dense=" << dense_factor
     << ";vuv=" << (use_vuv ? 1 : 0) << ";fs=" << sample_rate
     << ";shift=" << frame_shift;
  return os.str();
}

GeneratorConfig GeneratorConfig::toy() {
  GeneratorConfig cfg;
  cfg.channels = 16;
  cfg.harmonic_layers = 6;
  cfg.harmonic_cycles = 2;
  cfg.noise_layers = 3;
  cfg.filter_layers = 9;
  cfg.filter_cycles = 3;
  return cfg;
}

namespace {

// Weight views usable at either precision; double views share the parameter
// storages, float views are one-off casts for fast inference.
template <class S>
struct BlockW {
  BasicTensor<S> fw, fb, gw, gb, cf, cg, rw, rb, sw, sb;
  bool has_res = true;
  int mult = 1;  // static dilation, or multiplier on the pitch-dependent base
};

template <class S>
struct StackW {
  BasicTensor<S> in_w, in_b;  // input 1x1; undefined when input is C channels
  std::vector<BlockW<S>> blocks;
};

template <class S>
struct PeriodW {
  BasicTensor<S> w0, b0, w1, b1, w2, b2;
};

template <class S>
struct Weights {
  StackW<S> harm, noise, filt;
  PeriodW<S> period;
  BasicTensor<S> exc_w, exc_b;
  BasicTensor<S> post1_w, post1_b, post2_w, post2_b;
};

template <class S>
BasicTensor<S> cast_tensor(const Tensor& t) {
  if (!t.defined()) return {};
  std::vector<S> v(t.val().begin(), t.val().end());
  return BasicTensor<S>::from(t.shape(), std::move(v));
}

// Gated residual stack shared by all sub-networks. pd_dils, when given,
// carries one per-sample dilation vector per block. Returns the skip sum.
template <class S>
BasicTensor<S> stack_forward(
    const StackW<S>& st, const BasicTensor<S>& input,
    const BasicTensor<S>& cond,
    const std::vector<std::shared_ptr<const std::vector<int>>>* pd_dils) {
  BasicTensor<S> x =
      st.in_w.defined() ? conv1d(input, st.in_w, st.in_b) : input;
  BasicTensor<S> skips;
  const S res_scale = static_cast<S>(std::sqrt(0.5));
  for (size_t i = 0; i < st.blocks.size(); ++i) {
    const auto& b = st.blocks[i];
    BasicTensor<S> zf, zg;
    if (pd_dils) {
      zf = pdconv1d(x, b.fw, b.fb, (*pd_dils)[i]);
      zg = pdconv1d(x, b.gw, b.gb, (*pd_dils)[i]);
    } else {
      zf = conv1d(x, b.fw, b.fb, b.mult);
      zg = conv1d(x, b.gw, b.gb, b.mult);
    }
    zf = add(zf, conv1d(cond, b.cf, BasicTensor<S>()));
    zg = add(zg, conv1d(cond, b.cg, BasicTensor<S>()));
    BasicTensor<S> z = mul(tanh_op(zf), sigmoid_op(zg));
    BasicTensor<S> skip = conv1d(z, b.sw, b.sb);
    skips = skips.defined() ? add(skips, skip) : skip;
    if (b.has_res)
      x = affine(add(x, conv1d(z, b.rw, b.rb)), res_scale, S(0));
  }
  return skips;
}

template <class S>
BasicTensor<S> periodicity_forward(const PeriodW<S>& p,
                                   const BasicTensor<S>& cond) {
  auto h = leaky_relu(conv1d(cond, p.w0, p.b0));
  h = leaky_relu(conv1d(h, p.w1, p.b1));
  return sigmoid_op(conv1d(h, p.w2, p.b2));
}

template <class S>
BasicTensor<S> mix_latents_t(const BasicTensor<S>& l_h,
                             const BasicTensor<S>& l_n,
                             const BasicTensor<S>& a) {
  auto ones = BasicTensor<S>::from(
      a.shape(), std::vector<S>(static_cast<size_t>(a.numel()), S(1)));
  return add(mul(a, l_h), mul(sub(ones, a), l_n));
}

template <class S>
BasicTensor<S> filter_forward_t(const Weights<S>& w, const BasicTensor<S>& l,
                                const BasicTensor<S>& cond) {
  auto skips = stack_forward(w.filt, l, cond, nullptr);
  auto h = leaky_relu(conv1d(leaky_relu(skips), w.post1_w, w.post1_b));
  return tanh_op(conv1d(h, w.post2_w, w.post2_b));
}

std::vector<std::shared_ptr<const std::vector<int>>> scaled_dilations(
    const std::vector<BlockW<double>>& blocks,
    std::shared_ptr<const std::vector<int>> base) {
  std::map<int, std::shared_ptr<const std::vector<int>>> by_mult;
  std::vector<std::shared_ptr<const std::vector<int>>> out;
  for (const auto& b : blocks) {
    auto it = by_mult.find(b.mult);
    if (it == by_mult.end()) {
      if (b.mult == 1) {
        it = by_mult.emplace(1, base).first;
      } else {
        auto scaled = std::make_shared<std::vector<int>>(*base);
        for (int& d : *scaled) d *= b.mult;
        it = by_mult.emplace(b.mult, std::move(scaled)).first;
      }
    }
    out.push_back(it->second);
  }
  return out;
}

}  // namespace

Tensor mix_latents(const Tensor& l_h, const Tensor& l_n, const Tensor& a) {
  return mix_latents_t(l_h, l_n, a);
}

struct Generator::Impl {
  std::vector<std::unique_ptr<Parameter<double>>> owned;
  Weights<double> w;
  uint64_t seed = 0;

  Tensor conv(const std::string& name, int64_t co, int64_t ci, int64_t k) {
    owned.push_back(std::make_unique<Parameter<double>>(
        nn::make_conv_param(name + ".w", co, ci, k, seed)));
    return owned.back()->tensor;
  }
  Tensor bias(const std::string& name, int64_t co) {
    owned.push_back(std::make_unique<Parameter<double>>(
        nn::make_bias_param(name + ".b", co)));
    return owned.back()->tensor;
  }

  BlockW<double> block(const std::string& prefix, int c, int cond_dim, int k,
                       int mult, bool has_res) {
    BlockW<double> b;
    b.mult = mult;
    b.has_res = has_res;
    b.fw = conv(prefix + "/filt", c, c, k);
    b.fb = bias(prefix + "/filt", c);
    b.gw = conv(prefix + "/gate", c, c, k);
    b.gb = bias(prefix + "/gate", c);
    b.cf = conv(prefix + "/condf", c, cond_dim, 1);
    b.cg = conv(prefix + "/condg", c, cond_dim, 1);
    if (has_res) {
      b.rw = conv(prefix + "/res", c, c, 1);
      b.rb = bias(prefix + "/res", c);
    }
    b.sw = conv(prefix + "/skip", c, c, 1);
    b.sb = bias(prefix + "/skip", c);
    return b;
  }

  StackW<double> stack(const std::string& prefix, int layers, int cycles,
                       const GeneratorConfig& cfg, bool pow2_dilation,
                       bool with_input) {
    StackW<double> st;
    if (with_input) {
      st.in_w = conv(prefix + "/in", cfg.channels, 1, 1);
      st.in_b = bias(prefix + "/in", cfg.channels);
    }
    const int cycle_len = layers / cycles;
    for (int i = 0; i < layers; ++i) {
      const int mult = pow2_dilation ? (1 << (i % cycle_len)) : 1;
      st.blocks.push_back(block(prefix + "/" + std::to_string(i),
                                cfg.channels, cfg.cond_dim(), cfg.kernel_size,
                                mult, i + 1 < layers));
    }
    return st;
  }
};

Generator::Generator(const GeneratorConfig& cfg, uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  impl_ = std::make_shared<Impl>();
  impl_->seed = seed;
  const int c = cfg_.channels;
  if (cfg_.single_source) {
    impl_->w.harm = impl_->stack("g/src", cfg_.harmonic_layers,
                                 cfg_.harmonic_cycles, cfg_, true, true);
  } else {
    impl_->w.harm = impl_->stack("g/harm", cfg_.harmonic_layers,
                                 cfg_.harmonic_cycles, cfg_, true, true);
    impl_->w.noise = impl_->stack("g/noise", cfg_.noise_layers, 1, cfg_,
                                  false, true);
    impl_->w.period.w0 = impl_->conv("g/period/0", c, cfg_.cond_dim(), 5);
    impl_->w.period.b0 = impl_->bias("g/period/0", c);
    impl_->w.period.w1 = impl_->conv("g/period/1", c, c, 5);
    impl_->w.period.b1 = impl_->bias("g/period/1", c);
    impl_->w.period.w2 = impl_->conv("g/period/2", c, c, 5);
    impl_->w.period.b2 = impl_->bias("g/period/2", c);
  }
  impl_->w.exc_w = impl_->conv("g/exc", 1, c, 1);
  impl_->w.exc_b = impl_->bias("g/exc", 1);
  impl_->w.filt = impl_->stack("g/filter", cfg_.filter_layers,
                               cfg_.filter_cycles, cfg_, true, false);
  impl_->w.post1_w = impl_->conv("g/post1", c, c, 1);
  impl_->w.post1_b = impl_->bias("g/post1", c);
  impl_->w.post2_w = impl_->conv("g/post2", 1, c, 1);
  impl_->w.post2_b = impl_->bias("g/post2", 1);
}

std::vector<Parameter<double>*> Generator::parameters() {
  std::vector<Parameter<double>*> out;
  out.reserve(impl_->owned.size());
  for (auto& p : impl_->owned) out.push_back(p.get());
  return out;
}

SourceOutputs Generator::source_forward(
    const Tensor& sine, const Tensor& noise, const Tensor& cond,
    std::shared_ptr<const std::vector<int>> dilation) const {
  const int64_t t = sine.shape().d2;
  if (noise.shape().d2 != t || cond.shape().d2 != t)
    throw DataError("length mismatch in source_forward");
  const auto& w = impl_->w;
  SourceOutputs out;
  auto pd = scaled_dilations(w.harm.blocks, std::move(dilation));
  if (cfg_.single_source) {
    out.l = stack_forward(w.harm, add(sine, noise), cond, &pd);
  } else {
    out.l_h = stack_forward(w.harm, sine, cond, &pd);
    out.l_n = stack_forward(w.noise, noise, cond, nullptr);
    out.a = periodicity_forward(w.period, cond);
    out.l = mix_latents(out.l_h, out.l_n, out.a);
  }
  out.e = conv1d(out.l, w.exc_w, w.exc_b);
  return out;
}

Tensor Generator::filter_forward(const Tensor& l, const Tensor& cond) const {
  return filter_forward_t(impl_->w, l, cond);
}

Tensor Generator::project_excitation(const Tensor& l) const {
  return conv1d(l, impl_->w.exc_w, impl_->w.exc_b);
}

Generator::Inputs Generator::prepare(const AcousticFeatures& feat,
                                     uint64_t seed, double f0_scale) const {
  validate_features(feat);
  if (feat.frame_shift != cfg_.frame_shift)
    throw DataError("feature frame shift does not match generator config");
  if (f0_scale <= 0.0) throw DataError("f0 scale must be positive");

  AcousticFeatures scaled = feat;
  for (double& f : scaled.cont_f0) f *= f0_scale;

  std::vector<double> f0_frames(scaled.cont_f0.size(), 0.0);
  for (size_t i = 0; i < f0_frames.size(); ++i)
    if (scaled.vuv[i]) f0_frames[i] = scaled.cont_f0[i];

  ExcitationInputs exc = make_excitation_inputs(
      f0_frames, scaled.vuv, cfg_.frame_shift, cfg_.sample_rate, seed);
  SampleConditioning sc = upsample_conditioning(scaled, cfg_.frame_shift);

  const int64_t t = static_cast<int64_t>(sc.n_samples);
  const int d = cfg_.cond_dim();
  std::vector<double> cv(static_cast<size_t>(d) * t);
  for (int64_t s = 0; s < t; ++s) {
    const double* row = sc.row(static_cast<size_t>(s));
    int ch = 0;
    // continuous F0 enters as log relative to a 160 Hz anchor so its scale
    // matches the other conditioning streams
    cv[ch++ * t + s] = std::log(row[0] / EnvelopeSmoother::kDefaultF0);
    if (cfg_.use_vuv) cv[ch++ * t + s] = row[1];
    for (int j = 0; j < AcousticFeatures::kMcepDim + AcousticFeatures::kCapDim;
         ++j)
      cv[(ch + j) * t + s] = row[2 + j];
  }

  Inputs in;
  in.sine = Tensor::from({1, 1, t}, std::move(exc.sine));
  in.noise = Tensor::from({1, 1, t}, std::move(exc.noise));
  in.cond = Tensor::from({1, d, t}, std::move(cv));
  in.dilation = std::make_shared<std::vector<int>>(dilation_factors(
      exc.per_sample_f0, cfg_.sample_rate, cfg_.dense_factor));
  in.per_sample_f0 = std::move(exc.per_sample_f0);
  return in;
}

GenerateResult Generator::generate(const AcousticFeatures& feat, uint64_t seed,
                                   double f0_scale) const {
  nn::Tape<double> tape;
  nn::TapeScope<double> scope(tape, false);
  Inputs in = prepare(feat, seed, f0_scale);
  SourceOutputs so = source_forward(in.sine, in.noise, in.cond, in.dilation);
  Tensor speech = filter_forward(so.l, in.cond);

  GenerateResult res;
  res.speech.sample_rate = cfg_.sample_rate;
  res.speech.samples = speech.val();
  res.excitation.sample_rate = cfg_.sample_rate;
  res.excitation.samples = so.e.val();
  res.a = so.a;
  return res;
}

AudioBuffer Generator::generate_f32(const AcousticFeatures& feat,
                                    uint64_t seed, double f0_scale) const {
  nn::Tape<float> tape;
  nn::TapeScope<float> scope(tape, false);
  Inputs in = prepare(feat, seed, f0_scale);

  const auto& wd = impl_->w;
  Weights<float> wf;
  auto cast_stack = [](const StackW<double>& s) {
    StackW<float> o;
    o.in_w = cast_tensor<float>(s.in_w);
    o.in_b = cast_tensor<float>(s.in_b);
    for (const auto& b : s.blocks) {
      BlockW<float> c{cast_tensor<float>(b.fw), cast_tensor<float>(b.fb),
                      cast_tensor<float>(b.gw), cast_tensor<float>(b.gb),
                      cast_tensor<float>(b.cf), cast_tensor<float>(b.cg),
                      cast_tensor<float>(b.rw), cast_tensor<float>(b.rb),
                      cast_tensor<float>(b.sw), cast_tensor<float>(b.sb),
                      b.has_res, b.mult};
      o.blocks.push_back(std::move(c));
    }
    return o;
  };
  wf.harm = cast_stack(wd.harm);
  if (!cfg_.single_source) {
    wf.noise = cast_stack(wd.noise);
    wf.period = {cast_tensor<float>(wd.period.w0),
                 cast_tensor<float>(wd.period.b0),
                 cast_tensor<float>(wd.period.w1),
                 cast_tensor<float>(wd.period.b1),
                 cast_tensor<float>(wd.period.w2),
                 cast_tensor<float>(wd.period.b2)};
  }
  wf.filt = cast_stack(wd.filt);
  wf.post1_w = cast_tensor<float>(wd.post1_w);
  wf.post1_b = cast_tensor<float>(wd.post1_b);
  wf.post2_w = cast_tensor<float>(wd.post2_w);
  wf.post2_b = cast_tensor<float>(wd.post2_b);

  auto sine = cast_tensor<float>(in.sine);
  auto noise = cast_tensor<float>(in.noise);
  auto cond = cast_tensor<float>(in.cond);
  auto pd = scaled_dilations(wd.harm.blocks, in.dilation);

  BasicTensor<float> l;
  if (cfg_.single_source) {
    l = stack_forward(wf.harm, add(sine, noise), cond, &pd);
  } else {
    auto l_h = stack_forward(wf.harm, sine, cond, &pd);
    auto l_n = stack_forward(wf.noise, noise, cond, nullptr);
    auto a = periodicity_forward(wf.period, cond);
    l = mix_latents_t(l_h, l_n, a);
  }
  auto speech = filter_forward_t(wf, l, cond);

  AudioBuffer out;
  out.sample_rate = cfg_.sample_rate;
  out.samples.assign(speech.val().begin(), speech.val().end());
  return out;
}

}  // namespace usfgan
