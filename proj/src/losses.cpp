#include "usfgan/losses.hpp"

#include <cmath>

#include "usfgan/common.hpp"

namespace usfgan {

using nn::Tensor;

SpectralContext SpectralContext::make(int sample_rate) {
  SpectralContext ctx;
  auto fb = std::make_shared<MelFilterbank>(
      make_mel_filterbank(ctx.n_mels, ctx.stft.fft_size / 2 + 1, sample_rate,
                          ctx.stft.fft_size, 0.0, sample_rate / 2.0));
  ctx.mel = std::move(fb);
  ctx.smoother =
      std::make_shared<EnvelopeSmoother>(sample_rate, ctx.stft.fft_size);
  return ctx;
}

namespace {

// Data tensors never participate in autodiff.
Tensor wrap_wave(const std::vector<double>& samples) {
  Tensor x = Tensor::zeros({1, 1, int64_t(samples.size())});
  x.storage()->val = samples;
  return x;
}

Tensor constant_like(const std::vector<double>& values, nn::Shape shape) {
  Tensor x = Tensor::zeros(shape);
  x.storage()->val = values;
  return x;
}

// log-mel of the amplitude spectrum, shared by both sides of the mel and
// regularization losses so matched inputs cancel exactly.
Tensor logmel_of(const Tensor& wave, const SpectralContext& ctx) {
  Tensor amp = nn::stft_amplitude(wave, ctx.stft);
  return nn::log_floor(nn::apply_filterbank(amp, ctx.mel), kAmpFloor);
}

Tensor square_mean(const Tensor& x) { return nn::mean_all(nn::mul(x, x)); }

}  // namespace

Tensor residual_logmel(const AudioBuffer& speech,
                       const std::vector<double>& f0_frames,
                       const SpectralContext& ctx) {
  Spectrogram amp = stft(speech, ctx.stft);
  if (int(f0_frames.size()) != amp.frames)
    throw DataError("residual target: f0 frame count mismatch");
  Spectrogram env = spectral_envelope(amp, f0_frames);
  Spectrogram res = residual_spectra(amp, env);
  std::vector<double> mel = mel_project(res, *ctx.mel);
  for (double& v : mel) v = std::log(v);
  return constant_like(mel, {1, amp.frames, ctx.mel->n_mels});
}

Tensor reg_loss_residual(const Tensor& excitation, const Tensor& target_logmel,
                         const SpectralContext& ctx) {
  Tensor got = logmel_of(excitation, ctx);
  if (!(got.shape() == target_logmel.shape()))
    throw DataError("residual regularization: length mismatch");
  return nn::mean_all(nn::abs_op(nn::sub(got, target_logmel)));
}

Tensor reg_loss_residual(const Tensor& excitation, const AudioBuffer& speech,
                         const std::vector<double>& f0_frames,
                         const SpectralContext& ctx) {
  if (int64_t(speech.samples.size()) != excitation.shape().d2)
    throw DataError("residual regularization: length mismatch");
  return reg_loss_residual(excitation, residual_logmel(speech, f0_frames, ctx),
                           ctx);
}

Tensor reg_loss_flat(const Tensor& excitation,
                     const std::vector<double>& f0_frames,
                     const SpectralContext& ctx) {
  Tensor amp = nn::stft_amplitude(excitation, ctx.stft);
  auto f0s = std::make_shared<std::vector<std::vector<double>>>();
  for (int64_t b = 0; b < amp.shape().d0; ++b) f0s->push_back(f0_frames);
  Tensor log_env = nn::envelope_log(amp, ctx.smoother, f0s);
  // (1/N) * L2 norm, so a constant envelope of e scores 1/sqrt(N)
  Tensor sq = nn::sum_all(nn::mul(log_env, log_env));
  return nn::affine(nn::sqrt_floor(sq, 1e-300), 1.0 / double(log_env.numel()),
                    0.0);
}

Tensor mel_spectral_loss(const Tensor& gen, const Tensor& ref,
                         const SpectralContext& ctx) {
  if (!(gen.shape() == ref.shape()))
    throw DataError("mel spectral loss: length mismatch");
  Tensor ref_logmel;
  {
    nn::Tape<double> scratch;
    nn::TapeScope<double> scope(scratch, false);
    ref_logmel = logmel_of(nn::detach(ref), ctx);
  }
  return nn::mean_all(nn::abs_op(nn::sub(logmel_of(gen, ctx), ref_logmel)));
}

Tensor multires_stft_loss(const Tensor& gen, const Tensor& ref,
                          const SpectralContext& ctx) {
  if (!(gen.shape() == ref.shape()))
    throw DataError("multi-resolution stft loss: length mismatch");
  Tensor total;
  for (const StftConfig& res : ctx.multires) {
    Tensor ref_amp;
    {
      nn::Tape<double> scratch;
      nn::TapeScope<double> scope(scratch, false);
      ref_amp = nn::stft_amplitude(nn::detach(ref), res);
    }
    Tensor gen_amp = nn::stft_amplitude(gen, res);
    double ref_norm = 0.0;
    for (double v : ref_amp.storage()->val) ref_norm += v * v;
    ref_norm = std::sqrt(std::max(ref_norm, 1e-300));

    Tensor diff = nn::sub(ref_amp, gen_amp);
    Tensor sc = nn::affine(nn::sqrt_floor(nn::sum_all(nn::mul(diff, diff)),
                                          1e-300),
                           1.0 / ref_norm, 0.0);
    Tensor l1 = nn::mean_all(nn::abs_op(nn::sub(
        nn::log_floor(gen_amp, kAmpFloor), nn::log_floor(ref_amp, kAmpFloor))));
    Tensor term = nn::add(sc, l1);
    total = total.defined() ? nn::add(total, term) : term;
  }
  return nn::affine(total, 1.0 / double(ctx.multires.size()), 0.0);
}

Tensor discriminator_loss(const std::vector<Tensor>& real,
                          const std::vector<Tensor>& fake) {
  if (real.size() != fake.size() || real.empty())
    throw DataError("critic loss: score map count mismatch");
  Tensor total;
  for (size_t i = 0; i < real.size(); ++i) {
    Tensor term = nn::add(square_mean(nn::affine(real[i], -1.0, 1.0)),
                          square_mean(fake[i]));
    total = total.defined() ? nn::add(total, term) : term;
  }
  return total;
}

Tensor adversarial_loss(const std::vector<Tensor>& fake) {
  if (fake.empty()) throw DataError("adversarial loss: no score maps");
  Tensor total;
  for (const Tensor& f : fake) {
    Tensor term = square_mean(nn::affine(f, -1.0, 1.0));
    total = total.defined() ? nn::add(total, term) : term;
  }
  return total;
}

Tensor generator_total(const Tensor& reg, const Tensor& spc, const Tensor& adv,
                       const LossWeights& w) {
  Tensor total = nn::add(nn::affine(spc, w.lambda_spc, 0.0),
                         nn::affine(adv, w.lambda_adv, 0.0));
  if (w.reg_mode != LossWeights::Reg::off) {
    if (!reg.defined())
      throw DataError("generator total: regularization mode set but no term");
    total = nn::add(reg, total);
  }
  return total;
}

}  // namespace usfgan
