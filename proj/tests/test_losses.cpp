#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "gradcheck.hpp"
#include "usfgan/losses.hpp"

using namespace usfgan;
using namespace usfgan::nn;

namespace {

// Voiced-ish test signal: a few sinusoids over a noise bed so every mel band
// carries energy well above the amplitude floor.
std::vector<double> test_wave(int64_t t, uint64_t seed, double amp = 0.3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.05);
  std::vector<double> x(t);
  for (int64_t i = 0; i < t; ++i) {
    double v = noise(rng);
    for (double f : {120.0, 743.0, 2411.0, 7919.0})
      v += amp * std::sin(2.0 * M_PI * f * double(i) / 24000.0);
    x[i] = v;
  }
  return x;
}

Tensor wave_tensor(const std::vector<double>& samples, bool needs_grad = false) {
  Tensor x = Tensor::zeros({1, 1, int64_t(samples.size())});
  x.storage()->val = samples;
  x.storage()->needs_grad = needs_grad;
  return x;
}

std::vector<double> frame_f0s(int64_t t, double f0) {
  return std::vector<double>(size_t(n_frames_for(size_t(t), 120)), f0);
}

}  // namespace

TEST_CASE("mel spectral loss is zero on identical waveforms") {
  auto w = test_wave(4096, 1);
  SpectralContext ctx = SpectralContext::make(24000);
  Tensor loss = mel_spectral_loss(wave_tensor(w), wave_tensor(w), ctx);
  CHECK(loss.item() == 0.0);
}

TEST_CASE("doubling the waveform shifts every mel band by log 2") {
  auto w = test_wave(4096, 2);
  auto w2 = w;
  for (double& v : w2) v *= 2.0;
  SpectralContext ctx = SpectralContext::make(24000);
  double l = mel_spectral_loss(wave_tensor(w2), wave_tensor(w), ctx).item();
  CHECK(std::abs(l - std::log(2.0)) < 1e-9);  // well inside the 1e-6 budget

  // symmetry
  double lr = mel_spectral_loss(wave_tensor(w), wave_tensor(w2), ctx).item();
  CHECK(l == doctest::Approx(lr).epsilon(1e-12));
}

TEST_CASE("residual regularization is zero when the excitation spectrum equals the target") {
  // envelope == 1 injection: the target is built from the raw spectrum so the
  // residual equals the spectrum itself, and the excitation is the same wave
  auto w = test_wave(4096, 3);
  SpectralContext ctx = SpectralContext::make(24000);
  AudioBuffer speech{w, 24000};
  Spectrogram amp = stft(speech, ctx.stft);
  std::vector<double> mel = mel_project(amp, *ctx.mel);
  for (double& v : mel) v = std::log(v);
  Tensor target = Tensor::zeros({1, amp.frames, ctx.mel->n_mels});
  target.storage()->val = mel;

  double matched = reg_loss_residual(wave_tensor(w), target, ctx).item();
  CHECK(std::abs(matched) < 1e-9);

  // scaling the excitation by e shifts every log-mel element by exactly 1
  auto we = w;
  for (double& v : we) v *= M_E;
  double shifted = reg_loss_residual(wave_tensor(we), target, ctx).item();
  CHECK(std::abs(shifted - (matched + 1.0)) < 1e-6);
}

TEST_CASE("residual regularization against real speech targets") {
  auto w = test_wave(4096, 4);
  SpectralContext ctx = SpectralContext::make(24000);
  AudioBuffer speech{w, 24000};
  auto f0s = frame_f0s(4096, 120.0);

  // the full pipeline: excitation scaled by e shifts the loss by <= 1 from
  // the base (triangle inequality; equality when no sign flips occur)
  Tensor target = residual_logmel(speech, f0s, ctx);
  CHECK(target.shape().d1 == n_frames_for(4096, 120));
  double base = reg_loss_residual(wave_tensor(w), target, ctx).item();
  CHECK(base >= 0.0);
  CHECK(std::isfinite(base));

  // convenience overload agrees with the split form
  double conv = reg_loss_residual(wave_tensor(w), speech, f0s, ctx).item();
  CHECK(conv == doctest::Approx(base).epsilon(1e-15));

  // length mismatch is an error
  CHECK_THROWS_AS(
      reg_loss_residual(wave_tensor(test_wave(2048, 5)), speech, f0s, ctx),
      DataError);
}

TEST_CASE("residual regularization gradient matches finite differences") {
  auto w = test_wave(1536, 6);
  SpectralContext ctx = SpectralContext::make(24000);
  AudioBuffer speech{w, 24000};
  auto f0s = frame_f0s(1536, 150.0);
  Tensor target = residual_logmel(speech, f0s, ctx);

  auto exc_w = test_wave(1536, 7);
  Tensor exc = wave_tensor(exc_w, true);
  auto loss = [&]() { return reg_loss_residual(exc, target, ctx); };
  auto rep = gradcheck::check(loss, {exc}, 1e-4, 1e-6, 7);
  INFO(rep.worst);
  CHECK(rep.ok);
}

TEST_CASE("flat regularization value matches an independent envelope pass") {
  auto w = test_wave(2048, 8);
  SpectralContext ctx = SpectralContext::make(24000);
  auto f0s = frame_f0s(2048, 130.0);
  double got = reg_loss_flat(wave_tensor(w), f0s, ctx).item();

  Spectrogram amp = stft(AudioBuffer{w, 24000}, ctx.stft);
  double sq = 0.0;
  std::vector<double> log_env(size_t(amp.bins));
  for (int f = 0; f < amp.frames; ++f) {
    ctx.smoother->log_envelope_row(amp.row(f), log_env.data(), f0s[size_t(f)]);
    for (double v : log_env) sq += v * v;
  }
  double want = std::sqrt(sq) / double(size_t(amp.frames) * amp.bins);
  CHECK(got == doctest::Approx(want).epsilon(1e-9));
  CHECK(got > 0.0);
}

TEST_CASE("flat regularization penalizes peaked spectra over broadband") {
  SpectralContext ctx = SpectralContext::make(24000);
  auto f0s = frame_f0s(2048, 0.0);
  std::mt19937_64 rng(9);
  std::normal_distribution<double> dist(0.0, 0.2);
  std::vector<double> peaked(2048), broad(2048);
  for (int64_t i = 0; i < 2048; ++i) {
    peaked[i] = std::sin(2.0 * M_PI * 400.0 * double(i) / 24000.0);
    broad[i] = dist(rng);
  }
  double l_peaked = reg_loss_flat(wave_tensor(peaked), f0s, ctx).item();
  double l_broad = reg_loss_flat(wave_tensor(broad), f0s, ctx).item();
  CHECK(l_peaked > 2.0 * l_broad);
}

TEST_CASE("flat regularization gradient matches finite differences") {
  auto w = test_wave(1536, 10);
  SpectralContext ctx = SpectralContext::make(24000);
  auto f0s = frame_f0s(1536, 170.0);
  Tensor exc = wave_tensor(w, true);
  auto loss = [&]() { return reg_loss_flat(exc, f0s, ctx); };
  auto rep = gradcheck::check(loss, {exc}, 1e-4, 1e-6, 7);
  INFO(rep.worst);
  CHECK(rep.ok);
}

TEST_CASE("multi-resolution stft loss: zero at identity, nonnegative, shift-tolerance") {
  SpectralContext ctx = SpectralContext::make(24000);
  auto w = test_wave(4096, 11);
  double zero = multires_stft_loss(wave_tensor(w), wave_tensor(w), ctx).item();
  CHECK(std::abs(zero) < 1e-12);

  auto v = test_wave(4096, 12);
  CHECK(multires_stft_loss(wave_tensor(v), wave_tensor(w), ctx).item() > 0.0);

  // one-sample circular shift of a sinusoid: the STFT loss reacts more
  // strongly, relative to its own scale, than the mel loss does
  std::vector<double> sine(4096), shifted(4096);
  for (int64_t i = 0; i < 4096; ++i)
    sine[i] = 0.5 * std::sin(2.0 * M_PI * 523.0 * double(i) / 24000.0) +
              0.01 * std::sin(2.0 * M_PI * 3001.0 * double(i) / 24000.0);
  for (int64_t i = 0; i < 4096; ++i) shifted[i] = sine[size_t((i + 1) % 4096)];
  double stft_shift =
      multires_stft_loss(wave_tensor(shifted), wave_tensor(sine), ctx).item();
  double mel_shift =
      mel_spectral_loss(wave_tensor(shifted), wave_tensor(sine), ctx).item();
  CHECK(stft_shift > 0.0);
  CHECK(stft_shift / mel_shift > 1.0);
}

TEST_CASE("multi-resolution stft gradient matches finite differences") {
  SpectralContext ctx = SpectralContext::make(24000);
  // keep the run small: one resolution, short window
  ctx.multires = {{256, 64, 128}};
  auto w = test_wave(640, 13);
  auto r = test_wave(640, 14);
  Tensor gen = wave_tensor(w, true);
  Tensor ref = wave_tensor(r);
  auto loss = [&]() { return multires_stft_loss(gen, ref, ctx); };
  auto rep = gradcheck::check(loss, {gen}, 1e-4, 1e-6, 3);
  INFO(rep.worst);
  CHECK(rep.ok);
}

TEST_CASE("mel spectral gradient matches finite differences") {
  SpectralContext ctx = SpectralContext::make(24000);
  auto w = test_wave(1536, 15);
  auto r = test_wave(1536, 16);
  Tensor gen = wave_tensor(w, true);
  auto loss = [&]() { return mel_spectral_loss(gen, wave_tensor(r), ctx); };
  auto rep = gradcheck::check(loss, {gen}, 1e-4, 1e-6, 7);
  INFO(rep.worst);
  CHECK(rep.ok);
}

TEST_CASE("least-squares critic endpoints") {
  auto fill = [](double v, int64_t n) {
    Tensor t = Tensor::zeros({1, 1, n});
    std::fill(t.storage()->val.begin(), t.storage()->val.end(), v);
    return t;
  };
  // D(x) == 1, D(x_hat) == 0 on a single map
  Tensor ld = discriminator_loss({fill(1.0, 16)}, {fill(0.0, 16)});
  Tensor ladv = adversarial_loss({fill(0.0, 16)});
  CHECK(ld.item() == 0.0);
  CHECK(ladv.item() == 1.0);

  // D == 0.5 everywhere
  CHECK(discriminator_loss({fill(0.5, 8)}, {fill(0.5, 8)}).item() ==
        doctest::Approx(0.5).epsilon(1e-15));

  // multiple maps accumulate
  CHECK(adversarial_loss({fill(0.0, 4), fill(0.0, 4)}).item() ==
        doctest::Approx(2.0).epsilon(1e-15));

  CHECK_THROWS_AS(discriminator_loss({fill(1.0, 4)}, {}), DataError);
}

TEST_CASE("adversarial gradient is -2(1-D)/count") {
  Tensor fake = Tensor::zeros({1, 1, 5});
  fake.storage()->val = {0.1, -0.3, 0.7, 1.2, 0.0};
  fake.storage()->needs_grad = true;
  {
    Tape<double> tape;
    TapeScope<double> scope(tape, true);
    Tensor l = adversarial_loss({fake});
    tape.backward(l);
  }
  for (int i = 0; i < 5; ++i) {
    double want = -2.0 * (1.0 - fake.storage()->val[size_t(i)]) / 5.0;
    CHECK(fake.grad()[size_t(i)] == doctest::Approx(want).epsilon(1e-12));
  }
  fake.storage()->grad.clear();  // gradients accumulate across backward passes

  auto loss = [&]() { return adversarial_loss({fake}); };
  auto rep = gradcheck::check(loss, {fake}, 1e-6, 1e-5);
  INFO(rep.worst);
  CHECK(rep.ok);
}

TEST_CASE("critic loss gradient matches finite differences") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> dist(-0.5, 1.5);
  Tensor real = Tensor::zeros({1, 1, 12}), fake = Tensor::zeros({1, 1, 12});
  for (auto& v : real.storage()->val) v = dist(rng);
  for (auto& v : fake.storage()->val) v = dist(rng);
  real.storage()->needs_grad = true;
  fake.storage()->needs_grad = true;
  auto loss = [&]() { return discriminator_loss({real}, {fake}); };
  auto rep = gradcheck::check(loss, {real, fake}, 1e-6, 1e-5);
  INFO(rep.worst);
  CHECK(rep.ok);
}

TEST_CASE("weighted composition and ablation switches") {
  auto scalar = [](double v) {
    Tensor t = Tensor::zeros({1, 1, 1});
    t.storage()->val[0] = v;
    return t;
  };
  LossWeights hn = LossWeights::hn();
  CHECK(hn.lambda_spc == 15.0);
  CHECK(hn.lambda_adv == 1.0);
  CHECK(generator_total(scalar(0.2), scalar(0.1), scalar(0.3), hn).item() ==
        doctest::Approx(2.0).epsilon(1e-15));

  LossWeights off = hn;
  off.reg_mode = LossWeights::Reg::off;
  CHECK(generator_total(Tensor(), scalar(0.1), scalar(0.3), off).item() ==
        doctest::Approx(1.8).epsilon(1e-15));

  LossWeights base = LossWeights::baseline();
  CHECK(base.lambda_spc == 1.0);
  CHECK(base.lambda_adv == 4.0);
  CHECK(base.adv_mode == LossWeights::Adv::pwg);
  CHECK(generator_total(scalar(0.2), scalar(0.1), scalar(0.3), base).item() ==
        doctest::Approx(0.2 + 0.1 + 1.2).epsilon(1e-15));

  CHECK_THROWS_AS(generator_total(Tensor(), scalar(0.1), scalar(0.3), hn),
                  DataError);
}

TEST_CASE("losses stay nonnegative on random pairs") {
  SpectralContext ctx = SpectralContext::make(24000);
  for (uint64_t s = 20; s < 23; ++s) {
    auto a = test_wave(2048, s), b = test_wave(2048, s + 100);
    auto f0s = frame_f0s(2048, 110.0);
    CHECK(mel_spectral_loss(wave_tensor(a), wave_tensor(b), ctx).item() >= 0.0);
    CHECK(multires_stft_loss(wave_tensor(a), wave_tensor(b), ctx).item() >= 0.0);
    CHECK(reg_loss_flat(wave_tensor(a), f0s, ctx).item() >= 0.0);
    CHECK(reg_loss_residual(wave_tensor(a), AudioBuffer{b, 24000}, f0s, ctx)
              .item() >= 0.0);
  }
}
