#pragma once

// Training objectives. The generator objective is
//   L_G = L_reg + lambda_spc * L_spc + lambda_adv * L_adv
// where L_reg pulls the source excitation spectrum toward the residual
// spectra of the target speech (or toward flatness in the baseline mode),
// L_spc is a log-mel L1 (or the multi-resolution STFT loss), and the
// adversarial pair follows the least-squares GAN reading. Reference sides
// never carry gradients.

#include <vector>

#include "usfgan/audio.hpp"
#include "usfgan/dsp.hpp"
#include "usfgan/ops.hpp"

namespace usfgan {

struct LossWeights {
  double lambda_spc = 15.0;
  double lambda_adv = 1.0;
  enum class Reg { residual, flat, off } reg_mode = Reg::residual;
  enum class Spc { mel, multires_stft } spc_mode = Spc::mel;
  enum class Adv { hifigan, pwg } adv_mode = Adv::hifigan;

  static LossWeights hn() { return {}; }
  static LossWeights baseline() {
    LossWeights w;
    w.lambda_spc = 1.0;
    w.lambda_adv = 4.0;
    w.reg_mode = Reg::flat;
    w.spc_mode = Spc::multires_stft;
    w.adv_mode = Adv::pwg;
    return w;
  }
};

// Shared spectral machinery: one analysis setting for the mel and
// regularization losses, the pitch-adaptive envelope smoother, and the
// multi-resolution set.
struct SpectralContext {
  StftConfig stft{1024, 120, 600};
  int n_mels = 80;
  std::shared_ptr<const MelFilterbank> mel;
  std::shared_ptr<const EnvelopeSmoother> smoother;
  std::vector<StftConfig> multires{{1024, 120, 600},
                                   {2048, 240, 1200},
                                   {512, 50, 240}};

  static SpectralContext make(int sample_rate);
};

// Log-mel of the residual spectra of speech (amplitude over envelope,
// frame power preserved): the regularization target, [1, frames, mels],
// no gradient. f0_frames sized to the frame count selects the smoothing
// widths (0 = unvoiced default).
nn::Tensor residual_logmel(const AudioBuffer& speech,
                           const std::vector<double>& f0_frames,
                           const SpectralContext& ctx);

// Mean |log-mel(excitation spectrum) - target|.
nn::Tensor reg_loss_residual(const nn::Tensor& excitation,
                             const nn::Tensor& target_logmel,
                             const SpectralContext& ctx);
nn::Tensor reg_loss_residual(const nn::Tensor& excitation,
                             const AudioBuffer& speech,
                             const std::vector<double>& f0_frames,
                             const SpectralContext& ctx);

// (1/N) * || log envelope(excitation) ||_2, the flatness pull of the
// baseline model.
nn::Tensor reg_loss_flat(const nn::Tensor& excitation,
                         const std::vector<double>& f0_frames,
                         const SpectralContext& ctx);

// Mean |log-mel(gen) - log-mel(ref)|; ref enters as data.
nn::Tensor mel_spectral_loss(const nn::Tensor& gen, const nn::Tensor& ref,
                             const SpectralContext& ctx);

// Mean over resolutions of spectral convergence + log-magnitude L1.
nn::Tensor multires_stft_loss(const nn::Tensor& gen, const nn::Tensor& ref,
                              const SpectralContext& ctx);

// Least-squares critic objectives, summed over score maps:
//   L_D   = sum_i mean[(1 - D_i(x))^2] + mean[D_i(x_hat)^2]
//   L_adv = sum_i mean[(1 - D_i(x_hat))^2]
// Detaching the fake waveform for L_D is the caller's job.
nn::Tensor discriminator_loss(const std::vector<nn::Tensor>& real,
                              const std::vector<nn::Tensor>& fake);
nn::Tensor adversarial_loss(const std::vector<nn::Tensor>& fake);

// Weighted composition; reg may be undefined when reg_mode is off.
nn::Tensor generator_total(const nn::Tensor& reg, const nn::Tensor& spc,
                           const nn::Tensor& adv, const LossWeights& w);

}  // namespace usfgan
