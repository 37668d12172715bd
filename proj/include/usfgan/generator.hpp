#pragma once

// Harmonic-plus-noise source-filter generator. A sinusoidal excitation and a
// noise excitation are encoded by two sub-networks (pitch-dependent dilations
// on the harmonic side), blended per channel and sample by a periodicity
// estimator, projected to a 1-channel source excitation, and shaped into
// speech by a dilated residual filter network. A single-source ablation mode
// replaces the trio with one pitch-dependent stack fed sine + noise.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "usfgan/audio.hpp"
#include "usfgan/features.hpp"
#include "usfgan/ops.hpp"
#include "usfgan/tensor.hpp"

namespace usfgan {

struct GeneratorConfig {
  int channels = 64;  // latent / residual / skip width
  int kernel_size = 3;
  int harmonic_layers = 20;
  int harmonic_cycles = 4;
  int noise_layers = 5;
  int filter_layers = 30;
  int filter_cycles = 3;
  int dense_factor = 4;
  bool use_vuv = true;         // conditioning carries the V/UV stream
  bool single_source = false;  // ablation: one PDCNN stack on sine + noise
  int sample_rate = 24000;
  int frame_shift = 120;

  int cond_dim() const {
    return 1 + (use_vuv ? 1 : 0) + AcousticFeatures::kMcepDim +
           AcousticFeatures::kCapDim;
  }
  // Filter-network receptive field, samples per side: sum (K-1)/2 * dilation.
  int64_t receptive_per_side() const;
  void validate() const;
  std::string compat_string() const;

  static GeneratorConfig full() { return {}; }
  static GeneratorConfig toy();
};

// Everything the source half produces for one input. In single-source mode
// only l and e are defined.
struct SourceOutputs {
  nn::Tensor l;    // mixed latent [B, C, T]
  nn::Tensor l_h;  // harmonic latent
  nn::Tensor l_n;  // noise latent
  nn::Tensor a;    // periodicity weights, strictly inside (0, 1)
  nn::Tensor e;    // source excitation [B, 1, T]
};

// l = a (.) l_h + (1 - a) (.) l_n
nn::Tensor mix_latents(const nn::Tensor& l_h, const nn::Tensor& l_n,
                       const nn::Tensor& a);

struct GenerateResult {
  AudioBuffer speech;
  AudioBuffer excitation;
  nn::Tensor a;  // undefined in single-source mode
};

class Generator {
 public:
  Generator(const GeneratorConfig& cfg, uint64_t seed);

  const GeneratorConfig& config() const { return cfg_; }
  std::vector<nn::Parameter<double>*> parameters();

  // Sample-rate network inputs derived from frame-rate features. f0_scale
  // multiplies the continuous F0 before both conditioning and excitation.
  struct Inputs {
    nn::Tensor sine;   // [1, 1, T]
    nn::Tensor noise;  // [1, 1, T]
    nn::Tensor cond;   // [1, cond_dim, T], constant (no grad)
    std::shared_ptr<std::vector<int>> dilation;  // base d_t, length T
    std::vector<double> per_sample_f0;
  };
  Inputs prepare(const AcousticFeatures& feat, uint64_t seed,
                 double f0_scale = 1.0) const;

  SourceOutputs source_forward(
      const nn::Tensor& sine, const nn::Tensor& noise, const nn::Tensor& cond,
      std::shared_ptr<const std::vector<int>> dilation) const;
  nn::Tensor filter_forward(const nn::Tensor& l, const nn::Tensor& cond) const;

  // Latent-to-excitation projection, the last step of source_forward.
  // Exposed so tools can render excitations for hand-picked mixing weights.
  nn::Tensor project_excitation(const nn::Tensor& l) const;

  // Full pipeline without recording; deterministic for fixed (feat, seed).
  GenerateResult generate(const AcousticFeatures& feat, uint64_t seed,
                          double f0_scale = 1.0) const;

  // 32-bit mirror of generate() for fast inference; parameters are cast once.
  AudioBuffer generate_f32(const AcousticFeatures& feat, uint64_t seed,
                           double f0_scale = 1.0) const;

 private:
  struct Impl;
  GeneratorConfig cfg_;
  std::shared_ptr<Impl> impl_;
};

}  // namespace usfgan
