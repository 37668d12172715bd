#pragma once

// Adversarial critics. The default is a HiFiGAN-style pair: a multi-period
// bank that folds the waveform by coprime periods and convolves across the
// fold, and a multi-scale bank over average-pooled copies. The alternative
// is the single dilated parallel-WaveGAN critic used by one ablation.
// Channel widths are reduced for desk-scale runs; no weight normalization.

#include <cstdint>
#include <string>
#include <vector>

#include "usfgan/ops.hpp"
#include "usfgan/tensor.hpp"

namespace usfgan {

struct DiscriminatorConfig {
  enum class Kind { hifigan, pwg };

  Kind kind = Kind::hifigan;

  // multi-period bank: per period, strided conv layers k5/s3 with widths
  // base, 2*base, ... capped, then a k3 projection to one score channel
  std::vector<int> periods{2, 3, 5, 7, 11};
  int mpd_layers = 4;
  int mpd_base = 16;
  int mpd_cap = 64;

  // multi-scale bank: scales x1, x2, x4 pooled; k15 front, two grouped
  // k11/s2 layers, grouped k5, then a k3 projection
  int msd_scales = 3;
  int msd_base = 16;
  int msd_cap = 64;
  int msd_groups = 4;

  // dilated single critic: k3 layers, dilations 2^0..2^(layers-1)
  int pwg_layers = 10;
  int pwg_channels = 64;

  void validate() const;

  static DiscriminatorConfig full() { return {}; }
  static DiscriminatorConfig toy();
  static DiscriminatorConfig pwg_toy();
};

class Discriminator {
 public:
  Discriminator(const DiscriminatorConfig& cfg, uint64_t seed);

  const DiscriminatorConfig& config() const { return cfg_; }
  std::vector<nn::Parameter<double>*> parameters();

  // Score maps for x in [B, 1, T]: one per period then one per scale for
  // the HiFiGAN pair, a single per-sample map for the PWG critic. Recorded
  // on the active tape like any op.
  std::vector<nn::Tensor> forward(const nn::Tensor& x) const;

 private:
  DiscriminatorConfig cfg_;
  struct Impl;
  std::shared_ptr<Impl> impl_;
};

}  // namespace usfgan
