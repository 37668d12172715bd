#pragma once

// Desk-scale adversarial training: a deterministic synthetic corpus stands in
// for real speech, one discriminator update and one generator update per
// iteration, Adam for both, periodic checkpoints, and a strict line-based
// "key = value" config reader. Fixed seed gives bitwise-identical runs.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "usfgan/audio.hpp"
#include "usfgan/discriminators.hpp"
#include "usfgan/features.hpp"
#include "usfgan/generator.hpp"
#include "usfgan/losses.hpp"

namespace usfgan {

struct TrainingConfig {
  std::string preset = "toy";  // toy | full
  int64_t iterations = 5000;
  int batch_size = 1;
  int64_t segment_length = 8192;  // samples per training clip
  double lr_g = 2e-4;
  double lr_d = 2e-4;
  int64_t lr_halve_every = 0;  // iterations between x0.5 decays, 0 = constant
  uint64_t seed = 0;
  LossWeights weights;                // defaults reproduce the full objective
  bool single_source = false;         // ablation: one-stack source network
  int64_t checkpoint_every = 1000;
  std::string out_dir = "train_out";
  std::string resume;  // checkpoint path to continue from, empty = fresh

  GeneratorConfig generator_config() const;
  DiscriminatorConfig discriminator_config() const;
  // Model-identity string stored in checkpoints and verified on load.
  std::string compat_string() const;
  void validate() const;

  static TrainingConfig toy();
  static TrainingConfig full();
};

// Named experiment switches: "no-reg" drops the regularization term,
// "single-source" swaps in the one-stack source network, "pwg-critic"
// replaces the multi-period/multi-scale critics with the single dilated
// stack, "multires-spc" swaps the mel loss for the multi-resolution STFT
// loss. Unknown names raise DataError.
void apply_ablation(TrainingConfig& cfg, const std::string& name);

// Line-based "key = value" text; '#' starts a comment; unknown keys and
// malformed values raise DataError. A "preset" line resets the fields that
// depend on it (iterations, segment length, decay), so put it first.
TrainingConfig parse_training_config(const std::string& text);
TrainingConfig read_training_config(const std::string& path);

// --- synthetic corpus -------------------------------------------------------

struct SyntheticCorpusSpec {
  int n_utterances = 50;
  double duration_s = 1.0;  // rounded up to a whole number of frames
  int sample_rate = 24000;
  int frame_shift = 120;
  double f0_min = 80.0;   // Hz, contour stays inside [f0_min, f0_max]
  double f0_max = 300.0;
  double noise_floor = 3e-3;  // additive white-noise amplitude

  void validate() const;  // F0 range must sit inside the tracker search grid
};

struct CorpusItem {
  AudioBuffer audio;
  AcousticFeatures feat;  // F0/VUV exact by construction, mcep/cap extracted
};

// Pulse-train-plus-noise source with a known F0 contour and voiced/unvoiced
// segmentation, shaped by two randomized resonators per utterance.
std::vector<CorpusItem> make_synthetic_corpus(const SyntheticCorpusSpec& spec,
                                              uint64_t seed);

// Directory of utt_NNNN.wav (float32) + utt_NNNN.usff pairs.
void write_corpus(const std::vector<CorpusItem>& corpus,
                  const std::string& dir);
std::vector<CorpusItem> read_corpus(const std::string& dir);

// --- training loop ----------------------------------------------------------

struct TrainModels {
  Generator gen;
  Discriminator disc;
  std::vector<nn::Parameter<double>*> g_params;
  std::vector<nn::Parameter<double>*> d_params;
  SpectralContext ctx;

  explicit TrainModels(const TrainingConfig& cfg);
  // Generator then discriminator, the checkpoint parameter order.
  std::vector<nn::Parameter<double>*> all_params() const;
};

struct TrainBatch {
  std::vector<AudioBuffer> clips;       // segment_length samples each
  std::vector<AcousticFeatures> feats;  // frames covering each clip
  std::vector<uint64_t> noise_seeds;
};

// Deterministic function of (config seed, iteration): utterance choice,
// frame-aligned crop, and the excitation noise seed.
TrainBatch sample_batch(const std::vector<CorpusItem>& corpus,
                        const TrainingConfig& cfg, int64_t iteration);

struct TrainStepResult {
  double d_loss = 0.0;
  double g_loss = 0.0;
  double reg = 0.0;  // 0 when the term is switched off
  double spc = 0.0;
  double adv = 0.0;
};

// One discriminator update followed by one generator update. NaN anywhere
// surfaces as NumericError naming the first offending op.
TrainStepResult train_step(const TrainBatch& batch, TrainModels& models,
                           const TrainingConfig& cfg, int64_t iteration);

struct TrainResult {
  std::string checkpoint_path;  // final checkpoint
  std::string log_path;
  int64_t iterations_run = 0;
};

using TrainHook =
    std::function<void(int64_t iteration, const TrainStepResult&)>;

// Full loop: loss log lines "iteration<TAB>name<TAB>value", a periodic
// checkpoint_latest and a final checkpoint_final under out_dir. Resuming from
// a checkpoint continues the exact loss trajectory of an unbroken run.
TrainResult train(const TrainingConfig& cfg,
                  const std::vector<CorpusItem>& corpus,
                  const TrainHook& on_step = {});

}  // namespace usfgan
