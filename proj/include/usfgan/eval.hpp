#pragma once

// Objective copy-synthesis metrics (log-F0 RMSE, voiced/unvoiced decision
// error, mel-cepstral distortion) and the harness that re-synthesizes a
// corpus at an F0 scale, re-analyzes the output, and aggregates per-utterance
// scores into a report.

#include <cstdint>
#include <string>
#include <vector>

#include "usfgan/features.hpp"
#include "usfgan/generator.hpp"
#include "usfgan/training.hpp"

namespace usfgan {

// RMS of ln(gen_f0 / ref_f0) over frames voiced in both contours.
// Throws DataError when the frame counts differ or no co-voiced frame exists.
double rmse_log_f0(const std::vector<double>& ref_f0,
                   const std::vector<int>& ref_vuv,
                   const std::vector<double>& gen_f0,
                   const std::vector<int>& gen_vuv);

// 100 * mismatched frames / total frames.
double vuv_error(const std::vector<int>& ref_vuv,
                 const std::vector<int>& gen_vuv);

// Mean over frames of (10/ln 10) * sqrt(2 * sum_{d=1..order-1} diff_d^2);
// the 0th (energy) coefficient is excluded. Rows are frame-aligned, no
// warping. Throws DataError on dimension mismatch.
double mcd(const std::vector<double>& ref_mcep,
           const std::vector<double>& gen_mcep,
           int order = AcousticFeatures::kMcepDim);

struct UtteranceEval {
  double rmse_log_f0 = 0.0;
  double vuv_error = 0.0;
  double mcd = 0.0;  // meaningful only when the report carries has_mcd
};

struct EvalReport {
  double f0_scale = 1.0;
  bool has_mcd = true;  // spectral comparison only makes sense at scale 1
  std::vector<UtteranceEval> utterances;
  double mean_rmse_log_f0 = 0.0;
  double mean_vuv_error = 0.0;
  double mean_mcd = 0.0;

  std::string to_text() const;  // one line per utterance + summary line
  std::string to_csv() const;
};

// Re-analyzes `generated` (tracker grid scaled with f0_scale) and scores it
// against the reference features with the reference F0 scaled by f0_scale.
UtteranceEval evaluate_pair(const AcousticFeatures& ref,
                            const AudioBuffer& generated, double f0_scale);

// Synthesizes every corpus item at f0_scale and aggregates. Deterministic
// for a fixed seed.
EvalReport evaluate(const Generator& gen, const std::vector<CorpusItem>& corpus,
                    double f0_scale = 1.0, uint64_t seed = 0);

// Builds the models described by cfg, loads the checkpoint strictly (the
// critics ride along), and evaluates the generator.
EvalReport evaluate_checkpoint(const std::string& checkpoint_path,
                               const TrainingConfig& cfg,
                               const std::vector<CorpusItem>& corpus,
                               double f0_scale = 1.0, uint64_t seed = 0);

}  // namespace usfgan
