#include "usfgan/eval.hpp"

#include <cmath>
#include <sstream>

#include "usfgan/checkpoint.hpp"

namespace usfgan {

namespace {

// pairwise summation keeps the reported means independent of utterance
// chunking/order decisions upstream
double pairwise_sum(const double* x, size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  const size_t h = n / 2;
  return pairwise_sum(x, h) + pairwise_sum(x + h, n - h);
}

double pairwise_mean(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  return pairwise_sum(x.data(), x.size()) / double(x.size());
}

uint64_t mix64(uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace

double rmse_log_f0(const std::vector<double>& ref_f0,
                   const std::vector<int>& ref_vuv,
                   const std::vector<double>& gen_f0,
                   const std::vector<int>& gen_vuv) {
  if (ref_f0.size() != ref_vuv.size() || gen_f0.size() != gen_vuv.size() ||
      ref_f0.size() != gen_f0.size())
    throw DataError("rmse_log_f0: frame counts differ");
  std::vector<double> sq;
  for (size_t i = 0; i < ref_f0.size(); ++i) {
    if (!ref_vuv[i] || !gen_vuv[i]) continue;
    if (!(ref_f0[i] > 0.0) || !(gen_f0[i] > 0.0))
      throw DataError("rmse_log_f0: voiced frame with non-positive F0");
    const double d = std::log(gen_f0[i]) - std::log(ref_f0[i]);
    sq.push_back(d * d);
  }
  if (sq.empty()) throw DataError("rmse_log_f0: no co-voiced frames");
  return std::sqrt(pairwise_mean(sq));
}

double vuv_error(const std::vector<int>& ref_vuv,
                 const std::vector<int>& gen_vuv) {
  if (ref_vuv.size() != gen_vuv.size() || ref_vuv.empty())
    throw DataError("vuv_error: frame counts differ or empty");
  size_t bad = 0;
  for (size_t i = 0; i < ref_vuv.size(); ++i)
    if ((ref_vuv[i] != 0) != (gen_vuv[i] != 0)) ++bad;
  return 100.0 * double(bad) / double(ref_vuv.size());
}

double mcd(const std::vector<double>& ref_mcep,
           const std::vector<double>& gen_mcep, int order) {
  if (order < 2) throw DataError("mcd: need at least two coefficients");
  if (ref_mcep.size() != gen_mcep.size() || ref_mcep.empty() ||
      ref_mcep.size() % size_t(order) != 0)
    throw DataError("mcd: mel-cepstra dimensions differ");
  const size_t frames = ref_mcep.size() / size_t(order);
  const double scale = 10.0 / std::log(10.0);
  std::vector<double> per_frame(frames);
  for (size_t f = 0; f < frames; ++f) {
    const double* a = ref_mcep.data() + f * size_t(order);
    const double* b = gen_mcep.data() + f * size_t(order);
    double s = 0.0;
    for (int d = 1; d < order; ++d) {
      const double diff = a[d] - b[d];
      s += diff * diff;
    }
    per_frame[f] = scale * std::sqrt(2.0 * s);
  }
  return pairwise_mean(per_frame);
}

UtteranceEval evaluate_pair(const AcousticFeatures& ref,
                            const AudioBuffer& generated, double f0_scale) {
  if (f0_scale <= 0.0) throw DataError("evaluate: F0 scale must be positive");

  // the output register scales with the target, so scale the search grid too
  F0Config tracker;
  tracker.fmin *= f0_scale;
  tracker.fmax *= f0_scale;
  tracker.frame_shift = ref.frame_shift;
  auto [gen_f0, gen_vuv] = estimate_f0(generated, tracker);
  if (int(gen_f0.size()) != ref.n_frames)
    throw DataError("evaluate: generated frame count differs from reference");

  std::vector<double> ref_f0(ref.cont_f0.size());
  for (size_t i = 0; i < ref_f0.size(); ++i)
    ref_f0[i] = ref.cont_f0[i] * f0_scale;

  UtteranceEval r;
  r.rmse_log_f0 = rmse_log_f0(ref_f0, ref.vuv, gen_f0, gen_vuv);
  r.vuv_error = vuv_error(ref.vuv, gen_vuv);
  if (f0_scale == 1.0) {
    StftConfig stft_cfg;
    stft_cfg.frame_shift = ref.frame_shift;
    Spectrogram spec = stft(generated, stft_cfg);
    Spectrogram env = spectral_envelope(spec, gen_f0);
    r.mcd = mcd(ref.mcep, mcep_from_envelope(env));
  }
  return r;
}

EvalReport evaluate(const Generator& gen,
                    const std::vector<CorpusItem>& corpus, double f0_scale,
                    uint64_t seed) {
  if (corpus.empty()) throw DataError("evaluate: empty corpus");
  EvalReport rep;
  rep.f0_scale = f0_scale;
  rep.has_mcd = f0_scale == 1.0;
  std::vector<double> rmses, vuvs, mcds;
  for (size_t u = 0; u < corpus.size(); ++u) {
    GenerateResult synth =
        gen.generate(corpus[u].feat, mix64(seed) + u, f0_scale);
    UtteranceEval e = evaluate_pair(corpus[u].feat, synth.speech, f0_scale);
    rmses.push_back(e.rmse_log_f0);
    vuvs.push_back(e.vuv_error);
    if (rep.has_mcd) mcds.push_back(e.mcd);
    rep.utterances.push_back(e);
  }
  rep.mean_rmse_log_f0 = pairwise_mean(rmses);
  rep.mean_vuv_error = pairwise_mean(vuvs);
  rep.mean_mcd = pairwise_mean(mcds);
  return rep;
}

EvalReport evaluate_checkpoint(const std::string& checkpoint_path,
                               const TrainingConfig& cfg,
                               const std::vector<CorpusItem>& corpus,
                               double f0_scale, uint64_t seed) {
  TrainModels models(cfg);
  auto all = models.all_params();
  nn::CheckpointMeta meta = nn::load_checkpoint(checkpoint_path, all);
  if (meta.config != cfg.compat_string())
    throw DataError("checkpoint/config mismatch: file has '" + meta.config +
                    "', config builds '" + cfg.compat_string() + "'");
  return evaluate(models.gen, corpus, f0_scale, seed);
}

std::string EvalReport::to_text() const {
  std::ostringstream os;
  os.precision(6);
  os << "f0_scale " << f0_scale << "\n";
  for (size_t u = 0; u < utterances.size(); ++u) {
    os << "utt " << u << "  rmse_log_f0 " << utterances[u].rmse_log_f0
       << "  vuv " << utterances[u].vuv_error << "%";
    if (has_mcd) os << "  mcd " << utterances[u].mcd << " dB";
    os << "\n";
  }
  os << "mean  rmse_log_f0 " << mean_rmse_log_f0 << "  vuv " << mean_vuv_error
     << "%";
  if (has_mcd) os << "  mcd " << mean_mcd << " dB";
  os << "\n";
  return os.str();
}

std::string EvalReport::to_csv() const {
  std::ostringstream os;
  os.precision(10);
  os << "utterance,f0_scale,rmse_log_f0,vuv_error_percent,mcd_db\n";
  auto row = [&](const std::string& tag, double r, double v, double m) {
    os << tag << "," << f0_scale << "," << r << "," << v << ",";
    if (has_mcd) os << m;
    os << "\n";
  };
  for (size_t u = 0; u < utterances.size(); ++u)
    row(std::to_string(u), utterances[u].rmse_log_f0, utterances[u].vuv_error,
        utterances[u].mcd);
  row("mean", mean_rmse_log_f0, mean_vuv_error, mean_mcd);
  return os.str();
}

}  // namespace usfgan
