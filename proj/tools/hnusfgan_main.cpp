// Command-line front end: feature extraction, synthetic corpus generation,
// training, synthesis, excitation dumps, and objective evaluation.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "usfgan/audio.hpp"
#include "usfgan/checkpoint.hpp"
#include "usfgan/common.hpp"
#include "usfgan/dsp.hpp"
#include "usfgan/eval.hpp"
#include "usfgan/features.hpp"
#include "usfgan/generator.hpp"
#include "usfgan/losses.hpp"
#include "usfgan/training.hpp"

namespace {

using namespace usfgan;

std::string fmt_num(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

// Architecture is recovered from the checkpoint's compatibility string by
// scanning the small space of buildable configurations, so synth/eval/dump
// need no preset flags and cannot silently load into the wrong network.
TrainingConfig config_for_checkpoint(const std::string& path) {
  const nn::CheckpointMeta meta = nn::peek_checkpoint(path);
  for (const char* preset : {"toy", "full"}) {
    for (bool single : {false, true}) {
      for (auto adv : {LossWeights::Adv::hifigan, LossWeights::Adv::pwg}) {
        TrainingConfig cfg = std::string(preset) == "toy"
                                 ? TrainingConfig::toy()
                                 : TrainingConfig::full();
        cfg.single_source = single;
        cfg.weights.adv_mode = adv;
        if (cfg.compat_string() == meta.config) return cfg;
      }
    }
  }
  throw DataError("unrecognized checkpoint architecture: " + meta.config);
}

TrainModels load_models(const std::string& ckpt, TrainingConfig* cfg_out) {
  TrainingConfig cfg = config_for_checkpoint(ckpt);
  TrainModels models(cfg);
  nn::load_checkpoint(ckpt, models.all_params());
  if (cfg_out) *cfg_out = cfg;
  return models;
}

// Monochrome log-magnitude spectrogram, high frequencies at the top,
// 60 dB of range below the peak.
void write_spectrogram_pgm(const std::string& path, const AudioBuffer& audio) {
  Spectrogram spec = stft(audio, StftConfig{});
  double peak = kAmpFloor;
  for (double v : spec.values) peak = std::max(peak, v);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open " + path);
  f << "P5\n" << spec.frames << " " << spec.bins << "\n255\n";
  for (int k = spec.bins - 1; k >= 0; --k)
    for (int t = 0; t < spec.frames; ++t) {
      const double db = 20.0 * std::log10(std::max(spec.at(t, k), 1e-12) / peak);
      const int px = static_cast<int>(std::lround(255.0 * (db + 60.0) / 60.0));
      f.put(static_cast<char>(std::clamp(px, 0, 255)));
    }
  if (!f) throw DataError("failed writing " + path);
}

void run_extract(const std::string& wav_path, const std::string& out_path,
                 double fmin, double fmax) {
  AudioBuffer audio = read_wav(wav_path);
  F0Config cfg;
  cfg.fmin = fmin;
  cfg.fmax = fmax;
  AcousticFeatures feat = extract_features(audio, cfg);
  write_features(feat, out_path);
  std::cout << "wrote " << feat.n_frames << " frames to " << out_path << "\n";
}

void run_make_corpus(const std::string& out_dir, int n, double duration,
                     uint64_t seed, double f0_min, double f0_max,
                     double noise_floor) {
  SyntheticCorpusSpec spec;
  spec.n_utterances = n;
  spec.duration_s = duration;
  spec.f0_min = f0_min;
  spec.f0_max = f0_max;
  spec.noise_floor = noise_floor;
  auto corpus = make_synthetic_corpus(spec, seed);
  write_corpus(corpus, out_dir);
  std::cout << "wrote " << corpus.size() << " utterances to " << out_dir
            << "\n";
}

struct TrainFlags {
  std::string corpus_dir, config_path, preset, reg_mode, spc_mode, adv_mode;
  std::string out_dir, resume, ablation;
  int64_t iters = 0, batch = 0, segment = 0, halve_every = 0;
  int64_t checkpoint_every = 0, log_every = 500;
  uint64_t seed = 0;
  double lr_g = 0, lr_d = 0, lambda_spc = 0, lambda_adv = 0;
  bool single_source = false;
};

void run_train(const CLI::App& cmd, const TrainFlags& fl) {
  std::string text;
  if (!fl.config_path.empty()) {
    std::ifstream f(fl.config_path);
    if (!f) throw DataError("cannot open " + fl.config_path);
    std::ostringstream os;
    os << f.rdbuf();
    text = os.str();
  }
  // CLI flags are appended as config lines so they share the file parser's
  // semantics, including the preset-resets-defaults rule.
  std::ostringstream ov;
  ov << std::setprecision(17);
  if (cmd.count("--preset")) ov << "\npreset=" << fl.preset;
  if (cmd.count("--iters")) ov << "\niterations=" << fl.iters;
  if (cmd.count("--batch")) ov << "\nbatch_size=" << fl.batch;
  if (cmd.count("--segment")) ov << "\nsegment_length=" << fl.segment;
  if (cmd.count("--lr-g")) ov << "\nlr_g=" << fl.lr_g;
  if (cmd.count("--lr-d")) ov << "\nlr_d=" << fl.lr_d;
  if (cmd.count("--halve-every")) ov << "\nlr_halve_every=" << fl.halve_every;
  if (cmd.count("--seed")) ov << "\nseed=" << fl.seed;
  if (cmd.count("--lambda-spc")) ov << "\nlambda_spc=" << fl.lambda_spc;
  if (cmd.count("--lambda-adv")) ov << "\nlambda_adv=" << fl.lambda_adv;
  if (cmd.count("--reg-mode")) ov << "\nreg_mode=" << fl.reg_mode;
  if (cmd.count("--spc-mode")) ov << "\nspc_mode=" << fl.spc_mode;
  if (cmd.count("--adv-mode")) ov << "\nadv_mode=" << fl.adv_mode;
  if (cmd.count("--single-source")) ov << "\nsingle_source=true";
  if (cmd.count("--checkpoint-every"))
    ov << "\ncheckpoint_every=" << fl.checkpoint_every;
  if (cmd.count("--out-dir")) ov << "\nout_dir=" << fl.out_dir;
  if (cmd.count("--resume")) ov << "\nresume=" << fl.resume;
  if (cmd.count("--ablation")) ov << "\nablation=" << fl.ablation;
  TrainingConfig cfg = parse_training_config(text + ov.str());

  auto corpus = read_corpus(fl.corpus_dir);
  std::cout << "training " << cfg.iterations << " iterations (preset "
            << cfg.preset << ", " << corpus.size() << " utterances) -> "
            << cfg.out_dir << "\n";
  const int64_t every = std::max<int64_t>(1, fl.log_every);
  TrainResult res =
      train(cfg, corpus, [&](int64_t it, const TrainStepResult& s) {
        if ((it + 1) % every == 0 || it + 1 == cfg.iterations)
          std::cout << "iter " << (it + 1) << "  d " << s.d_loss << "  g "
                    << s.g_loss << "  spc " << s.spc << "\n";
      });
  std::cout << "finished " << res.iterations_run << " iterations; checkpoint "
            << res.checkpoint_path << "\n";
}

void run_synth(const std::string& features_path, const std::string& ckpt,
               const std::string& out_path, double f0_scale, uint64_t seed,
               const std::string& pgm_path) {
  TrainModels models = load_models(ckpt, nullptr);
  AcousticFeatures feat = read_features(features_path);
  GenerateResult res = models.gen.generate(feat, seed, f0_scale);
  write_wav(out_path, res.speech, WavFormat::pcm16);
  if (!pgm_path.empty()) write_spectrogram_pgm(pgm_path, res.speech);
  std::cout << "wrote " << res.speech.size() << " samples ("
            << fmt_num(res.speech.duration_s()) << " s) to " << out_path
            << "\n";
}

void run_dump_excitation(const std::string& features_path,
                         const std::string& ckpt, const std::string& prefix,
                         const std::vector<double>& scales, uint64_t seed) {
  TrainingConfig cfg;
  TrainModels models = load_models(ckpt, &cfg);
  if (cfg.single_source)
    throw DataError(
        "mixing weights are undefined for a single-source checkpoint");
  AcousticFeatures feat = read_features(features_path);

  std::ofstream csv(prefix + "_mix_stats.csv");
  if (!csv) throw DataError("cannot open " + prefix + "_mix_stats.csv");
  csv << "f0_scale,count,mean,std,min,max,voiced_mean,unvoiced_mean\n"
      << std::setprecision(10);

  for (double scale : scales) {
    Generator::Inputs in = models.gen.prepare(feat, seed, scale);
    SourceOutputs so = models.gen.source_forward(in.sine, in.noise, in.cond,
                                                 in.dilation);
    const nn::Shape& ash = so.a.shape();
    const size_t n = so.a.val().size();
    auto forced = [&](double value) {
      std::vector<double> fill(n, value);
      return models.gen.project_excitation(
          mix_latents(so.l_h, so.l_n, nn::Tensor::from(ash, std::move(fill))));
    };
    nn::Tensor e_h = forced(1.0), e_n = forced(0.0);

    const std::string tag = prefix + "_x" + fmt_num(scale);
    auto as_audio = [&](const nn::Tensor& t) {
      AudioBuffer a;
      a.sample_rate = models.gen.config().sample_rate;
      a.samples = t.val();
      return a;
    };
    write_wav(tag + "_e.wav", as_audio(so.e), WavFormat::float32);
    write_wav(tag + "_harmonic.wav", as_audio(e_h), WavFormat::float32);
    write_wav(tag + "_noise.wav", as_audio(e_n), WavFormat::float32);

    // weight statistics, split by the frame-rate voicing decision
    const auto& av = so.a.val();
    const int64_t t_len = ash.d2;
    double mean = 0.0, lo = 1.0, hi = 0.0;
    double vsum = 0.0, usum = 0.0;
    int64_t vcount = 0, ucount = 0;
    for (size_t i = 0; i < av.size(); ++i) {
      mean += av[i];
      lo = std::min(lo, av[i]);
      hi = std::max(hi, av[i]);
      const int64_t t = int64_t(i) % t_len;
      const size_t fr = std::min<size_t>(size_t(t / feat.frame_shift),
                                         size_t(feat.n_frames - 1));
      if (feat.vuv[fr]) {
        vsum += av[i];
        ++vcount;
      } else {
        usum += av[i];
        ++ucount;
      }
    }
    mean /= double(av.size());
    double var = 0.0;
    for (double v : av) var += (v - mean) * (v - mean);
    var /= double(av.size());
    csv << fmt_num(scale) << "," << av.size() << "," << mean << ","
        << std::sqrt(var) << "," << lo << "," << hi << ",";
    if (vcount) csv << vsum / double(vcount);
    csv << ",";
    if (ucount) csv << usum / double(ucount);
    csv << "\n";
    std::cout << "wrote " << tag << "_{e,harmonic,noise}.wav\n";
  }
  if (!csv) throw DataError("failed writing " + prefix + "_mix_stats.csv");
  std::cout << "wrote " << prefix << "_mix_stats.csv\n";
}

void run_eval(const std::string& ckpt, const std::string& corpus_dir,
              double f0_scale, uint64_t seed, const std::string& out_csv) {
  TrainingConfig cfg = config_for_checkpoint(ckpt);
  auto corpus = read_corpus(corpus_dir);
  EvalReport rep = evaluate_checkpoint(ckpt, cfg, corpus, f0_scale, seed);
  std::cout << rep.to_text();
  if (!out_csv.empty()) {
    std::ofstream f(out_csv);
    if (!f) throw DataError("cannot open " + out_csv);
    f << rep.to_csv();
    if (!f) throw DataError("failed writing " + out_csv);
    std::cout << "wrote " << out_csv << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"harmonic-plus-noise source-filter vocoder tools", "hnusfgan"};
  app.require_subcommand(1);

  auto* ext = app.add_subcommand("extract",
                                 "extract acoustic features from a mono WAV");
  std::string ext_wav, ext_out;
  double ext_fmin = 70.0, ext_fmax = 340.0;
  ext->add_option("--wav", ext_wav, "input WAV (24 kHz mono)")->required();
  ext->add_option("--out", ext_out, "output feature file (.usff)")->required();
  ext->add_option("--fmin", ext_fmin, "F0 search floor, Hz")
      ->capture_default_str();
  ext->add_option("--fmax", ext_fmax, "F0 search ceiling, Hz")
      ->capture_default_str();
  ext->callback([&]() { run_extract(ext_wav, ext_out, ext_fmin, ext_fmax); });

  auto* mk = app.add_subcommand(
      "make-corpus", "synthesize a deterministic training corpus");
  std::string mk_out;
  int mk_n = 50;
  double mk_dur = 1.0, mk_f0min = 80.0, mk_f0max = 300.0, mk_floor = 3e-3;
  uint64_t mk_seed = 0;
  mk->add_option("--out", mk_out, "output directory")->required();
  mk->add_option("--n", mk_n, "number of utterances")->capture_default_str();
  mk->add_option("--duration", mk_dur, "seconds per utterance")
      ->capture_default_str();
  mk->add_option("--seed", mk_seed, "corpus seed")->capture_default_str();
  mk->add_option("--f0-min", mk_f0min, "lowest base F0, Hz")
      ->capture_default_str();
  mk->add_option("--f0-max", mk_f0max, "highest base F0, Hz")
      ->capture_default_str();
  mk->add_option("--noise-floor", mk_floor, "additive noise level")
      ->capture_default_str();
  mk->callback([&]() {
    run_make_corpus(mk_out, mk_n, mk_dur, mk_seed, mk_f0min, mk_f0max,
                    mk_floor);
  });

  auto* tr = app.add_subcommand("train", "train a vocoder on a corpus");
  TrainFlags fl;
  tr->add_option("--corpus", fl.corpus_dir, "corpus directory (WAV + .usff)")
      ->required();
  tr->add_option("--config", fl.config_path, "training config file");
  tr->add_option("--preset", fl.preset,
                 "model preset; resets size/schedule defaults")
      ->check(CLI::IsMember({"toy", "full"}));
  tr->add_option("--iters", fl.iters, "training iterations");
  tr->add_option("--batch", fl.batch, "clips per step");
  tr->add_option("--segment", fl.segment, "training clip length, samples");
  tr->add_option("--lr-g", fl.lr_g, "generator learning rate");
  tr->add_option("--lr-d", fl.lr_d, "discriminator learning rate");
  tr->add_option("--halve-every", fl.halve_every,
                 "halve learning rates every N iterations (0 = never)");
  tr->add_option("--seed", fl.seed, "training seed");
  tr->add_option("--lambda-spc", fl.lambda_spc, "spectral loss weight");
  tr->add_option("--lambda-adv", fl.lambda_adv, "adversarial loss weight");
  tr->add_option("--reg-mode", fl.reg_mode, "source regularization")
      ->check(CLI::IsMember({"residual", "flat", "off"}));
  tr->add_option("--spc-mode", fl.spc_mode, "spectral loss kind")
      ->check(CLI::IsMember({"mel", "multires"}));
  tr->add_option("--adv-mode", fl.adv_mode, "discriminator kind")
      ->check(CLI::IsMember({"hifigan", "pwg"}));
  tr->add_flag("--single-source", fl.single_source,
               "single source network instead of harmonic + noise");
  tr->add_option("--checkpoint-every", fl.checkpoint_every,
                 "periodic checkpoint interval (0 = final only)");
  tr->add_option("--out-dir", fl.out_dir, "log and checkpoint directory");
  tr->add_option("--resume", fl.resume, "checkpoint to resume from");
  tr->add_option("--ablation", fl.ablation, "named ablation switch")
      ->check(CLI::IsMember(
          {"none", "no-reg", "single-source", "pwg-critic", "multires-spc"}));
  tr->add_option("--log-every", fl.log_every, "console log interval")
      ->capture_default_str();
  tr->callback([&]() { run_train(*tr, fl); });

  auto* sy = app.add_subcommand("synth",
                                "generate speech from features + checkpoint");
  std::string sy_feat, sy_ckpt, sy_out, sy_pgm;
  double sy_scale = 1.0;
  uint64_t sy_seed = 0;
  sy->add_option("--features", sy_feat, "feature file (.usff)")->required();
  sy->add_option("--ckpt", sy_ckpt, "model checkpoint")->required();
  sy->add_option("--out", sy_out, "output WAV")->required();
  sy->add_option("--f0-scale", sy_scale, "multiply continuous F0")
      ->capture_default_str();
  sy->add_option("--seed", sy_seed, "noise seed")->capture_default_str();
  sy->add_option("--pgm", sy_pgm, "also dump a log-spectrogram PGM here");
  sy->callback([&]() {
    run_synth(sy_feat, sy_ckpt, sy_out, sy_scale, sy_seed, sy_pgm);
  });

  auto* du = app.add_subcommand(
      "dump-excitation",
      "dump source excitation plus harmonic-only and noise-only paths");
  std::string du_feat, du_ckpt, du_prefix;
  std::vector<double> du_scales{1.0};
  uint64_t du_seed = 0;
  du->add_option("--features", du_feat, "feature file (.usff)")->required();
  du->add_option("--ckpt", du_ckpt, "model checkpoint")->required();
  du->add_option("--out-prefix", du_prefix, "output path prefix")->required();
  du->add_option("--f0-scale", du_scales,
                 "one or more F0 scale factors (default 1)");
  du->add_option("--seed", du_seed, "noise seed")->capture_default_str();
  du->callback([&]() {
    run_dump_excitation(du_feat, du_ckpt, du_prefix, du_scales, du_seed);
  });

  auto* ev = app.add_subcommand("eval",
                                "objective metrics of a checkpoint on a corpus");
  std::string ev_ckpt, ev_corpus, ev_out;
  double ev_scale = 1.0;
  uint64_t ev_seed = 0;
  ev->add_option("--ckpt", ev_ckpt, "model checkpoint")->required();
  ev->add_option("--corpus", ev_corpus, "corpus directory")->required();
  ev->add_option("--f0-scale", ev_scale, "multiply continuous F0")
      ->capture_default_str();
  ev->add_option("--seed", ev_seed, "noise seed")->capture_default_str();
  ev->add_option("--out", ev_out, "write the report as CSV here");
  ev->callback([&]() {
    run_eval(ev_ckpt, ev_corpus, ev_scale, ev_seed, ev_out);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  } catch (const usfgan::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const usfgan::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
