#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "usfgan/checkpoint.hpp"
#include "usfgan/ops.hpp"
#include "usfgan/training.hpp"

using namespace usfgan;
namespace fs = std::filesystem;

namespace {

SyntheticCorpusSpec small_spec(int utts, double dur) {
  SyntheticCorpusSpec spec;
  spec.n_utterances = utts;
  spec.duration_s = dur;
  return spec;
}

// fast toy variant for smoke tests: short clips, tiny corpus
TrainingConfig fast_cfg() {
  TrainingConfig cfg;
  cfg.segment_length = 1200;
  cfg.checkpoint_every = 0;
  return cfg;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::vector<std::vector<double>> snapshot(
    const std::vector<nn::Parameter<double>*>& params) {
  std::vector<std::vector<double>> s;
  for (auto* p : params) s.push_back(p->tensor.val());
  return s;
}

bool identical(const std::vector<std::vector<double>>& a,
               const std::vector<nn::Parameter<double>*>& params) {
  for (size_t i = 0; i < params.size(); ++i)
    if (a[i] != params[i]->tensor.val()) return false;
  return true;
}

std::vector<double> voiced_only(const AcousticFeatures& f) {
  std::vector<double> out(f.cont_f0.size(), 0.0);
  for (size_t i = 0; i < out.size(); ++i)
    if (f.vuv[i]) out[i] = f.cont_f0[i];
  return out;
}

nn::Tensor clip_tensor(const AudioBuffer& clip) {
  nn::Tensor t = nn::Tensor::zeros({1, 1, int64_t(clip.size())});
  t.storage()->val = clip.samples;
  return t;
}

fs::path tmp_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("usfgan_train_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("synthetic corpus: truth recorded exactly, deterministic") {
  auto spec = small_spec(3, 0.6);
  auto corpus = make_synthetic_corpus(spec, 42);
  REQUIRE(corpus.size() == 3);
  for (const auto& item : corpus) {
    CHECK(item.audio.size() == size_t(item.feat.n_frames) * 120);
    int voiced = 0, unvoiced = 0;
    for (int v : item.feat.vuv) (v ? voiced : unvoiced)++;
    CHECK(voiced > 0);
    CHECK(unvoiced > 0);
    for (double f : item.feat.cont_f0) {
      CHECK(f >= spec.f0_min);
      CHECK(f <= spec.f0_max);
    }
    double peak = 0.0;
    for (double s : item.audio.samples) peak = std::max(peak, std::abs(s));
    CHECK(peak == doctest::Approx(0.6).epsilon(1e-12));
  }

  auto again = make_synthetic_corpus(spec, 42);
  for (size_t u = 0; u < corpus.size(); ++u) {
    CHECK(corpus[u].audio.samples == again[u].audio.samples);
    CHECK(corpus[u].feat.cont_f0 == again[u].feat.cont_f0);
    CHECK(corpus[u].feat.mcep == again[u].feat.mcep);
  }
  auto other = make_synthetic_corpus(spec, 43);
  CHECK(corpus[0].audio.samples != other[0].audio.samples);
}

TEST_CASE("pitch tracker recovers the synthetic contour") {
  auto corpus = make_synthetic_corpus(small_spec(2, 1.0), 7);
  for (const auto& item : corpus) {
    auto [f0, vuv] = estimate_f0(item.audio);
    REQUIRE(f0.size() == item.feat.cont_f0.size());
    std::vector<double> err;
    for (size_t i = 0; i < f0.size(); ++i)
      if (vuv[i] && item.feat.vuv[i])
        err.push_back(std::abs(f0[i] - item.feat.cont_f0[i]));
    REQUIRE(err.size() > 10);
    std::sort(err.begin(), err.end());
    CHECK(err[err.size() / 2] < 3.0);
  }
}

TEST_CASE("corpus round-trips through the directory format") {
  auto corpus = make_synthetic_corpus(small_spec(2, 0.4), 3);
  auto dir = tmp_dir("corpus_io");
  write_corpus(corpus, dir.string());
  auto back = read_corpus(dir.string());
  REQUIRE(back.size() == corpus.size());
  for (size_t u = 0; u < corpus.size(); ++u) {
    // streams are stored as 32-bit values: reading gives the nearest float
    CHECK(back[u].feat.vuv == corpus[u].feat.vuv);
    REQUIRE(back[u].feat.n_frames == corpus[u].feat.n_frames);
    for (size_t i = 0; i < corpus[u].feat.cont_f0.size(); ++i)
      CHECK(back[u].feat.cont_f0[i] ==
            double(float(corpus[u].feat.cont_f0[i])));
    for (size_t i = 0; i < corpus[u].feat.mcep.size(); i += 13)
      CHECK(back[u].feat.mcep[i] == double(float(corpus[u].feat.mcep[i])));
    REQUIRE(back[u].audio.size() == corpus[u].audio.size());
    for (size_t i = 0; i < corpus[u].audio.size(); i += 97)
      CHECK(back[u].audio.samples[i] ==
            double(float(corpus[u].audio.samples[i])));
    // a second write of what was read reproduces the file byte for byte
    const std::string orig =
        (dir / ("utt_000" + std::to_string(u) + ".usff")).string();
    write_features(back[u].feat, orig + ".rt");
    CHECK(slurp(orig) == slurp(orig + ".rt"));
  }
  fs::remove_all(dir);
}

TEST_CASE("config parser: defaults, presets, ablations, rejects") {
  TrainingConfig cfg = parse_training_config(
      "# comment only\n"
      "preset = toy\n"
      "iterations = 12\n"
      "seed = 5\n"
      "lambda_spc = 2.5\n");
  CHECK(cfg.iterations == 12);
  CHECK(cfg.seed == 5);
  CHECK(cfg.weights.lambda_spc == 2.5);
  CHECK(cfg.segment_length == 8192);

  TrainingConfig full = parse_training_config("preset = full\n");
  CHECK(full.iterations == 600000);
  CHECK(full.segment_length == 15360);
  CHECK(full.lr_halve_every == 200000);

  TrainingConfig abl = parse_training_config("ablation = pwg-critic\n");
  CHECK(abl.weights.adv_mode == LossWeights::Adv::pwg);
  CHECK(abl.discriminator_config().kind == DiscriminatorConfig::Kind::pwg);
  CHECK(parse_training_config("ablation = no-reg\n").weights.reg_mode ==
        LossWeights::Reg::off);
  CHECK(parse_training_config("ablation = single-source\n").single_source);
  CHECK(parse_training_config("ablation = multires-spc\n").weights.spc_mode ==
        LossWeights::Spc::multires_stft);

  CHECK_THROWS_AS(parse_training_config("learning_rate = 1\n"), DataError);
  CHECK_THROWS_AS(parse_training_config("iterations ten\n"), DataError);
  CHECK_THROWS_AS(parse_training_config("iterations = ten\n"), DataError);
  CHECK_THROWS_AS(parse_training_config("ablation = everything\n"), DataError);
  CHECK_THROWS_AS(parse_training_config("segment_length = 16\n"), DataError);
}

TEST_CASE("batch sampling is deterministic and aligned") {
  auto corpus = make_synthetic_corpus(small_spec(4, 0.5), 11);
  TrainingConfig cfg = fast_cfg();
  cfg.seed = 3;
  TrainBatch a = sample_batch(corpus, cfg, 17);
  TrainBatch b = sample_batch(corpus, cfg, 17);
  REQUIRE(a.clips.size() == 1);
  CHECK(a.clips[0].samples == b.clips[0].samples);
  CHECK(a.noise_seeds == b.noise_seeds);
  CHECK(int64_t(a.clips[0].size()) == cfg.segment_length);
  CHECK(a.feats[0].n_frames == n_frames_for(size_t(cfg.segment_length), 120));

  TrainBatch c = sample_batch(corpus, cfg, 18);
  CHECK(a.clips[0].samples != c.clips[0].samples);

  // the clip is a frame-aligned crop of some utterance
  bool found = false;
  for (const auto& item : corpus) {
    for (size_t off = 0; off + a.clips[0].size() <= item.audio.size();
         off += 120) {
      if (std::equal(a.clips[0].samples.begin(), a.clips[0].samples.end(),
                     item.audio.samples.begin() + off)) {
        found = true;
        break;
      }
    }
  }
  CHECK(found);
}

TEST_CASE("spectral regression alone drives the loss down") {
  auto corpus = make_synthetic_corpus(small_spec(1, 0.3), 21);
  TrainingConfig cfg = fast_cfg();
  cfg.weights.lambda_adv = 0.0;
  cfg.weights.reg_mode = LossWeights::Reg::off;
  TrainModels models(cfg);

  std::vector<double> spc;
  for (int64_t it = 0; it < 100; ++it) {
    TrainBatch b = sample_batch(corpus, cfg, it);
    spc.push_back(train_step(b, models, cfg, it).spc);
  }
  const double first =
      std::accumulate(spc.begin(), spc.begin() + 20, 0.0) / 20.0;
  const double last =
      std::accumulate(spc.end() - 20, spc.end(), 0.0) / 20.0;
  INFO("first window " << first << " last window " << last);
  CHECK(last < 0.8 * first);
}

TEST_CASE("update partition: zero-lr side keeps its parameters") {
  auto corpus = make_synthetic_corpus(small_spec(1, 0.3), 22);
  TrainingConfig cfg = fast_cfg();

  {
    TrainModels m(cfg);
    auto g0 = snapshot(m.g_params);
    auto d0 = snapshot(m.d_params);
    TrainingConfig frozen_g = cfg;
    frozen_g.lr_g = 0.0;
    train_step(sample_batch(corpus, cfg, 0), m, frozen_g, 0);
    CHECK(identical(g0, m.g_params));    // generator untouched
    CHECK(!identical(d0, m.d_params));   // discriminator moved
  }
  {
    TrainModels m(cfg);
    auto g0 = snapshot(m.g_params);
    auto d0 = snapshot(m.d_params);
    TrainingConfig frozen_d = cfg;
    frozen_d.lr_d = 0.0;
    train_step(sample_batch(corpus, cfg, 0), m, frozen_d, 0);
    CHECK(!identical(g0, m.g_params));
    CHECK(identical(d0, m.d_params));
  }
}

TEST_CASE("poisoned parameter aborts with the offending op named") {
  auto corpus = make_synthetic_corpus(small_spec(1, 0.3), 23);
  TrainingConfig cfg = fast_cfg();
  TrainModels m(cfg);
  m.g_params[0]->tensor.storage()->val[0] =
      std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(train_step(sample_batch(corpus, cfg, 0), m, cfg, 0),
                  NumericError);
}

TEST_CASE("every parameter sees gradient within a few batches") {
  auto corpus = make_synthetic_corpus(small_spec(2, 0.5), 24);
  TrainingConfig cfg = fast_cfg();
  TrainModels m(cfg);
  auto all = m.all_params();
  std::vector<char> seen(all.size(), 0);

  for (int64_t it = 0; it < 8; ++it) {
    TrainBatch b = sample_batch(corpus, cfg, it);
    nn::Tape<double> tape;
    nn::TapeScope<double> scope(tape, true);
    auto in = m.gen.prepare(b.feats[0], b.noise_seeds[0]);
    auto so = m.gen.source_forward(in.sine, in.noise, in.cond, in.dilation);
    nn::Tensor x = nn::narrow_time(m.gen.filter_forward(so.l, in.cond), 0,
                                   cfg.segment_length);
    nn::Tensor e = nn::narrow_time(so.e, 0, cfg.segment_length);
    nn::Tensor real = clip_tensor(b.clips[0]);
    nn::Tensor target =
        residual_logmel(b.clips[0], voiced_only(b.feats[0]), m.ctx);
    nn::Tensor lg = generator_total(reg_loss_residual(e, target, m.ctx),
                                    mel_spectral_loss(x, real, m.ctx),
                                    adversarial_loss(m.disc.forward(x)),
                                    cfg.weights);
    nn::Tensor total = nn::add(
        lg, discriminator_loss(m.disc.forward(real),
                               m.disc.forward(nn::detach(x))));
    tape.backward(total);
    for (size_t p = 0; p < all.size(); ++p) {
      for (double g : all[p]->tensor.grad())
        if (g != 0.0) {
          seen[p] = 1;
          break;
        }
    }
    nn::zero_grads(all);
  }
  for (size_t p = 0; p < all.size(); ++p) {
    INFO("parameter " << all[p]->name);
    CHECK(int(seen[p]) == 1);
  }
}

TEST_CASE("fixed seed reproduces logs and checkpoints bitwise") {
  auto corpus = make_synthetic_corpus(small_spec(2, 0.4), 25);
  TrainingConfig cfg = fast_cfg();
  cfg.iterations = 3;
  cfg.seed = 9;

  auto d1 = tmp_dir("repro_a"), d2 = tmp_dir("repro_b");
  cfg.out_dir = d1.string();
  TrainResult r1 = train(cfg, corpus);
  cfg.out_dir = d2.string();
  TrainResult r2 = train(cfg, corpus);

  CHECK(slurp(r1.log_path) == slurp(r2.log_path));
  CHECK(slurp(r1.checkpoint_path) == slurp(r2.checkpoint_path));
  CHECK(slurp(r1.log_path).find("mel_loss") != std::string::npos);
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("resuming continues the unbroken trajectory") {
  auto corpus = make_synthetic_corpus(small_spec(2, 0.4), 26);
  TrainingConfig cfg = fast_cfg();
  cfg.seed = 13;

  auto da = tmp_dir("resume_a"), db = tmp_dir("resume_b");

  cfg.iterations = 6;
  cfg.out_dir = da.string();
  TrainResult full = train(cfg, corpus);

  cfg.iterations = 3;
  cfg.out_dir = db.string();
  TrainResult half = train(cfg, corpus);

  cfg.iterations = 6;
  cfg.resume = half.checkpoint_path;
  TrainResult rest = train(cfg, corpus);
  CHECK(rest.iterations_run == 3);

  CHECK(slurp(full.log_path) == slurp(rest.log_path));
  CHECK(slurp(full.checkpoint_path) == slurp(rest.checkpoint_path));

  // wrong architecture is rejected before any training
  TrainingConfig other = fast_cfg();
  other.iterations = 6;
  other.single_source = true;
  other.resume = half.checkpoint_path;
  other.out_dir = db.string();
  CHECK_THROWS_AS(train(other, corpus), DataError);

  fs::remove_all(da);
  fs::remove_all(db);
}
