#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "usfgan/common.hpp"
#include "usfgan/features.hpp"

using namespace usfgan;

namespace {

AudioBuffer sawtooth(double f0, double seconds, int fs = 24000) {
  AudioBuffer a;
  a.sample_rate = fs;
  a.samples.resize(static_cast<size_t>(seconds * fs));
  for (size_t i = 0; i < a.samples.size(); ++i) {
    double phase = std::fmod(f0 * i / fs, 1.0);
    a.samples[i] = 0.4 * (2.0 * phase - 1.0);
  }
  return a;
}

AcousticFeatures toy_features(int n_frames, uint64_t seed) {
  AcousticFeatures f;
  f.n_frames = n_frames;
  f.frame_shift = 120;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  f.cont_f0.resize(n_frames);
  f.vuv.resize(n_frames);
  f.mcep.resize(size_t(n_frames) * AcousticFeatures::kMcepDim);
  f.cap.resize(size_t(n_frames) * AcousticFeatures::kCapDim);
  for (int t = 0; t < n_frames; ++t) {
    f.cont_f0[t] = 80.0 + 200.0 * u(rng);
    f.vuv[t] = u(rng) < 0.7 ? 1 : 0;
  }
  for (auto& v : f.mcep) v = 2.0 * u(rng) - 1.0;
  for (auto& v : f.cap) v = -4.0 * u(rng);
  return f;
}

}  // namespace

TEST_CASE("f0 estimate locks onto a 150 Hz sawtooth") {
  AudioBuffer a = sawtooth(150.0, 1.0);
  auto [f0, vuv] = estimate_f0(a);
  std::vector<double> voiced;
  for (size_t i = 0; i < f0.size(); ++i)
    if (vuv[i]) voiced.push_back(f0[i]);
  REQUIRE(voiced.size() > f0.size() / 2);
  std::sort(voiced.begin(), voiced.end());
  double median = voiced[voiced.size() / 2];
  CHECK(median == doctest::Approx(150.0).epsilon(0.02));
  CHECK(std::abs(median - 150.0) <= 3.0);
}

TEST_CASE("f0 estimate calls white noise unvoiced") {
  AudioBuffer a;
  a.samples.resize(24000);
  std::mt19937_64 rng(17);
  std::normal_distribution<double> d(0.0, 0.2);
  for (auto& s : a.samples) s = d(rng);
  auto [f0, vuv] = estimate_f0(a);
  int unvoiced = 0;
  for (int v : vuv) unvoiced += v == 0;
  CHECK(unvoiced >= static_cast<int>(0.9 * vuv.size()));
}

TEST_CASE("f0 estimate calls silence unvoiced") {
  AudioBuffer a;
  a.samples.assign(12000, 0.0);
  auto [f0, vuv] = estimate_f0(a);
  for (int v : vuv) CHECK(v == 0);
  for (double f : f0) CHECK(f == 0.0);
}

TEST_CASE("f0 estimate rejects empty audio") {
  AudioBuffer a;
  CHECK_THROWS_WITH_AS(estimate_f0(a), "empty audio", DataError);
}

TEST_CASE("continuize interpolates and holds edges") {
  CHECK(continuize_f0({100, 0, 0, 130}, {1, 0, 0, 1}) ==
        std::vector<double>{100, 110, 120, 130});
  CHECK(continuize_f0({90, 95, 100}, {1, 1, 1}) ==
        std::vector<double>{90, 95, 100});
  CHECK(continuize_f0({0, 0, 200}, {0, 0, 1}) ==
        std::vector<double>{200, 200, 200});
  CHECK_THROWS_WITH_AS(continuize_f0({0, 0}, {0, 0}), "no voiced frames",
                       DataError);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> f0(50, 0.0);
  std::vector<int> vuv(50, 0);
  for (int i = 0; i < 50; ++i) {
    if (u(rng) < 0.4) {
      vuv[i] = 1;
      f0[i] = 80.0 + 200.0 * u(rng);
    }
  }
  vuv[20] = 1;
  f0[20] = 150.0;
  auto cont = continuize_f0(f0, vuv);
  for (int i = 0; i < 50; ++i) {
    CHECK(cont[i] > 0.0);
    if (vuv[i]) CHECK(cont[i] == f0[i]);
  }
}

TEST_CASE("mcep of a flat envelope is a pure c0") {
  Spectrogram env;
  env.frames = 2;
  env.bins = 513;
  const double c = 0.37;
  env.values.assign(size_t(2) * 513, c);
  auto mc = mcep_from_envelope(env);
  for (int t = 0; t < 2; ++t) {
    CHECK(mc[size_t(t) * 41] == doctest::Approx(std::log(c)).epsilon(1e-9));
    for (int i = 1; i < 41; ++i)
      CHECK(std::abs(mc[size_t(t) * 41 + i]) < 1e-6);
  }
}

TEST_CASE("envelope scaling shifts only c0") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> d(0.0, 0.4);
  Spectrogram env;
  env.frames = 1;
  env.bins = 513;
  env.values.resize(513);
  std::vector<double> coef(8);
  for (auto& v : coef) v = d(rng);
  for (int k = 0; k < 513; ++k) {
    double lg = 0.0;
    for (size_t m = 0; m < coef.size(); ++m)
      lg += coef[m] * std::cos(kPi * k * m / 512.0);
    env.values[k] = std::exp(lg);
  }
  auto base = mcep_from_envelope(env);
  const double scale = 3.7;
  for (auto& v : env.values) v *= scale;
  auto scaled = mcep_from_envelope(env);
  CHECK(scaled[0] - base[0] == doctest::Approx(std::log(scale)).epsilon(1e-9));
  for (int i = 1; i < 41; ++i)
    CHECK(std::abs(scaled[i] - base[i]) < 1e-9);
}

TEST_CASE("mcep round trip keeps smooth envelopes") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> d(0.0, 1.0);
  Spectrogram env;
  env.frames = 1;
  env.bins = 513;
  env.values.resize(513);
  std::vector<double> coef(13);
  for (size_t m = 0; m < coef.size(); ++m)
    coef[m] = 0.5 * std::pow(0.8, double(m)) * d(rng);
  for (int k = 0; k < 513; ++k) {
    double lg = 0.0;
    for (size_t m = 0; m < coef.size(); ++m)
      lg += coef[m] * std::cos(kPi * k * m / 512.0);
    env.values[k] = std::exp(lg);
  }
  auto mc = mcep_from_envelope(env);
  auto rec = log_envelope_from_mcep(mc.data(), 41, 513);
  double err = 0.0;
  for (int k = 0; k < 513; ++k) {
    double target = std::log(env.values[k]);
    err += (rec[k] - target) * (rec[k] - target);
  }
  CHECK(std::sqrt(err / 513) < 0.1);
}

TEST_CASE("conditioning upsample follows the spec ramp") {
  AcousticFeatures f;
  f.n_frames = 2;
  f.frame_shift = 4;
  f.cont_f0 = {100.0, 104.0};
  f.vuv = {1, 1};
  f.mcep.assign(size_t(2) * 41, 0.25);
  f.cap.assign(size_t(2) * 3, -1.0);
  SampleConditioning cond = upsample_conditioning(f, 4);
  REQUIRE(cond.n_samples == 8);
  REQUIRE(cond.dim == 46);
  std::vector<double> want = {100, 101, 102, 103, 104, 104, 104, 104};
  for (size_t s = 0; s < 8; ++s) CHECK(cond.row(s)[0] == want[s]);
}

TEST_CASE("constant features upsample to constants") {
  AcousticFeatures f = toy_features(5, 2);
  std::fill(f.cont_f0.begin(), f.cont_f0.end(), 120.0);
  std::fill(f.vuv.begin(), f.vuv.end(), 1);
  std::fill(f.mcep.begin(), f.mcep.end(), 0.5);
  std::fill(f.cap.begin(), f.cap.end(), -2.0);
  SampleConditioning cond = upsample_conditioning(f, 120);
  CHECK(cond.n_samples == size_t(5) * 120);
  for (size_t s = 0; s < cond.n_samples; ++s) {
    CHECK(cond.row(s)[0] == 120.0);
    CHECK(cond.row(s)[1] == 1.0);
    CHECK(cond.row(s)[2] == 0.5);
    CHECK(cond.row(s)[45] == -2.0);
  }
}

TEST_CASE("conditioning hits frame values at frame centers") {
  AcousticFeatures f = toy_features(9, 4);
  SampleConditioning cond = upsample_conditioning(f, 120);
  CHECK(cond.n_samples == size_t(9) * 120);
  for (int t = 0; t < 9; ++t) {
    const double* row = cond.row(size_t(t) * 120);
    CHECK(row[0] == f.cont_f0[t]);
    CHECK(row[1] == double(f.vuv[t]));
    for (int i = 0; i < 41; ++i) CHECK(row[2 + i] == f.mcep[size_t(t) * 41 + i]);
    for (int i = 0; i < 3; ++i) CHECK(row[43 + i] == f.cap[size_t(t) * 3 + i]);
  }
}

TEST_CASE("feature files round trip bit-exactly") {
  AcousticFeatures f = toy_features(23, 7);
  const char* path = "/tmp/usfgan_feat.usff";
  write_features(f, path);
  AcousticFeatures g = read_features(path);
  CHECK(g.n_frames == f.n_frames);
  CHECK(g.frame_shift == f.frame_shift);
  CHECK(g.vuv == f.vuv);
  for (int t = 0; t < f.n_frames; ++t)
    CHECK(g.cont_f0[t] == double(float(f.cont_f0[t])));
  for (size_t i = 0; i < f.mcep.size(); ++i)
    CHECK(g.mcep[i] == double(float(f.mcep[i])));
  for (size_t i = 0; i < f.cap.size(); ++i)
    CHECK(g.cap[i] == double(float(f.cap[i])));

  // Second write of the read-back file is byte-identical.
  const char* path2 = "/tmp/usfgan_feat2.usff";
  write_features(g, path2);
  std::ifstream a(path, std::ios::binary), b(path2, std::ios::binary);
  std::string sa((std::istreambuf_iterator<char>(a)),
                 std::istreambuf_iterator<char>());
  std::string sb((std::istreambuf_iterator<char>(b)),
                 std::istreambuf_iterator<char>());
  CHECK(sa == sb);
}

TEST_CASE("feature file error cases") {
  AcousticFeatures f = toy_features(8, 9);
  const char* path = "/tmp/usfgan_feat3.usff";
  write_features(f, path);

  SUBCASE("wrong magic") {
    std::fstream fs(path, std::ios::in | std::ios::out | std::ios::binary);
    fs.write("NOPE", 4);
    fs.close();
    CHECK_THROWS_WITH_AS(read_features(path),
                         doctest::Contains("not a feature file"), DataError);
  }
  SUBCASE("bad version") {
    std::fstream fs(path, std::ios::in | std::ios::out | std::ios::binary);
    fs.seekp(4);
    char v[4] = {9, 0, 0, 0};
    fs.write(v, 4);
    fs.close();
    CHECK_THROWS_WITH_AS(read_features(path),
                         "unsupported feature file version", DataError);
  }
  SUBCASE("truncated payload") {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    in.close();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 10));
    out.close();
    CHECK_THROWS_WITH_AS(read_features(path), "payload size mismatch",
                         DataError);
  }
  SUBCASE("trailing garbage") {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    out.write("xxxx", 4);
    out.close();
    CHECK_THROWS_WITH_AS(read_features(path), "payload size mismatch",
                         DataError);
  }
}

TEST_CASE("aperiodicity marks tones as periodic and noise as noise") {
  const int fs = 24000;
  AudioBuffer tone, noise;
  tone.samples.resize(24000);
  noise.samples.resize(24000);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> d(0.0, 0.2);
  for (size_t i = 0; i < tone.samples.size(); ++i) {
    tone.samples[i] = 0.4 * std::sin(kTwoPi * 1000.0 * i / fs) +
                      0.4 * std::sin(kTwoPi * 1400.0 * i / fs);
    noise.samples[i] = d(rng);
  }
  Spectrogram st = stft(tone, {}), sn = stft(noise, {});
  std::vector<double> f0t(st.frames, 200.0), f0n(sn.frames, 0.0);
  std::vector<int> voiced(st.frames, 1);
  Spectrogram et = spectral_envelope(st, f0t), en = spectral_envelope(sn, f0n);
  auto cap_tone = extract_aperiodicity(st, et, voiced);
  auto cap_noise = extract_aperiodicity(sn, en, voiced);

  double mean_tone = 0.0, mean_noise = 0.0;
  for (int t = 0; t < st.frames; ++t) mean_tone += cap_tone[size_t(t) * 3];
  for (int t = 0; t < sn.frames; ++t) mean_noise += cap_noise[size_t(t) * 3];
  mean_tone /= st.frames;
  mean_noise /= sn.frames;
  CHECK(mean_tone < mean_noise);  // tones are less noise-like in band 0

  // unvoiced frames pin to zero
  std::vector<int> unvoiced(st.frames, 0);
  auto cap_uv = extract_aperiodicity(st, et, unvoiced);
  for (double v : cap_uv) CHECK(v == 0.0);
  for (double v : cap_tone) CHECK(v <= 0.0);
}

TEST_CASE("full extraction pipeline produces valid features") {
  AudioBuffer a = sawtooth(180.0, 1.0);
  AcousticFeatures f = extract_features(a);
  CHECK(f.n_frames == 200);
  validate_features(f);
  int voiced = 0;
  for (int v : f.vuv) voiced += v;
  CHECK(voiced > f.n_frames / 2);
  for (double v : f.cont_f0) CHECK(v == doctest::Approx(180.0).epsilon(0.05));
}
