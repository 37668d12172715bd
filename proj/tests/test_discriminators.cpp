#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "gradcheck.hpp"
#include "usfgan/discriminators.hpp"

using namespace usfgan;
using namespace usfgan::nn;

namespace {

Tensor random_wave(int64_t t, uint64_t seed, double amp = 0.8) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-amp, amp);
  Tensor x = Tensor::zeros({1, 1, t});
  for (auto& v : x.storage()->val) v = dist(rng);
  return x;
}

// Strided length with symmetric padding, matching the conv arithmetic.
int64_t strided_len(int64_t t, int64_t k, int64_t s, int64_t pad) {
  return (t + 2 * pad - k) / s + 1;
}

}  // namespace

TEST_CASE("period folding arithmetic flows through the stacks") {
  DiscriminatorConfig cfg;
  cfg.mpd_base = 4;
  cfg.mpd_cap = 8;
  cfg.msd_base = 4;
  cfg.msd_cap = 8;
  Discriminator d(cfg, 7);
  auto maps = d.forward(random_wave(22, 1));
  REQUIRE(maps.size() == 5 + 3);

  // T=22, p=5: reflection-padded to 25, folded time dim 5, sub-batch dim 5.
  const auto& m5 = maps[2];
  CHECK(m5.shape().d0 == 5);
  CHECK(m5.shape().d1 == 1);
  int64_t t = 5;
  for (int i = 0; i < cfg.mpd_layers; ++i) t = strided_len(t, 5, 3, 2);
  CHECK(m5.shape().d2 == t);

  for (size_t pi = 0; pi < cfg.periods.size(); ++pi) {
    const int64_t p = cfg.periods[pi];
    CHECK(maps[pi].shape().d0 == p);
    int64_t tp = (22 + p - 1) / p;
    for (int i = 0; i < cfg.mpd_layers; ++i) tp = strided_len(tp, 5, 3, 2);
    CHECK(maps[pi].shape().d2 == tp);
  }
}

TEST_CASE("scale maps follow the pooling arithmetic") {
  DiscriminatorConfig cfg;
  cfg.mpd_base = 4;
  cfg.mpd_cap = 8;
  cfg.msd_base = 4;
  cfg.msd_cap = 8;
  Discriminator d(cfg, 3);
  const int64_t t0 = 96;
  auto maps = d.forward(random_wave(t0, 2));
  for (int s = 0; s < 3; ++s) {
    int64_t t = t0 >> s;  // pooling halves length per scale step
    t = strided_len(strided_len(t, 11, 2, 5), 11, 2, 5);
    CHECK(maps[5 + s].shape().d0 == 1);
    CHECK(maps[5 + s].shape().d1 == 1);
    CHECK(maps[5 + s].shape().d2 == t);
  }
}

TEST_CASE("constant input stays constant through pooling") {
  Tensor x = Tensor::zeros({1, 1, 32});
  for (auto& v : x.storage()->val) v = 0.37;
  Tensor p = avg_pool2(avg_pool2(x));
  for (double v : p.storage()->val) CHECK(v == doctest::Approx(0.37).epsilon(1e-15));
}

TEST_CASE("scores are finite on waveforms in [-1,1]") {
  Discriminator d(DiscriminatorConfig::full(), 11);
  auto maps = d.forward(random_wave(2048, 5, 1.0));
  REQUIRE(maps.size() == 8);
  for (const auto& m : maps)
    for (double v : m.storage()->val) CHECK(std::isfinite(v));
}

TEST_CASE("pwg critic keeps length and has no final nonlinearity") {
  DiscriminatorConfig cfg = DiscriminatorConfig::pwg_toy();
  cfg.pwg_channels = 4;
  Discriminator d(cfg, 13);
  auto maps = d.forward(random_wave(300, 6));
  REQUIRE(maps.size() == 1);
  CHECK(maps[0].shape().d0 == 1);
  CHECK(maps[0].shape().d1 == 1);
  CHECK(maps[0].shape().d2 == 300);

  // zero every weight, set the output bias: scores must equal the bias,
  // which also proves no activation follows the last layer
  for (auto* p : d.parameters()) {
    std::fill(p->tensor.storage()->val.begin(), p->tensor.storage()->val.end(),
              0.0);
    if (p->name == "d/pwg/9.b") p->tensor.storage()->val[0] = -0.625;
  }
  auto scored = d.forward(random_wave(50, 8));
  for (double v : scored[0].storage()->val) CHECK(v == -0.625);
}

TEST_CASE("parameter names live under the d/ namespace and init is seeded") {
  Discriminator a(DiscriminatorConfig::toy(), 21);
  Discriminator b(DiscriminatorConfig::toy(), 21);
  Discriminator c(DiscriminatorConfig::toy(), 22);
  auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
  REQUIRE(pa.size() == pb.size());
  bool any_diff = false;
  for (size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i]->name.rfind("d/", 0) == 0);
    CHECK(pa[i]->tensor.storage()->val == pb[i]->tensor.storage()->val);
    if (pa[i]->tensor.storage()->val != pc[i]->tensor.storage()->val)
      any_diff = true;
  }
  CHECK(any_diff);
}

TEST_CASE("tiny multi-period bank matches finite differences") {
  DiscriminatorConfig cfg;
  cfg.periods = {2, 3};
  cfg.mpd_layers = 2;
  cfg.mpd_base = 2;
  cfg.mpd_cap = 4;
  cfg.msd_scales = 1;
  cfg.msd_base = 4;
  cfg.msd_cap = 4;
  cfg.msd_groups = 2;
  Discriminator d(cfg, 31);
  Tensor x = random_wave(40, 9);
  x.storage()->needs_grad = true;

  std::vector<Tensor> inputs{x};
  for (auto* p : d.parameters()) inputs.push_back(p->tensor);
  auto loss = [&]() {
    Tensor total;
    for (size_t i = 0; i < 2; ++i) {  // period maps only
      Tensor s = sum_all(d.forward(x)[i]);
      total = total.defined() ? add(total, s) : s;
    }
    return total;
  };
  auto rep = gradcheck::check(loss, inputs, 1e-4, 1e-5);
  INFO(rep.worst);
  CHECK(rep.ok);
  CHECK(rep.checked > 100);
}

TEST_CASE("tiny multi-scale bank matches finite differences") {
  DiscriminatorConfig cfg;
  cfg.periods = {2};
  cfg.mpd_layers = 1;
  cfg.mpd_base = 2;
  cfg.mpd_cap = 2;
  cfg.msd_scales = 2;
  cfg.msd_base = 4;
  cfg.msd_cap = 8;
  cfg.msd_groups = 2;
  Discriminator d(cfg, 33);
  Tensor x = random_wave(64, 10);
  x.storage()->needs_grad = true;

  std::vector<Tensor> inputs{x};
  for (auto* p : d.parameters()) inputs.push_back(p->tensor);
  auto loss = [&]() {
    auto maps = d.forward(x);
    Tensor total = sum_all(maps[1]);
    total = add(total, sum_all(maps[2]));
    return total;
  };
  auto rep = gradcheck::check(loss, inputs, 1e-4, 1e-5);
  INFO(rep.worst);
  CHECK(rep.ok);
}

TEST_CASE("tiny pwg critic matches finite differences") {
  DiscriminatorConfig cfg = DiscriminatorConfig::pwg_toy();
  cfg.pwg_layers = 4;
  cfg.pwg_channels = 3;
  Discriminator d(cfg, 35);
  Tensor x = random_wave(48, 11);
  x.storage()->needs_grad = true;

  std::vector<Tensor> inputs{x};
  for (auto* p : d.parameters()) inputs.push_back(p->tensor);
  auto loss = [&]() { return sum_all(d.forward(x)[0]); };
  auto rep = gradcheck::check(loss, inputs, 1e-4, 1e-5);
  INFO(rep.worst);
  CHECK(rep.ok);
}

TEST_CASE("config validation rejects bad banks") {
  DiscriminatorConfig cfg;
  cfg.periods = {2, 4};  // gcd 2
  CHECK_THROWS_AS(Discriminator(cfg, 1), DataError);
  cfg = DiscriminatorConfig();
  cfg.periods.clear();
  CHECK_THROWS_AS(Discriminator(cfg, 1), DataError);
  cfg = DiscriminatorConfig();
  cfg.msd_base = 2;  // below the group count
  CHECK_THROWS_AS(Discriminator(cfg, 1), DataError);
}
