// Times the serial reference kernels against the OpenMP versions on
// training-shaped workloads and checks that both backends agree bitwise.
// Usage: bench_kernels [repeats]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <random>
#include <string>
#include <vector>

#include "usfgan/kernels.hpp"

using namespace usfgan::kernels;
using clock_type = std::chrono::steady_clock;

namespace {

std::mt19937_64 rng(12345);

std::vector<double> randv(size_t n) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = g(rng);
  return v;
}

double ms_since(clock_type::time_point t0) {
  return std::chrono::duration<double, std::milli>(clock_type::now() - t0)
      .count();
}

struct Case {
  const char* name;
  ConvDims d;
  bool per_sample_dilation = false;
};

// One row of the report: median-of-repeats wall time per backend.
void bench_case(const Case& c, int repeats) {
  const ConvDims& d = c.d;
  const size_t nx = size_t(d.batch * d.c_in * d.t_in);
  const size_t ny = size_t(d.batch * d.c_out * d.t_out);
  const size_t nw = size_t(d.c_out * (d.c_in / d.groups) * d.kernel);
  const std::vector<double> x = randv(nx), w = randv(nw), b = randv(size_t(d.c_out));
  std::vector<int> dil;
  if (c.per_sample_dilation) {
    dil.resize(size_t(d.t_in));
    for (size_t i = 0; i < dil.size(); ++i)
      dil[i] = 1 + int(i / 977 % 64);  // pitch-like slowly varying dilations
  }
  std::vector<double> y_serial(ny), y_omp(ny);
  std::vector<double> gy = randv(ny);
  std::vector<double> gx_serial(nx, 0.0), gx_omp(nx, 0.0);
  std::vector<double> gw_serial(nw, 0.0), gw_omp(nw, 0.0);
  std::vector<double> gb_serial(size_t(d.c_out), 0.0),
      gb_omp(size_t(d.c_out), 0.0);

  auto run = [&](bool omp_backend, std::vector<double>& y,
                 std::vector<double>& gx, std::vector<double>& gw,
                 std::vector<double>& gb) {
    double best_f = 1e300, best_b = 1e300;
    for (int r = 0; r < repeats; ++r) {
      auto t0 = clock_type::now();
      if (c.per_sample_dilation) {
        if (omp_backend)
          omp::pdconv1d_forward(y.data(), x.data(), w.data(), b.data(),
                                dil.data(), d);
        else
          serial::pdconv1d_forward(y.data(), x.data(), w.data(), b.data(),
                                   dil.data(), d);
      } else {
        if (omp_backend)
          omp::conv1d_forward(y.data(), x.data(), w.data(), b.data(), d);
        else
          serial::conv1d_forward(y.data(), x.data(), w.data(), b.data(), d);
      }
      best_f = std::min(best_f, ms_since(t0));

      std::fill(gx.begin(), gx.end(), 0.0);
      std::fill(gw.begin(), gw.end(), 0.0);
      std::fill(gb.begin(), gb.end(), 0.0);
      t0 = clock_type::now();
      if (c.per_sample_dilation) {
        if (omp_backend) {
          omp::pdconv1d_backward_x(gx.data(), gy.data(), w.data(), dil.data(),
                                   d);
          omp::pdconv1d_backward_w(gw.data(), gb.data(), gy.data(), x.data(),
                                   dil.data(), d);
        } else {
          serial::pdconv1d_backward_x(gx.data(), gy.data(), w.data(),
                                      dil.data(), d);
          serial::pdconv1d_backward_w(gw.data(), gb.data(), gy.data(),
                                      x.data(), dil.data(), d);
        }
      } else {
        if (omp_backend) {
          omp::conv1d_backward_x(gx.data(), gy.data(), w.data(), d);
          omp::conv1d_backward_w(gw.data(), gb.data(), gy.data(), x.data(), d);
        } else {
          serial::conv1d_backward_x(gx.data(), gy.data(), w.data(), d);
          serial::conv1d_backward_w(gw.data(), gb.data(), gy.data(), x.data(),
                                    d);
        }
      }
      best_b = std::min(best_b, ms_since(t0));
    }
    std::printf("  %-7s fwd %8.3f ms   bwd %8.3f ms\n",
                omp_backend ? "omp" : "serial", best_f, best_b);
    return std::pair<double, double>(best_f, best_b);
  };

  std::printf("%s  (B=%lld Ci=%lld Co=%lld T=%lld K=%lld dil=%s groups=%lld)\n",
              c.name, (long long)d.batch, (long long)d.c_in,
              (long long)d.c_out, (long long)d.t_in, (long long)d.kernel,
              c.per_sample_dilation ? "per-sample" : std::to_string(d.dilation).c_str(),
              (long long)d.groups);
  auto s = run(false, y_serial, gx_serial, gw_serial, gb_serial);
  auto p = run(true, y_omp, gx_omp, gw_omp, gb_omp);

  const bool same =
      std::memcmp(y_serial.data(), y_omp.data(), ny * sizeof(double)) == 0 &&
      std::memcmp(gx_serial.data(), gx_omp.data(), nx * sizeof(double)) == 0 &&
      std::memcmp(gw_serial.data(), gw_omp.data(), nw * sizeof(double)) == 0 &&
      std::memcmp(gb_serial.data(), gb_omp.data(),
                  gb_serial.size() * sizeof(double)) == 0;
  std::printf("  bitwise %s   speedup fwd %.2fx bwd %.2fx\n\n",
              same ? "match" : "MISMATCH", s.first / p.first,
              s.second / p.second);
  if (!same) std::exit(1);
}

ConvDims dims(int64_t ci, int64_t co, int64_t t, int64_t k, int64_t dil,
              int64_t groups = 1) {
  ConvDims d;
  d.c_in = ci;
  d.c_out = co;
  d.t_in = t;
  d.kernel = k;
  d.dilation = dil;
  d.groups = groups;
  d.pad_left = (k - 1) / 2 * dil;
  d.t_out = conv_out_len(t, k, 1, dil, d.pad_left, (k - 1) / 2 * dil);
  return d;
}

}  // namespace

int main(int argc, char** argv) {
  const int repeats = argc > 1 ? std::atoi(argv[1]) : 5;
  std::printf("kernel benchmark, min of %d runs\n\n", repeats);

  Case cases[] = {
      {"gated residual conv, full width", dims(64, 128, 15360, 3, 2)},
      {"conditioning 1x1, full width", dims(107, 128, 15360, 1, 1)},
      {"skip projection 1x1", dims(64, 64, 15360, 1, 1)},
      {"pitch-dependent conv", dims(64, 128, 15360, 3, 1), true},
      {"toy residual conv, train segment", dims(16, 32, 8192, 3, 4)},
  };
  for (const Case& c : cases) bench_case(c, repeats);

  std::printf("done\n");
  return 0;
}
