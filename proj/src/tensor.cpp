#include "usfgan/tensor.hpp"

#include <cmath>
#include <random>

namespace usfgan::nn {

namespace {

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

Parameter<double> make_conv_param(const std::string& name, int64_t c_out,
                                  int64_t c_in_per_group, int64_t kernel,
                                  uint64_t seed) {
  const Shape shape{c_out, c_in_per_group, kernel};
  const double bound = std::sqrt(6.0 / double(c_in_per_group * kernel));
  std::mt19937_64 rng(derive_seed(seed, fnv1a(name)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> vals(static_cast<size_t>(shape.numel()));
  for (auto& v : vals) v = dist(rng);
  Parameter<double> p;
  p.name = name;
  p.tensor = BasicTensor<double>::from(shape, std::move(vals), true);
  p.tensor.storage()->label = name;
  return p;
}

Parameter<double> make_bias_param(const std::string& name, int64_t c_out) {
  Parameter<double> p;
  p.name = name;
  p.tensor = BasicTensor<double>::zeros({c_out, 1, 1}, true);
  p.tensor.storage()->label = name;
  return p;
}

void adam_step(std::vector<Parameter<double>*>& params, const AdamConfig& cfg) {
  for (auto* p : params) {
    auto st = p->tensor.storage();
    if (st->grad.empty()) st->ensure_grad();  // untouched params still step
    if (p->m.empty()) {
      p->m.assign(st->val.size(), 0.0);
      p->v.assign(st->val.size(), 0.0);
    }
    p->step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, double(p->step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, double(p->step));
    for (size_t i = 0; i < st->val.size(); ++i) {
      const double g = st->grad[i];
      p->m[i] = cfg.beta1 * p->m[i] + (1.0 - cfg.beta1) * g;
      p->v[i] = cfg.beta2 * p->v[i] + (1.0 - cfg.beta2) * g * g;
      const double mhat = p->m[i] / bc1;
      const double vhat = p->v[i] / bc2;
      st->val[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
    st->grad.clear();
  }
}

void zero_grads(std::vector<Parameter<double>*>& params) {
  for (auto* p : params) p->tensor.storage()->grad.clear();
}

}  // namespace usfgan::nn
