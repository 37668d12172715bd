#include "usfgan/discriminators.hpp"

#include <memory>
#include <numeric>

#include "usfgan/common.hpp"

namespace usfgan {

using nn::Tensor;

void DiscriminatorConfig::validate() const {
  if (kind == Kind::pwg) {
    if (pwg_layers < 2 || pwg_channels < 1)
      throw DataError("discriminator config: bad pwg stack");
    return;
  }
  if (periods.empty()) throw DataError("discriminator config: no periods");
  for (size_t i = 0; i < periods.size(); ++i) {
    if (periods[i] < 2) throw DataError("discriminator config: period < 2");
    for (size_t j = i + 1; j < periods.size(); ++j)
      if (std::gcd(periods[i], periods[j]) != 1)
        throw DataError("discriminator config: periods must be coprime");
  }
  if (mpd_layers < 1 || mpd_base < 1 || mpd_cap < mpd_base)
    throw DataError("discriminator config: bad period stack");
  if (msd_scales < 1 || msd_base < msd_groups || msd_cap < msd_base)
    throw DataError("discriminator config: bad scale stack");
}

DiscriminatorConfig DiscriminatorConfig::toy() {
  DiscriminatorConfig cfg;
  cfg.mpd_base = 8;
  cfg.mpd_cap = 32;
  cfg.msd_base = 8;
  cfg.msd_cap = 32;
  return cfg;
}

DiscriminatorConfig DiscriminatorConfig::pwg_toy() {
  DiscriminatorConfig cfg;
  cfg.kind = Kind::pwg;
  cfg.pwg_channels = 16;
  return cfg;
}

namespace {

struct Layer {
  Tensor w, b;
  int64_t stride = 1, dilation = 1, groups = 1;
  int64_t pad_left = 0, pad_right = 0;
};

Tensor apply(const Layer& l, const Tensor& x) {
  if (l.stride == 1 && l.pad_left == 0 && l.pad_right == 0)
    return nn::conv1d(x, l.w, l.b, l.dilation, l.groups);
  return nn::conv1d_strided(x, l.w, l.b, l.stride, l.pad_left, l.pad_right,
                            l.dilation, l.groups);
}

}  // namespace

struct Discriminator::Impl {
  std::vector<std::unique_ptr<nn::Parameter<double>>> owned;
  std::vector<std::vector<Layer>> period_stacks;  // parallel to cfg.periods
  std::vector<std::vector<Layer>> scale_stacks;
  std::vector<Layer> pwg_stack;
  uint64_t seed = 0;

  Layer layer(const std::string& name, int64_t co, int64_t ci, int64_t k,
              int64_t groups = 1) {
    owned.push_back(std::make_unique<nn::Parameter<double>>(
        nn::make_conv_param(name + ".w", co, ci / groups, k, seed)));
    Tensor w = owned.back()->tensor;
    owned.push_back(std::make_unique<nn::Parameter<double>>(
        nn::make_bias_param(name + ".b", co)));
    Tensor b = owned.back()->tensor;
    Layer l;
    l.w = w;
    l.b = b;
    l.groups = groups;
    return l;
  }
};

Discriminator::Discriminator(const DiscriminatorConfig& cfg, uint64_t seed)
    : cfg_(cfg) {
  cfg_.validate();
  impl_ = std::make_shared<Impl>();
  impl_->seed = seed;
  if (cfg_.kind == DiscriminatorConfig::Kind::pwg) {
    const int c = cfg_.pwg_channels;
    for (int i = 0; i < cfg_.pwg_layers; ++i) {
      const bool last = i == cfg_.pwg_layers - 1;
      Layer l = impl_->layer("d/pwg/" + std::to_string(i), last ? 1 : c,
                             i == 0 ? 1 : c, 3);
      l.dilation = int64_t(1) << i;
      impl_->pwg_stack.push_back(l);
    }
    return;
  }
  for (int p : cfg_.periods) {
    std::vector<Layer> stack;
    int64_t ci = 1;
    for (int i = 0; i < cfg_.mpd_layers; ++i) {
      const int64_t co = std::min<int64_t>(cfg_.mpd_base << i, cfg_.mpd_cap);
      Layer l = impl_->layer(
          "d/mpd" + std::to_string(p) + "/" + std::to_string(i), co, ci, 5);
      l.stride = 3;
      l.pad_left = l.pad_right = 2;
      stack.push_back(l);
      ci = co;
    }
    stack.push_back(impl_->layer("d/mpd" + std::to_string(p) + "/out", 1, ci, 3));
    impl_->period_stacks.push_back(std::move(stack));
  }
  for (int s = 0; s < cfg_.msd_scales; ++s) {
    const std::string prefix = "d/msd" + std::to_string(s);
    const int64_t c = cfg_.msd_base;
    const int64_t c2 = std::min<int64_t>(2 * c, cfg_.msd_cap);
    const int64_t g = cfg_.msd_groups;
    std::vector<Layer> stack;
    stack.push_back(impl_->layer(prefix + "/0", c, 1, 15));
    Layer l1 = impl_->layer(prefix + "/1", c2, c, 11, g);
    l1.stride = 2;
    l1.pad_left = l1.pad_right = 5;
    stack.push_back(l1);
    Layer l2 = impl_->layer(prefix + "/2", c2, c2, 11, g);
    l2.stride = 2;
    l2.pad_left = l2.pad_right = 5;
    stack.push_back(l2);
    stack.push_back(impl_->layer(prefix + "/3", c2, c2, 5, g));
    stack.push_back(impl_->layer(prefix + "/out", 1, c2, 3));
    impl_->scale_stacks.push_back(std::move(stack));
  }
}

std::vector<nn::Parameter<double>*> Discriminator::parameters() {
  std::vector<nn::Parameter<double>*> out;
  out.reserve(impl_->owned.size());
  for (auto& p : impl_->owned) out.push_back(p.get());
  return out;
}

namespace {

Tensor run_stack(const std::vector<Layer>& stack, Tensor h) {
  for (size_t i = 0; i < stack.size(); ++i) {
    h = apply(stack[i], h);
    if (i + 1 < stack.size()) h = nn::leaky_relu(h, 0.1);
  }
  return h;
}

}  // namespace

std::vector<Tensor> Discriminator::forward(const Tensor& x) const {
  std::vector<Tensor> maps;
  if (cfg_.kind == DiscriminatorConfig::Kind::pwg) {
    maps.push_back(run_stack(impl_->pwg_stack, x));
    return maps;
  }
  for (size_t pi = 0; pi < cfg_.periods.size(); ++pi) {
    Tensor folded = nn::fold_period(
        nn::reflect_pad_to_multiple(x, cfg_.periods[pi]), cfg_.periods[pi]);
    maps.push_back(run_stack(impl_->period_stacks[pi], folded));
  }
  Tensor h = x;
  for (int s = 0; s < cfg_.msd_scales; ++s) {
    if (s > 0) h = nn::avg_pool2(h);
    maps.push_back(run_stack(impl_->scale_stacks[s], h));
  }
  return maps;
}

}  // namespace usfgan
