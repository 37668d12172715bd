#pragma once

// Reverse-mode autodiff over eagerly evaluated tensors. Ops run their forward
// pass immediately; when the active tape is recording they also push a
// backward closure. backward() walks the closures in reverse creation order,
// skipping nodes whose output never received a gradient, and releases each
// closure as soon as it has run so activation memory is returned eagerly.

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "usfgan/common.hpp"

namespace usfgan::nn {

struct Shape {
  int64_t d0 = 1, d1 = 1, d2 = 1;  // [batch, channels, time] by convention

  int64_t numel() const { return d0 * d1 * d2; }
  bool operator==(const Shape&) const = default;
};

template <class S>
struct Storage {
  Shape shape;
  std::vector<S> val;
  std::vector<S> grad;  // empty until a gradient is accumulated
  bool needs_grad = false;
  std::string label;

  void ensure_grad() {
    if (grad.empty()) grad.assign(val.size(), S(0));
  }
};

template <class S>
class BasicTensor {
 public:
  BasicTensor() = default;
  explicit BasicTensor(std::shared_ptr<Storage<S>> st) : st_(std::move(st)) {}

  static BasicTensor zeros(Shape shape, bool needs_grad = false) {
    auto st = std::make_shared<Storage<S>>();
    st->shape = shape;
    st->val.assign(static_cast<size_t>(shape.numel()), S(0));
    st->needs_grad = needs_grad;
    return BasicTensor(std::move(st));
  }
  static BasicTensor from(Shape shape, std::vector<S> values,
                          bool needs_grad = false) {
    if (static_cast<int64_t>(values.size()) != shape.numel())
      throw DataError("tensor shape does not match value count");
    auto st = std::make_shared<Storage<S>>();
    st->shape = shape;
    st->val = std::move(values);
    st->needs_grad = needs_grad;
    return BasicTensor(std::move(st));
  }
  static BasicTensor scalar(S v) { return from({1, 1, 1}, {v}); }

  bool defined() const { return st_ != nullptr; }
  const Shape& shape() const { return st_->shape; }
  int64_t numel() const { return st_->shape.numel(); }
  std::vector<S>& val() { return st_->val; }
  const std::vector<S>& val() const { return st_->val; }
  std::vector<S>& grad() { return st_->grad; }
  const std::vector<S>& grad() const { return st_->grad; }
  bool needs_grad() const { return st_->needs_grad; }
  S item() const {
    if (numel() != 1) throw DataError("item() on non-scalar tensor");
    return st_->val[0];
  }
  const std::shared_ptr<Storage<S>>& storage() const { return st_; }

 private:
  std::shared_ptr<Storage<S>> st_;
};

using Tensor = BasicTensor<double>;

template <class S>
class Tape {
 public:
  // The op layer records onto the active tape when recording is on.
  static Tape*& active() {
    static Tape* tape = nullptr;
    return tape;
  }

  bool recording = false;

  void push(const char* name, std::shared_ptr<Storage<S>> out,
            std::function<void()> back) {
    nodes_.push_back({name, std::move(out), std::move(back)});
  }

  size_t size() const { return nodes_.size(); }

  // Seeds d(loss)/d(loss) = 1 and sweeps the tape backwards, freeing each
  // node after it runs. Nodes whose output holds no gradient are skipped,
  // so a backward pass only touches the subgraph feeding its loss.
  void backward(BasicTensor<S>& loss) {
    if (loss.numel() != 1) throw DataError("backward() needs a scalar loss");
    loss.storage()->ensure_grad();
    loss.grad()[0] += S(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      if (!it->out->grad.empty() && it->back) it->back();
      it->back = nullptr;
      it->out.reset();
    }
    nodes_.clear();
  }

  void clear() { nodes_.clear(); }

 private:
  struct Node {
    const char* name;
    std::shared_ptr<Storage<S>> out;
    std::function<void()> back;
  };
  std::vector<Node> nodes_;
};

// Installs a tape as active (and optionally recording) for the current scope.
template <class S>
class TapeScope {
 public:
  explicit TapeScope(Tape<S>& tape, bool record = true) : prev_(Tape<S>::active()) {
    Tape<S>::active() = &tape;
    tape.recording = record;
  }
  ~TapeScope() { Tape<S>::active() = prev_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape<S>* prev_;
};

// NaN/Inf screening of op outputs; throws NumericError naming the first
// offending op. On by default, cheap relative to the convolutions.
void set_check_finite(bool on);
bool check_finite_enabled();

template <class S>
struct Parameter {
  std::string name;
  BasicTensor<S> tensor;
  std::vector<S> m, v;  // Adam moments
  int64_t step = 0;

  int64_t numel() const { return tensor.numel(); }
};

// Kaiming-uniform conv weight: bound sqrt(6 / fan_in), fan_in = c_in * k.
// The RNG stream is derived from the parameter name, so initialization does
// not depend on construction order.
Parameter<double> make_conv_param(const std::string& name, int64_t c_out,
                                  int64_t c_in_per_group, int64_t kernel,
                                  uint64_t seed);
Parameter<double> make_bias_param(const std::string& name, int64_t c_out);

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected update; consumes and clears parameter gradients.
void adam_step(std::vector<Parameter<double>*>& params, const AdamConfig& cfg);
void zero_grads(std::vector<Parameter<double>*>& params);

}  // namespace usfgan::nn
