#pragma once

// Reverse-mode differentiation over FeatureMap values. A Tape records the
// forward computation of one sample; `backward()` replays it in reverse and
// accumulates parameter gradients into the owning ParameterStore.

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sarpn/feature_map.hpp"
#include "sarpn/ops.hpp"

namespace sarpn {

struct Parameter {
  std::string name;
  FeatureMap value;
  FeatureMap grad;
};

/// Owns every trainable tensor of a model in registration order. Parameter
/// addresses are stable for the lifetime of the store.
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;
  ParameterStore(ParameterStore&&) = default;
  ParameterStore& operator=(ParameterStore&&) = default;

  Parameter& create(const std::string& name, int channels, int height, int width);

  std::size_t size() const noexcept { return params_.size(); }
  std::size_t scalar_count() const noexcept;
  Parameter& operator[](std::size_t i) { return *params_[i]; }
  const Parameter& operator[](std::size_t i) const { return *params_[i]; }
  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;

  void zero_grad();

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

/// Handle to a value recorded on a Tape.
struct Var {
  int id = -1;
  bool valid() const noexcept { return id >= 0; }
};

class Conv2d;

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf value. Gradients are tracked only when `requires_grad` is set.
  Var input(FeatureMap value, bool requires_grad = false);

  Var conv(Var x, const Conv2d& layer);
  Var relu(Var x);
  Var sigmoid(Var x);
  Var add(Var a, Var b);
  Var resize(Var x, int height, int width);
  Var concat(std::span<const Var> xs);
  /// Per-channel global mean, as a (channels x 1 x 1) map.
  Var global_avg_pool(Var x);
  /// x scaled channelwise by `gate`, a (channels x 1 x 1) map.
  Var scale_channels(Var x, Var gate);

  const FeatureMap& value(Var v) const { return nodes_[v.id].value; }
  /// Gradient accumulated so far (valid after backward()); zeros if the
  /// node did not receive any gradient.
  const FeatureMap& grad(Var v);
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  /// Adds `g` to the output gradient of `v`; call before backward().
  void seed(Var v, const FeatureMap& g);
  void backward();

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    FeatureMap value;
    FeatureMap grad;
    bool requires_grad = false;
    std::function<void(Tape&, int)> backward;
  };

  Var push(FeatureMap value, bool requires_grad,
           std::function<void(Tape&, int)> backward);
  FeatureMap& grad_buffer(int id);

  std::deque<Node> nodes_;  // stable references across push_back
};

/// Deterministic initializer source shared by the layer constructors.
using Rng = std::mt19937_64;

enum class InitKind {
  kaiming,  // N(0, 2/fan_in)
  small,    // N(0, 0.01^2)
  zeros,
};

/// Convolution layer whose weight and bias live in a ParameterStore.
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(ParameterStore& store, const std::string& name, const ConvSpec& spec,
         Rng& rng, InitKind init = InitKind::kaiming, double bias_init = 0.0);

  const ConvSpec& spec() const noexcept { return spec_; }
  Parameter& weight() const noexcept { return *weight_; }
  Parameter& bias() const noexcept { return *bias_; }
  std::span<const double> weights() const noexcept { return weight_->value.data(); }
  std::span<const double> biases() const noexcept { return bias_->value.data(); }

  FeatureMap apply(const FeatureMap& x) const {
    return conv2d(x, spec_, weights(), biases());
  }

 private:
  ConvSpec spec_;
  Parameter* weight_ = nullptr;
  Parameter* bias_ = nullptr;
};

/// Stored weight layout: (out_channels, in_channels, kernel*kernel).
void zero_parameters(const Conv2d& layer);

}  // namespace sarpn
