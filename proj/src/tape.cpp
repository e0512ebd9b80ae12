#include "sarpn/tape.hpp"

#include <cmath>

#include "sarpn/errors.hpp"

namespace sarpn {

Parameter& ParameterStore::create(const std::string& name, int channels,
                                  int height, int width) {
  if (find(name) != nullptr) throw ConfigError("duplicate parameter name " + name);
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->value = FeatureMap(channels, height, width);
  p->grad = FeatureMap(channels, height, width);
  params_.push_back(std::move(p));
  return *params_.back();
}

std::size_t ParameterStore::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

Parameter* ParameterStore::find(const std::string& name) {
  for (auto& p : params_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

const Parameter* ParameterStore::find(const std::string& name) const {
  for (const auto& p : params_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p->grad.fill(0.0);
}

Var Tape::push(FeatureMap value, bool requires_grad,
               std::function<void(Tape&, int)> backward) {
  nodes_.push_back(Node{std::move(value), FeatureMap(), requires_grad,
                        std::move(backward)});
  return Var{static_cast<int>(nodes_.size()) - 1};
}

FeatureMap& Tape::grad_buffer(int id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) {
    n.grad = FeatureMap(n.value.channels(), n.value.height(), n.value.width());
  }
  return n.grad;
}

const FeatureMap& Tape::grad(Var v) { return grad_buffer(v.id); }

Var Tape::input(FeatureMap value, bool requires_grad) {
  return push(std::move(value), requires_grad, nullptr);
}

Var Tape::conv(Var x, const Conv2d& layer) {
  FeatureMap out = layer.apply(value(x));
  const Conv2d* l = &layer;
  const int xi = x.id;
  return push(std::move(out), true, [l, xi](Tape& t, int self) {
    Node& in = t.nodes_[xi];
    FeatureMap* gin = in.requires_grad ? &t.grad_buffer(xi) : nullptr;
    conv2d_backward(in.value, l->spec(), l->weights(), t.nodes_[self].grad, gin,
                    l->weight().grad.data(), l->bias().grad.data());
  });
}

Var Tape::relu(Var x) {
  const int xi = x.id;
  return push(sarpn::relu(value(x)), requires_grad(x), [xi](Tape& t, int self) {
    relu_backward(t.nodes_[xi].value, t.nodes_[self].grad, t.grad_buffer(xi));
  });
}

Var Tape::sigmoid(Var x) {
  const int xi = x.id;
  return push(sarpn::sigmoid(value(x)), requires_grad(x), [xi](Tape& t, int self) {
    const auto y = t.nodes_[self].value.data();
    const auto g = t.nodes_[self].grad.data();
    auto gi = t.grad_buffer(xi).data();
    for (std::size_t i = 0; i < y.size(); ++i) gi[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var Tape::add(Var a, Var b) {
  if (!value(a).same_shape(value(b))) {
    throw ConfigError("add shape mismatch: " + value(a).shape_string() + " vs " +
                      value(b).shape_string());
  }
  FeatureMap out = value(a);
  out += value(b);
  const int ai = a.id;
  const int bi = b.id;
  return push(std::move(out), requires_grad(a) || requires_grad(b),
              [ai, bi](Tape& t, int self) {
                const FeatureMap& g = t.nodes_[self].grad;
                if (t.nodes_[ai].requires_grad) t.grad_buffer(ai) += g;
                if (t.nodes_[bi].requires_grad) t.grad_buffer(bi) += g;
              });
}

Var Tape::resize(Var x, int height, int width) {
  const int xi = x.id;
  return push(bilinear_resize(value(x), height, width), requires_grad(x),
              [xi](Tape& t, int self) {
                bilinear_resize_backward(t.nodes_[self].grad, t.grad_buffer(xi));
              });
}

Var Tape::concat(std::span<const Var> xs) {
  std::vector<const FeatureMap*> maps;
  std::vector<int> ids;
  bool rg = false;
  for (Var v : xs) {
    maps.push_back(&value(v));
    ids.push_back(v.id);
    rg = rg || requires_grad(v);
  }
  FeatureMap out = concat_channels(std::span<const FeatureMap* const>(maps));
  return push(std::move(out), rg, [ids](Tape& t, int self) {
    const FeatureMap& g = t.nodes_[self].grad;
    std::size_t offset = 0;
    for (int id : ids) {
      const std::size_t n = t.nodes_[id].value.size();
      if (t.nodes_[id].requires_grad) {
        auto dst = t.grad_buffer(id).data();
        const auto src = g.data().subspan(offset, n);
        for (std::size_t i = 0; i < n; ++i) dst[i] += src[i];
      }
      offset += n;
    }
  });
}

Var Tape::global_avg_pool(Var x) {
  const auto pooled = sarpn::global_avg_pool(value(x));
  FeatureMap out(static_cast<int>(pooled.size()), 1, 1);
  std::copy(pooled.begin(), pooled.end(), out.data().begin());
  const int xi = x.id;
  return push(std::move(out), requires_grad(x), [xi](Tape& t, int self) {
    global_avg_pool_backward(t.nodes_[self].grad.data(), t.grad_buffer(xi));
  });
}

Var Tape::scale_channels(Var x, Var gate) {
  const FeatureMap& gv = value(gate);
  if (gv.channels() != value(x).channels() || gv.height() != 1 || gv.width() != 1) {
    throw ConfigError("scale_channels gate must be channels x 1 x 1");
  }
  FeatureMap out = sarpn::scale_channels(value(x), gv.data());
  const int xi = x.id;
  const int gi = gate.id;
  return push(std::move(out), requires_grad(x) || requires_grad(gate),
              [xi, gi](Tape& t, int self) {
                const FeatureMap& g = t.nodes_[self].grad;
                const FeatureMap& xv = t.nodes_[xi].value;
                const FeatureMap& gate_v = t.nodes_[gi].value;
                const bool need_x = t.nodes_[xi].requires_grad;
                const bool need_gate = t.nodes_[gi].requires_grad;
                for (int c = 0; c < xv.channels(); ++c) {
                  const auto gc = g.channel(c);
                  if (need_x) {
                    auto dst = t.grad_buffer(xi).channel(c);
                    const double s = gate_v.data()[c];
                    for (std::size_t i = 0; i < gc.size(); ++i) dst[i] += gc[i] * s;
                  }
                  if (need_gate) {
                    const auto xc = xv.channel(c);
                    double acc = 0.0;
                    for (std::size_t i = 0; i < gc.size(); ++i) acc += gc[i] * xc[i];
                    t.grad_buffer(gi).data()[c] += acc;
                  }
                }
              });
}

void Tape::seed(Var v, const FeatureMap& g) { grad_buffer(v.id) += g; }

void Tape::backward() {
  for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.backward || n.grad.empty()) continue;
    n.backward(*this, id);
  }
}

Conv2d::Conv2d(ParameterStore& store, const std::string& name,
               const ConvSpec& spec, Rng& rng, InitKind init, double bias_init)
    : spec_(spec) {
  spec.validate();
  const int k2 = spec.kernel_size * spec.kernel_size;
  weight_ = &store.create(name + ".weight", spec.out_channels, spec.in_channels, k2);
  bias_ = &store.create(name + ".bias", spec.out_channels, 1, 1);
  const double fan_in = static_cast<double>(spec.in_channels) * k2;
  double stddev = 0.0;
  switch (init) {
    case InitKind::kaiming:
      stddev = std::sqrt(2.0 / fan_in);
      break;
    case InitKind::small:
      stddev = 0.01;
      break;
    case InitKind::zeros:
      break;
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& w : weight_->value.data()) {
    // float-representable so checkpoints round-trip exactly
    w = static_cast<float>(stddev * normal(rng));
  }
  bias_->value.fill(static_cast<float>(bias_init));
}

void zero_parameters(const Conv2d& layer) {
  layer.weight().value.fill(0.0);
  layer.bias().value.fill(0.0);
}

}  // namespace sarpn
