#pragma once

#include <random>
#include <variant>
#include <vector>

#include "sgad/nn/layers.hpp"

namespace sgad::nn {

template <typename T>
using Layer = std::variant<Conv2d<T>, ConvTranspose2d<T>, BatchNorm2d<T>, Activation<T>>;

// Everything backward() needs from one forward pass.
template <typename T>
struct Tape {
  Mode mode = Mode::Train;
  std::vector<Tensor<T>> inputs;    // input of layer i
  std::vector<Tensor<T>> outputs;   // output of layer i (kept for activations only)
  std::vector<BatchNormCache<T>> bn;  // indexed by layer; empty for non-BN layers
};

// One gradient buffer per parameter, in params() order.
template <typename T>
using Grads = std::vector<std::vector<T>>;

// A plain feed-forward stack. forward()/backward() are const: the network is
// the parameter store and the tape carries all per-call state.
template <typename T>
class Sequential {
 public:
  std::vector<Layer<T>> layers;

  template <typename L>
  Sequential& add(L layer) {
    layers.emplace_back(std::move(layer));
    return *this;
  }

  std::vector<Param<T>*> params() {
    std::vector<Param<T>*> out;
    for (auto& l : layers) {
      if (auto* c = std::get_if<Conv2d<T>>(&l)) out.push_back(&c->weight);
      if (auto* c = std::get_if<ConvTranspose2d<T>>(&l)) out.push_back(&c->weight);
      if (auto* b = std::get_if<BatchNorm2d<T>>(&l)) {
        out.push_back(&b->gamma);
        out.push_back(&b->beta);
      }
    }
    return out;
  }

  std::vector<const Param<T>*> params() const {
    std::vector<const Param<T>*> out;
    for (auto* p : const_cast<Sequential*>(this)->params()) out.push_back(p);
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto* p : params()) n += p->size();
    return n;
  }

  Grads<T> zero_grads() const {
    Grads<T> g;
    for (const auto* p : params()) g.emplace_back(p->size(), T(0));
    return g;
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode, Tape<T>* tape = nullptr) const {
    if (tape) {
      tape->mode = mode;
      tape->inputs.clear();
      tape->outputs.assign(layers.size(), Tensor<T>{});
      tape->bn.assign(layers.size(), BatchNormCache<T>{});
    }
    Tensor<T> cur = x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (tape) tape->inputs.push_back(cur);
      const Layer<T>& l = layers[i];
      if (auto* c = std::get_if<Conv2d<T>>(&l)) {
        cur = c->forward(cur);
      } else if (auto* ct = std::get_if<ConvTranspose2d<T>>(&l)) {
        cur = ct->forward(cur);
      } else if (auto* b = std::get_if<BatchNorm2d<T>>(&l)) {
        cur = b->forward(cur, mode, tape ? &tape->bn[i] : nullptr);
      } else {
        cur = std::get<Activation<T>>(l).forward(cur);
        if (tape) tape->outputs[i] = cur;
      }
    }
    return cur;
  }

  // Accumulates parameter gradients into `grads` (if non-null) and returns the
  // gradient w.r.t. the network input (empty if !need_input_grad).
  Tensor<T> backward(const Tape<T>& tape, const Tensor<T>& dy, Grads<T>* grads, bool need_input_grad = true) const {
    SGAD_REQUIRE(tape.inputs.size() == layers.size(), Error, "Sequential::backward: tape does not match network");
    std::vector<std::size_t> first_param(layers.size(), 0);
    std::size_t pi = 0;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      first_param[i] = pi;
      if (std::holds_alternative<Conv2d<T>>(layers[i]) || std::holds_alternative<ConvTranspose2d<T>>(layers[i])) pi += 1;
      if (std::holds_alternative<BatchNorm2d<T>>(layers[i])) pi += 2;
    }
    Tensor<T> grad = dy;
    for (std::size_t r = layers.size(); r-- > 0;) {
      const bool need_dx = need_input_grad || r > 0;
      const Layer<T>& l = layers[r];
      const Tensor<T>& in = tape.inputs[r];
      if (auto* c = std::get_if<Conv2d<T>>(&l)) {
        grad = c->backward(in, grad, grads ? &(*grads)[first_param[r]] : nullptr, need_dx);
      } else if (auto* ct = std::get_if<ConvTranspose2d<T>>(&l)) {
        grad = ct->backward(in, grad, grads ? &(*grads)[first_param[r]] : nullptr, need_dx);
      } else if (auto* b = std::get_if<BatchNorm2d<T>>(&l)) {
        grad = b->backward(tape.bn[r], tape.mode, grad, grads ? &(*grads)[first_param[r]] : nullptr,
                           grads ? &(*grads)[first_param[r] + 1] : nullptr, need_dx);
      } else {
        grad = std::get<Activation<T>>(l).backward(in, tape.outputs[r], grad);
      }
      if (!need_dx) return Tensor<T>{};
    }
    return grad;
  }

  void update_running_stats(const Tape<T>& tape, T momentum) {
    if (tape.mode != Mode::Train) return;
    for (std::size_t i = 0; i < layers.size(); ++i)
      if (auto* b = std::get_if<BatchNorm2d<T>>(&layers[i])) b->update_running(tape.bn[i], tape.inputs[i].plane(), momentum);
  }

  // Running statistics, in layer order, as (mean, var) pairs.
  std::vector<std::vector<T>*> buffers() {
    std::vector<std::vector<T>*> out;
    for (auto& l : layers)
      if (auto* b = std::get_if<BatchNorm2d<T>>(&l)) {
        out.push_back(&b->running_mean);
        out.push_back(&b->running_var);
      }
    return out;
  }
  std::vector<std::string> buffer_names() const {
    std::vector<std::string> out;
    for (const auto& l : layers)
      if (auto* b = std::get_if<BatchNorm2d<T>>(&l)) {
        const std::string base = b->gamma.name.substr(0, b->gamma.name.size() - 6);
        out.push_back(base + ".running_mean");
        out.push_back(base + ".running_var");
      }
    return out;
  }

  // Convolution weights ~ N(0, 0.02); norm scales ~ N(1, 0.02), shifts 0.
  void init_weights(std::mt19937_64& rng) {
    std::normal_distribution<double> nd(0.0, 0.02);
    for (auto& l : layers) {
      if (auto* c = std::get_if<Conv2d<T>>(&l))
        for (T& v : c->weight.value) v = static_cast<T>(nd(rng));
      if (auto* c = std::get_if<ConvTranspose2d<T>>(&l))
        for (T& v : c->weight.value) v = static_cast<T>(nd(rng));
      if (auto* b = std::get_if<BatchNorm2d<T>>(&l)) {
        for (T& v : b->gamma.value) v = static_cast<T>(1.0 + nd(rng));
        std::fill(b->beta.value.begin(), b->beta.value.end(), T(0));
      }
    }
  }
};

template <typename To, typename From>
Sequential<To> cast_network(const Sequential<From>& net) {
  Sequential<To> out;
  auto conv_param = [](const Param<From>& p) {
    return Param<To>{p.name, p.shape, std::vector<To>(p.value.begin(), p.value.end())};
  };
  for (const auto& l : net.layers) {
    if (auto* c = std::get_if<Conv2d<From>>(&l)) {
      Conv2d<To> n;
      n.in_c = c->in_c; n.out_c = c->out_c; n.k = c->k; n.stride = c->stride; n.pad = c->pad;
      n.weight = conv_param(c->weight);
      out.add(std::move(n));
    } else if (auto* ct = std::get_if<ConvTranspose2d<From>>(&l)) {
      ConvTranspose2d<To> n;
      n.in_c = ct->in_c; n.out_c = ct->out_c; n.k = ct->k; n.stride = ct->stride; n.pad = ct->pad;
      n.weight = conv_param(ct->weight);
      out.add(std::move(n));
    } else if (auto* b = std::get_if<BatchNorm2d<From>>(&l)) {
      BatchNorm2d<To> n;
      n.channels = b->channels;
      n.eps = static_cast<To>(b->eps);
      n.gamma = conv_param(b->gamma);
      n.beta = conv_param(b->beta);
      n.running_mean.assign(b->running_mean.begin(), b->running_mean.end());
      n.running_var.assign(b->running_var.begin(), b->running_var.end());
      out.add(std::move(n));
    } else {
      const auto& a = std::get<Activation<From>>(l);
      out.add(Activation<To>{a.kind, static_cast<To>(a.slope)});
    }
  }
  return out;
}

}  // namespace sgad::nn
