#pragma once

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lamasafe/rng.hpp"

#include <nlohmann/json.hpp>

namespace lamasafe::nn {

/// Affine layer parameters, row-major weights [out x in].
struct Layer {
  int in = 0;
  int out = 0;
  std::vector<double> w;
  std::vector<double> b;
};

/// Tanh MLP with a linear final layer. Gradients are hand-derived
/// reverse-mode; forward() records the tape needed by backward().
struct Mlp {
  std::vector<Layer> layers;

  static Mlp create(const std::vector<int>& sizes, Rng& rng, double final_scale = 1.0) {
    if (sizes.size() < 2) throw std::invalid_argument("Mlp: need at least input and output sizes");
    Mlp net;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
      Layer layer;
      layer.in = sizes[l];
      layer.out = sizes[l + 1];
      layer.w.resize(static_cast<std::size_t>(layer.in) * static_cast<std::size_t>(layer.out));
      layer.b.assign(static_cast<std::size_t>(layer.out), 0.0);
      const double scale = 1.0 / std::sqrt(static_cast<double>(layer.in));
      const bool final_layer = (l + 2 == sizes.size());
      for (auto& w : layer.w) w = rng.normal(0.0, scale) * (final_layer ? final_scale : 1.0);
      net.layers.push_back(std::move(layer));
    }
    return net;
  }

  int input_size() const { return layers.front().in; }
  int output_size() const { return layers.back().out; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.w.size() + l.b.size();
    return n;
  }
};

/// Activation tape from one forward pass: the input of each layer plus the
/// post-activation values (tanh') and the final linear output.
struct Tape {
  std::vector<std::vector<double>> inputs;       // per layer
  std::vector<std::vector<double>> activations;  // post-tanh per hidden layer
  std::vector<double> output;
};

inline Tape forward(const Mlp& net, const std::vector<double>& input) {
  if (static_cast<int>(input.size()) != net.input_size())
    throw std::invalid_argument("forward: input size mismatch");
  Tape tape;
  std::vector<double> x = input;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const Layer& layer = net.layers[l];
    tape.inputs.push_back(x);
    std::vector<double> y(static_cast<std::size_t>(layer.out));
    for (int o = 0; o < layer.out; ++o) {
      double s = layer.b[static_cast<std::size_t>(o)];
      const double* wrow = layer.w.data() + static_cast<std::size_t>(o) * static_cast<std::size_t>(layer.in);
      for (int i = 0; i < layer.in; ++i) s += wrow[i] * x[static_cast<std::size_t>(i)];
      y[static_cast<std::size_t>(o)] = s;
    }
    const bool last = (l + 1 == net.layers.size());
    if (!last) {
      for (auto& v : y) v = std::tanh(v);
      tape.activations.push_back(y);
    }
    x = std::move(y);
  }
  tape.output = x;
  return tape;
}

/// Per-layer gradients mirroring the Mlp layout, plus the input gradient.
struct Gradients {
  std::vector<Layer> layers;  // w/b hold the gradients
  std::vector<double> input;

  static Gradients zeros_like(const Mlp& net) {
    Gradients g;
    for (const auto& l : net.layers) {
      Layer gl;
      gl.in = l.in;
      gl.out = l.out;
      gl.w.assign(l.w.size(), 0.0);
      gl.b.assign(l.b.size(), 0.0);
      g.layers.push_back(std::move(gl));
    }
    g.input.assign(static_cast<std::size_t>(net.input_size()), 0.0);
    return g;
  }

  void add_scaled(const Gradients& o, double scale) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
      for (std::size_t i = 0; i < layers[l].w.size(); ++i) layers[l].w[i] += scale * o.layers[l].w[i];
      for (std::size_t i = 0; i < layers[l].b.size(); ++i) layers[l].b[i] += scale * o.layers[l].b[i];
    }
  }
};

/// Exact reverse-mode pass. `output_grad` is dL/d(output); gradients are
/// ACCUMULATED into `grads` so minibatch sums need no extra buffers.
inline void backward(const Mlp& net, const Tape& tape, const std::vector<double>& output_grad,
                     Gradients& grads) {
  if (tape.inputs.size() != net.layers.size())
    throw std::invalid_argument("backward: tape does not match network");
  if (static_cast<int>(output_grad.size()) != net.output_size())
    throw std::invalid_argument("backward: output gradient size mismatch");

  std::vector<double> delta = output_grad;  // dL/d(pre-activation of current layer)
  for (std::size_t li = net.layers.size(); li-- > 0;) {
    const Layer& layer = net.layers[li];
    Layer& g = grads.layers[li];
    const std::vector<double>& x = tape.inputs[li];
    for (int o = 0; o < layer.out; ++o) {
      const double d = delta[static_cast<std::size_t>(o)];
      g.b[static_cast<std::size_t>(o)] += d;
      double* grow = g.w.data() + static_cast<std::size_t>(o) * static_cast<std::size_t>(layer.in);
      for (int i = 0; i < layer.in; ++i) grow[i] += d * x[static_cast<std::size_t>(i)];
    }
    std::vector<double> prev(static_cast<std::size_t>(layer.in), 0.0);
    for (int o = 0; o < layer.out; ++o) {
      const double d = delta[static_cast<std::size_t>(o)];
      const double* wrow = layer.w.data() + static_cast<std::size_t>(o) * static_cast<std::size_t>(layer.in);
      for (int i = 0; i < layer.in; ++i) prev[static_cast<std::size_t>(i)] += d * wrow[i];
    }
    if (li > 0) {
      // chain through the previous layer's tanh
      const std::vector<double>& a = tape.activations[li - 1];
      for (std::size_t i = 0; i < prev.size(); ++i) prev[i] *= (1.0 - a[i] * a[i]);
    } else {
      for (std::size_t i = 0; i < prev.size(); ++i) grads.input[i] += prev[i];
    }
    delta = std::move(prev);
  }
}

/// Bias-corrected adaptive-moment optimizer state for one Mlp.
struct AdamState {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long long step_count = 0;
  std::vector<Layer> m;  // first moments, mirrors Mlp layers
  std::vector<Layer> v;  // second moments

  static AdamState create(const Mlp& net, double lr) {
    AdamState s;
    s.lr = lr;
    const Gradients z = Gradients::zeros_like(net);
    s.m = z.layers;
    s.v = z.layers;
    return s;
  }
};

inline void adam_step(Mlp& net, const Gradients& grads, AdamState& state) {
  if (state.m.size() != net.layers.size()) throw std::invalid_argument("adam_step: state mismatch");
  state.step_count += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    auto update = [&](std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m,
                      std::vector<double>& v) {
      for (std::size_t i = 0; i < p.size(); ++i) {
        if (!std::isfinite(g[i])) throw std::runtime_error("adam_step: non-finite gradient");
        m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
        v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        p[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
      }
    };
    update(net.layers[l].w, grads.layers[l].w, state.m[l].w, state.v[l].w);
    update(net.layers[l].b, grads.layers[l].b, state.m[l].b, state.v[l].b);
  }
}

/// Adam for a bare parameter vector (used for Gaussian log-std).
struct VecAdam {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long long step_count = 0;
  std::vector<double> m;
  std::vector<double> v;

  static VecAdam create(std::size_t n, double lr) {
    VecAdam s;
    s.lr = lr;
    s.m.assign(n, 0.0);
    s.v.assign(n, 0.0);
    return s;
  }

  void step(std::vector<double>& p, const std::vector<double>& g) {
    step_count += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (!std::isfinite(g[i])) throw std::runtime_error("VecAdam: non-finite gradient");
      m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
      p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
    }
  }
};

/// Clip gradient by global L2 norm; no-op when max_norm <= 0.
inline void clip_gradients(Gradients& grads, double max_norm) {
  if (max_norm <= 0.0) return;
  double n2 = 0.0;
  for (const auto& l : grads.layers) {
    for (const double g : l.w) n2 += g * g;
    for (const double g : l.b) n2 += g * g;
  }
  const double norm = std::sqrt(n2);
  if (norm <= max_norm) return;
  const double scale = max_norm / norm;
  for (auto& l : grads.layers) {
    for (auto& g : l.w) g *= scale;
    for (auto& g : l.b) g *= scale;
  }
}

inline std::vector<double> softmax(const std::vector<double>& logits) {
  double mx = logits[0];
  for (const double v : logits) mx = std::max(mx, v);
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  return p;
}

enum class HeadKind { Categorical, Gaussian };

/// Policy distribution head over an Mlp trunk. Categorical heads read the
/// trunk output as logits; Gaussian heads read it as the mean and keep a
/// learned state-independent log-std vector.
struct PolicyHead {
  HeadKind kind = HeadKind::Categorical;
  Mlp net;
  std::vector<double> log_std;  // Gaussian only
  double action_low = -1.0;     // Gaussian clamp bounds, applied after density
  double action_high = 1.0;

  static PolicyHead categorical(const std::vector<int>& sizes, Rng& rng) {
    PolicyHead h;
    h.kind = HeadKind::Categorical;
    h.net = Mlp::create(sizes, rng, 0.01);
    return h;
  }

  static PolicyHead gaussian(const std::vector<int>& sizes, Rng& rng, double low, double high) {
    PolicyHead h;
    h.kind = HeadKind::Gaussian;
    h.net = Mlp::create(sizes, rng, 0.01);
    h.log_std.assign(static_cast<std::size_t>(sizes.back()), std::log(0.5));
    h.action_low = low;
    h.action_high = high;
    return h;
  }
};

struct SampleResult {
  std::vector<double> action;  // one-hot index stored in action[0] for categorical
  double logprob = 0.0;
  double entropy = 0.0;
};

/// Sample an action with its exact log-probability and the distribution
/// entropy. Gaussian log-densities are evaluated on the pre-clamp sample.
inline SampleResult sample_and_logprob(const PolicyHead& head, const std::vector<double>& features,
                                       Rng& rng) {
  const Tape tape = forward(head.net, features);
  SampleResult out;
  if (head.kind == HeadKind::Categorical) {
    const std::vector<double> p = softmax(tape.output);
    const double u = rng.uniform();
    double acc = 0.0;
    std::size_t pick = p.size() - 1;
    for (std::size_t i = 0; i < p.size(); ++i) {
      acc += p[i];
      if (u < acc) {
        pick = i;
        break;
      }
    }
    out.action = {static_cast<double>(pick)};
    out.logprob = std::log(std::max(p[pick], 1e-300));
    for (const double q : p)
      if (q > 0) out.entropy -= q * std::log(q);
  } else {
    constexpr double half_log_2pi = 0.9189385332046727;  // 0.5*ln(2*pi)
    out.action.resize(tape.output.size());
    for (std::size_t i = 0; i < tape.output.size(); ++i) {
      const double sigma = std::exp(head.log_std[i]);
      const double z = rng.normal();
      const double a = tape.output[i] + sigma * z;
      out.logprob += -0.5 * z * z - head.log_std[i] - half_log_2pi;
      out.entropy += head.log_std[i] + half_log_2pi + 0.5;
      out.action[i] = std::clamp(a, head.action_low, head.action_high);
      // density bookkeeping uses the pre-clamp sample; z is exactly that
    }
  }
  return out;
}

/// Log-probability (and entropy) of a stored action under the current
/// parameters, plus the tape for backprop.
struct Evaluation {
  Tape tape;
  double logprob = 0.0;
  double entropy = 0.0;
  std::vector<double> probs;  // categorical only
};

inline Evaluation evaluate_action(const PolicyHead& head, const std::vector<double>& features,
                                  const std::vector<double>& action) {
  Evaluation ev;
  ev.tape = forward(head.net, features);
  if (head.kind == HeadKind::Categorical) {
    ev.probs = softmax(ev.tape.output);
    const auto a = static_cast<std::size_t>(action[0]);
    ev.logprob = std::log(std::max(ev.probs[a], 1e-300));
    for (const double q : ev.probs)
      if (q > 0) ev.entropy -= q * std::log(q);
  } else {
    constexpr double half_log_2pi = 0.9189385332046727;
    for (std::size_t i = 0; i < ev.tape.output.size(); ++i) {
      const double sigma = std::exp(head.log_std[i]);
      const double d = (action[i] - ev.tape.output[i]) / sigma;
      ev.logprob += -0.5 * d * d - head.log_std[i] - half_log_2pi;
      ev.entropy += head.log_std[i] + half_log_2pi + 0.5;
    }
  }
  return ev;
}

/// Deterministic action: argmax logits / the Gaussian mean (clamped).
inline std::vector<double> deterministic_action(const PolicyHead& head,
                                                const std::vector<double>& features) {
  const Tape tape = forward(head.net, features);
  if (head.kind == HeadKind::Categorical) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < tape.output.size(); ++i)
      if (tape.output[i] > tape.output[best]) best = i;
    return {static_cast<double>(best)};
  }
  std::vector<double> a = tape.output;
  for (auto& v : a) v = std::clamp(v, head.action_low, head.action_high);
  return a;
}

inline nlohmann::json layer_to_json(const Layer& l) {
  return {{"in", l.in}, {"out", l.out}, {"w", l.w}, {"b", l.b}};
}

inline Layer layer_from_json(const nlohmann::json& j) {
  Layer l;
  l.in = j.at("in").get<int>();
  l.out = j.at("out").get<int>();
  l.w = j.at("w").get<std::vector<double>>();
  l.b = j.at("b").get<std::vector<double>>();
  if (l.w.size() != static_cast<std::size_t>(l.in) * static_cast<std::size_t>(l.out) ||
      l.b.size() != static_cast<std::size_t>(l.out))
    throw std::runtime_error("layer_from_json: shape mismatch");
  return l;
}

inline nlohmann::json mlp_to_json(const Mlp& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : net.layers) layers.push_back(layer_to_json(l));
  return {{"layers", layers}};
}

inline Mlp mlp_from_json(const nlohmann::json& j) {
  Mlp net;
  for (const auto& l : j.at("layers")) net.layers.push_back(layer_from_json(l));
  return net;
}

inline nlohmann::json adam_to_json(const AdamState& s) {
  nlohmann::json m = nlohmann::json::array(), v = nlohmann::json::array();
  for (const auto& l : s.m) m.push_back(layer_to_json(l));
  for (const auto& l : s.v) v.push_back(layer_to_json(l));
  return {{"lr", s.lr},   {"beta1", s.beta1},           {"beta2", s.beta2},
          {"eps", s.eps}, {"step_count", s.step_count}, {"m", m},
          {"v", v}};
}

inline AdamState adam_from_json(const nlohmann::json& j) {
  AdamState s;
  s.lr = j.at("lr").get<double>();
  s.beta1 = j.at("beta1").get<double>();
  s.beta2 = j.at("beta2").get<double>();
  s.eps = j.at("eps").get<double>();
  s.step_count = j.at("step_count").get<long long>();
  for (const auto& l : j.at("m")) s.m.push_back(layer_from_json(l));
  for (const auto& l : j.at("v")) s.v.push_back(layer_from_json(l));
  return s;
}

inline nlohmann::json head_to_json(const PolicyHead& h) {
  return {{"kind", h.kind == HeadKind::Categorical ? "categorical" : "gaussian"},
          {"net", mlp_to_json(h.net)},
          {"log_std", h.log_std},
          {"action_low", h.action_low},
          {"action_high", h.action_high}};
}

inline PolicyHead head_from_json(const nlohmann::json& j) {
  PolicyHead h;
  h.kind = j.at("kind").get<std::string>() == "categorical" ? HeadKind::Categorical
                                                            : HeadKind::Gaussian;
  h.net = mlp_from_json(j.at("net"));
  h.log_std = j.at("log_std").get<std::vector<double>>();
  h.action_low = j.at("action_low").get<double>();
  h.action_high = j.at("action_high").get<double>();
  return h;
}

}  // namespace lamasafe::nn
