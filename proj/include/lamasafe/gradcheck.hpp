#pragma once

#include <cmath>
#include <vector>

#include "lamasafe/nn.hpp"
#include "lamasafe/rng.hpp"

namespace lamasafe::nn {

struct GradCheckResult {
  double max_rel_error = 0.0;
  int nets_checked = 0;
  long long params_checked = 0;
};

namespace detail {

inline double scalar_loss(const Mlp& net, const std::vector<double>& input,
                          const std::vector<double>& weight) {
  const Tape tape = forward(net, input);
  double s = 0.0;
  for (std::size_t i = 0; i < tape.output.size(); ++i) s += weight[i] * tape.output[i];
  return s;
}

}  // namespace detail

/// Central-difference check of backward() against L(p) = w . f(x; p) over
/// random networks. Returns the worst relative error across all parameters.
inline GradCheckResult gradcheck(int num_nets, std::uint64_t seed, double h = 1e-5) {
  GradCheckResult result;
  Rng rng(seed);
  for (int n = 0; n < num_nets; ++n) {
    const int in = 2 + static_cast<int>(rng.uniform_int(6));
    const int hidden = 3 + static_cast<int>(rng.uniform_int(10));
    const int out = 1 + static_cast<int>(rng.uniform_int(4));
    const int depth = 1 + static_cast<int>(rng.uniform_int(2));
    std::vector<int> sizes = {in};
    for (int d = 0; d < depth; ++d) sizes.push_back(hidden);
    sizes.push_back(out);
    Mlp net = Mlp::create(sizes, rng);
    // non-zero biases so their gradients are exercised away from the origin
    for (auto& layer : net.layers)
      for (auto& b : layer.b) b = rng.normal(0.0, 0.5);

    std::vector<double> input(static_cast<std::size_t>(in));
    for (auto& x : input) x = rng.normal(0.0, 1.0);
    std::vector<double> weight(static_cast<std::size_t>(out));
    for (auto& w : weight) w = rng.normal(0.0, 1.0);

    const Tape tape = forward(net, input);
    Gradients grads = Gradients::zeros_like(net);
    backward(net, tape, weight, grads);

    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      auto check_block = [&](std::vector<double>& params, const std::vector<double>& analytic) {
        for (std::size_t i = 0; i < params.size(); ++i) {
          const double saved = params[i];
          params[i] = saved + h;
          const double up = detail::scalar_loss(net, input, weight);
          params[i] = saved - h;
          const double down = detail::scalar_loss(net, input, weight);
          params[i] = saved;
          const double fd = (up - down) / (2.0 * h);
          const double a = analytic[i];
          const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6});
          result.max_rel_error = std::max(result.max_rel_error, rel);
          result.params_checked += 1;
        }
      };
      check_block(net.layers[l].w, grads.layers[l].w);
      check_block(net.layers[l].b, grads.layers[l].b);
    }
    result.nets_checked += 1;
  }
  return result;
}

}  // namespace lamasafe::nn
