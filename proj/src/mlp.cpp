#include "qtrust/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qtrust/rng.hpp"

namespace qtrust::nn {

Mlp::Mlp(int input_size, std::vector<int> hidden_sizes, int output_size)
    : input_size_(input_size), hidden_(std::move(hidden_sizes)) {
  if (input_size <= 0 || output_size <= 0) throw ShapeError("network sizes must be positive");
  if (hidden_.empty()) throw ShapeError("at least one hidden layer is required");
  std::size_t offset = 0;
  int prev = input_size;
  auto add = [&](int out) {
    if (out <= 0) throw ShapeError("layer sizes must be positive");
    LayerShape s{prev, out, offset, offset + static_cast<std::size_t>(prev) * out};
    offset = s.bias_offset + out;
    shapes_.push_back(s);
    prev = out;
  };
  for (int h : hidden_) add(h);
  add(output_size);
  params_.assign(offset, 0.0);
}

Mlp Mlp::initialized(int input_size, std::vector<int> hidden_sizes, int output_size, std::uint64_t seed) {
  Mlp net(input_size, std::move(hidden_sizes), output_size);
  Rng rng(seed);
  for (std::size_t l = 0; l < net.shapes_.size(); ++l) {
    const auto& s = net.shapes_[l];
    const bool last = l + 1 == net.shapes_.size();
    const double limit = last ? 1e-3 * std::sqrt(6.0 / s.in) : std::sqrt(6.0 / s.in);
    for (std::size_t i = 0; i < static_cast<std::size_t>(s.in) * s.out; ++i)
      net.params_[s.weight_offset + i] = rng.uniform(-limit, limit);
  }
  return net;
}

void Mlp::set_parameters(std::span<const double> values) {
  if (values.size() != params_.size()) throw ShapeError("parameter vector size mismatch");
  std::copy(values.begin(), values.end(), params_.begin());
}

void Mlp::check_input(std::span<const double> input) const {
  if (static_cast<int>(input.size()) != input_size_)
    throw ShapeError("input has " + std::to_string(input.size()) + " features, network expects " +
                     std::to_string(input_size_));
}

void dense_forward(std::span<const double> x, std::span<const double> weights, std::span<const double> bias,
                   std::span<double> y) {
  const std::size_t out = y.size();
  std::copy(bias.begin(), bias.end(), y.begin());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    const double* w = weights.data() + i * out;
    for (std::size_t o = 0; o < out; ++o) y[o] += xi * w[o];
  }
}

void Mlp::forward_into(std::span<const double> input, Activations& acts) const {
  check_input(input);
  acts.values.resize(shapes_.size());
  std::span<const double> x = input;
  for (std::size_t l = 0; l < shapes_.size(); ++l) {
    const auto& s = shapes_[l];
    auto& y = acts.values[l];
    y.resize(s.out);
    dense_forward(x, std::span(params_).subspan(s.weight_offset, static_cast<std::size_t>(s.in) * s.out),
                  std::span(params_).subspan(s.bias_offset, s.out), y);
    if (l + 1 < shapes_.size())
      for (double& v : y) v = std::max(v, 0.0);
    x = y;
  }
}

std::vector<double> Mlp::forward(std::span<const double> input) const {
  Activations acts;
  forward_into(input, acts);
  return std::move(acts.values.back());
}

std::vector<double> Mlp::embed(std::span<const double> input) const {
  Activations acts;
  forward_into(input, acts);
  return std::move(acts.values[acts.values.size() - 2]);
}

void Mlp::backward(std::span<const double> input, const Activations& acts, std::span<const double> output_grad,
                   std::span<double> grad) const {
  check_input(input);
  if (grad.size() != params_.size()) throw ShapeError("gradient buffer size mismatch");
  std::vector<double> delta(output_grad.begin(), output_grad.end());
  std::vector<double> prev_delta;
  for (std::size_t l = shapes_.size(); l-- > 0;) {
    const auto& s = shapes_[l];
    std::span<const double> x = l == 0 ? input : std::span<const double>(acts.values[l - 1]);
    double* gw = grad.data() + s.weight_offset;
    double* gb = grad.data() + s.bias_offset;
    for (int o = 0; o < s.out; ++o) gb[o] += delta[o];
    for (int i = 0; i < s.in; ++i) {
      const double xi = x[i];
      if (xi == 0.0) continue;
      double* row = gw + static_cast<std::size_t>(i) * s.out;
      for (int o = 0; o < s.out; ++o) row[o] += xi * delta[o];
    }
    if (l == 0) break;
    // Propagate through W and the ReLU of the previous layer.
    prev_delta.assign(s.in, 0.0);
    const double* w = params_.data() + s.weight_offset;
    for (int i = 0; i < s.in; ++i) {
      if (x[i] <= 0.0) continue;
      const double* row = w + static_cast<std::size_t>(i) * s.out;
      double acc = 0.0;
      for (int o = 0; o < s.out; ++o) acc += row[o] * delta[o];
      prev_delta[i] = acc;
    }
    delta.swap(prev_delta);
  }
}

}  // namespace qtrust::nn
