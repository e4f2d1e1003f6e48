#pragma once

// Fully connected network with ReLU hidden layers and a linear output layer.
// Parameters live in one flat vector, layer by layer: weights stored
// input-major ([in][out]) followed by the bias.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace qtrust::nn {

struct LayerShape {
  int in = 0;
  int out = 0;
  std::size_t weight_offset = 0;
  std::size_t bias_offset = 0;
  bool operator==(const LayerShape&) const = default;
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Per-layer outputs of one forward pass. values[l] is the output of layer l
// (post-ReLU for hidden layers).
struct Activations {
  std::vector<std::vector<double>> values;
};

class Mlp {
 public:
  Mlp() = default;
  // All parameters zero.
  Mlp(int input_size, std::vector<int> hidden_sizes, int output_size);

  // He-uniform hidden weights, small uniform output weights, zero biases.
  static Mlp initialized(int input_size, std::vector<int> hidden_sizes, int output_size, std::uint64_t seed);

  int input_size() const { return input_size_; }
  int output_size() const { return shapes_.empty() ? 0 : shapes_.back().out; }
  int embedding_size() const { return shapes_.size() < 2 ? input_size_ : shapes_[shapes_.size() - 2].out; }
  const std::vector<int>& hidden_sizes() const { return hidden_; }
  const std::vector<LayerShape>& layers() const { return shapes_; }

  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }
  std::size_t parameter_count() const { return params_.size(); }
  void set_parameters(std::span<const double> values);

  std::vector<double> forward(std::span<const double> input) const;
  std::vector<double> embed(std::span<const double> input) const;
  void forward_into(std::span<const double> input, Activations& acts) const;

  // Accumulates d(loss)/d(params) into `grad` given d(loss)/d(output).
  void backward(std::span<const double> input, const Activations& acts, std::span<const double> output_grad,
                std::span<double> grad) const;

  bool operator==(const Mlp&) const = default;

 private:
  void check_input(std::span<const double> input) const;

  int input_size_ = 0;
  std::vector<int> hidden_;
  std::vector<LayerShape> shapes_;
  std::vector<double> params_;
};

// y[o] = b[o] + sum_i x[i] * W[i][o]; zero inputs are skipped.
void dense_forward(std::span<const double> x, std::span<const double> weights, std::span<const double> bias,
                   std::span<double> y);

}  // namespace qtrust::nn
