#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dg/autodiff.hpp"
#include "dg/rng.hpp"

namespace dg {

/// Fully connected layer; weights row-major [out x in], stored f32.
struct DenseLayer {
  int in = 0;
  int out = 0;
  std::vector<float> w;
  std::vector<float> b;
};

/// Per-layer gradient accumulators, double precision.
struct StackGrads {
  std::vector<std::vector<double>> w;
  std::vector<std::vector<double>> b;
  void clear();
};

/// Activations recorded by a forward pass for backprop.
/// post[0] is the input; post[l+1] is layer l's output after its
/// nonlinearity (the last layer is linear).
struct StackTrace {
  std::vector<std::vector<double>> pre;
  std::vector<std::vector<double>> post;
};

/// Plain MLP: affine layers with the gated nonlinearity between them,
/// linear output. All math in double, parameters stored f32.
class DenseStack {
 public:
  DenseStack() = default;
  /// Glorot-uniform init in +-sqrt(6/(fan_in+fan_out)), drawn from rng.
  DenseStack(const std::vector<int>& widths, Rng& rng);

  int in_dim() const { return layers.empty() ? 0 : layers.front().in; }
  int out_dim() const { return layers.empty() ? 0 : layers.back().out; }
  int hidden_count() const { return static_cast<int>(layers.size()) - 1; }
  std::vector<int> widths() const;

  std::vector<double> forward(std::span<const double> x, StackTrace* trace = nullptr) const;

  /// Backprop from dL/doutput; accumulates into g, returns dL/dinput.
  std::vector<double> backward(const StackTrace& trace, std::span<const double> dout,
                               StackGrads& g) const;

  StackGrads zero_grads() const;
  void sgd_step(const StackGrads& g, double lr);

  /// Replays the forward pass on a tape from node x. Appends each hidden
  /// layer's post-activation node to `hidden` when given.
  Tape::Node on_tape(Tape& t, Tape::Node x, std::vector<Tape::Node>* hidden = nullptr) const;

  std::vector<DenseLayer> layers;
};

double silu(double x);
double silu_grad(double x);

}  // namespace dg
