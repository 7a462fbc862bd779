#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dg/autodiff.hpp"
#include "dg/denoiser.hpp"
#include "dg/nn.hpp"
#include "dg/schedule.hpp"
#include "dg/tensor.hpp"

namespace dg {

enum class LossWeight { uniform, snr };

struct TrainConfig {
  int steps = 0;
  int batch = 32;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  LossWeight weight = LossWeight::uniform;  // snr: w(t) = 1 - abar_t
};

/// Dense epsilon predictor: [d + 32, hidden..., d] with the gated
/// nonlinearity, a 32-dim sinusoidal embedding of t/T concatenated to the
/// input, and an optional label-embedding table added to the time embedding.
/// Tap ids index hidden layers from 0.
class MlpDenoiser final : public DenoiserModel {
 public:
  static constexpr int kTimeDim = 32;

  MlpDenoiser(int data_dim, NoiseSchedule schedule, std::uint64_t init_seed,
              std::vector<int> hidden = {128, 128, 128});

  int dim() const override { return data_dim_; }
  const NoiseSchedule& schedule() const { return schedule_; }

  Tensor predict_epsilon(const Tensor& x_t, int t,
                         std::optional<int> label = std::nullopt) const override;
  FeatureBundle tap_activations(const Tensor& x_t, int t,
                                const std::vector<int>& taps) const override;
  bool supports_input_gradient() const override { return true; }
  bool has_label_table() const override { return num_classes_ > 0; }
  int num_classes() const { return num_classes_; }

  Tape::Node epsilon_on_tape(Tape& t, Tape::Node x, int step, std::optional<int> label,
                             const std::vector<int>& taps,
                             std::vector<std::pair<int, Tape::Node>>* tap_nodes) const override;

  /// Adds a (num_classes + 1)-row embedding table: class rows random,
  /// the trailing null-token row zero, so the null token reproduces the
  /// unconditional model until training moves it.
  void attach_label_table(int num_classes, std::uint64_t seed);

  std::uint64_t init_seed() const { return init_seed_; }

  std::vector<double> time_embedding(int t) const;

  /// time embedding plus the label row (null row when label is empty).
  std::vector<double> conditioning_vector(int t, std::optional<int> label) const;

  DenseStack stack;                 // trunk parameters
  std::vector<float> label_table;   // (num_classes + 1) x kTimeDim, row-major

 private:
  void check_t(int t) const;
  void check_label(std::optional<int> label) const;

  int data_dim_ = 0;
  int num_classes_ = 0;
  std::uint64_t init_seed_ = 0;
  NoiseSchedule schedule_;
};

/// Eq.-style denoising objective: per step draw a batch, t ~ U{1..T},
/// fresh eps; minimize w(t) * mean((eps_pred - eps)^2) by SGD. Labels,
/// when given, are embedded through the label table; with probability
/// label_dropout an example trains with the null token instead.
/// Returns the per-step batch loss curve. Deterministic given cfg.seed.
std::vector<double> train_denoiser(MlpDenoiser& m, const std::vector<Tensor>& data,
                                   const std::vector<int>* labels, double label_dropout,
                                   const TrainConfig& cfg);

inline std::vector<double> train_denoiser(MlpDenoiser& m, const std::vector<Tensor>& data,
                                          const TrainConfig& cfg) {
  return train_denoiser(m, data, nullptr, 0.0, cfg);
}

}  // namespace dg
