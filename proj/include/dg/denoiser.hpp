#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dg/autodiff.hpp"
#include "dg/diffusion.hpp"
#include "dg/rng.hpp"
#include "dg/schedule.hpp"
#include "dg/tensor.hpp"

namespace dg {

/// Activations captured at named hidden layers, in tap order.
struct FeatureBundle {
  int t_feat = 0;
  std::vector<std::pair<int, std::vector<double>>> taps;  // tap id -> post-activation vector

  std::size_t concat_length() const {
    std::size_t n = 0;
    for (const auto& [id, v] : taps) n += v.size();
    return n;
  }
  std::vector<double> concatenated() const {
    std::vector<double> out;
    out.reserve(concat_length());
    for (const auto& [id, v] : taps) out.insert(out.end(), v.begin(), v.end());
    return out;
  }
};

enum class NoisingMode { deterministic_zero, fixed_seed, fresh };

std::string to_string(NoisingMode mode);
NoisingMode noising_mode_from_string(const std::string& s);

/// Noise-prediction model. Implementations must be deterministic given
/// inputs and weights, and are immutable during inference.
class DenoiserModel {
 public:
  virtual ~DenoiserModel() = default;

  virtual int dim() const = 0;
  virtual Tensor predict_epsilon(const Tensor& x_t, int t,
                                 std::optional<int> label = std::nullopt) const = 0;

  /// Post-activation vectors at the given hidden-layer taps for input x_t at step t.
  /// Throws for backends without internal representations.
  virtual FeatureBundle tap_activations(const Tensor& x_t, int t,
                                        const std::vector<int>& taps) const;

  /// Replays predict_epsilon on a tape from input node x so callers can
  /// differentiate scalars through the model. Tap nodes for `taps` are
  /// appended to tap_nodes when given. Throws for backends without
  /// input-gradient support (supports_input_gradient false).
  virtual Tape::Node epsilon_on_tape(Tape& tape, Tape::Node x, int t, std::optional<int> label,
                                     const std::vector<int>& taps,
                                     std::vector<std::pair<int, Tape::Node>>* tap_nodes) const;

  virtual bool supports_input_gradient() const { return false; }
  virtual bool has_label_table() const { return false; }
};

/// Embeds a clean-domain tensor at t_feat and taps the denoiser there.
/// deterministic_zero uses a zero noise vector, fixed_seed a per-call fixed
/// stream, fresh draws from `rng` (required for that mode). Differentiable
/// in x along the deterministic path.
FeatureBundle extract_features(const DenoiserModel& m, const NoiseSchedule& s, const Tensor& x,
                               int t_feat, const std::vector<int>& taps, NoisingMode mode,
                               Rng* rng = nullptr, std::uint64_t fixed_seed = 0x5eedf00dull);

/// The noise vector extract_features uses before embedding, per mode.
Tensor feature_noise(std::size_t n, NoisingMode mode, Rng* rng, std::uint64_t fixed_seed);

}  // namespace dg
