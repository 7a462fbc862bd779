#include "dg/denoiser.hpp"

#include <stdexcept>

#include "dg/diffusion.hpp"

namespace dg {

std::string to_string(NoisingMode mode) {
  switch (mode) {
    case NoisingMode::deterministic_zero: return "deterministic_zero";
    case NoisingMode::fixed_seed: return "fixed_seed";
    case NoisingMode::fresh: return "fresh";
  }
  throw std::logic_error("unreachable noising mode");
}

NoisingMode noising_mode_from_string(const std::string& s) {
  if (s == "deterministic_zero") return NoisingMode::deterministic_zero;
  if (s == "fixed_seed") return NoisingMode::fixed_seed;
  if (s == "fresh") return NoisingMode::fresh;
  throw std::invalid_argument("unknown noising mode: " + s);
}

FeatureBundle DenoiserModel::tap_activations(const Tensor&, int,
                                             const std::vector<int>&) const {
  throw std::runtime_error("model does not expose internal activations");
}

Tape::Node DenoiserModel::epsilon_on_tape(Tape&, Tape::Node, int, std::optional<int>,
                                          const std::vector<int>&,
                                          std::vector<std::pair<int, Tape::Node>>*) const {
  throw std::runtime_error("model does not support input gradients");
}

Tensor feature_noise(size_t n, NoisingMode mode, Rng* rng, uint64_t fixed_seed) {
  Tensor eps(std::vector<size_t>{n});
  switch (mode) {
    case NoisingMode::deterministic_zero:
      return eps;  // zeros
    case NoisingMode::fixed_seed: {
      Rng local(fixed_seed);
      for (size_t i = 0; i < n; ++i) eps.data()[i] = static_cast<float>(local.next_normal());
      return eps;
    }
    case NoisingMode::fresh: {
      if (rng == nullptr) throw std::invalid_argument("fresh feature noise needs an rng");
      for (size_t i = 0; i < n; ++i) eps.data()[i] = static_cast<float>(rng->next_normal());
      return eps;
    }
  }
  throw std::logic_error("unreachable noising mode");
}

FeatureBundle extract_features(const DenoiserModel& m, const NoiseSchedule& s,
                               const Tensor& x, int t_feat, const std::vector<int>& taps,
                               NoisingMode mode, Rng* rng, uint64_t fixed_seed) {
  if (t_feat < 0 || t_feat > s.T)
    throw std::invalid_argument("t_feat outside [0, T]");
  if (static_cast<int>(x.size()) != m.dim())
    throw std::invalid_argument("extract_features: input dim mismatch");

  if (t_feat == 0) return m.tap_activations(x, 0, taps);

  Tensor eps = feature_noise(x.size(), mode, rng, fixed_seed);
  // Grid inputs arrive rank-2; the noise carries x's shape so noising accepts it.
  Tensor x_noised = noising(s, x, t_feat, Tensor(x.shape(), eps.values()));
  return m.tap_activations(x_noised, t_feat, taps);
}

}  // namespace dg
