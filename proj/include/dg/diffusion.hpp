#pragma once

#include <optional>

#include "dg/schedule.hpp"
#include "dg/tensor.hpp"

namespace dg {

struct ClampRange {
  float lo;
  float hi;
};

struct Sample {
  Tensor x;
  int t = 0;  // 0 = clean data
};

/// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.
Tensor noising(const NoiseSchedule& s, const Tensor& x0, int t, const Tensor& eps);

/// Single forward step: x_t = sqrt(alpha_t) x_{t-1} + sqrt(1 - alpha_t) eps.
Tensor forward_step(const NoiseSchedule& s, const Tensor& x_prev, int t, const Tensor& eps);

/// x0_hat = (x_t - sqrt(1 - abar_t) eps_pred) / sqrt(abar_t), optionally clamped.
Tensor estimate_x0(const NoiseSchedule& s, const Tensor& x_t, int t, const Tensor& eps_pred,
                   std::optional<ClampRange> clamp = std::nullopt);

}  // namespace dg
