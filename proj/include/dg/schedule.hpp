#pragma once

#include <string>
#include <vector>

namespace dg {

enum class ScheduleKind { linear, cosine };

/// Diffusion noise schedule. Arrays are 0-indexed internally; the
/// accessors take t in 1..T (alpha_bar also accepts t=0, meaning clean data).
/// Immutable after construction.
struct NoiseSchedule {
  ScheduleKind kind = ScheduleKind::linear;
  int T = 0;
  std::vector<double> alphas;
  std::vector<double> alpha_bars;
  std::vector<double> betas;

  // build parameters, kept so checkpoints can rebuild the exact schedule
  double beta_start = 0.0;  // linear
  double beta_end = 0.0;    // linear
  double s_offset = 0.0;    // cosine

  double alpha(int t) const;      // t in 1..T
  double beta(int t) const;       // t in 1..T
  double alpha_bar(int t) const;  // t in 0..T, alpha_bar(0) = 1

  void check_step(int t) const;  // throws unless 1 <= t <= T
};

NoiseSchedule build_linear(int T, double beta_start, double beta_end);

/// Cosine schedule: alpha_bar_t = f(t)/f(0), f(t) = cos^2(((t/T + s)/(1 + s)) * pi/2),
/// per-step alpha clamped below by 0.001.
NoiseSchedule build_cosine(int T, double s = 0.008);

enum class DdpmSigmaVariant { posterior, beta };

/// Reverse-step noise scale; `posterior` uses sqrt(beta_t * (1 - abar_{t-1}) / (1 - abar_t)).
double ddpm_sigma(const NoiseSchedule& s, int t, DdpmSigmaVariant variant = DdpmSigmaVariant::posterior);

struct DdimCoeffs {
  double sigma;      // eta-scaled stochastic term
  double dir_coeff;  // sqrt(1 - abar_to - sigma^2), scales the predicted noise
};

/// Coefficients of the non-Markovian reverse step from t_from down to t_to (t_to may be 0).
DdimCoeffs ddim_sigma(const NoiseSchedule& s, int t_from, int t_to, double eta);

std::string to_string(ScheduleKind kind);
ScheduleKind schedule_kind_from_string(const std::string& s);

}  // namespace dg
