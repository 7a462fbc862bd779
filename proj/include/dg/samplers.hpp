#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "dg/denoiser.hpp"
#include "dg/diffusion.hpp"
#include "dg/schedule.hpp"
#include "dg/tensor.hpp"

namespace dg {

enum class SamplerMethod { ddpm, ddim };

/// Maps (x_t, t, predicted eps) to a modified eps of the same shape.
/// Must be pure given captured state and safe for concurrent chains.
using GuidanceHook = std::function<Tensor(const Tensor& x_t, int t, const Tensor& eps)>;

struct SamplerConfig {
  SamplerMethod method = SamplerMethod::ddim;
  /// Timesteps at which the model is evaluated, strictly descending in
  /// 1..T. The loop always finishes at clean data: DDIM's final transition
  /// targets t=0; DDPM requires the full adjacent chain down to 1.
  std::vector<int> steps;
  double eta = 0.0;                                               // ddim only
  DdpmSigmaVariant sigma_variant = DdpmSigmaVariant::posterior;   // ddpm only
  std::uint64_t seed = 0;
  int chains = 1;
  bool record_trace = false;
  std::optional<ClampRange> clamp_x0;  // applied to x0_hat (ddim step + traces)
  std::optional<double> cfg_w;         // with a label: classifier-free combination
};

struct TraceEntry {
  int t = 0;
  Tensor x_t;
  Tensor x0_hat;
};

struct SampleTrace {
  std::vector<TraceEntry> entries;
};

struct SampleResult {
  Tensor samples;                   // [chains, d]
  std::vector<SampleTrace> traces;  // per chain when record_trace, else empty
};

/// x_{t-1} = (x_t - (beta_t / sqrt(1 - abar_t)) eps) / sqrt(alpha_t) + sigma z.
/// The sigma z term is forced to zero at t = 1.
Tensor ddpm_step(const NoiseSchedule& s, const Tensor& x_t, int t, const Tensor& eps_pred,
                 double sigma, const Tensor& z);

/// x_next = sqrt(abar_to) x0_hat + dir eps + sigma z with (sigma, dir) from
/// ddim_sigma; t_to may be 0 (emits x0_hat). Returns (x_next, x0_hat).
std::pair<Tensor, Tensor> ddim_step(const NoiseSchedule& s, const Tensor& x_t, int t_from,
                                    int t_to, const Tensor& eps_pred, double eta, const Tensor& z,
                                    std::optional<ClampRange> clamp = std::nullopt);

/// (1 + w) eps_cond - w eps_uncond.
Tensor cfg_epsilon(const Tensor& eps_uncond, const Tensor& eps_cond, double w);

/// n model evaluations at uniform stride: {T, T-s, ..., T-(n-1)s}, s = T/n.
std::vector<int> uniform_steps(int T, int n);

/// {T, T-1, ..., 1}.
std::vector<int> full_steps(int T);

/// Reverse-process generation. x_T is standard normal per chain; chain c's
/// randomness at step t comes from the (seed, c, t) stream, so results are
/// identical for any worker count (DG_THREADS caps workers).
SampleResult sample_loop(const DenoiserModel& m, const NoiseSchedule& s,
                         const SamplerConfig& cfg, const GuidanceHook& hook = {},
                         std::optional<int> label = std::nullopt);

/// Worker cap from DG_THREADS (>= 1); hardware concurrency when unset.
int thread_cap();

}  // namespace dg
