#pragma once

#include <span>
#include <vector>

#include "dg/denoiser.hpp"
#include "dg/schedule.hpp"
#include "dg/tensor.hpp"

namespace dg {

/// Diagonal-covariance Gaussian mixture; the analytic data distribution.
struct GmmSpec {
  std::vector<double> weights;             // K, positive, sums to 1
  std::vector<std::vector<double>> means;  // K x d
  std::vector<std::vector<double>> vars;   // K x d, per-dimension variances

  int components() const { return static_cast<int>(weights.size()); }
  int dim() const { return means.empty() ? 0 : static_cast<int>(means[0].size()); }
  void validate() const;

  /// Symmetric pair N(+m e1, I), N(-m e1, I) in d dimensions, equal weights.
  static GmmSpec symmetric_pair(double m, int d);
};

/// Pushforward through the marginal noising: means sqrt(abar_t) mu_k,
/// variances abar_t sigma2_k + (1 - abar_t). t = 0 returns the input.
GmmSpec gmm_marginal(const GmmSpec& gmm, const NoiseSchedule& s, int t);

double gmm_log_density(const GmmSpec& gmm, std::span<const double> x);

/// Posterior component probabilities p(k | x), log-sum-exp stabilized.
std::vector<double> gmm_responsibilities(const GmmSpec& gmm, std::span<const double> x);

/// Score of the mixture itself, at its own scale (no schedule applied).
std::vector<double> gmm_score_at(const GmmSpec& gmm, std::span<const double> x);

/// Score of the time-t marginal mixture at x.
Tensor gmm_score(const GmmSpec& gmm, const NoiseSchedule& s, const Tensor& x, int t);

/// eps*(x_t, t) = -sqrt(1 - abar_t) * score of the time-t marginal.
Tensor analytic_epsilon(const GmmSpec& gmm, const NoiseSchedule& s, const Tensor& x_t, int t);

/// Closed-form posterior mean E[x0 | x_t] under the mixture prior.
std::vector<double> gmm_posterior_mean_x0(const GmmSpec& gmm, const NoiseSchedule& s,
                                          std::span<const double> x_t, int t);

/// Argmax posterior responsibility at t = 0; the Bayes-optimal class rule.
int gmm_bayes_class(const GmmSpec& gmm, std::span<const double> x);

/// One draw from the mixture; writes the sampled component to `component` if given.
std::vector<double> gmm_draw(const GmmSpec& gmm, Rng& rng, int* component = nullptr);

/// Exact epsilon oracle backed by the mixture marginals. No internal
/// representations and no input-gradient support.
class GmmDenoiser final : public DenoiserModel {
 public:
  GmmDenoiser(GmmSpec gmm, const NoiseSchedule& schedule);

  int dim() const override { return gmm_.dim(); }
  Tensor predict_epsilon(const Tensor& x_t, int t, std::optional<int> label) const override;
  const GmmSpec& spec() const { return gmm_; }

 private:
  GmmSpec gmm_;
  const NoiseSchedule* schedule_;
};

}  // namespace dg
