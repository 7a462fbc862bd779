#include "dg/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace dg {
namespace {

// log N(x; mu, diag(var)) accumulated in double.
double log_gauss_diag(std::span<const double> x, std::span<const double> mu,
                      std::span<const double> var) {
  const double log2pi = std::log(2.0 * std::numbers::pi);
  double acc = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    double d = x[i] - mu[i];
    acc += -0.5 * (log2pi + std::log(var[i]) + d * d / var[i]);
  }
  return acc;
}

// Per-component log joint log w_k + log N(x; mu_k, var_k).
std::vector<double> log_joint(const GmmSpec& gmm, std::span<const double> x) {
  const int K = gmm.components();
  std::vector<double> lj(K);
  for (int k = 0; k < K; ++k)
    lj[k] = std::log(gmm.weights[k]) + log_gauss_diag(x, gmm.means[k], gmm.vars[k]);
  return lj;
}

double log_sum_exp(std::span<const double> v) {
  double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace

void GmmSpec::validate() const {
  if (weights.empty()) throw std::invalid_argument("gmm: no components");
  if (means.size() != weights.size() || vars.size() != weights.size())
    throw std::invalid_argument("gmm: means/vars/weights count mismatch");
  const size_t d = means[0].size();
  if (d == 0) throw std::invalid_argument("gmm: zero-dimensional components");
  double wsum = 0.0;
  for (size_t k = 0; k < weights.size(); ++k) {
    if (!(weights[k] > 0.0)) throw std::invalid_argument("gmm: weights must be positive");
    wsum += weights[k];
    if (means[k].size() != d || vars[k].size() != d)
      throw std::invalid_argument("gmm: inconsistent component dimension");
    for (double v : vars[k])
      if (!(v > 0.0)) throw std::invalid_argument("gmm: variances must be positive");
  }
  if (std::abs(wsum - 1.0) > 1e-9)
    throw std::invalid_argument("gmm: weights must sum to 1");
}

GmmSpec GmmSpec::symmetric_pair(double m, int d) {
  GmmSpec g;
  g.weights = {0.5, 0.5};
  g.means.assign(2, std::vector<double>(d, 0.0));
  g.means[0][0] = m;
  g.means[1][0] = -m;
  g.vars.assign(2, std::vector<double>(d, 1.0));
  return g;
}

GmmSpec gmm_marginal(const GmmSpec& gmm, const NoiseSchedule& s, int t) {
  if (t < 0 || t > s.T) throw std::invalid_argument("gmm_marginal: t outside [0, T]");
  if (t == 0) return gmm;
  const double abar = s.alpha_bar(t);
  const double sq = std::sqrt(abar);
  GmmSpec out = gmm;
  for (size_t k = 0; k < out.means.size(); ++k) {
    for (size_t i = 0; i < out.means[k].size(); ++i) {
      out.means[k][i] = sq * gmm.means[k][i];
      out.vars[k][i] = abar * gmm.vars[k][i] + (1.0 - abar);
    }
  }
  return out;
}

double gmm_log_density(const GmmSpec& gmm, std::span<const double> x) {
  if (x.size() != static_cast<size_t>(gmm.dim()))
    throw std::invalid_argument("gmm_log_density: dim mismatch");
  auto lj = log_joint(gmm, x);
  return log_sum_exp(lj);
}

std::vector<double> gmm_responsibilities(const GmmSpec& gmm, std::span<const double> x) {
  if (x.size() != static_cast<size_t>(gmm.dim()))
    throw std::invalid_argument("gmm_responsibilities: dim mismatch");
  auto lj = log_joint(gmm, x);
  double lz = log_sum_exp(lj);
  std::vector<double> r(lj.size());
  for (size_t k = 0; k < lj.size(); ++k) r[k] = std::exp(lj[k] - lz);
  return r;
}

std::vector<double> gmm_score_at(const GmmSpec& gmm, std::span<const double> x) {
  // grad log p = sum_k r_k(x) * (mu_k - x) / var_k  for diagonal Gaussians.
  auto r = gmm_responsibilities(gmm, x);
  std::vector<double> g(x.size(), 0.0);
  for (size_t k = 0; k < r.size(); ++k)
    for (size_t i = 0; i < x.size(); ++i)
      g[i] += r[k] * (gmm.means[k][i] - x[i]) / gmm.vars[k][i];
  return g;
}

Tensor gmm_score(const GmmSpec& gmm, const NoiseSchedule& s, const Tensor& x, int t) {
  GmmSpec marg = gmm_marginal(gmm, s, t);
  auto g = gmm_score_at(marg, x.as_doubles());
  return Tensor::from_doubles(x.shape(), g);
}

Tensor analytic_epsilon(const GmmSpec& gmm, const NoiseSchedule& s, const Tensor& x_t, int t) {
  if (t < 1 || t > s.T) throw std::invalid_argument("analytic_epsilon: t outside [1, T]");
  const double scale = -std::sqrt(1.0 - s.alpha_bar(t));
  GmmSpec marg = gmm_marginal(gmm, s, t);
  auto g = gmm_score_at(marg, x_t.as_doubles());
  for (double& v : g) v *= scale;
  Tensor out = Tensor::from_doubles(x_t.shape(), g);
  out.ensure_finite("analytic_epsilon");
  return out;
}

std::vector<double> gmm_posterior_mean_x0(const GmmSpec& gmm, const NoiseSchedule& s,
                                          std::span<const double> x_t, int t) {
  if (t < 0 || t > s.T) throw std::invalid_argument("gmm_posterior_mean_x0: t outside [0, T]");
  if (t == 0) return std::vector<double>(x_t.begin(), x_t.end());
  // Per component, (x0, x_t) is jointly Gaussian:
  //   E[x0 | x_t, k] = mu_k + sqrt(abar) sigma2_k (x_t - sqrt(abar) mu_k)
  //                    / (abar sigma2_k + 1 - abar)
  // weighted by the time-t responsibilities.
  const double abar = s.alpha_bar(t);
  const double sq = std::sqrt(abar);
  GmmSpec marg = gmm_marginal(gmm, s, t);
  auto r = gmm_responsibilities(marg, x_t);
  std::vector<double> mean(x_t.size(), 0.0);
  for (size_t k = 0; k < r.size(); ++k) {
    for (size_t i = 0; i < x_t.size(); ++i) {
      double denom = abar * gmm.vars[k][i] + (1.0 - abar);
      double cond = gmm.means[k][i] +
                    sq * gmm.vars[k][i] * (x_t[i] - sq * gmm.means[k][i]) / denom;
      mean[i] += r[k] * cond;
    }
  }
  return mean;
}

int gmm_bayes_class(const GmmSpec& gmm, std::span<const double> x) {
  auto r = gmm_responsibilities(gmm, x);
  return static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
}

std::vector<double> gmm_draw(const GmmSpec& gmm, Rng& rng, int* component) {
  double u = rng.next_double();
  int k = gmm.components() - 1;
  double acc = 0.0;
  for (int j = 0; j < gmm.components(); ++j) {
    acc += gmm.weights[j];
    if (u < acc) {
      k = j;
      break;
    }
  }
  if (component != nullptr) *component = k;
  std::vector<double> x(gmm.dim());
  for (int i = 0; i < gmm.dim(); ++i)
    x[i] = gmm.means[k][i] + std::sqrt(gmm.vars[k][i]) * rng.next_normal();
  return x;
}

GmmDenoiser::GmmDenoiser(GmmSpec gmm, const NoiseSchedule& schedule)
    : gmm_(std::move(gmm)), schedule_(&schedule) {
  gmm_.validate();
}

Tensor GmmDenoiser::predict_epsilon(const Tensor& x_t, int t, std::optional<int> label) const {
  if (label.has_value())
    throw std::invalid_argument("analytic denoiser has no label conditioning");
  return analytic_epsilon(gmm_, *schedule_, x_t, t);
}

}  // namespace dg
