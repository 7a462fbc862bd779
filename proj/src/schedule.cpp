#include "dg/schedule.hpp"

#include <cmath>
#include <stdexcept>

namespace dg {

void NoiseSchedule::check_step(int t) const {
  if (t < 1 || t > T) throw std::out_of_range("timestep out of range 1..T");
}

double NoiseSchedule::alpha(int t) const {
  check_step(t);
  return alphas[static_cast<std::size_t>(t - 1)];
}

double NoiseSchedule::beta(int t) const {
  check_step(t);
  return betas[static_cast<std::size_t>(t - 1)];
}

double NoiseSchedule::alpha_bar(int t) const {
  if (t == 0) return 1.0;
  check_step(t);
  return alpha_bars[static_cast<std::size_t>(t - 1)];
}

NoiseSchedule build_linear(int T, double beta_start, double beta_end) {
  if (T < 1) throw std::invalid_argument("T must be positive");
  if (!(beta_start > 0.0) || !(beta_end < 1.0) || beta_start > beta_end)
    throw std::invalid_argument("betas must satisfy 0 < beta_start <= beta_end < 1");

  NoiseSchedule s;
  s.kind = ScheduleKind::linear;
  s.T = T;
  s.beta_start = beta_start;
  s.beta_end = beta_end;
  s.betas.resize(T);
  s.alphas.resize(T);
  s.alpha_bars.resize(T);
  double abar = 1.0;
  for (int t = 1; t <= T; ++t) {
    const double frac = T == 1 ? 0.0 : static_cast<double>(t - 1) / (T - 1);
    const double beta = beta_start + (beta_end - beta_start) * frac;
    const double alpha = 1.0 - beta;
    abar *= alpha;
    s.betas[t - 1] = beta;
    s.alphas[t - 1] = alpha;
    s.alpha_bars[t - 1] = abar;
  }
  return s;
}

NoiseSchedule build_cosine(int T, double s_offset) {
  if (T < 1) throw std::invalid_argument("T must be positive");
  if (!(s_offset > 0.0)) throw std::invalid_argument("cosine offset s must be positive");

  const auto f = [&](double t) {
    const double c = std::cos(((t / T + s_offset) / (1.0 + s_offset)) * M_PI / 2.0);
    return c * c;
  };

  NoiseSchedule s;
  s.kind = ScheduleKind::cosine;
  s.T = T;
  s.s_offset = s_offset;
  s.betas.resize(T);
  s.alphas.resize(T);
  s.alpha_bars.resize(T);
  double abar = 1.0;  // alpha_bar_0 := 1
  double f_prev = f(0.0);
  for (int t = 1; t <= T; ++t) {
    const double f_t = f(t);
    const double alpha = std::max(f_t / f_prev, 0.001);  // per-step clamp
    abar *= alpha;
    s.alphas[t - 1] = alpha;
    s.betas[t - 1] = 1.0 - alpha;
    s.alpha_bars[t - 1] = abar;
    f_prev = f_t;
  }
  return s;
}

double ddpm_sigma(const NoiseSchedule& s, int t, DdpmSigmaVariant variant) {
  s.check_step(t);
  if (variant == DdpmSigmaVariant::beta) return std::sqrt(s.beta(t));
  const double num = 1.0 - s.alpha_bar(t - 1);
  const double den = 1.0 - s.alpha_bar(t);
  return std::sqrt(s.beta(t) * num / den);
}

DdimCoeffs ddim_sigma(const NoiseSchedule& s, int t_from, int t_to, double eta) {
  if (eta < 0.0 || eta > 1.0) throw std::invalid_argument("eta must lie in [0, 1]");
  if (t_to >= t_from) throw std::invalid_argument("ddim step requires t_to < t_from");
  s.check_step(t_from);
  if (t_to < 0) throw std::out_of_range("t_to must be >= 0");

  const double abar_from = s.alpha_bar(t_from);
  const double abar_to = s.alpha_bar(t_to);
  const double sigma = eta * std::sqrt((1.0 - abar_to) / (1.0 - abar_from)) *
                       std::sqrt(1.0 - abar_from / abar_to);
  const double dir_sq = 1.0 - abar_to - sigma * sigma;
  return {sigma, std::sqrt(std::max(dir_sq, 0.0))};
}

std::string to_string(ScheduleKind kind) {
  return kind == ScheduleKind::linear ? "linear" : "cosine";
}

ScheduleKind schedule_kind_from_string(const std::string& s) {
  if (s == "linear") return ScheduleKind::linear;
  if (s == "cosine") return ScheduleKind::cosine;
  throw std::invalid_argument("unknown schedule kind: " + s);
}

}  // namespace dg
