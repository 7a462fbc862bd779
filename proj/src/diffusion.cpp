#include "dg/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dg {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

}  // namespace

Tensor noising(const NoiseSchedule& s, const Tensor& x0, int t, const Tensor& eps) {
  require_same_shape(x0, eps, "noising");
  s.check_step(t);
  const double abar = s.alpha_bar(t);
  const double a = std::sqrt(abar);
  const double b = std::sqrt(1.0 - abar);
  Tensor out(x0.shape());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<float>(a * x0[i] + b * eps[i]);
  out.ensure_finite("noising output");
  return out;
}

Tensor forward_step(const NoiseSchedule& s, const Tensor& x_prev, int t, const Tensor& eps) {
  require_same_shape(x_prev, eps, "forward_step");
  s.check_step(t);
  const double alpha = s.alpha(t);
  const double a = std::sqrt(alpha);
  const double b = std::sqrt(1.0 - alpha);
  Tensor out(x_prev.shape());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<float>(a * x_prev[i] + b * eps[i]);
  out.ensure_finite("forward_step output");
  return out;
}

Tensor estimate_x0(const NoiseSchedule& s, const Tensor& x_t, int t, const Tensor& eps_pred,
                   std::optional<ClampRange> clamp) {
  require_same_shape(x_t, eps_pred, "estimate_x0");
  s.check_step(t);
  const double abar = s.alpha_bar(t);
  const double inv = 1.0 / std::sqrt(abar);
  const double c = std::sqrt(1.0 - abar);
  Tensor out(x_t.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    double v = (x_t[i] - c * eps_pred[i]) * inv;
    if (clamp) v = std::clamp(v, static_cast<double>(clamp->lo), static_cast<double>(clamp->hi));
    out[i] = static_cast<float>(v);
  }
  out.ensure_finite("estimate_x0 output");
  return out;
}

}  // namespace dg
