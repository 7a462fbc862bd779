#include "dg/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>

#include "dg/rng.hpp"

namespace dg {

Tensor ddpm_step(const NoiseSchedule& s, const Tensor& x_t, int t, const Tensor& eps_pred,
                 double sigma, const Tensor& z) {
  s.check_step(t);
  if (!x_t.same_shape(eps_pred) || !x_t.same_shape(z))
    throw std::invalid_argument("ddpm_step: shape mismatch");
  const double coef = s.beta(t) / std::sqrt(1.0 - s.alpha_bar(t));
  const double inv_sqrt_alpha = 1.0 / std::sqrt(s.alpha(t));
  const double noise_scale = t == 1 ? 0.0 : sigma;
  Tensor out(x_t.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double mean = (static_cast<double>(x_t[i]) - coef * eps_pred[i]) * inv_sqrt_alpha;
    out[i] = static_cast<float>(mean + noise_scale * z[i]);
  }
  out.ensure_finite("ddpm_step output");
  return out;
}

std::pair<Tensor, Tensor> ddim_step(const NoiseSchedule& s, const Tensor& x_t, int t_from,
                                    int t_to, const Tensor& eps_pred, double eta, const Tensor& z,
                                    std::optional<ClampRange> clamp) {
  if (!x_t.same_shape(eps_pred) || !x_t.same_shape(z))
    throw std::invalid_argument("ddim_step: shape mismatch");
  Tensor x0 = estimate_x0(s, x_t, t_from, eps_pred, clamp);
  const DdimCoeffs c = ddim_sigma(s, t_from, t_to, eta);
  const double sq_to = std::sqrt(s.alpha_bar(t_to));
  Tensor next(x_t.shape());
  for (std::size_t i = 0; i < next.size(); ++i)
    next[i] = static_cast<float>(sq_to * x0[i] + c.dir_coeff * eps_pred[i] + c.sigma * z[i]);
  next.ensure_finite("ddim_step output");
  return {std::move(next), std::move(x0)};
}

Tensor cfg_epsilon(const Tensor& eps_uncond, const Tensor& eps_cond, double w) {
  if (!eps_uncond.same_shape(eps_cond))
    throw std::invalid_argument("cfg_epsilon: shape mismatch");
  Tensor out(eps_cond.shape());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<float>((1.0 + w) * eps_cond[i] - w * eps_uncond[i]);
  return out;
}

std::vector<int> uniform_steps(int T, int n) {
  if (T < 1 || n < 1 || n > T) throw std::invalid_argument("uniform_steps: need 1 <= n <= T");
  const int stride = T / n;
  std::vector<int> steps(n);
  for (int i = 0; i < n; ++i) steps[i] = T - i * stride;
  return steps;
}

std::vector<int> full_steps(int T) {
  std::vector<int> steps(T);
  for (int i = 0; i < T; ++i) steps[i] = T - i;
  return steps;
}

int thread_cap() {
  if (const char* env = std::getenv("DG_THREADS")) {
    int v = std::atoi(env);
    if (v >= 1) return v;
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

namespace {

void check_steps(const NoiseSchedule& s, const SamplerConfig& cfg) {
  if (cfg.steps.empty()) throw std::invalid_argument("sampler: empty step sequence");
  int prev = s.T + 1;
  for (int t : cfg.steps) {
    if (t < 1 || t > s.T) throw std::invalid_argument("sampler: step outside 1..T");
    if (t >= prev) throw std::invalid_argument("sampler: steps must be strictly descending");
    prev = t;
  }
  if (cfg.method == SamplerMethod::ddpm) {
    if (cfg.steps.front() != s.T || cfg.steps.back() != 1 ||
        static_cast<int>(cfg.steps.size()) != s.T)
      throw std::invalid_argument("ddpm sampling needs the full adjacent chain T..1");
  }
  if (cfg.eta < 0.0 || cfg.eta > 1.0) throw std::invalid_argument("sampler: eta outside [0, 1]");
  if (cfg.chains < 1) throw std::invalid_argument("sampler: chains < 1");
}

Tensor normal_tensor(std::size_t n, Rng& rng) {
  Tensor z(std::vector<std::size_t>{n});
  for (std::size_t i = 0; i < n; ++i) z[i] = static_cast<float>(rng.next_normal());
  return z;
}

}  // namespace

SampleResult sample_loop(const DenoiserModel& m, const NoiseSchedule& s,
                         const SamplerConfig& cfg, const GuidanceHook& hook,
                         std::optional<int> label) {
  check_steps(s, cfg);
  if (cfg.cfg_w.has_value() && !label.has_value())
    throw std::invalid_argument("sampler: cfg weight set without a label");
  const std::size_t d = static_cast<std::size_t>(m.dim());
  const int n_steps = static_cast<int>(cfg.steps.size());

  SampleResult result;
  result.samples = Tensor(std::vector<std::size_t>{static_cast<std::size_t>(cfg.chains), d});
  if (cfg.record_trace) result.traces.resize(cfg.chains);

  auto run_chain = [&](int c) {
    Rng init = Rng::for_chain_step(cfg.seed, static_cast<std::uint32_t>(c), 0);
    Tensor x = normal_tensor(d, init);
    for (int i = 0; i < n_steps; ++i) {
      const int t = cfg.steps[i];
      Tensor eps;
      if (cfg.cfg_w.has_value()) {
        Tensor eps_u = m.predict_epsilon(x, t, std::nullopt);
        Tensor eps_c = m.predict_epsilon(x, t, label);
        eps = cfg_epsilon(eps_u, eps_c, *cfg.cfg_w);
      } else {
        eps = m.predict_epsilon(x, t, label);
      }
      if (hook) {
        eps = hook(x, t, eps);
        if (!eps.same_shape(x)) throw std::runtime_error("guidance hook changed shape");
      }
      if (cfg.record_trace) {
        TraceEntry e;
        e.t = t;
        e.x_t = x;
        e.x0_hat = estimate_x0(s, x, t, eps, cfg.clamp_x0);
        result.traces[c].entries.push_back(std::move(e));
      }
      if (cfg.method == SamplerMethod::ddpm) {
        const double sigma = ddpm_sigma(s, t, cfg.sigma_variant);
        Tensor z;
        if (t > 1) {
          Rng rng = Rng::for_chain_step(cfg.seed, static_cast<std::uint32_t>(c),
                                        static_cast<std::uint32_t>(t));
          z = normal_tensor(d, rng);
        } else {
          z = Tensor::zeros({d});
        }
        x = ddpm_step(s, x, t, eps, sigma, z);
      } else {
        const int t_to = i + 1 < n_steps ? cfg.steps[i + 1] : 0;
        Tensor z;
        if (cfg.eta > 0.0) {
          Rng rng = Rng::for_chain_step(cfg.seed, static_cast<std::uint32_t>(c),
                                        static_cast<std::uint32_t>(t));
          z = normal_tensor(d, rng);
        } else {
          z = Tensor::zeros({d});
        }
        auto [next, x0] = ddim_step(s, x, t, t_to, eps, cfg.eta, z, cfg.clamp_x0);
        x = std::move(next);
      }
      if (!x.all_finite())
        throw std::runtime_error("sampler: non-finite state in chain " + std::to_string(c) +
                                 " at t=" + std::to_string(t));
    }
    std::copy(x.values().begin(), x.values().end(),
              result.samples.data() + static_cast<std::size_t>(c) * d);
  };

  const int workers = std::min(thread_cap(), cfg.chains);
  if (workers <= 1) {
    for (int c = 0; c < cfg.chains; ++c) run_chain(c);
  } else {
    std::vector<std::thread> pool;
    std::exception_ptr first_error;
    std::mutex error_mu;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (int c = w; c < cfg.chains; c += workers) run_chain(c);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!first_error) first_error = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
  }
  return result;
}

}  // namespace dg
