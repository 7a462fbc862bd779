#include "dg/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace dg {

double silu(double x) {
  double s = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  return x * s;
}

double silu_grad(double x) {
  double s = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  return s * (1.0 + x * (1.0 - s));
}

void StackGrads::clear() {
  for (auto& v : w) std::fill(v.begin(), v.end(), 0.0);
  for (auto& v : b) std::fill(v.begin(), v.end(), 0.0);
}

DenseStack::DenseStack(const std::vector<int>& widths, Rng& rng) {
  if (widths.size() < 2) throw std::invalid_argument("dense stack needs at least two widths");
  layers.reserve(widths.size() - 1);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    DenseLayer lay;
    lay.in = widths[l];
    lay.out = widths[l + 1];
    if (lay.in < 1 || lay.out < 1) throw std::invalid_argument("dense stack: width < 1");
    double bound = std::sqrt(6.0 / (lay.in + lay.out));
    lay.w.resize(static_cast<std::size_t>(lay.in) * lay.out);
    for (auto& v : lay.w)
      v = static_cast<float>((2.0 * rng.next_double() - 1.0) * bound);
    lay.b.assign(lay.out, 0.0f);
    layers.push_back(std::move(lay));
  }
}

std::vector<int> DenseStack::widths() const {
  std::vector<int> w;
  if (layers.empty()) return w;
  w.push_back(layers[0].in);
  for (const auto& l : layers) w.push_back(l.out);
  return w;
}

std::vector<double> DenseStack::forward(std::span<const double> x, StackTrace* trace) const {
  if (static_cast<int>(x.size()) != in_dim())
    throw std::invalid_argument("dense stack: input width mismatch");
  std::vector<double> cur(x.begin(), x.end());
  if (trace) {
    trace->pre.assign(layers.size(), {});
    trace->post.assign(layers.size() + 1, {});
    trace->post[0] = cur;
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& lay = layers[l];
    std::vector<double> pre(lay.out);
    for (int o = 0; o < lay.out; ++o) {
      double acc = lay.b[o];
      const float* row = lay.w.data() + static_cast<std::size_t>(o) * lay.in;
      for (int i = 0; i < lay.in; ++i) acc += static_cast<double>(row[i]) * cur[i];
      pre[o] = acc;
    }
    const bool last = l + 1 == layers.size();
    std::vector<double> post(lay.out);
    for (int o = 0; o < lay.out; ++o) post[o] = last ? pre[o] : silu(pre[o]);
    if (trace) {
      trace->pre[l] = std::move(pre);
      trace->post[l + 1] = post;
    }
    cur = std::move(post);
  }
  return cur;
}

std::vector<double> DenseStack::backward(const StackTrace& trace, std::span<const double> dout,
                                         StackGrads& g) const {
  if (static_cast<int>(dout.size()) != out_dim())
    throw std::invalid_argument("dense stack backward: output width mismatch");
  std::vector<double> dpost(dout.begin(), dout.end());
  for (int l = static_cast<int>(layers.size()) - 1; l >= 0; --l) {
    const auto& lay = layers[l];
    const bool last = l + 1 == static_cast<int>(layers.size());
    std::vector<double> dpre(lay.out);
    for (int o = 0; o < lay.out; ++o)
      dpre[o] = last ? dpost[o] : dpost[o] * silu_grad(trace.pre[l][o]);
    const auto& in_act = trace.post[l];
    auto& gw = g.w[l];
    for (int o = 0; o < lay.out; ++o) {
      const double d = dpre[o];
      if (d != 0.0) {
        double* grow = gw.data() + static_cast<std::size_t>(o) * lay.in;
        for (int i = 0; i < lay.in; ++i) grow[i] += d * in_act[i];
      }
      g.b[l][o] += d;
    }
    std::vector<double> din(lay.in, 0.0);
    for (int o = 0; o < lay.out; ++o) {
      const double d = dpre[o];
      if (d == 0.0) continue;
      const float* row = lay.w.data() + static_cast<std::size_t>(o) * lay.in;
      for (int i = 0; i < lay.in; ++i) din[i] += static_cast<double>(row[i]) * d;
    }
    dpost = std::move(din);
  }
  return dpost;
}

StackGrads DenseStack::zero_grads() const {
  StackGrads g;
  g.w.reserve(layers.size());
  g.b.reserve(layers.size());
  for (const auto& lay : layers) {
    g.w.emplace_back(lay.w.size(), 0.0);
    g.b.emplace_back(lay.b.size(), 0.0);
  }
  return g;
}

void DenseStack::sgd_step(const StackGrads& g, double lr) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto& lay = layers[l];
    for (std::size_t i = 0; i < lay.w.size(); ++i)
      lay.w[i] = static_cast<float>(static_cast<double>(lay.w[i]) - lr * g.w[l][i]);
    for (std::size_t i = 0; i < lay.b.size(); ++i)
      lay.b[i] = static_cast<float>(static_cast<double>(lay.b[i]) - lr * g.b[l][i]);
  }
}

Tape::Node DenseStack::on_tape(Tape& t, Tape::Node x, std::vector<Tape::Node>* hidden) const {
  Tape::Node cur = x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& lay = layers[l];
    cur = t.affine(cur, lay.out, lay.in, lay.w.data(), lay.b.data());
    if (l + 1 < layers.size()) {
      cur = t.silu(cur);
      if (hidden) hidden->push_back(cur);
    }
  }
  return cur;
}

}  // namespace dg
