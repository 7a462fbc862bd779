#include "dg/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dg {
namespace {

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tape::Node Tape::push(std::vector<double> val, std::function<void(Tape&, int)> back) {
  Rec r;
  r.grad.assign(val.size(), 0.0);
  r.val = std::move(val);
  r.back = std::move(back);
  recs_.push_back(std::move(r));
  return static_cast<Node>(recs_.size()) - 1;
}

Tape::Node Tape::leaf(std::vector<double> v) { return push(std::move(v), nullptr); }

Tape::Node Tape::affine(Node x, int out_dim, int in_dim, const float* w, const float* b) {
  const auto& xv = recs_[x].val;
  if (static_cast<int>(xv.size()) != in_dim)
    throw std::invalid_argument("tape affine: input length mismatch");
  std::vector<double> y(out_dim);
  for (int o = 0; o < out_dim; ++o) {
    double acc = b != nullptr ? static_cast<double>(b[o]) : 0.0;
    const float* row = w + static_cast<std::size_t>(o) * in_dim;
    for (int i = 0; i < in_dim; ++i) acc += static_cast<double>(row[i]) * xv[i];
    y[o] = acc;
  }
  return push(std::move(y), [x, out_dim, in_dim, w](Tape& t, int self) {
    const auto& gy = t.recs_[self].grad;
    auto& gx = t.recs_[x].grad;
    for (int o = 0; o < out_dim; ++o) {
      const double g = gy[o];
      if (g == 0.0) continue;
      const float* row = w + static_cast<std::size_t>(o) * in_dim;
      for (int i = 0; i < in_dim; ++i) gx[i] += static_cast<double>(row[i]) * g;
    }
  });
}

Tape::Node Tape::axpby(double a, Node x, double b, Node y) {
  const auto& xv = recs_[x].val;
  const auto& yv = recs_[y].val;
  if (xv.size() != yv.size()) throw std::invalid_argument("tape axpby: length mismatch");
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * xv[i] + b * yv[i];
  return push(std::move(out), [a, x, b, y](Tape& t, int self) {
    const auto& g = t.recs_[self].grad;
    auto& gx = t.recs_[x].grad;
    auto& gy = t.recs_[y].grad;
    for (std::size_t i = 0; i < g.size(); ++i) {
      gx[i] += a * g[i];
      gy[i] += b * g[i];
    }
  });
}

Tape::Node Tape::scale_shift(double a, Node x, std::vector<double> c) {
  const auto& xv = recs_[x].val;
  if (!c.empty() && c.size() != xv.size())
    throw std::invalid_argument("tape scale_shift: shift length mismatch");
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = a * xv[i] + (c.empty() ? 0.0 : c[i]);
  return push(std::move(out), [a, x](Tape& t, int self) {
    const auto& g = t.recs_[self].grad;
    auto& gx = t.recs_[x].grad;
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += a * g[i];
  });
}

Tape::Node Tape::silu(Node x) {
  const auto& xv = recs_[x].val;
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * stable_sigmoid(xv[i]);
  return push(std::move(out), [x](Tape& t, int self) {
    const auto& g = t.recs_[self].grad;
    const auto& xv = t.recs_[x].val;
    auto& gx = t.recs_[x].grad;
    for (std::size_t i = 0; i < g.size(); ++i) {
      double s = stable_sigmoid(xv[i]);
      gx[i] += g[i] * s * (1.0 + xv[i] * (1.0 - s));
    }
  });
}

Tape::Node Tape::mul(Node x, Node y) {
  const auto& xv = recs_[x].val;
  const auto& yv = recs_[y].val;
  if (xv.size() != yv.size()) throw std::invalid_argument("tape mul: length mismatch");
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * yv[i];
  return push(std::move(out), [x, y](Tape& t, int self) {
    const auto& g = t.recs_[self].grad;
    const auto& xv = t.recs_[x].val;
    const auto& yv = t.recs_[y].val;
    auto& gx = t.recs_[x].grad;
    auto& gy = t.recs_[y].grad;
    for (std::size_t i = 0; i < g.size(); ++i) {
      gx[i] += g[i] * yv[i];
      gy[i] += g[i] * xv[i];
    }
  });
}

Tape::Node Tape::concat(const std::vector<Node>& xs) {
  if (xs.empty()) throw std::invalid_argument("tape concat: no inputs");
  std::vector<double> out;
  for (Node n : xs) {
    const auto& v = recs_[n].val;
    out.insert(out.end(), v.begin(), v.end());
  }
  return push(std::move(out), [xs](Tape& t, int self) {
    const auto& g = t.recs_[self].grad;
    std::size_t off = 0;
    for (Node n : xs) {
      auto& gx = t.recs_[n].grad;
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[off + i];
      off += gx.size();
    }
  });
}

Tape::Node Tape::slice(Node x, std::size_t offset, std::size_t len) {
  const auto& xv = recs_[x].val;
  if (offset + len > xv.size()) throw std::invalid_argument("tape slice: out of range");
  std::vector<double> out(xv.begin() + offset, xv.begin() + offset + len);
  return push(std::move(out), [x, offset](Tape& t, int self) {
    const auto& g = t.recs_[self].grad;
    auto& gx = t.recs_[x].grad;
    for (std::size_t i = 0; i < g.size(); ++i) gx[offset + i] += g[i];
  });
}

Tape::Node Tape::log_softmax(Node x) { return log_softmax_groups(x, static_cast<int>(recs_[x].val.size())); }

Tape::Node Tape::log_softmax_groups(Node x, int group) {
  const auto& xv = recs_[x].val;
  if (group < 1 || xv.size() % group != 0)
    throw std::invalid_argument("tape log_softmax: length not a multiple of group");
  std::vector<double> out(xv.size());
  for (std::size_t g0 = 0; g0 < xv.size(); g0 += group) {
    double m = *std::max_element(xv.begin() + g0, xv.begin() + g0 + group);
    double z = 0.0;
    for (int i = 0; i < group; ++i) z += std::exp(xv[g0 + i] - m);
    double lz = m + std::log(z);
    for (int i = 0; i < group; ++i) out[g0 + i] = xv[g0 + i] - lz;
  }
  return push(std::move(out), [x, group](Tape& t, int self) {
    const auto& g = t.recs_[self].grad;
    const auto& y = t.recs_[self].val;
    auto& gx = t.recs_[x].grad;
    // d/dx_i = g_i - softmax_i * sum(g), per group
    for (std::size_t g0 = 0; g0 < y.size(); g0 += group) {
      double gsum = 0.0;
      for (int i = 0; i < group; ++i) gsum += g[g0 + i];
      for (int i = 0; i < group; ++i) gx[g0 + i] += g[g0 + i] - std::exp(y[g0 + i]) * gsum;
    }
  });
}

Tape::Node Tape::gather(Node x, std::vector<std::size_t> idx) {
  const auto& xv = recs_[x].val;
  std::vector<double> out(idx.size());
  for (std::size_t j = 0; j < idx.size(); ++j) {
    if (idx[j] >= xv.size()) throw std::invalid_argument("tape gather: index out of range");
    out[j] = xv[idx[j]];
  }
  return push(std::move(out), [x, idx = std::move(idx)](Tape& t, int self) {
    const auto& g = t.recs_[self].grad;
    auto& gx = t.recs_[x].grad;
    for (std::size_t j = 0; j < idx.size(); ++j) gx[idx[j]] += g[j];
  });
}

Tape::Node Tape::sum(Node x) {
  const auto& xv = recs_[x].val;
  double s = 0.0;
  for (double v : xv) s += v;
  return push({s}, [x](Tape& t, int self) {
    const double g = t.recs_[self].grad[0];
    auto& gx = t.recs_[x].grad;
    for (double& v : gx) v += g;
  });
}

Tape::Node Tape::mean(Node x) {
  const auto& xv = recs_[x].val;
  if (xv.empty()) throw std::invalid_argument("tape mean: empty input");
  double s = 0.0;
  for (double v : xv) s += v;
  const double inv = 1.0 / static_cast<double>(xv.size());
  return push({s * inv}, [x, inv](Tape& t, int self) {
    const double g = t.recs_[self].grad[0] * inv;
    auto& gx = t.recs_[x].grad;
    for (double& v : gx) v += g;
  });
}

void Tape::backward(Node scalar) {
  if (recs_[scalar].val.size() != 1)
    throw std::invalid_argument("tape backward: node is not scalar");
  for (auto& r : recs_) std::fill(r.grad.begin(), r.grad.end(), 0.0);
  recs_[scalar].grad[0] = 1.0;
  for (int i = scalar; i >= 0; --i)
    if (recs_[i].back) recs_[i].back(*this, i);
}

}  // namespace dg
