#include "dg/mlp.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dg {

MlpDenoiser::MlpDenoiser(int data_dim, NoiseSchedule schedule, std::uint64_t init_seed,
                         std::vector<int> hidden)
    : data_dim_(data_dim), init_seed_(init_seed), schedule_(std::move(schedule)) {
  if (data_dim < 1) throw std::invalid_argument("denoiser: data_dim < 1");
  if (hidden.empty()) throw std::invalid_argument("denoiser: no hidden layers");
  std::vector<int> widths;
  widths.push_back(data_dim + kTimeDim);
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(data_dim);
  Rng rng(init_seed);
  stack = DenseStack(widths, rng);
}

void MlpDenoiser::check_t(int t) const {
  if (t < 0 || t > schedule_.T)
    throw std::invalid_argument("denoiser: t outside [0, T]");
}

void MlpDenoiser::check_label(std::optional<int> label) const {
  if (!label.has_value()) return;
  if (num_classes_ == 0) throw std::invalid_argument("denoiser has no label table");
  if (*label < 0 || *label >= num_classes_)
    throw std::invalid_argument("label id out of range");
}

std::vector<double> MlpDenoiser::time_embedding(int t) const {
  std::vector<double> emb(kTimeDim);
  const double u = static_cast<double>(t) / schedule_.T;
  const int half = kTimeDim / 2;
  for (int i = 0; i < half; ++i) {
    double freq = std::pow(10000.0, static_cast<double>(i) / (half - 1));
    emb[i] = std::sin(u * freq);
    emb[half + i] = std::cos(u * freq);
  }
  return emb;
}

std::vector<double> MlpDenoiser::conditioning_vector(int t, std::optional<int> label) const {
  check_t(t);
  check_label(label);
  std::vector<double> cond = time_embedding(t);
  if (num_classes_ > 0) {
    int row = label.value_or(num_classes_);  // trailing row is the null token
    const float* emb = label_table.data() + static_cast<std::size_t>(row) * kTimeDim;
    for (int i = 0; i < kTimeDim; ++i) cond[i] += static_cast<double>(emb[i]);
  }
  return cond;
}

Tensor MlpDenoiser::predict_epsilon(const Tensor& x_t, int t, std::optional<int> label) const {
  if (static_cast<int>(x_t.size()) != data_dim_)
    throw std::invalid_argument("denoiser: input width mismatch");
  x_t.ensure_finite("denoiser input");
  std::vector<double> in = x_t.as_doubles();
  std::vector<double> cond = conditioning_vector(t, label);
  in.insert(in.end(), cond.begin(), cond.end());
  std::vector<double> out = stack.forward(in);
  Tensor eps = Tensor::from_doubles(x_t.shape(), out);
  eps.ensure_finite("predicted epsilon");
  return eps;
}

FeatureBundle MlpDenoiser::tap_activations(const Tensor& x_t, int t,
                                           const std::vector<int>& taps) const {
  if (static_cast<int>(x_t.size()) != data_dim_)
    throw std::invalid_argument("denoiser: input width mismatch");
  check_t(t);
  for (int id : taps)
    if (id < 0 || id >= stack.hidden_count())
      throw std::invalid_argument("tap id " + std::to_string(id) + " out of range");
  std::vector<double> in = x_t.as_doubles();
  std::vector<double> cond = conditioning_vector(t, std::nullopt);
  in.insert(in.end(), cond.begin(), cond.end());
  StackTrace trace;
  stack.forward(in, &trace);
  FeatureBundle bundle;
  bundle.t_feat = t;
  for (int id : taps) bundle.taps.emplace_back(id, trace.post[id + 1]);
  return bundle;
}

Tape::Node MlpDenoiser::epsilon_on_tape(Tape& t, Tape::Node x, int step,
                                        std::optional<int> label, const std::vector<int>& taps,
                                        std::vector<std::pair<int, Tape::Node>>* tap_nodes) const {
  for (int id : taps)
    if (id < 0 || id >= stack.hidden_count())
      throw std::invalid_argument("tap id " + std::to_string(id) + " out of range");
  Tape::Node cond = t.leaf(conditioning_vector(step, label));
  Tape::Node in = t.concat({x, cond});
  std::vector<Tape::Node> hidden;
  Tape::Node out = stack.on_tape(t, in, &hidden);
  if (tap_nodes)
    for (int id : taps) tap_nodes->emplace_back(id, hidden[id]);
  return out;
}

void MlpDenoiser::attach_label_table(int num_classes, std::uint64_t seed) {
  if (num_classes_ > 0) throw std::logic_error("label table already attached");
  if (num_classes < 1) throw std::invalid_argument("attach_label_table: num_classes < 1");
  num_classes_ = num_classes;
  label_table.assign(static_cast<std::size_t>(num_classes + 1) * kTimeDim, 0.0f);
  Rng rng(seed);
  double bound = std::sqrt(6.0 / (num_classes + kTimeDim));
  for (int r = 0; r < num_classes; ++r)  // null row stays zero
    for (int i = 0; i < kTimeDim; ++i)
      label_table[static_cast<std::size_t>(r) * kTimeDim + i] =
          static_cast<float>((2.0 * rng.next_double() - 1.0) * bound);
}

std::vector<double> train_denoiser(MlpDenoiser& m, const std::vector<Tensor>& data,
                                   const std::vector<int>* labels, double label_dropout,
                                   const TrainConfig& cfg) {
  if (data.empty()) throw std::invalid_argument("train_denoiser: empty dataset");
  if (cfg.steps < 0) throw std::invalid_argument("train_denoiser: negative steps");
  if (cfg.batch < 1) throw std::invalid_argument("train_denoiser: batch < 1");
  if (!(cfg.lr > 0.0)) throw std::invalid_argument("train_denoiser: lr must be positive");
  if (labels && labels->size() != data.size())
    throw std::invalid_argument("train_denoiser: label count mismatch");
  if (labels && !m.has_label_table())
    throw std::invalid_argument("train_denoiser: labels given but no label table");
  const int d = m.dim();
  for (const auto& x : data)
    if (static_cast<int>(x.size()) != d)
      throw std::invalid_argument("train_denoiser: record width mismatch");

  const NoiseSchedule& s = m.schedule();
  Rng rng(cfg.seed);
  StackGrads grads = m.stack.zero_grads();
  std::vector<double> label_grad(m.num_classes() > 0 ? MlpDenoiser::kTimeDim : 0);
  std::vector<double> curve;
  curve.reserve(cfg.steps);

  std::vector<double> in(d + MlpDenoiser::kTimeDim);
  std::vector<double> eps(d), dout(d);
  StackTrace trace;

  for (int step = 0; step < cfg.steps; ++step) {
    grads.clear();
    std::vector<std::pair<int, std::vector<double>>> label_updates;  // row -> grad
    double batch_loss = 0.0;
    for (int b = 0; b < cfg.batch; ++b) {
      const std::size_t idx = rng.next_index(data.size());
      const int t = 1 + static_cast<int>(rng.next_index(s.T));
      for (int i = 0; i < d; ++i) eps[i] = rng.next_normal();

      std::optional<int> label;
      if (labels) {
        label = (*labels)[idx];
        if (label_dropout > 0.0 && rng.next_double() < label_dropout) label = std::nullopt;
      }

      const double sa = std::sqrt(s.alpha_bar(t));
      const double sb = std::sqrt(1.0 - s.alpha_bar(t));
      const Tensor& x0 = data[idx];
      for (int i = 0; i < d; ++i) in[i] = sa * static_cast<double>(x0[i]) + sb * eps[i];
      std::vector<double> cond = m.conditioning_vector(t, label);
      std::copy(cond.begin(), cond.end(), in.begin() + d);

      std::vector<double> pred = m.stack.forward(in, &trace);

      const double wt = cfg.weight == LossWeight::uniform ? 1.0 : 1.0 - s.alpha_bar(t);
      double ex_loss = 0.0;
      for (int i = 0; i < d; ++i) {
        const double r = pred[i] - eps[i];
        ex_loss += r * r;
        dout[i] = wt * 2.0 * r / d / cfg.batch;
      }
      batch_loss += wt * ex_loss / d / cfg.batch;

      std::vector<double> din = m.stack.backward(trace, dout, grads);
      if (m.num_classes() > 0) {
        int row = label.value_or(m.num_classes());
        label_updates.emplace_back(row, std::vector<double>(din.begin() + d, din.end()));
      }
    }
    if (!std::isfinite(batch_loss))
      throw std::runtime_error("train_denoiser: loss diverged at step " + std::to_string(step));
    curve.push_back(batch_loss);
    m.stack.sgd_step(grads, cfg.lr);
    for (const auto& [row, g] : label_updates) {
      float* emb = m.label_table.data() + static_cast<std::size_t>(row) * MlpDenoiser::kTimeDim;
      for (int i = 0; i < MlpDenoiser::kTimeDim; ++i)
        emb[i] = static_cast<float>(static_cast<double>(emb[i]) - cfg.lr * g[i]);
    }
  }
  return curve;
}

}  // namespace dg
