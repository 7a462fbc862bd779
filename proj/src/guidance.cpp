#include "dg/guidance.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace dg {
namespace {

void check_target(const GuidanceClassifier& clf, const Target& target) {
  if (target.is_mask()) {
    if (clf.cells < 2) throw std::invalid_argument("mask target for a single-label classifier");
    if (static_cast<int>(target.cell_classes.size()) != clf.cells)
      throw std::invalid_argument("mask target length does not match classifier cells");
    for (int c : target.cell_classes)
      if (c < 0 || c >= clf.num_classes)
        throw std::invalid_argument("mask target class out of range");
  } else {
    if (clf.cells != 1) throw std::invalid_argument("class target for a per-cell classifier");
    if (target.class_id < 0 || target.class_id >= clf.num_classes)
      throw std::invalid_argument("target class out of range");
  }
}

std::vector<double> log_softmax_vec(std::vector<double> v, int group) {
  for (std::size_t g0 = 0; g0 < v.size(); g0 += group) {
    double m = *std::max_element(v.begin() + g0, v.begin() + g0 + group);
    double z = 0.0;
    for (int i = 0; i < group; ++i) z += std::exp(v[g0 + i] - m);
    double lz = m + std::log(z);
    for (int i = 0; i < group; ++i) v[g0 + i] -= lz;
  }
  return v;
}

}  // namespace

std::string to_string(GuidanceInput input) {
  return input == GuidanceInput::feature_bundle ? "feature_bundle" : "raw_x0";
}

GuidanceInput guidance_input_from_string(const std::string& s) {
  if (s == "feature_bundle") return GuidanceInput::feature_bundle;
  if (s == "raw_x0") return GuidanceInput::raw_x0;
  throw std::invalid_argument("unknown guidance input mode: " + s);
}

int default_t_feat(const NoiseSchedule& s) {
  return std::max(1, static_cast<int>(std::lround(0.7 * s.T)));
}

std::vector<double> GuidanceClassifier::features(const DenoiserModel& m, const NoiseSchedule& s,
                                                 const Tensor& x0, NoisingMode mode,
                                                 Rng* rng) const {
  if (input == GuidanceInput::raw_x0) return x0.as_doubles();
  std::vector<double> feat;
  for (int tf : t_feats) {
    FeatureBundle b = extract_features(m, s, x0, tf, taps, mode, rng);
    auto part = b.concatenated();
    feat.insert(feat.end(), part.begin(), part.end());
  }
  return feat;
}

std::vector<double> GuidanceClassifier::log_probs(const DenoiserModel& m, const NoiseSchedule& s,
                                                  const Tensor& x0, NoisingMode mode,
                                                  Rng* rng) const {
  std::vector<double> feat = features(m, s, x0, mode, rng);
  std::vector<double> logits = head.forward(feat);
  return log_softmax_vec(std::move(logits), num_classes);
}

GuidanceClassifier train_guidance_classifier(const DenoiserModel& m, const NoiseSchedule& s,
                                             const std::vector<Tensor>& xs,
                                             const std::vector<int>& labels,
                                             const std::vector<std::vector<int>>& masks,
                                             const FewShotSpec& spec) {
  if (xs.empty()) throw std::invalid_argument("few-shot training: no examples");
  if (spec.num_classes < 2) throw std::invalid_argument("few-shot training: num_classes < 2");
  if (spec.steps < 0) throw std::invalid_argument("few-shot training: negative steps");
  if (!(spec.lr > 0.0)) throw std::invalid_argument("few-shot training: lr must be positive");
  const bool per_cell = spec.cells > 1;
  if (per_cell) {
    if (masks.size() != xs.size())
      throw std::invalid_argument("few-shot training: mask count mismatch");
    for (const auto& mk : masks) {
      if (static_cast<int>(mk.size()) != spec.cells)
        throw std::invalid_argument("few-shot training: mask length mismatch");
      for (int c : mk)
        if (c < 0 || c >= spec.num_classes)
          throw std::invalid_argument("few-shot training: mask class out of range");
    }
  } else {
    if (labels.size() != xs.size())
      throw std::invalid_argument("few-shot training: label count mismatch");
    std::vector<bool> seen(spec.num_classes, false);
    for (int y : labels) {
      if (y < 0 || y >= spec.num_classes)
        throw std::invalid_argument("few-shot training: label out of range");
      seen[y] = true;
    }
    for (int k = 0; k < spec.num_classes; ++k)
      if (!seen[k])
        throw std::invalid_argument("few-shot training: class " + std::to_string(k) +
                                    " has no examples");
  }
  if (spec.input == GuidanceInput::feature_bundle && spec.t_feats.empty())
    throw std::invalid_argument("few-shot training: no feature timesteps");

  GuidanceClassifier clf;
  clf.input = spec.input;
  clf.t_feats = spec.t_feats;
  clf.taps = spec.taps;
  clf.train_noising = NoisingMode::fresh;
  clf.num_classes = spec.num_classes;
  clf.cells = spec.cells;

  Rng rng(spec.seed);
  const int in_dim =
      static_cast<int>(clf.features(m, s, xs[0], NoisingMode::deterministic_zero, nullptr).size());
  std::vector<int> widths;
  widths.push_back(in_dim);
  widths.insert(widths.end(), spec.head_hidden.begin(), spec.head_hidden.end());
  widths.push_back(spec.cells * spec.num_classes);
  clf.head = DenseStack(widths, rng);

  const int C = spec.num_classes;
  StackGrads grads = clf.head.zero_grads();
  StackTrace trace;
  const int n = static_cast<int>(xs.size());
  const int batch = spec.batch > 0 ? std::min(spec.batch, n) : n;

  for (int step = 0; step < spec.steps; ++step) {
    grads.clear();
    double loss = 0.0;
    for (int b = 0; b < batch; ++b) {
      // full-batch mode walks the examples in order; minibatch mode samples
      const int idx = spec.batch > 0 ? static_cast<int>(rng.next_index(n)) : b;
      std::vector<double> feat = clf.features(m, s, xs[idx], NoisingMode::fresh, &rng);
      std::vector<double> logits = clf.head.forward(feat, &trace);
      std::vector<double> lp = log_softmax_vec(logits, C);
      std::vector<double> dlogits(lp.size());
      if (per_cell) {
        const auto& mk = masks[idx];
        for (int cell = 0; cell < spec.cells; ++cell) {
          loss -= lp[cell * C + mk[cell]] / spec.cells / batch;
          for (int k = 0; k < C; ++k) {
            double p = std::exp(lp[cell * C + k]);
            double onehot = k == mk[cell] ? 1.0 : 0.0;
            dlogits[cell * C + k] = (p - onehot) / spec.cells / batch;
          }
        }
      } else {
        const int y = labels[idx];
        loss -= lp[y] / batch;
        for (int k = 0; k < C; ++k)
          dlogits[k] = (std::exp(lp[k]) - (k == y ? 1.0 : 0.0)) / batch;
      }
      clf.head.backward(trace, dlogits, grads);
    }
    if (!std::isfinite(loss))
      throw std::runtime_error("few-shot training: loss diverged at step " +
                               std::to_string(step));
    clf.head.sgd_step(grads, spec.lr);
  }
  return clf;
}

GuidanceClassifier train_few_shot(const DenoiserModel& m, const NoiseSchedule& s,
                                  const std::vector<Tensor>& xs, const std::vector<int>& labels,
                                  int num_classes, const GuidanceConfig& gcfg, int steps,
                                  std::uint64_t seed, double lr) {
  FewShotSpec spec;
  spec.input = gcfg.input;
  spec.t_feats = {gcfg.t_feat >= 0 ? gcfg.t_feat : default_t_feat(s)};
  spec.taps = gcfg.taps;
  spec.num_classes = num_classes;
  spec.steps = steps;
  spec.lr = lr;
  spec.seed = seed;
  return train_guidance_classifier(m, s, xs, labels, {}, spec);
}

GuidanceClassifier train_few_shot(const DenoiserModel& m, const NoiseSchedule& s,
                                  const std::vector<Tensor>& xs,
                                  const std::vector<std::vector<int>>& masks, int num_classes,
                                  const GuidanceConfig& gcfg, int steps, std::uint64_t seed,
                                  double lr) {
  if (masks.empty()) throw std::invalid_argument("few-shot training: no examples");
  FewShotSpec spec;
  spec.input = gcfg.input;
  spec.t_feats = {gcfg.t_feat >= 0 ? gcfg.t_feat : default_t_feat(s)};
  spec.taps = gcfg.taps;
  spec.num_classes = num_classes;
  spec.cells = static_cast<int>(masks[0].size());
  spec.head_hidden = {128};
  spec.steps = steps;
  spec.lr = lr;
  spec.seed = seed;
  return train_guidance_classifier(m, s, xs, {}, masks, spec);
}

double classifier_accuracy(const DenoiserModel& m, const NoiseSchedule& s,
                           const GuidanceClassifier& clf, const std::vector<Tensor>& xs,
                           const std::vector<int>& labels,
                           const std::vector<std::vector<int>>& masks) {
  if (xs.empty()) throw std::invalid_argument("classifier_accuracy: no examples");
  const int C = clf.num_classes;
  double correct = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    std::vector<double> lp = clf.log_probs(m, s, xs[i]);
    if (clf.cells == 1) {
      int pred = static_cast<int>(std::max_element(lp.begin(), lp.end()) - lp.begin());
      correct += pred == labels[i] ? 1.0 : 0.0;
    } else {
      double cell_hits = 0.0;
      for (int cell = 0; cell < clf.cells; ++cell) {
        auto begin = lp.begin() + static_cast<std::ptrdiff_t>(cell) * C;
        int pred = static_cast<int>(std::max_element(begin, begin + C) - begin);
        cell_hits += pred == masks[i][cell] ? 1.0 : 0.0;
      }
      correct += cell_hits / clf.cells;
    }
  }
  return correct / static_cast<double>(xs.size());
}

GuidanceEval guidance_eval(const DenoiserModel& m, const GuidanceClassifier& clf,
                           const NoiseSchedule& s, const Tensor& x_t, int t,
                           const Target& target) {
  s.check_step(t);
  check_target(clf, target);
  if (static_cast<int>(x_t.size()) != m.dim())
    throw std::invalid_argument("guidance_eval: input width mismatch");
  if (!m.supports_input_gradient())
    throw std::invalid_argument("guidance_eval: model does not support input gradients");

  Tape tape;
  Tape::Node x = tape.leaf(x_t.as_doubles());
  Tape::Node eps = m.epsilon_on_tape(tape, x, t, std::nullopt, {}, nullptr);
  const double abar = s.alpha_bar(t);
  const double inv = 1.0 / std::sqrt(abar);
  Tape::Node x0 = tape.axpby(inv, x, -std::sqrt(1.0 - abar) * inv, eps);

  Tape::Node feat;
  if (clf.input == GuidanceInput::raw_x0) {
    feat = x0;
  } else {
    std::vector<Tape::Node> parts;
    for (int tf : clf.t_feats) {
      // deterministic zero-noise embedding: x_tf = sqrt(abar_tf) x0
      Tape::Node xf = tape.scale_shift(std::sqrt(s.alpha_bar(tf)), x0, {});
      std::vector<std::pair<int, Tape::Node>> tap_nodes;
      m.epsilon_on_tape(tape, xf, tf, std::nullopt, clf.taps, &tap_nodes);
      for (auto& [id, node] : tap_nodes) parts.push_back(node);
    }
    feat = parts.size() == 1 ? parts[0] : tape.concat(parts);
  }

  Tape::Node logits = clf.head.on_tape(tape, feat);
  Tape::Node lp = tape.log_softmax_groups(logits, clf.num_classes);
  Tape::Node scalar;
  if (target.is_mask()) {
    std::vector<std::size_t> idx(clf.cells);
    for (int cell = 0; cell < clf.cells; ++cell)
      idx[cell] = static_cast<std::size_t>(cell) * clf.num_classes + target.cell_classes[cell];
    scalar = tape.mean(tape.gather(lp, std::move(idx)));
  } else {
    scalar = tape.gather(lp, {static_cast<std::size_t>(target.class_id)});
  }
  tape.backward(scalar);

  GuidanceEval out;
  out.grad = Tensor::from_doubles(x_t.shape(), tape.grad(x));
  out.grad.ensure_finite("guidance gradient");
  out.log_prob = tape.value(scalar)[0];
  return out;
}

Tensor guidance_gradient(const DenoiserModel& m, const GuidanceClassifier& clf,
                         const NoiseSchedule& s, const Tensor& x_t, int t, const Target& target) {
  return guidance_eval(m, clf, s, x_t, t, target).grad;
}

Tensor apply_guidance(const Tensor& eps, const Tensor& grad, const NoiseSchedule& s, int t,
                      double lambda) {
  if (!eps.same_shape(grad)) throw std::invalid_argument("apply_guidance: shape mismatch");
  s.check_step(t);
  if (lambda < 0.0) throw std::invalid_argument("apply_guidance: lambda must be >= 0");
  const double scale = lambda * std::sqrt(1.0 - s.alpha_bar(t));
  Tensor out(eps.shape());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<float>(static_cast<double>(eps[i]) - scale * grad[i]);
  return out;
}

Tensor analytic_posterior_gradient(const GmmSpec& gmm, const NoiseSchedule& s, const Tensor& x_t,
                                   int t, int k) {
  if (k < 0 || k >= gmm.components())
    throw std::invalid_argument("analytic_posterior_gradient: component out of range");
  GmmSpec marg = gmm_marginal(gmm, s, t);
  std::vector<double> x = x_t.as_doubles();
  std::vector<double> mix = gmm_score_at(marg, x);
  Tensor out(x_t.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double comp = (marg.means[k][i] - x[i]) / marg.vars[k][i];
    out[i] = static_cast<float>(comp - mix[i]);
  }
  out.ensure_finite("analytic posterior gradient");
  return out;
}

double classifier_probability(const DenoiserModel& m, const NoiseSchedule& s,
                              const GuidanceClassifier& clf, const Tensor& x0, int k) {
  if (clf.cells != 1)
    throw std::invalid_argument("classifier_probability: per-cell classifier");
  if (k < 0 || k >= clf.num_classes)
    throw std::invalid_argument("classifier_probability: class out of range");
  return std::exp(clf.log_probs(m, s, x0)[k]);
}

FilterResult rejection_filter(const std::vector<double>& scores, double threshold) {
  FilterResult r;
  r.keep.reserve(scores.size());
  std::size_t kept = 0;
  for (double p : scores) {
    if (p < 0.0 || p > 1.0)
      throw std::invalid_argument("rejection_filter: score outside [0, 1]");
    bool k = p >= threshold;
    kept += k ? 1 : 0;
    r.keep.push_back(k);
  }
  r.acceptance_rate = scores.empty() ? 0.0 : static_cast<double>(kept) / scores.size();
  if (!scores.empty() && kept == 0)
    std::fprintf(stderr, "rejection_filter: no samples pass threshold %g\n", threshold);
  return r;
}

GuidanceHook make_classifier_hook(const DenoiserModel& m, const GuidanceClassifier& clf,
                                  const NoiseSchedule& s, Target target, double lambda) {
  return [&m, &clf, &s, target = std::move(target), lambda](const Tensor& x_t, int t,
                                                            const Tensor& eps) {
    Tensor grad = guidance_eval(m, clf, s, x_t, t, target).grad;
    return apply_guidance(eps, grad, s, t, lambda);
  };
}

GuidanceHook make_analytic_hook(const GmmSpec& gmm, const NoiseSchedule& s, int k,
                                double lambda) {
  return [gmm, &s, k, lambda](const Tensor& x_t, int t, const Tensor& eps) {
    Tensor grad = analytic_posterior_gradient(gmm, s, x_t, t, k);
    return apply_guidance(eps, grad, s, t, lambda);
  };
}

}  // namespace dg
