#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dg/denoiser.hpp"
#include "dg/gmm.hpp"
#include "dg/nn.hpp"
#include "dg/samplers.hpp"
#include "dg/schedule.hpp"
#include "dg/tensor.hpp"

namespace dg {

enum class GuidanceInput { feature_bundle, raw_x0 };

std::string to_string(GuidanceInput input);
GuidanceInput guidance_input_from_string(const std::string& s);

/// Conditioning target: one class id, or one class per grid cell.
struct Target {
  static Target cls(int k) {
    Target t;
    t.class_id = k;
    return t;
  }
  static Target mask(std::vector<int> cells) {
    Target t;
    t.cell_classes = std::move(cells);
    return t;
  }
  bool is_mask() const { return !cell_classes.empty(); }

  int class_id = -1;
  std::vector<int> cell_classes;
};

struct GuidanceConfig {
  double lambda = 1.0;
  int t_feat = -1;  // -1 resolves to the default 0.7 T
  std::vector<int> taps = {1, 2};
  NoisingMode train_noising = NoisingMode::fresh;
  GuidanceInput input = GuidanceInput::feature_bundle;
  Target target;
};

/// Feature timestep used when none is configured: round(0.7 T).
int default_t_feat(const NoiseSchedule& s);

/// Classifier head over denoiser features of a clean-domain input (or the
/// raw input itself). cells > 1 groups the output into per-cell
/// log-softmax blocks of num_classes entries each.
struct GuidanceClassifier {
  GuidanceInput input = GuidanceInput::feature_bundle;
  std::vector<int> t_feats;  // feature timesteps, concatenated in order
  std::vector<int> taps;
  NoisingMode train_noising = NoisingMode::fresh;
  int num_classes = 0;
  int cells = 1;
  DenseStack head;

  /// Log-probabilities for clean input x0: length num_classes, or
  /// cells*num_classes laid out cell-major. Features use deterministic
  /// zero-noise embedding unless another mode (and rng) is given.
  std::vector<double> log_probs(const DenoiserModel& m, const NoiseSchedule& s, const Tensor& x0,
                                NoisingMode mode = NoisingMode::deterministic_zero,
                                Rng* rng = nullptr) const;

  /// The feature vector the head consumes, per this classifier's config.
  std::vector<double> features(const DenoiserModel& m, const NoiseSchedule& s, const Tensor& x0,
                               NoisingMode mode, Rng* rng) const;
};

/// Shared few-shot trainer config. batch = 0 trains full-batch.
struct FewShotSpec {
  GuidanceInput input = GuidanceInput::feature_bundle;
  std::vector<int> t_feats;
  std::vector<int> taps = {1, 2};
  int num_classes = 0;
  int cells = 1;
  std::vector<int> head_hidden = {64};
  int steps = 100;
  int batch = 0;
  double lr = 0.1;
  std::uint64_t seed = 0;
};

/// Cross-entropy training on clean examples with fresh-noise feature
/// augmentation each visit. Exactly one of labels/masks applies: class
/// targets when spec.cells == 1, per-cell targets otherwise.
GuidanceClassifier train_guidance_classifier(const DenoiserModel& m, const NoiseSchedule& s,
                                             const std::vector<Tensor>& xs,
                                             const std::vector<int>& labels,
                                             const std::vector<std::vector<int>>& masks,
                                             const FewShotSpec& spec);

/// Few-shot class-target trainer per the experiment recipes.
GuidanceClassifier train_few_shot(const DenoiserModel& m, const NoiseSchedule& s,
                                  const std::vector<Tensor>& xs, const std::vector<int>& labels,
                                  int num_classes, const GuidanceConfig& gcfg, int steps,
                                  std::uint64_t seed, double lr = 0.1);

/// Few-shot per-cell trainer (one label per grid cell).
GuidanceClassifier train_few_shot(const DenoiserModel& m, const NoiseSchedule& s,
                                  const std::vector<Tensor>& xs,
                                  const std::vector<std::vector<int>>& masks, int num_classes,
                                  const GuidanceConfig& gcfg, int steps, std::uint64_t seed,
                                  double lr = 0.1);

/// Mean training-set accuracy (per-cell accuracy in mask mode), using
/// deterministic zero-noise features.
double classifier_accuracy(const DenoiserModel& m, const NoiseSchedule& s,
                           const GuidanceClassifier& clf, const std::vector<Tensor>& xs,
                           const std::vector<int>& labels,
                           const std::vector<std::vector<int>>& masks);

struct GuidanceEval {
  Tensor grad;      // d log p(target | ...) / d x_t
  double log_prob;  // scalar the gradient differentiates
};

/// Gradient of the target's log-probability through the x0 estimate, the
/// deterministic feature embedding, and the classifier head — exact
/// reverse-mode, differentiated through the model's epsilon.
GuidanceEval guidance_eval(const DenoiserModel& m, const GuidanceClassifier& clf,
                           const NoiseSchedule& s, const Tensor& x_t, int t,
                           const Target& target);

Tensor guidance_gradient(const DenoiserModel& m, const GuidanceClassifier& clf,
                         const NoiseSchedule& s, const Tensor& x_t, int t, const Target& target);

/// eps_hat = eps - lambda sqrt(1 - abar_t) grad.
Tensor apply_guidance(const Tensor& eps, const Tensor& grad, const NoiseSchedule& s, int t,
                      double lambda);

/// Exact grad log p(component = k | x_t) for a mixture: component score
/// minus mixture score at the time-t marginal.
Tensor analytic_posterior_gradient(const GmmSpec& gmm, const NoiseSchedule& s, const Tensor& x_t,
                                   int t, int k);

/// p(class k | x0) under the classifier; clean-input scoring for rejection.
double classifier_probability(const DenoiserModel& m, const NoiseSchedule& s,
                              const GuidanceClassifier& clf, const Tensor& x0, int k);

struct FilterResult {
  std::vector<bool> keep;
  double acceptance_rate = 0.0;
};

/// keep[i] = scores[i] >= threshold. Scores must lie in [0, 1]; a run that
/// accepts nothing emits a warning on stderr.
FilterResult rejection_filter(const std::vector<double>& scores, double threshold);

/// Sampling hook: classifier guidance at weight lambda. The model,
/// classifier, and schedule must outlive the hook.
GuidanceHook make_classifier_hook(const DenoiserModel& m, const GuidanceClassifier& clf,
                                  const NoiseSchedule& s, Target target, double lambda);

/// Sampling hook using the exact mixture posterior gradient.
GuidanceHook make_analytic_hook(const GmmSpec& gmm, const NoiseSchedule& s, int k, double lambda);

}  // namespace dg
