#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "dg/data.hpp"
#include "dg/guidance.hpp"
#include "dg/mlp.hpp"
#include "dg/samplers.hpp"

namespace dg {

struct FinetuneConfig {
  int steps = 0;
  int batch = 64;
  double lr = 1e-4;
  std::uint64_t seed = 0;
  double label_dropout = 0.1;  // probability of training with the null token
};

/// Clones the unconditional model, attaches a fresh label-embedding table
/// (null row zero, so the null token reproduces the original bit-exactly
/// before any step), and continues denoising training with labels.
/// Per-step batch losses land in `losses` when given.
MlpDenoiser finetune_conditional(const MlpDenoiser& uncond, const Dataset& labeled,
                                 int num_classes, const FinetuneConfig& cfg,
                                 std::vector<double>* losses = nullptr);

/// Classifier over denoiser features extracted at two distinct timesteps
/// and concatenated; scores candidate samples for the augmentation filter.
GuidanceClassifier train_rejection_classifier(const DenoiserModel& m, const NoiseSchedule& s,
                                              const std::vector<Tensor>& xs,
                                              const std::vector<int>& labels, int num_classes,
                                              std::pair<int, int> t_pair, int steps,
                                              std::uint64_t seed);

struct AugmentPlan {
  std::vector<int> per_class;  // target accepted count for each class
  double cfg_w = 0.01;
  double threshold = 0.2;
  int attempt_factor = 20;  // attempt budget = factor * target, per class
  std::uint64_t seed = 0;
};

struct ClassGenReport {
  int class_id = 0;
  int target = 0;
  long accepted = 0;
  long attempted = 0;
  double acceptance_rate = 0.0;
};

struct AugmentResult {
  Dataset synthetic;
  std::vector<ClassGenReport> report;  // classes with target > 0, in order
  bool shortfall = false;              // some class missed its target
};

/// Per class: sample with the classifier-free combination at plan.cfg_w,
/// score each candidate as p(class | x) under the rejection classifier,
/// and keep scores >= threshold until the target is met or the attempt
/// budget runs out. Candidates are consumed in (class, batch, chain)
/// order, so the result is deterministic; accepted + rejected = attempted
/// exactly. Features for scoring come from feature_model when given
/// (otherwise the conditional model's null-token branch).
AugmentResult augment_dataset(const MlpDenoiser& cond, const GuidanceClassifier& rej,
                              const SamplerConfig& base, const AugmentPlan& plan,
                              const DenoiserModel* feature_model = nullptr);

}  // namespace dg
