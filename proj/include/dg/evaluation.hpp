#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dg/data.hpp"
#include "dg/gmm.hpp"
#include "dg/nn.hpp"
#include "dg/tensor.hpp"

namespace dg {

struct MomentSummary {
  std::vector<double> mean;
  std::vector<double> cov;  // row-major dim x dim, unbiased
  int dim = 0;
  long n = 0;
};

/// Gaussian fit of a [n, d...] batch (rows flattened); needs n >= d + 1.
MomentSummary compute_moments(const Tensor& batch);
MomentSummary compute_moments(const std::vector<std::vector<double>>& rows);

/// |mu_a - mu_b|^2 + tr(Sa + Sb - 2 (Sa Sb)^(1/2)), square root via
/// symmetric eigendecomposition; covariances get +1e-6 I before use and
/// negative eigenvalues clip to zero.
double frechet_distance(const MomentSummary& a, const MomentSummary& b);

/// Per class, IoU over every cell in the batch; classes absent from both
/// prediction and truth are excluded from the mean.
double miou(const std::vector<std::vector<int>>& pred, const std::vector<std::vector<int>>& truth,
            int num_classes);

/// Fraction of rows whose posterior-responsibility argmax equals k.
double class_fidelity(const Tensor& samples, const GmmSpec& gmm, int k);

/// Frozen small classifier on raw inputs; its penultimate activations
/// double as the metric feature space for grid data.
struct OracleClassifier {
  DenseStack net;  // [d, 128, 128, C]
  int num_classes = 0;

  std::vector<double> log_probs(const Tensor& x) const;
  int predict(const Tensor& x) const;
  /// Penultimate-layer activations.
  std::vector<double> features(const Tensor& x) const;
};

/// The fixed training recipe shared by every classifier-based metric:
/// 2000 SGD steps, batch 64, lr 1e-3 decayed 10x at 50% and 75%.
struct FixedClassifierRecipe {
  int steps = 2000;
  int batch = 64;
  double lr = 1e-3;
};

OracleClassifier train_oracle_classifier(const Dataset& train, int num_classes,
                                         std::uint64_t seed,
                                         const FixedClassifierRecipe& recipe = {});

double accuracy(const OracleClassifier& clf, const Dataset& ds);

/// Classification Accuracy Score: the fixed recipe trained on `synthetic`
/// only, evaluated as top-1 accuracy on `real_val`.
double cas(const Dataset& synthetic, const Dataset& real_val, int num_classes,
           std::uint64_t seed);

/// Moments of oracle features over a dataset/batch (grid-data metric space).
MomentSummary feature_moments(const OracleClassifier& clf, const std::vector<Tensor>& xs);

/// Two-sample Kolmogorov-Smirnov statistic.
double ks_statistic(std::vector<double> a, std::vector<double> b);

/// Asymptotic critical value c(alpha) sqrt((n+m)/(n m)); alpha = 0.01.
double ks_critical_001(std::size_t n, std::size_t m);

}  // namespace dg
