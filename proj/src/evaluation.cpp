#include "dg/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "dg/rng.hpp"

namespace dg {
namespace {

constexpr double kCovJitter = 1e-6;

Eigen::MatrixXd to_matrix(const MomentSummary& m) {
  Eigen::MatrixXd out(m.dim, m.dim);
  for (int r = 0; r < m.dim; ++r)
    for (int c = 0; c < m.dim; ++c) out(r, c) = m.cov[static_cast<std::size_t>(r) * m.dim + c];
  out.diagonal().array() += kCovJitter;
  return out;
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("frechet_distance: eigendecomposition failed");
  Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

MomentSummary compute_moments(const Tensor& batch) {
  if (batch.rank() < 2) throw std::invalid_argument("compute_moments: need a stacked batch");
  const std::size_t n = batch.shape()[0];
  std::size_t d = 1;
  for (std::size_t i = 1; i < batch.rank(); ++i) d *= batch.shape()[i];
  std::vector<std::vector<double>> rows(n, std::vector<double>(d));
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) rows[r][c] = batch[r * d + c];
  return compute_moments(rows);
}

MomentSummary compute_moments(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw std::invalid_argument("compute_moments: empty batch");
  const std::size_t d = rows[0].size();
  if (rows.size() < d + 1)
    throw std::invalid_argument("compute_moments: needs at least dim + 1 samples");
  MomentSummary m;
  m.dim = static_cast<int>(d);
  m.n = static_cast<long>(rows.size());
  m.mean.assign(d, 0.0);
  for (const auto& r : rows) {
    if (r.size() != d) throw std::invalid_argument("compute_moments: ragged rows");
    for (std::size_t i = 0; i < d; ++i) m.mean[i] += r[i];
  }
  for (double& v : m.mean) v /= static_cast<double>(rows.size());
  m.cov.assign(d * d, 0.0);
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < d; ++i) {
      const double di = r[i] - m.mean[i];
      for (std::size_t j = i; j < d; ++j) m.cov[i * d + j] += di * (r[j] - m.mean[j]);
    }
  }
  const double norm = 1.0 / static_cast<double>(rows.size() - 1);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) {
      m.cov[i * d + j] *= norm;
      m.cov[j * d + i] = m.cov[i * d + j];
    }
  return m;
}

double frechet_distance(const MomentSummary& a, const MomentSummary& b) {
  if (a.dim != b.dim) throw std::invalid_argument("frechet_distance: dimension mismatch");
  if (a.dim < 1) throw std::invalid_argument("frechet_distance: empty summary");
  double mean_term = 0.0;
  for (int i = 0; i < a.dim; ++i) {
    const double d = a.mean[i] - b.mean[i];
    mean_term += d * d;
  }
  Eigen::MatrixXd sa = to_matrix(a);
  Eigen::MatrixXd sb = to_matrix(b);
  Eigen::MatrixXd root_a = psd_sqrt(sa);
  Eigen::MatrixXd inner = root_a * sb * root_a;
  inner = 0.5 * (inner + inner.transpose().eval());  // symmetrize round-off
  Eigen::MatrixXd cross = psd_sqrt(inner);
  double trace_term = sa.trace() + sb.trace() - 2.0 * cross.trace();
  return mean_term + trace_term;
}

double miou(const std::vector<std::vector<int>>& pred, const std::vector<std::vector<int>>& truth,
            int num_classes) {
  if (pred.size() != truth.size()) throw std::invalid_argument("miou: batch size mismatch");
  if (pred.empty()) throw std::invalid_argument("miou: empty batch");
  if (num_classes < 1) throw std::invalid_argument("miou: num_classes < 1");
  std::vector<long> inter(num_classes, 0), uni(num_classes, 0);
  for (std::size_t r = 0; r < pred.size(); ++r) {
    if (pred[r].size() != truth[r].size()) throw std::invalid_argument("miou: shape mismatch");
    for (std::size_t c = 0; c < pred[r].size(); ++c) {
      const int p = pred[r][c];
      const int t = truth[r][c];
      if (p < 0 || p >= num_classes || t < 0 || t >= num_classes)
        throw std::invalid_argument("miou: label out of range");
      if (p == t) {
        inter[p] += 1;
        uni[p] += 1;
      } else {
        uni[p] += 1;
        uni[t] += 1;
      }
    }
  }
  double sum = 0.0;
  int present = 0;
  for (int k = 0; k < num_classes; ++k) {
    if (uni[k] == 0) continue;  // absent from both prediction and truth
    sum += static_cast<double>(inter[k]) / static_cast<double>(uni[k]);
    present += 1;
  }
  if (present == 0) throw std::invalid_argument("miou: no classes present");
  return sum / present;
}

double class_fidelity(const Tensor& samples, const GmmSpec& gmm, int k) {
  if (k < 0 || k >= gmm.components())
    throw std::invalid_argument("class_fidelity: component out of range");
  if (samples.rank() != 2) throw std::invalid_argument("class_fidelity: need a [n, d] batch");
  const std::size_t n = samples.shape()[0];
  const std::size_t d = samples.shape()[1];
  if (d != static_cast<std::size_t>(gmm.dim()))
    throw std::invalid_argument("class_fidelity: dimension mismatch");
  std::vector<double> row(d);
  std::size_t hits = 0;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) row[c] = samples[r * d + c];
    if (gmm_bayes_class(gmm, row) == k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

std::vector<double> OracleClassifier::log_probs(const Tensor& x) const {
  std::vector<double> logits = net.forward(x.as_doubles());
  double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double v : logits) z += std::exp(v - m);
  const double lz = m + std::log(z);
  for (double& v : logits) v -= lz;
  return logits;
}

int OracleClassifier::predict(const Tensor& x) const {
  std::vector<double> logits = net.forward(x.as_doubles());
  return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

std::vector<double> OracleClassifier::features(const Tensor& x) const {
  StackTrace trace;
  net.forward(x.as_doubles(), &trace);
  return trace.post[trace.post.size() - 2];
}

OracleClassifier train_oracle_classifier(const Dataset& train, int num_classes,
                                         std::uint64_t seed,
                                         const FixedClassifierRecipe& recipe) {
  if (train.empty()) throw std::invalid_argument("classifier training: empty dataset");
  if (num_classes < 2) throw std::invalid_argument("classifier training: num_classes < 2");
  const int d = static_cast<int>(train.records[0].x.size());
  std::vector<int> labels = train.labels();
  for (int y : labels)
    if (y < 0 || y >= num_classes)
      throw std::invalid_argument("classifier training: label out of range");

  OracleClassifier clf;
  clf.num_classes = num_classes;
  Rng rng(seed);
  clf.net = DenseStack({d, 128, 128, num_classes}, rng);

  StackGrads grads = clf.net.zero_grads();
  StackTrace trace;
  const int n = static_cast<int>(train.size());
  for (int step = 0; step < recipe.steps; ++step) {
    double lr = recipe.lr;
    if (step >= recipe.steps * 3 / 4)
      lr *= 0.01;
    else if (step >= recipe.steps / 2)
      lr *= 0.1;
    grads.clear();
    for (int b = 0; b < recipe.batch; ++b) {
      const int idx = static_cast<int>(rng.next_index(n));
      std::vector<double> logits = clf.net.forward(train.records[idx].x.as_doubles(), &trace);
      double m = *std::max_element(logits.begin(), logits.end());
      double z = 0.0;
      for (double v : logits) z += std::exp(v - m);
      const double lz = m + std::log(z);
      std::vector<double> dlogits(logits.size());
      for (int k = 0; k < num_classes; ++k) {
        const double p = std::exp(logits[k] - lz);
        dlogits[k] = (p - (k == labels[idx] ? 1.0 : 0.0)) / recipe.batch;
      }
      clf.net.backward(trace, dlogits, grads);
    }
    clf.net.sgd_step(grads, lr);
  }
  return clf;
}

double accuracy(const OracleClassifier& clf, const Dataset& ds) {
  if (ds.empty()) throw std::invalid_argument("accuracy: empty dataset");
  std::vector<int> labels = ds.labels();
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (clf.predict(ds.records[i].x) == labels[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(ds.size());
}

double cas(const Dataset& synthetic, const Dataset& real_val, int num_classes,
           std::uint64_t seed) {
  if (synthetic.empty() || real_val.empty()) throw std::invalid_argument("cas: empty input");
  OracleClassifier clf = train_oracle_classifier(synthetic, num_classes, seed);
  return accuracy(clf, real_val);
}

MomentSummary feature_moments(const OracleClassifier& clf, const std::vector<Tensor>& xs) {
  std::vector<std::vector<double>> rows;
  rows.reserve(xs.size());
  for (const auto& x : xs) rows.push_back(clf.features(x));
  return compute_moments(rows);
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_statistic: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    // Advance both ECDFs past every copy of the next value before comparing,
    // so tied observations jump together.
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    const double fa = static_cast<double>(i) / a.size();
    const double fb = static_cast<double>(j) / b.size();
    d = std::max(d, std::abs(fa - fb));
  }
  return d;
}

double ks_critical_001(std::size_t n, std::size_t m) {
  // c(alpha) = sqrt(-ln(alpha/2)/2), alpha = 0.01
  const double c = std::sqrt(-std::log(0.005) / 2.0);
  return c * std::sqrt(static_cast<double>(n + m) / (static_cast<double>(n) * m));
}

}  // namespace dg
