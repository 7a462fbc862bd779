#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "config.hpp"

#include "dg/adaptation.hpp"
#include "dg/data.hpp"
#include "dg/evaluation.hpp"
#include "dg/guidance.hpp"
#include "dg/mlp.hpp"

namespace dg::tool {

struct MetricRow {
  std::string metric;
  double value = 0.0;
  long n = 0;
  std::uint64_t seed = 0;
};

struct RunResult {
  std::vector<MetricRow> metrics;
  std::vector<std::string> artifacts;  // paths relative to out_dir
};

/// Executes the config's pipeline for every seed, writes artifacts,
/// metrics.csv, and manifest.json under out_dir, and returns the metric
/// rows. Fully deterministic given (config, seeds) except the manifest's
/// timestamp field.
RunResult run_pipeline(const ExperimentConfig& cfg);

/// Pre-run validation: output templates must contain "{seed}" when the
/// run has several seeds, and every referenced input artifact must exist.
/// Throws ConfigError; runs before any computation.
void preflight(const ExperimentConfig& cfg);

// --- shared between the CLI pipelines and the acceptance experiments ---

/// Stage-separating salts folded into the run seed, so each training or
/// sampling stage inside one seeded run draws from its own stream.
namespace salt {
inline constexpr std::uint64_t model_init = 0x11;
inline constexpr std::uint64_t train = 0x22;
inline constexpr std::uint64_t finetune = 0x33;
inline constexpr std::uint64_t reject = 0x44;
inline constexpr std::uint64_t few_shot = 0x55;
inline constexpr std::uint64_t sample = 0x66;
inline constexpr std::uint64_t split = 0x77;
inline constexpr std::uint64_t cas = 0x88;
inline constexpr std::uint64_t subset = 0x99;
inline constexpr std::uint64_t augment = 0xaa;
inline constexpr std::uint64_t reference = 0xbb;
}  // namespace salt

/// Trains an unconditional denoiser per the config's model block and the
/// recipe; appends a train_loss_tail metric row when `rows` is given.
MlpDenoiser train_uncond(const ExperimentConfig& cfg, const Dataset& ds,
                         const TrainRecipe& recipe, std::uint64_t run_seed,
                         std::vector<MetricRow>* rows);

/// Per class, keeps `per_class` seeded picks (all records of the class
/// when per_class is 0). Classes keep at least one record each.
Dataset subset_per_class(const Dataset& ds, int per_class, int num_classes, std::uint64_t seed);

/// Seeded pick of `count` records (0 = everything), order-stable.
Dataset subset_records(const Dataset& ds, int count, std::uint64_t seed);

/// Stratified labeled subset: round(fraction * class size) per class, at
/// least one each.
Dataset stratified_fraction(const Dataset& ds, double fraction, int num_classes,
                            std::uint64_t seed);

/// Moments of the raw record vectors.
MomentSummary dataset_moments(const Dataset& ds);

/// n draws from one mixture component (the conditional reference set).
std::vector<std::vector<double>> component_draws(const GmmSpec& gmm, int k, int n,
                                                 std::uint64_t seed);

/// Union of two datasets (records concatenated; grid extents must agree).
Dataset concat_datasets(const Dataset& a, const Dataset& b);

}  // namespace dg::tool
