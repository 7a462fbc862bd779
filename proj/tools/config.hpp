#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "dg/data.hpp"
#include "dg/denoiser.hpp"
#include "dg/gmm.hpp"
#include "dg/guidance.hpp"
#include "dg/mlp.hpp"
#include "dg/samplers.hpp"
#include "dg/schedule.hpp"

namespace dg::tool {

/// Raised for malformed configs; the CLI maps it to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Rejects unknown keys and reports missing required ones, naming `ctx`.
void check_keys(const nlohmann::json& j, const std::string& ctx,
                const std::vector<std::string>& required,
                const std::vector<std::string>& optional);

struct ScheduleBlock {
  ScheduleKind kind = ScheduleKind::linear;
  int T = 0;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  double s = 0.008;

  NoiseSchedule build() const;
};

struct ModelBlock {
  std::vector<int> hidden = {128, 128, 128};
  std::uint64_t init_seed = 0;
};

/// Dataset source: a saved container, or a generator spec. Generated
/// datasets fold the per-run seed into their own, so each seed of a
/// multi-seed run sees independent data.
struct DatasetBlock {
  enum class Source { path, gmm, gridmask };
  Source source = Source::path;
  std::string path;
  GmmSpec gmm;
  GridMaskSpec grid;
  int n = 0;
  std::uint64_t seed = 0;

  Dataset make(std::uint64_t run_seed) const;
  int native_classes() const;  // component / foreground-class count, 0 for path
};

struct SamplerBlock {
  SamplerMethod method = SamplerMethod::ddim;
  int num_steps = 0;  // 0: full chain
  double eta = 0.0;
  std::optional<double> cfg_w;
  std::optional<ClampRange> clamp;

  SamplerConfig build(const NoiseSchedule& s) const;
};

struct TrainRecipe {
  int steps = 0;
  int batch = 32;
  double lr = 1e-3;
  LossWeight weight = LossWeight::uniform;
};

/// Where a pipeline's input denoiser comes from: a checkpoint path, or an
/// inline recipe that trains it on the config's dataset first.
struct ModelSource {
  std::string path;
  std::optional<TrainRecipe> train;
};

struct TrainPipeline {
  TrainRecipe recipe;
  std::string out_model;
};

struct FinetunePipeline {
  ModelSource model;
  int steps = 0;
  int batch = 64;
  double lr = 1e-4;
  double label_dropout = 0.1;
  int num_classes = 0;  // 0: dataset's native class count
  std::string out_model;
};

struct ClassifierBlock {
  GuidanceInput input = GuidanceInput::feature_bundle;
  std::vector<int> t_feats;  // empty: default 0.7 T
  std::vector<int> taps = {1, 2};
  int steps = 100;
  int batch = 0;
  double lr = 0.1;
  std::vector<int> head_hidden = {64};
  int labels_per_class = 0;  // class targets: examples kept per class (0 = all)
  int labeled_pairs = 0;     // mask targets: labeled records kept in total (0 = all)
};

struct GuidePipeline {
  ModelSource model;
  ClassifierBlock classifier;
  double lambda = 1.0;
  int target_class = -1;            // class target...
  std::vector<int> target_mask;     // ...or per-cell target
  bool per_cell = false;            // train a per-cell classifier from masks
  SamplerBlock sampler;
  int chains = 1;
  std::string out_samples;
  std::string out_classifier;
};

struct RejectPipeline {
  ModelSource model;
  std::pair<int, int> t_pair;
  int steps = 200;
  int num_classes = 0;
  double val_fraction = 0.2;
  std::string out_classifier;
};

struct AugmentPipeline {
  std::string model;            // conditional checkpoint
  std::string classifier;       // rejection checkpoint
  std::string feature_model;    // optional unconditional checkpoint for scoring
  int per_class = 0;
  double cfg_w = 0.01;
  double threshold = 0.2;
  int attempt_factor = 20;
  SamplerBlock sampler;
  std::string out_dataset;
  std::string out_report;
};

struct EvaluatePipeline {
  DatasetBlock a;
  DatasetBlock b;
  int cas_classes = 0;  // 0: frechet only
};

struct SweepPipeline {
  std::vector<int> multipliers;
  double labeled_fraction = 0.2;
  double val_fraction = 0.2;
  int num_classes = 0;
  int train_steps = 0;
  int train_batch = 32;
  double train_lr = 1e-3;
  int finetune_steps = 0;
  int finetune_batch = 64;
  double finetune_lr = 1e-4;
  double label_dropout = 0.1;
  std::pair<int, int> reject_t_pair;
  int reject_steps = 200;
  double cfg_w = 0.01;
  double threshold = 0.2;
  int attempt_factor = 20;
  SamplerBlock sampler;
};

using Pipeline = std::variant<TrainPipeline, FinetunePipeline, GuidePipeline, RejectPipeline,
                              AugmentPipeline, EvaluatePipeline, SweepPipeline>;

struct ExperimentConfig {
  std::string run_id;
  std::string out_dir;
  std::vector<std::uint64_t> seeds;
  std::optional<ScheduleBlock> schedule;
  std::optional<ModelBlock> model;
  std::optional<DatasetBlock> dataset;
  Pipeline pipeline;
  std::string config_hash;  // FNV-1a 64 of the canonical JSON text, hex

  const char* pipeline_kind() const;
};

ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const nlohmann::json& j);

/// Replaces every "{seed}" in an artifact path template.
std::string substitute_seed(const std::string& tmpl, std::uint64_t seed);

std::uint64_t fnv1a64(const void* data, std::size_t len);
std::uint64_t fnv1a64_file(const std::string& path);
std::string hex64(std::uint64_t v);

}  // namespace dg::tool
