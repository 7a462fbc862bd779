#include "pipelines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <optional>
#include <sstream>

#include "json.hpp"

#include "dg/checkpoint.hpp"
#include "dg/rng.hpp"
#include "dg/samplers.hpp"

namespace dg::tool {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path resolve(const std::string& out_dir, const std::string& rel) {
  fs::path p(rel);
  return p.is_absolute() ? p : fs::path(out_dir) / p;
}

void note_artifact(RunResult& res, const std::string& rel) { res.artifacts.push_back(rel); }

double tail_mean(const std::vector<double>& losses) {
  if (losses.empty()) return 0.0;
  const std::size_t tail = std::max<std::size_t>(1, losses.size() / 10);
  double sum = 0.0;
  for (std::size_t i = losses.size() - tail; i < losses.size(); ++i) sum += losses[i];
  return sum / static_cast<double>(tail);
}

int resolve_classes(int configured, const std::optional<DatasetBlock>& block,
                    const Dataset& ds) {
  if (configured > 0) return configured;
  if (block && block->native_classes() > 0) return block->native_classes();
  int top = -1;
  for (int y : ds.labels()) top = std::max(top, y);
  if (top < 0) throw ConfigError("cannot infer the class count from the dataset");
  return top + 1;
}

MlpDenoiser obtain_model(const ExperimentConfig& cfg, const ModelSource& src, const Dataset& ds,
                         std::uint64_t run_seed, std::vector<MetricRow>* rows) {
  if (src.train) return train_uncond(cfg, ds, *src.train, run_seed, rows);
  return load_denoiser(resolve(cfg.out_dir, substitute_seed(src.path, run_seed)).string());
}

std::vector<int> classifier_t_feats(const ClassifierBlock& block, const NoiseSchedule& s) {
  if (!block.t_feats.empty()) return block.t_feats;
  return {default_t_feat(s)};
}

FewShotSpec few_shot_spec(const ClassifierBlock& block, const NoiseSchedule& s, int num_classes,
                          int cells, std::uint64_t seed) {
  FewShotSpec spec;
  spec.input = block.input;
  spec.t_feats = classifier_t_feats(block, s);
  spec.taps = block.taps;
  spec.num_classes = num_classes;
  spec.cells = cells;
  spec.head_hidden = block.head_hidden;
  spec.steps = block.steps;
  spec.batch = block.batch;
  spec.lr = block.lr;
  spec.seed = seed;
  return spec;
}

void save_report(const fs::path& path, const AugmentResult& result) {
  json classes = json::array();
  for (const ClassGenReport& r : result.report)
    classes.push_back({{"class", r.class_id},
                       {"target", r.target},
                       {"accepted", r.accepted},
                       {"attempted", r.attempted},
                       {"acceptance_rate", r.acceptance_rate}});
  json j = {{"classes", classes}, {"shortfall", result.shortfall}};
  std::ofstream os(path);
  if (!os) throw std::runtime_error(path.string() + ": cannot open for writing");
  os << j.dump(2) << '\n';
}

// ---------------------------------------------------------------- train

void run_train(const ExperimentConfig& cfg, const TrainPipeline& p, RunResult& res) {
  for (std::uint64_t seed : cfg.seeds) {
    Dataset ds = cfg.dataset->make(seed);
    MlpDenoiser model = train_uncond(cfg, ds, p.recipe, seed, &res.metrics);
    const std::string rel = substitute_seed(p.out_model, seed);
    save_denoiser(resolve(cfg.out_dir, rel).string(), model);
    note_artifact(res, rel);
  }
}

// ------------------------------------------------------------- finetune

void run_finetune(const ExperimentConfig& cfg, const FinetunePipeline& p, RunResult& res) {
  for (std::uint64_t seed : cfg.seeds) {
    Dataset ds = cfg.dataset->make(seed);
    MlpDenoiser uncond = obtain_model(cfg, p.model, ds, seed, &res.metrics);
    const int num_classes = resolve_classes(p.num_classes, cfg.dataset, ds);
    FinetuneConfig fc;
    fc.steps = p.steps;
    fc.batch = p.batch;
    fc.lr = p.lr;
    fc.label_dropout = p.label_dropout;
    fc.seed = mix_seed(seed, salt::finetune);
    std::vector<double> losses;
    MlpDenoiser cond = finetune_conditional(uncond, ds, num_classes, fc, &losses);
    res.metrics.push_back({"finetune_loss_tail", tail_mean(losses), p.steps, seed});
    const std::string rel = substitute_seed(p.out_model, seed);
    save_denoiser(resolve(cfg.out_dir, rel).string(), cond);
    note_artifact(res, rel);
  }
}

// ---------------------------------------------------------------- guide

void run_guide(const ExperimentConfig& cfg, const GuidePipeline& p, RunResult& res) {
  const NoiseSchedule s = cfg.schedule->build();
  for (std::uint64_t seed : cfg.seeds) {
    Dataset ds = cfg.dataset->make(seed);
    MlpDenoiser model = obtain_model(cfg, p.model, ds, seed, &res.metrics);

    GuidanceClassifier clf;
    Target target;
    if (p.per_cell) {
      Dataset few = subset_records(ds, p.classifier.labeled_pairs, mix_seed(seed, salt::subset));
      int cell_classes = 0;
      if (cfg.dataset->source == DatasetBlock::Source::gridmask) {
        cell_classes = cfg.dataset->grid.num_fg_classes + 1;
      } else {
        for (const auto& mask : few.masks())
          for (int c : mask) cell_classes = std::max(cell_classes, c + 1);
      }
      FewShotSpec spec = few_shot_spec(p.classifier, s, cell_classes, ds.mask_h * ds.mask_w,
                                       mix_seed(seed, salt::few_shot));
      clf = train_guidance_classifier(model, s, few.xs(), {}, few.masks(), spec);
      target = Target::mask(p.target_mask);
    } else {
      const int num_classes = resolve_classes(0, cfg.dataset, ds);
      Dataset few = subset_per_class(ds, p.classifier.labels_per_class, num_classes,
                                     mix_seed(seed, salt::subset));
      FewShotSpec spec =
          few_shot_spec(p.classifier, s, num_classes, 1, mix_seed(seed, salt::few_shot));
      clf = train_guidance_classifier(model, s, few.xs(), few.labels(), {}, spec);
      target = Target::cls(p.target_class);
    }

    GuidanceHook hook = make_classifier_hook(model, clf, s, target, p.lambda);
    SamplerConfig sc = p.sampler.build(s);
    sc.chains = p.chains;
    sc.seed = mix_seed(seed, salt::sample);
    SampleResult result = sample_loop(model, s, sc, hook);

    const std::string rel = substitute_seed(p.out_samples, seed);
    save_tensor(resolve(cfg.out_dir, rel).string(), result.samples);
    note_artifact(res, rel);
    if (!p.out_classifier.empty()) {
      const std::string crel = substitute_seed(p.out_classifier, seed);
      save_classifier(resolve(cfg.out_dir, crel).string(), clf);
      note_artifact(res, crel);
    }

    if (p.per_cell) {
      if (cfg.dataset->source == DatasetBlock::Source::gridmask) {
        std::vector<std::vector<int>> preds, truths;
        for (int c = 0; c < p.chains; ++c) {
          preds.push_back(oracle_segment(unstack_row(result.samples, c), cfg.dataset->grid));
          truths.push_back(p.target_mask);
        }
        const double score = miou(preds, truths, cfg.dataset->grid.num_fg_classes + 1);
        res.metrics.push_back({"miou", score, p.chains, seed});
      }
    } else if (cfg.dataset->source == DatasetBlock::Source::gmm) {
      const GmmSpec& gmm = cfg.dataset->gmm;
      res.metrics.push_back(
          {"class_fidelity", class_fidelity(result.samples, gmm, p.target_class), p.chains,
           seed});
      auto reference =
          component_draws(gmm, p.target_class, 10000, mix_seed(seed, salt::reference));
      std::vector<std::vector<double>> rows;
      rows.reserve(result.samples.shape()[0]);
      for (std::size_t i = 0; i < result.samples.shape()[0]; ++i)
        rows.push_back(unstack_row(result.samples, i).as_doubles());
      const double fd = frechet_distance(compute_moments(rows), compute_moments(reference));
      res.metrics.push_back({"frechet_conditional", fd, p.chains, seed});
    }
  }
}

// --------------------------------------------------------------- reject

void run_reject(const ExperimentConfig& cfg, const RejectPipeline& p, RunResult& res) {
  const NoiseSchedule s = cfg.schedule->build();
  for (std::uint64_t seed : cfg.seeds) {
    Dataset ds = cfg.dataset->make(seed);
    MlpDenoiser model = obtain_model(cfg, p.model, ds, seed, &res.metrics);
    const int num_classes = resolve_classes(p.num_classes, cfg.dataset, ds);
    auto parts = split(ds, {1.0 - p.val_fraction, p.val_fraction}, mix_seed(seed, salt::split));
    GuidanceClassifier rej =
        train_rejection_classifier(model, s, parts[0].xs(), parts[0].labels(), num_classes,
                                   p.t_pair, p.steps, mix_seed(seed, salt::reject));
    const std::string rel = substitute_seed(p.out_classifier, seed);
    save_classifier(resolve(cfg.out_dir, rel).string(), rej);
    note_artifact(res, rel);
    const double acc =
        classifier_accuracy(model, s, rej, parts[1].xs(), parts[1].labels(), {});
    res.metrics.push_back(
        {"reject_val_accuracy", acc, static_cast<long>(parts[1].size()), seed});
  }
}

// -------------------------------------------------------------- augment

void run_augment(const ExperimentConfig& cfg, const AugmentPipeline& p, RunResult& res) {
  for (std::uint64_t seed : cfg.seeds) {
    MlpDenoiser cond =
        load_denoiser(resolve(cfg.out_dir, substitute_seed(p.model, seed)).string());
    GuidanceClassifier rej =
        load_classifier(resolve(cfg.out_dir, substitute_seed(p.classifier, seed)).string());
    std::optional<MlpDenoiser> feat;
    if (!p.feature_model.empty())
      feat = load_denoiser(resolve(cfg.out_dir, substitute_seed(p.feature_model, seed)).string());

    AugmentPlan plan;
    plan.per_class.assign(cond.num_classes(), p.per_class);
    plan.cfg_w = p.cfg_w;
    plan.threshold = p.threshold;
    plan.attempt_factor = p.attempt_factor;
    plan.seed = mix_seed(seed, salt::augment);
    SamplerConfig base = p.sampler.build(cond.schedule());
    AugmentResult result =
        augment_dataset(cond, rej, base, plan, feat ? &*feat : nullptr);

    const std::string dir_rel = substitute_seed(p.out_dataset, seed);
    const fs::path dir = resolve(cfg.out_dir, dir_rel);
    fs::create_directories(dir);
    save_dataset(dir.string(), result.synthetic);
    note_artifact(res, dir_rel + "/data.dtns");
    note_artifact(res, dir_rel + "/meta.jsonl");
    const std::string report_rel = substitute_seed(p.out_report, seed);
    save_report(resolve(cfg.out_dir, report_rel), result);
    note_artifact(res, report_rel);

    for (const ClassGenReport& r : result.report)
      res.metrics.push_back({"acceptance_rate_c" + std::to_string(r.class_id),
                             r.acceptance_rate, r.attempted, seed});
    res.metrics.push_back({"shortfall", result.shortfall ? 1.0 : 0.0,
                           static_cast<long>(result.synthetic.size()), seed});
  }
}

// ------------------------------------------------------------- evaluate

void run_evaluate(const ExperimentConfig& cfg, const EvaluatePipeline& p, RunResult& res) {
  for (std::uint64_t seed : cfg.seeds) {
    Dataset a = p.a.make(seed);
    Dataset b = p.b.make(seed);
    const double fd = frechet_distance(dataset_moments(a), dataset_moments(b));
    res.metrics.push_back({"frechet", fd, static_cast<long>(a.size()), seed});
    if (p.cas_classes > 0) {
      const double score = cas(a, b, p.cas_classes, mix_seed(seed, salt::cas));
      res.metrics.push_back({"cas", score, static_cast<long>(a.size()), seed});
    }
  }
}

// ---------------------------------------------------------------- sweep

void run_sweep(const ExperimentConfig& cfg, const SweepPipeline& p, RunResult& res) {
  const NoiseSchedule s = cfg.schedule->build();
  for (std::uint64_t seed : cfg.seeds) {
    Dataset ds = cfg.dataset->make(seed);
    auto parts = split(ds, {1.0 - p.val_fraction, p.val_fraction}, mix_seed(seed, salt::split));
    const Dataset& train_full = parts[0];
    const Dataset& val = parts[1];
    const int num_classes = resolve_classes(p.num_classes, cfg.dataset, ds);
    Dataset labeled = stratified_fraction(train_full, p.labeled_fraction, num_classes,
                                          mix_seed(seed, salt::subset));

    TrainRecipe recipe;
    recipe.steps = p.train_steps;
    recipe.batch = p.train_batch;
    recipe.lr = p.train_lr;
    MlpDenoiser uncond = train_uncond(cfg, train_full, recipe, seed, &res.metrics);

    FinetuneConfig fc;
    fc.steps = p.finetune_steps;
    fc.batch = p.finetune_batch;
    fc.lr = p.finetune_lr;
    fc.label_dropout = p.label_dropout;
    fc.seed = mix_seed(seed, salt::finetune);
    MlpDenoiser cond = finetune_conditional(uncond, labeled, num_classes, fc);

    GuidanceClassifier rej = train_rejection_classifier(
        uncond, s, labeled.xs(), labeled.labels(), num_classes, p.reject_t_pair, p.reject_steps,
        mix_seed(seed, salt::reject));

    std::vector<long> class_counts(num_classes, 0);
    for (int y : labeled.labels()) class_counts[y] += 1;

    for (int mult : p.multipliers) {
      Dataset combined = labeled;
      if (mult > 0) {
        AugmentPlan plan;
        plan.per_class.resize(num_classes);
        for (int k = 0; k < num_classes; ++k)
          plan.per_class[k] = static_cast<int>(mult * class_counts[k]);
        plan.cfg_w = p.cfg_w;
        plan.threshold = p.threshold;
        plan.attempt_factor = p.attempt_factor;
        plan.seed = mix_seed(mix_seed(seed, salt::augment), static_cast<std::uint64_t>(mult));
        SamplerConfig base = p.sampler.build(s);
        AugmentResult result = augment_dataset(cond, rej, base, plan, &uncond);
        combined = concat_datasets(labeled, result.synthetic);
      }
      const double acc = cas(combined, val, num_classes, mix_seed(seed, salt::cas));
      res.metrics.push_back({"val_accuracy_x" + std::to_string(mult), acc,
                             static_cast<long>(combined.size()), seed});
    }
  }
}

// ------------------------------------------------------------ reporting

void write_csv(const fs::path& path, const ExperimentConfig& cfg,
               const std::vector<MetricRow>& rows) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error(path.string() + ": cannot open for writing");
  os << "run_id,metric,value,n,seed,config_hash\n";
  os << std::setprecision(17);
  for (const MetricRow& r : rows)
    os << cfg.run_id << ',' << r.metric << ',' << r.value << ',' << r.n << ',' << r.seed << ','
       << cfg.config_hash << '\n';
  if (!os) throw std::runtime_error(path.string() + ": write failed");
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

void write_manifest(const ExperimentConfig& cfg, const std::vector<std::string>& artifacts) {
  json files = json::object();
  for (const std::string& rel : artifacts)
    files[rel] = hex64(fnv1a64_file(resolve(cfg.out_dir, rel).string()));
  json j = {{"run_id", cfg.run_id},     {"pipeline", cfg.pipeline_kind()},
            {"config_hash", cfg.config_hash}, {"code_version", "0.1.0"},
            {"seeds", cfg.seeds},       {"timestamp", utc_timestamp()},
            {"artifacts", files}};
  const fs::path path = fs::path(cfg.out_dir) / "manifest.json";
  std::ofstream os(path);
  if (!os) throw std::runtime_error(path.string() + ": cannot open for writing");
  os << j.dump(2) << '\n';
}

void check_seed_template(const ExperimentConfig& cfg, const std::string& tmpl,
                         const char* what) {
  if (cfg.seeds.size() > 1 && !tmpl.empty() && tmpl.find("{seed}") == std::string::npos)
    throw ConfigError(std::string(what) + " needs a {seed} placeholder for multi-seed runs");
}

void check_input_exists(const ExperimentConfig& cfg, const std::string& tmpl, const char* what) {
  for (std::uint64_t seed : cfg.seeds) {
    const fs::path p = resolve(cfg.out_dir, substitute_seed(tmpl, seed));
    if (!fs::exists(p)) throw ConfigError(std::string(what) + ": missing input " + p.string());
  }
}

}  // namespace

MlpDenoiser train_uncond(const ExperimentConfig& cfg, const Dataset& ds,
                         const TrainRecipe& recipe, std::uint64_t run_seed,
                         std::vector<MetricRow>* rows) {
  if (!cfg.model) throw ConfigError("training needs a model block");
  if (!cfg.schedule) throw ConfigError("training needs a schedule block");
  if (ds.empty()) throw std::invalid_argument("training dataset is empty");
  const int dim = static_cast<int>(ds.records[0].x.size());
  const std::uint64_t init =
      mix_seed(mix_seed(cfg.model->init_seed, run_seed), salt::model_init);
  MlpDenoiser model(dim, cfg.schedule->build(), init, cfg.model->hidden);
  TrainConfig tc;
  tc.steps = recipe.steps;
  tc.batch = recipe.batch;
  tc.lr = recipe.lr;
  tc.weight = recipe.weight;
  tc.seed = mix_seed(run_seed, salt::train);
  std::vector<double> losses = train_denoiser(model, ds.xs(), tc);
  if (rows)
    rows->push_back({"train_loss_tail", tail_mean(losses), recipe.steps, run_seed});
  return model;
}

Dataset subset_per_class(const Dataset& ds, int per_class, int num_classes,
                         std::uint64_t seed) {
  if (per_class < 0) throw ConfigError("labels_per_class must be >= 0");
  std::vector<int> labels = ds.labels();
  Dataset out;
  out.mask_h = ds.mask_h;
  out.mask_w = ds.mask_w;
  for (int k = 0; k < num_classes; ++k) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == k) idx.push_back(i);
    if (idx.empty()) throw std::invalid_argument("class " + std::to_string(k) + " has no records");
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(k)));
    for (std::size_t i = idx.size(); i > 1; --i)
      std::swap(idx[i - 1], idx[rng.next_index(i)]);
    const std::size_t keep =
        per_class == 0 ? idx.size() : std::min<std::size_t>(per_class, idx.size());
    for (std::size_t i = 0; i < keep; ++i) out.records.push_back(ds.records[idx[i]]);
  }
  return out;
}

Dataset subset_records(const Dataset& ds, int count, std::uint64_t seed) {
  if (count < 0) throw ConfigError("record subset size must be >= 0");
  Dataset out;
  out.mask_h = ds.mask_h;
  out.mask_w = ds.mask_w;
  std::vector<std::size_t> idx(ds.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.next_index(i)]);
  const std::size_t keep = count == 0 ? idx.size() : std::min<std::size_t>(count, idx.size());
  for (std::size_t i = 0; i < keep; ++i) out.records.push_back(ds.records[idx[i]]);
  return out;
}

Dataset stratified_fraction(const Dataset& ds, double fraction, int num_classes,
                            std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw ConfigError("labeled_fraction must be in (0, 1]");
  std::vector<int> labels = ds.labels();
  Dataset out;
  out.mask_h = ds.mask_h;
  out.mask_w = ds.mask_w;
  for (int k = 0; k < num_classes; ++k) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == k) idx.push_back(i);
    if (idx.empty()) throw std::invalid_argument("class " + std::to_string(k) + " has no records");
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(k)));
    for (std::size_t i = idx.size(); i > 1; --i)
      std::swap(idx[i - 1], idx[rng.next_index(i)]);
    const std::size_t keep = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::lround(fraction * static_cast<double>(idx.size()))));
    for (std::size_t i = 0; i < std::min(keep, idx.size()); ++i)
      out.records.push_back(ds.records[idx[i]]);
  }
  return out;
}

MomentSummary dataset_moments(const Dataset& ds) {
  std::vector<std::vector<double>> rows;
  rows.reserve(ds.size());
  for (const DatasetRecord& r : ds.records) rows.push_back(r.x.as_doubles());
  return compute_moments(rows);
}

std::vector<std::vector<double>> component_draws(const GmmSpec& gmm, int k, int n,
                                                 std::uint64_t seed) {
  if (k < 0 || k >= gmm.components())
    throw std::invalid_argument("component_draws: component out of range");
  GmmSpec single;
  single.weights = {1.0};
  single.means = {gmm.means[k]};
  single.vars = {gmm.vars[k]};
  Rng rng(seed);
  std::vector<std::vector<double>> rows;
  rows.reserve(n);
  for (int i = 0; i < n; ++i) rows.push_back(gmm_draw(single, rng));
  return rows;
}

Dataset concat_datasets(const Dataset& a, const Dataset& b) {
  if (a.mask_h != 0 && b.mask_h != 0 && (a.mask_h != b.mask_h || a.mask_w != b.mask_w))
    throw std::invalid_argument("concat_datasets: grid extents differ");
  Dataset out;
  out.mask_h = a.mask_h != 0 ? a.mask_h : b.mask_h;
  out.mask_w = a.mask_w != 0 ? a.mask_w : b.mask_w;
  out.records = a.records;
  out.records.insert(out.records.end(), b.records.begin(), b.records.end());
  return out;
}

void preflight(const ExperimentConfig& cfg) {
  if (cfg.dataset && cfg.dataset->source == DatasetBlock::Source::path &&
      !fs::exists(cfg.dataset->path))
    throw ConfigError("dataset.path does not exist: " + cfg.dataset->path);

  struct Visitor {
    const ExperimentConfig& cfg;
    void operator()(const TrainPipeline& p) const {
      check_seed_template(cfg, p.out_model, "out_model");
    }
    void operator()(const FinetunePipeline& p) const {
      check_seed_template(cfg, p.out_model, "out_model");
      if (!p.model.train) check_input_exists(cfg, p.model.path, "model");
    }
    void operator()(const GuidePipeline& p) const {
      check_seed_template(cfg, p.out_samples, "out_samples");
      check_seed_template(cfg, p.out_classifier, "out_classifier");
      if (!p.model.train) check_input_exists(cfg, p.model.path, "model");
    }
    void operator()(const RejectPipeline& p) const {
      check_seed_template(cfg, p.out_classifier, "out_classifier");
      if (!p.model.train) check_input_exists(cfg, p.model.path, "model");
    }
    void operator()(const AugmentPipeline& p) const {
      check_seed_template(cfg, p.out_dataset, "out_dataset");
      check_seed_template(cfg, p.out_report, "out_report");
      check_input_exists(cfg, p.model, "model");
      check_input_exists(cfg, p.classifier, "classifier");
      if (!p.feature_model.empty()) check_input_exists(cfg, p.feature_model, "feature_model");
    }
    void operator()(const EvaluatePipeline& p) const {
      if (p.a.source == DatasetBlock::Source::path && !fs::exists(p.a.path))
        throw ConfigError("pipeline.a.path does not exist: " + p.a.path);
      if (p.b.source == DatasetBlock::Source::path && !fs::exists(p.b.path))
        throw ConfigError("pipeline.b.path does not exist: " + p.b.path);
    }
    void operator()(const SweepPipeline&) const {}
  };
  std::visit(Visitor{cfg}, cfg.pipeline);
}

RunResult run_pipeline(const ExperimentConfig& cfg) {
  preflight(cfg);
  fs::create_directories(cfg.out_dir);
  RunResult res;
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, TrainPipeline>) run_train(cfg, p, res);
        else if constexpr (std::is_same_v<T, FinetunePipeline>) run_finetune(cfg, p, res);
        else if constexpr (std::is_same_v<T, GuidePipeline>) run_guide(cfg, p, res);
        else if constexpr (std::is_same_v<T, RejectPipeline>) run_reject(cfg, p, res);
        else if constexpr (std::is_same_v<T, AugmentPipeline>) run_augment(cfg, p, res);
        else if constexpr (std::is_same_v<T, EvaluatePipeline>) run_evaluate(cfg, p, res);
        else run_sweep(cfg, p, res);
      },
      cfg.pipeline);
  write_csv(fs::path(cfg.out_dir) / "metrics.csv", cfg, res.metrics);
  res.artifacts.push_back("metrics.csv");
  write_manifest(cfg, res.artifacts);
  return res;
}

}  // namespace dg::tool
