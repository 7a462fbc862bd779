#include "config.hpp"

#include <algorithm>
#include <fstream>

#include "dg/rng.hpp"

namespace dg::tool {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw ConfigError(msg); }

ScheduleBlock parse_schedule(const json& j) {
  ScheduleBlock b;
  const std::string kind = j.at("kind").get<std::string>();
  b.kind = schedule_kind_from_string(kind);
  if (b.kind == ScheduleKind::linear) {
    check_keys(j, "schedule", {"kind", "T"}, {"beta_start", "beta_end"});
    if (j.contains("beta_start")) b.beta_start = j.at("beta_start").get<double>();
    if (j.contains("beta_end")) b.beta_end = j.at("beta_end").get<double>();
  } else {
    check_keys(j, "schedule", {"kind", "T"}, {"s"});
    if (j.contains("s")) b.s = j.at("s").get<double>();
  }
  b.T = j.at("T").get<int>();
  if (b.T < 1) fail("schedule.T must be >= 1");
  return b;
}

ModelBlock parse_model(const json& j) {
  check_keys(j, "model", {}, {"hidden", "init_seed"});
  ModelBlock b;
  if (j.contains("hidden")) b.hidden = j.at("hidden").get<std::vector<int>>();
  if (j.contains("init_seed")) b.init_seed = j.at("init_seed").get<std::uint64_t>();
  if (b.hidden.empty()) fail("model.hidden must not be empty");
  return b;
}

GmmSpec parse_gmm(const json& j) {
  if (j.contains("symmetric_pair")) {
    check_keys(j, "dataset.gmm", {"symmetric_pair"}, {});
    const json& p = j.at("symmetric_pair");
    check_keys(p, "dataset.gmm.symmetric_pair", {"m", "dim"}, {});
    return GmmSpec::symmetric_pair(p.at("m").get<double>(), p.at("dim").get<int>());
  }
  check_keys(j, "dataset.gmm", {"weights", "means", "vars"}, {});
  GmmSpec g;
  g.weights = j.at("weights").get<std::vector<double>>();
  g.means = j.at("means").get<std::vector<std::vector<double>>>();
  g.vars = j.at("vars").get<std::vector<std::vector<double>>>();
  g.validate();
  return g;
}

GridMaskSpec parse_gridmask(const json& j) {
  check_keys(j, "dataset.gridmask", {},
             {"h", "w", "num_fg_classes", "bg_lo", "bg_hi", "band_lo", "band_fill", "min_side",
              "max_side", "noise_level"});
  GridMaskSpec g;
  if (j.contains("h")) g.h = j.at("h").get<int>();
  if (j.contains("w")) g.w = j.at("w").get<int>();
  if (j.contains("num_fg_classes")) g.num_fg_classes = j.at("num_fg_classes").get<int>();
  if (j.contains("bg_lo")) g.bg_lo = j.at("bg_lo").get<double>();
  if (j.contains("bg_hi")) g.bg_hi = j.at("bg_hi").get<double>();
  if (j.contains("band_lo")) g.band_lo = j.at("band_lo").get<double>();
  if (j.contains("band_fill")) g.band_fill = j.at("band_fill").get<double>();
  if (j.contains("min_side")) g.min_side = j.at("min_side").get<int>();
  if (j.contains("max_side")) g.max_side = j.at("max_side").get<int>();
  if (j.contains("noise_level")) g.noise_level = j.at("noise_level").get<double>();
  g.validate();
  return g;
}

DatasetBlock parse_dataset(const json& j, const std::string& ctx) {
  DatasetBlock b;
  if (j.contains("path")) {
    check_keys(j, ctx, {"path"}, {});
    b.source = DatasetBlock::Source::path;
    b.path = j.at("path").get<std::string>();
    return b;
  }
  if (j.contains("gmm")) {
    check_keys(j, ctx, {"gmm", "n", "seed"}, {});
    b.source = DatasetBlock::Source::gmm;
    b.gmm = parse_gmm(j.at("gmm"));
  } else if (j.contains("gridmask")) {
    check_keys(j, ctx, {"gridmask", "n", "seed"}, {});
    b.source = DatasetBlock::Source::gridmask;
    b.grid = parse_gridmask(j.at("gridmask"));
  } else {
    fail(ctx + " needs one of: path, gmm, gridmask");
  }
  b.n = j.at("n").get<int>();
  b.seed = j.at("seed").get<std::uint64_t>();
  if (b.n < 1) fail(ctx + ".n must be >= 1");
  return b;
}

SamplerBlock parse_sampler(const json& j) {
  check_keys(j, "sampler", {"method"}, {"num_steps", "eta", "cfg_w", "clamp"});
  SamplerBlock b;
  const std::string method = j.at("method").get<std::string>();
  if (method == "ddim")
    b.method = SamplerMethod::ddim;
  else if (method == "ddpm")
    b.method = SamplerMethod::ddpm;
  else
    fail("sampler.method must be ddim or ddpm");
  if (j.contains("num_steps")) b.num_steps = j.at("num_steps").get<int>();
  if (j.contains("eta")) b.eta = j.at("eta").get<double>();
  if (j.contains("cfg_w")) b.cfg_w = j.at("cfg_w").get<double>();
  if (j.contains("clamp")) {
    const auto v = j.at("clamp").get<std::vector<double>>();
    if (v.size() != 2) fail("sampler.clamp must be [lo, hi]");
    b.clamp = ClampRange{static_cast<float>(v[0]), static_cast<float>(v[1])};
  }
  return b;
}

ClassifierBlock parse_classifier(const json& j) {
  check_keys(j, "classifier", {},
             {"input", "t_feats", "taps", "steps", "batch", "lr", "head_hidden",
              "labels_per_class", "labeled_pairs"});
  ClassifierBlock b;
  if (j.contains("input")) b.input = guidance_input_from_string(j.at("input").get<std::string>());
  if (j.contains("t_feats")) b.t_feats = j.at("t_feats").get<std::vector<int>>();
  if (j.contains("taps")) b.taps = j.at("taps").get<std::vector<int>>();
  if (j.contains("steps")) b.steps = j.at("steps").get<int>();
  if (j.contains("batch")) b.batch = j.at("batch").get<int>();
  if (j.contains("lr")) b.lr = j.at("lr").get<double>();
  if (j.contains("head_hidden")) b.head_hidden = j.at("head_hidden").get<std::vector<int>>();
  if (j.contains("labels_per_class")) b.labels_per_class = j.at("labels_per_class").get<int>();
  if (j.contains("labeled_pairs")) b.labeled_pairs = j.at("labeled_pairs").get<int>();
  return b;
}

LossWeight parse_weight(const std::string& w) {
  if (w == "uniform") return LossWeight::uniform;
  if (w == "snr") return LossWeight::snr;
  fail("weight must be uniform or snr");
}

TrainRecipe parse_recipe(const json& j, const std::string& ctx) {
  check_keys(j, ctx, {"steps"}, {"batch", "lr", "weight"});
  TrainRecipe r;
  r.steps = j.at("steps").get<int>();
  if (j.contains("batch")) r.batch = j.at("batch").get<int>();
  if (j.contains("lr")) r.lr = j.at("lr").get<double>();
  if (j.contains("weight")) r.weight = parse_weight(j.at("weight").get<std::string>());
  return r;
}

ModelSource parse_model_source(const json& j, const std::string& ctx) {
  ModelSource src;
  if (j.is_string()) {
    src.path = j.get<std::string>();
    if (src.path.empty()) fail(ctx + ": empty model path");
  } else if (j.is_object()) {
    src.train = parse_recipe(j, ctx);
  } else {
    fail(ctx + " must be a checkpoint path or an inline training recipe");
  }
  return src;
}

TrainPipeline parse_train(const json& j) {
  check_keys(j, "pipeline", {"kind", "steps", "out_model"}, {"batch", "lr", "weight"});
  TrainPipeline p;
  json recipe = j;
  recipe.erase("kind");
  recipe.erase("out_model");
  p.recipe = parse_recipe(recipe, "pipeline");
  p.out_model = j.at("out_model").get<std::string>();
  return p;
}

FinetunePipeline parse_finetune(const json& j) {
  check_keys(j, "pipeline", {"kind", "model", "steps", "out_model"},
             {"batch", "lr", "label_dropout", "num_classes"});
  FinetunePipeline p;
  p.model = parse_model_source(j.at("model"), "pipeline.model");
  p.steps = j.at("steps").get<int>();
  if (j.contains("batch")) p.batch = j.at("batch").get<int>();
  if (j.contains("lr")) p.lr = j.at("lr").get<double>();
  if (j.contains("label_dropout")) p.label_dropout = j.at("label_dropout").get<double>();
  if (j.contains("num_classes")) p.num_classes = j.at("num_classes").get<int>();
  p.out_model = j.at("out_model").get<std::string>();
  return p;
}

GuidePipeline parse_guide(const json& j) {
  check_keys(j, "pipeline", {"kind", "model", "classifier", "sampler", "chains", "out_samples"},
             {"lambda", "target_class", "target_mask", "out_classifier"});
  GuidePipeline p;
  p.model = parse_model_source(j.at("model"), "pipeline.model");
  p.classifier = parse_classifier(j.at("classifier"));
  if (j.contains("lambda")) p.lambda = j.at("lambda").get<double>();
  if (j.contains("target_class")) p.target_class = j.at("target_class").get<int>();
  if (j.contains("target_mask")) p.target_mask = j.at("target_mask").get<std::vector<int>>();
  p.per_cell = !p.target_mask.empty();
  if (p.per_cell == (p.target_class >= 0))
    fail("pipeline needs exactly one of target_class, target_mask");
  p.sampler = parse_sampler(j.at("sampler"));
  p.chains = j.at("chains").get<int>();
  p.out_samples = j.at("out_samples").get<std::string>();
  if (j.contains("out_classifier")) p.out_classifier = j.at("out_classifier").get<std::string>();
  return p;
}

RejectPipeline parse_reject(const json& j) {
  check_keys(j, "pipeline", {"kind", "model", "t_pair", "out_classifier"},
             {"steps", "num_classes", "val_fraction"});
  RejectPipeline p;
  p.model = parse_model_source(j.at("model"), "pipeline.model");
  const auto pair = j.at("t_pair").get<std::vector<int>>();
  if (pair.size() != 2) fail("pipeline.t_pair must be [t1, t2]");
  p.t_pair = {pair[0], pair[1]};
  if (j.contains("steps")) p.steps = j.at("steps").get<int>();
  if (j.contains("num_classes")) p.num_classes = j.at("num_classes").get<int>();
  if (j.contains("val_fraction")) p.val_fraction = j.at("val_fraction").get<double>();
  p.out_classifier = j.at("out_classifier").get<std::string>();
  return p;
}

AugmentPipeline parse_augment(const json& j) {
  check_keys(j, "pipeline",
             {"kind", "model", "classifier", "per_class", "sampler", "out_dataset",
              "out_report"},
             {"feature_model", "cfg_w", "threshold", "attempt_factor"});
  AugmentPipeline p;
  p.model = j.at("model").get<std::string>();
  p.classifier = j.at("classifier").get<std::string>();
  if (j.contains("feature_model")) p.feature_model = j.at("feature_model").get<std::string>();
  p.per_class = j.at("per_class").get<int>();
  if (j.contains("cfg_w")) p.cfg_w = j.at("cfg_w").get<double>();
  if (j.contains("threshold")) p.threshold = j.at("threshold").get<double>();
  if (j.contains("attempt_factor")) p.attempt_factor = j.at("attempt_factor").get<int>();
  p.sampler = parse_sampler(j.at("sampler"));
  p.out_dataset = j.at("out_dataset").get<std::string>();
  p.out_report = j.at("out_report").get<std::string>();
  return p;
}

EvaluatePipeline parse_evaluate(const json& j) {
  check_keys(j, "pipeline", {"kind", "a", "b"}, {"cas_classes"});
  EvaluatePipeline p;
  p.a = parse_dataset(j.at("a"), "pipeline.a");
  p.b = parse_dataset(j.at("b"), "pipeline.b");
  if (j.contains("cas_classes")) p.cas_classes = j.at("cas_classes").get<int>();
  return p;
}

SweepPipeline parse_sweep(const json& j) {
  check_keys(j, "pipeline",
             {"kind", "multipliers", "train", "finetune", "reject", "sampler"},
             {"labeled_fraction", "val_fraction", "num_classes", "cfg_w", "threshold",
              "attempt_factor"});
  SweepPipeline p;
  p.multipliers = j.at("multipliers").get<std::vector<int>>();
  if (p.multipliers.empty()) fail("pipeline.multipliers must not be empty");
  if (j.contains("labeled_fraction")) p.labeled_fraction = j.at("labeled_fraction").get<double>();
  if (j.contains("val_fraction")) p.val_fraction = j.at("val_fraction").get<double>();
  if (j.contains("num_classes")) p.num_classes = j.at("num_classes").get<int>();

  const json& tr = j.at("train");
  check_keys(tr, "pipeline.train", {"steps"}, {"batch", "lr"});
  p.train_steps = tr.at("steps").get<int>();
  if (tr.contains("batch")) p.train_batch = tr.at("batch").get<int>();
  if (tr.contains("lr")) p.train_lr = tr.at("lr").get<double>();

  const json& ft = j.at("finetune");
  check_keys(ft, "pipeline.finetune", {"steps"}, {"batch", "lr", "label_dropout"});
  p.finetune_steps = ft.at("steps").get<int>();
  if (ft.contains("batch")) p.finetune_batch = ft.at("batch").get<int>();
  if (ft.contains("lr")) p.finetune_lr = ft.at("lr").get<double>();
  if (ft.contains("label_dropout")) p.label_dropout = ft.at("label_dropout").get<double>();

  const json& rj = j.at("reject");
  check_keys(rj, "pipeline.reject", {"t_pair"}, {"steps"});
  const auto pair = rj.at("t_pair").get<std::vector<int>>();
  if (pair.size() != 2) fail("pipeline.reject.t_pair must be [t1, t2]");
  p.reject_t_pair = {pair[0], pair[1]};
  if (rj.contains("steps")) p.reject_steps = rj.at("steps").get<int>();

  if (j.contains("cfg_w")) p.cfg_w = j.at("cfg_w").get<double>();
  if (j.contains("threshold")) p.threshold = j.at("threshold").get<double>();
  if (j.contains("attempt_factor")) p.attempt_factor = j.at("attempt_factor").get<int>();
  p.sampler = parse_sampler(j.at("sampler"));
  return p;
}

}  // namespace

void check_keys(const json& j, const std::string& ctx, const std::vector<std::string>& required,
                const std::vector<std::string>& optional) {
  if (!j.is_object()) fail(ctx + " must be an object");
  for (const auto& k : required)
    if (!j.contains(k)) fail(ctx + ": missing required key '" + k + "'");
  for (const auto& [k, v] : j.items()) {
    const bool known = std::find(required.begin(), required.end(), k) != required.end() ||
                       std::find(optional.begin(), optional.end(), k) != optional.end();
    if (!known) fail(ctx + ": unknown key '" + k + "'");
  }
}

NoiseSchedule ScheduleBlock::build() const {
  return kind == ScheduleKind::linear ? build_linear(T, beta_start, beta_end)
                                      : build_cosine(T, s);
}

Dataset DatasetBlock::make(std::uint64_t run_seed) const {
  switch (source) {
    case Source::path:
      return load_dataset(path);
    case Source::gmm:
      return gen_gmm_dataset(gmm, n, mix_seed(seed, run_seed));
    case Source::gridmask:
      return gen_gridmask_dataset(grid, n, mix_seed(seed, run_seed));
  }
  fail("bad dataset source");
}

int DatasetBlock::native_classes() const {
  switch (source) {
    case Source::path: return 0;
    case Source::gmm: return gmm.components();
    case Source::gridmask: return grid.num_fg_classes;
  }
  return 0;
}

SamplerConfig SamplerBlock::build(const NoiseSchedule& s) const {
  SamplerConfig cfg;
  cfg.method = method;
  if (method == SamplerMethod::ddpm) {
    if (num_steps != 0 && num_steps != s.T)
      fail("ddpm sampling runs the full chain; num_steps must be T or omitted");
    cfg.steps = full_steps(s.T);
  } else {
    cfg.steps = num_steps == 0 ? full_steps(s.T) : uniform_steps(s.T, num_steps);
  }
  cfg.eta = eta;
  cfg.cfg_w = cfg_w;
  cfg.clamp_x0 = clamp;
  return cfg;
}

const char* ExperimentConfig::pipeline_kind() const {
  struct Visitor {
    const char* operator()(const TrainPipeline&) { return "train"; }
    const char* operator()(const FinetunePipeline&) { return "finetune"; }
    const char* operator()(const GuidePipeline&) { return "guide"; }
    const char* operator()(const RejectPipeline&) { return "reject"; }
    const char* operator()(const AugmentPipeline&) { return "augment"; }
    const char* operator()(const EvaluatePipeline&) { return "evaluate"; }
    const char* operator()(const SweepPipeline&) { return "sweep"; }
  };
  return std::visit(Visitor{}, pipeline);
}

ExperimentConfig parse_config(const json& j) {
  try {
    check_keys(j, "config", {"run_id", "out_dir", "seeds", "pipeline"},
               {"schedule", "model", "dataset"});
    ExperimentConfig cfg;
    cfg.run_id = j.at("run_id").get<std::string>();
    cfg.out_dir = j.at("out_dir").get<std::string>();
    cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (cfg.run_id.empty()) fail("run_id must not be empty");
    if (cfg.seeds.empty()) fail("seeds must not be empty");
    if (j.contains("schedule")) cfg.schedule = parse_schedule(j.at("schedule"));
    if (j.contains("model")) cfg.model = parse_model(j.at("model"));
    if (j.contains("dataset")) cfg.dataset = parse_dataset(j.at("dataset"), "dataset");

    const json& p = j.at("pipeline");
    if (!p.is_object() || !p.contains("kind")) fail("pipeline.kind is required");
    const std::string kind = p.at("kind").get<std::string>();
    if (kind == "train")
      cfg.pipeline = parse_train(p);
    else if (kind == "finetune")
      cfg.pipeline = parse_finetune(p);
    else if (kind == "guide")
      cfg.pipeline = parse_guide(p);
    else if (kind == "reject")
      cfg.pipeline = parse_reject(p);
    else if (kind == "augment")
      cfg.pipeline = parse_augment(p);
    else if (kind == "evaluate")
      cfg.pipeline = parse_evaluate(p);
    else if (kind == "sweep")
      cfg.pipeline = parse_sweep(p);
    else
      fail("unknown pipeline.kind '" + kind + "'");

    const bool needs_schedule = kind != "evaluate" && kind != "augment";
    if (needs_schedule && !cfg.schedule) fail("pipeline '" + kind + "' needs a schedule block");
    const bool needs_dataset = kind != "evaluate" && kind != "augment";
    if (needs_dataset && !cfg.dataset) fail("pipeline '" + kind + "' needs a dataset block");
    bool inline_train = kind == "train" || kind == "sweep";
    if (const auto* g = std::get_if<GuidePipeline>(&cfg.pipeline))
      inline_train |= g->model.train.has_value();
    if (const auto* f = std::get_if<FinetunePipeline>(&cfg.pipeline))
      inline_train |= f->model.train.has_value();
    if (const auto* r = std::get_if<RejectPipeline>(&cfg.pipeline))
      inline_train |= r->model.train.has_value();
    if (inline_train && !cfg.model) fail("pipeline '" + kind + "' needs a model block");

    const std::string canonical = j.dump();
    cfg.config_hash = hex64(fnv1a64(canonical.data(), canonical.size()));
    return cfg;
  } catch (const json::exception& e) {
    fail(std::string("config: ") + e.what());
  }
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail(path + ": cannot open");
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    fail(path + ": " + e.what());
  }
  return parse_config(j);
}

std::string substitute_seed(const std::string& tmpl, std::uint64_t seed) {
  std::string out = tmpl;
  const std::string key = "{seed}";
  const std::string value = std::to_string(seed);
  for (std::size_t at = out.find(key); at != std::string::npos; at = out.find(key, at))
    out.replace(at, key.size(), value);
  return out;
}

std::uint64_t fnv1a64(const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(path + ": cannot open for hashing");
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[65536];
  while (is.read(buf, sizeof buf) || is.gcount() > 0) {
    const auto n = static_cast<std::size_t>(is.gcount());
    for (std::size_t i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) out[i] = digits[v & 0xf];
  return out;
}

}  // namespace dg::tool
