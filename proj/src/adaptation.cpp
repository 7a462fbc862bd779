#include "dg/adaptation.hpp"

#include <cmath>
#include <stdexcept>

#include "dg/rng.hpp"

namespace dg {
namespace {

constexpr int kGenChunk = 64;  // chains per generation batch

}  // namespace

MlpDenoiser finetune_conditional(const MlpDenoiser& uncond, const Dataset& labeled,
                                 int num_classes, const FinetuneConfig& cfg,
                                 std::vector<double>* losses) {
  if (uncond.has_label_table())
    throw std::invalid_argument("finetune_conditional: model already has a label table");
  if (labeled.empty()) throw std::invalid_argument("finetune_conditional: empty dataset");
  if (num_classes < 1) throw std::invalid_argument("finetune_conditional: num_classes < 1");
  if (!(cfg.label_dropout >= 0.0 && cfg.label_dropout < 1.0))
    throw std::invalid_argument("finetune_conditional: label_dropout outside [0, 1)");

  std::vector<int> labels = labeled.labels();
  for (int y : labels)
    if (y < 0 || y >= num_classes)
      throw std::invalid_argument("finetune_conditional: label out of range");

  MlpDenoiser cond = uncond;
  cond.attach_label_table(num_classes, mix_seed(cfg.seed, 0x1abe1));

  TrainConfig tc;
  tc.steps = cfg.steps;
  tc.batch = cfg.batch;
  tc.lr = cfg.lr;
  tc.seed = cfg.seed;
  std::vector<double> curve = train_denoiser(cond, labeled.xs(), &labels, cfg.label_dropout, tc);
  if (losses) *losses = std::move(curve);
  return cond;
}

GuidanceClassifier train_rejection_classifier(const DenoiserModel& m, const NoiseSchedule& s,
                                              const std::vector<Tensor>& xs,
                                              const std::vector<int>& labels, int num_classes,
                                              std::pair<int, int> t_pair, int steps,
                                              std::uint64_t seed) {
  if (t_pair.first == t_pair.second)
    throw std::invalid_argument("rejection classifier: feature timesteps must differ");
  FewShotSpec spec;
  spec.input = GuidanceInput::feature_bundle;
  spec.t_feats = {t_pair.first, t_pair.second};
  spec.num_classes = num_classes;
  spec.steps = steps;
  spec.batch = 64;  // labeled pools here are larger than the few-shot sets
  spec.seed = seed;
  return train_guidance_classifier(m, s, xs, labels, {}, spec);
}

AugmentResult augment_dataset(const MlpDenoiser& cond, const GuidanceClassifier& rej,
                              const SamplerConfig& base, const AugmentPlan& plan,
                              const DenoiserModel* feature_model) {
  if (!cond.has_label_table()) throw std::invalid_argument("augment: model has no label table");
  if (static_cast<int>(plan.per_class.size()) != cond.num_classes())
    throw std::invalid_argument("augment: per_class size must match the label table");
  if (!(plan.threshold >= 0.0 && plan.threshold <= 1.0))
    throw std::invalid_argument("augment: threshold outside [0, 1]");
  if (plan.attempt_factor < 1) throw std::invalid_argument("augment: attempt_factor < 1");
  for (int c : plan.per_class)
    if (c < 0) throw std::invalid_argument("augment: negative target count");
  if (plan.cfg_w < 0.0) throw std::invalid_argument("augment: negative cfg weight");

  const DenoiserModel& feat = feature_model ? *feature_model : cond;
  const NoiseSchedule& s = cond.schedule();

  AugmentResult out;
  for (int k = 0; k < cond.num_classes(); ++k) {
    const int target = plan.per_class[k];
    if (target == 0) continue;
    const long budget = static_cast<long>(plan.attempt_factor) * target;

    std::vector<double> scores;  // one per consumed candidate
    long accepted = 0;
    for (int batch = 0; accepted < target && static_cast<long>(scores.size()) < budget;
         ++batch) {
      SamplerConfig cfg = base;
      cfg.chains = static_cast<int>(std::min<long>(kGenChunk, budget - scores.size()));
      cfg.record_trace = false;
      // w = 0 is plain conditional sampling; skip the extra uncond pass.
      cfg.cfg_w = plan.cfg_w > 0.0 ? std::optional<double>(plan.cfg_w) : std::nullopt;
      cfg.seed = mix_seed(mix_seed(plan.seed, static_cast<std::uint64_t>(k)),
                          static_cast<std::uint64_t>(batch));
      SampleResult res = sample_loop(cond, s, cfg, {}, k);
      for (int c = 0; c < cfg.chains && accepted < target; ++c) {
        Tensor x = unstack_row(res.samples, c);
        const double p = classifier_probability(feat, s, rej, x, k);
        scores.push_back(p);
        if (p >= plan.threshold) {
          DatasetRecord rec;
          rec.x = std::move(x);
          rec.class_label = k;
          out.synthetic.records.push_back(std::move(rec));
          ++accepted;
        }
      }
    }

    FilterResult fr = rejection_filter(scores, plan.threshold);
    ClassGenReport rep;
    rep.class_id = k;
    rep.target = target;
    rep.accepted = accepted;
    rep.attempted = static_cast<long>(scores.size());
    rep.acceptance_rate = fr.acceptance_rate;
    if (accepted < target) out.shortfall = true;
    out.report.push_back(rep);
  }
  return out;
}

}  // namespace dg
