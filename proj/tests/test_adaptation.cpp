#include <cmath>
#include <optional>
#include <vector>

#include "doctest.h"

#include "dg/adaptation.hpp"
#include "dg/data.hpp"
#include "dg/gmm.hpp"
#include "dg/mlp.hpp"
#include "dg/rng.hpp"
#include "dg/samplers.hpp"

using namespace dg;

namespace {

// One lightly trained unconditional model shared by the suite; three
// hidden layers so the rejection classifier's default taps exist.
struct Fixture {
  NoiseSchedule s = build_linear(30, 1e-3, 0.08);
  GmmSpec gmm = GmmSpec::symmetric_pair(2.0, 2);
  Dataset labeled = gen_gmm_dataset(gmm, 200, 31);
  MlpDenoiser uncond{2, s, 23, {24, 24, 24}};

  Fixture() {
    TrainConfig tc;
    tc.steps = 400;
    tc.batch = 32;
    tc.lr = 1e-3;
    tc.seed = 5;
    train_denoiser(uncond, labeled.xs(), tc);
  }
};

Fixture& fix() {
  static Fixture f;
  return f;
}

SamplerConfig quick_sampler() {
  SamplerConfig cfg;
  cfg.method = SamplerMethod::ddim;
  cfg.steps = uniform_steps(30, 6);
  return cfg;
}

}  // namespace

TEST_SUITE("adaptation") {

TEST_CASE("zero-step finetune: null token reproduces the base model bit-exactly") {
  auto& f = fix();
  FinetuneConfig cfg;
  cfg.steps = 0;
  cfg.seed = 3;
  MlpDenoiser cond = finetune_conditional(f.uncond, f.labeled, 2, cfg);
  CHECK(cond.has_label_table());
  CHECK(cond.num_classes() == 2);

  Rng rng(11);
  for (int rep = 0; rep < 4; ++rep) {
    Tensor x({2}, {static_cast<float>(rng.next_normal()), static_cast<float>(rng.next_normal())});
    const int t = 1 + static_cast<int>(rng.next_index(30));
    Tensor base = f.uncond.predict_epsilon(x, t);
    Tensor null_tok = cond.predict_epsilon(x, t);  // no label -> null row (zero)
    CHECK(null_tok.values() == base.values());
    // a class row is random, so conditioning must actually change the output
    Tensor with_label = cond.predict_epsilon(x, t, 0);
    CHECK(with_label.values() != base.values());
  }
}

TEST_CASE("finetune input validation") {
  auto& f = fix();
  FinetuneConfig cfg;
  cfg.steps = 0;
  MlpDenoiser cond = finetune_conditional(f.uncond, f.labeled, 2, cfg);
  CHECK_THROWS(finetune_conditional(cond, f.labeled, 2, cfg));  // table already attached
  CHECK_THROWS(finetune_conditional(f.uncond, Dataset{}, 2, cfg));
  CHECK_THROWS(finetune_conditional(f.uncond, f.labeled, 0, cfg));
  CHECK_THROWS(finetune_conditional(f.uncond, f.labeled, 1, cfg));  // labels reach 1

  FinetuneConfig bad = cfg;
  bad.label_dropout = 1.0;
  CHECK_THROWS(finetune_conditional(f.uncond, f.labeled, 2, bad));
  bad.label_dropout = -0.1;
  CHECK_THROWS(finetune_conditional(f.uncond, f.labeled, 2, bad));
}

TEST_CASE("finetune is deterministic and reports the loss curve") {
  auto& f = fix();
  FinetuneConfig cfg;
  cfg.steps = 30;
  cfg.batch = 16;
  cfg.lr = 1e-3;
  cfg.seed = 9;
  cfg.label_dropout = 0.3;

  std::vector<double> losses_a, losses_b;
  MlpDenoiser a = finetune_conditional(f.uncond, f.labeled, 2, cfg, &losses_a);
  MlpDenoiser b = finetune_conditional(f.uncond, f.labeled, 2, cfg, &losses_b);
  CHECK(losses_a.size() == 30);
  for (double v : losses_a) CHECK(std::isfinite(v));
  CHECK(losses_a == losses_b);
  CHECK(a.label_table == b.label_table);
  CHECK(a.stack.layers[0].w == b.stack.layers[0].w);

  FinetuneConfig other = cfg;
  other.seed = 10;
  std::vector<double> losses_c;
  finetune_conditional(f.uncond, f.labeled, 2, other, &losses_c);
  CHECK(losses_a != losses_c);
}

TEST_CASE("rejection classifier: paired-timestep features, decent accuracy") {
  auto& f = fix();
  CHECK_THROWS(train_rejection_classifier(f.uncond, f.s, f.labeled.xs(), f.labeled.labels(), 2,
                                          {12, 12}, 10, 1));

  GuidanceClassifier rej = train_rejection_classifier(f.uncond, f.s, f.labeled.xs(),
                                                      f.labeled.labels(), 2, {5, 20}, 300, 13);
  CHECK(rej.t_feats == std::vector<int>{5, 20});
  CHECK(rej.num_classes == 2);
  CHECK(rej.cells == 1);
  // two concatenated bundles, each over taps {1, 2} of the 24-wide trunk
  CHECK(rej.head.in_dim() == 2 * (24 + 24));
  CHECK(classifier_accuracy(f.uncond, f.s, rej, f.labeled.xs(), f.labeled.labels(), {}) >= 0.9);
}

TEST_CASE("augment: threshold zero accepts every candidate exactly") {
  auto& f = fix();
  FinetuneConfig fc;
  fc.steps = 60;
  fc.batch = 16;
  fc.seed = 21;
  MlpDenoiser cond = finetune_conditional(f.uncond, f.labeled, 2, fc);
  GuidanceClassifier rej = train_rejection_classifier(f.uncond, f.s, f.labeled.xs(),
                                                      f.labeled.labels(), 2, {5, 20}, 200, 13);

  AugmentPlan plan;
  plan.per_class = {3, 2};
  plan.threshold = 0.0;
  plan.seed = 17;
  AugmentResult res = augment_dataset(cond, rej, quick_sampler(), plan);

  CHECK_FALSE(res.shortfall);
  CHECK(res.synthetic.size() == 5);
  REQUIRE(res.report.size() == 2);
  for (const auto& rep : res.report) {
    CHECK(rep.accepted == rep.target);
    CHECK(rep.attempted == rep.accepted);  // nothing consumed beyond the target
    CHECK(rep.acceptance_rate == 1.0);
  }
  for (std::size_t i = 0; i < res.synthetic.size(); ++i) {
    const auto& rec = res.synthetic.records[i];
    CHECK(rec.x.shape() == std::vector<std::size_t>{2});
    CHECK(rec.class_label == (i < 3 ? 0 : 1));  // class-major order
  }

  // classes with target zero are skipped entirely
  plan.per_class = {2, 0};
  AugmentResult only0 = augment_dataset(cond, rej, quick_sampler(), plan);
  REQUIRE(only0.report.size() == 1);
  CHECK(only0.report[0].class_id == 0);
}

TEST_CASE("augment: conservation, determinism, shortfall accounting") {
  auto& f = fix();
  FinetuneConfig fc;
  fc.steps = 60;
  fc.batch = 16;
  fc.seed = 21;
  MlpDenoiser cond = finetune_conditional(f.uncond, f.labeled, 2, fc);
  GuidanceClassifier rej = train_rejection_classifier(f.uncond, f.s, f.labeled.xs(),
                                                      f.labeled.labels(), 2, {5, 20}, 200, 13);

  AugmentPlan plan;
  plan.per_class = {6, 6};
  plan.threshold = 0.5;
  plan.attempt_factor = 4;
  plan.seed = 29;
  AugmentResult a = augment_dataset(cond, rej, quick_sampler(), plan);
  AugmentResult b = augment_dataset(cond, rej, quick_sampler(), plan);

  CHECK(a.synthetic.size() == b.synthetic.size());
  for (std::size_t i = 0; i < a.synthetic.size(); ++i)
    CHECK(a.synthetic.records[i].x.values() == b.synthetic.records[i].x.values());

  bool any_short = false;
  for (std::size_t i = 0; i < a.report.size(); ++i) {
    const auto& rep = a.report[i];
    CHECK(rep.accepted <= rep.target);
    CHECK(rep.attempted <= static_cast<long>(plan.attempt_factor) * rep.target);
    CHECK(rep.accepted <= rep.attempted);
    CHECK(rep.acceptance_rate ==
          doctest::Approx(static_cast<double>(rep.accepted) / rep.attempted));
    if (rep.accepted < rep.target) {
      any_short = true;
      // a missed target means the whole attempt budget was consumed
      CHECK(rep.attempted == static_cast<long>(plan.attempt_factor) * rep.target);
    }
    CHECK(b.report[i].accepted == rep.accepted);
    CHECK(b.report[i].attempted == rep.attempted);
  }
  CHECK(a.shortfall == any_short);

  // an unreachable bar: nothing accepted, budget fully spent, shortfall up
  AugmentPlan impossible = plan;
  impossible.threshold = 1.0;
  impossible.per_class = {2, 0};
  impossible.attempt_factor = 3;
  AugmentResult c = augment_dataset(cond, rej, quick_sampler(), impossible);
  CHECK(c.shortfall);
  REQUIRE(c.report.size() == 1);
  CHECK(c.report[0].accepted < 2);
  if (c.report[0].accepted == 0) {
    CHECK(c.report[0].attempted == 6);
    CHECK(c.synthetic.empty());
  }
}

TEST_CASE("augment: w = 0 candidates equal plain conditional sampling") {
  auto& f = fix();
  FinetuneConfig fc;
  fc.steps = 60;
  fc.batch = 16;
  fc.seed = 21;
  MlpDenoiser cond = finetune_conditional(f.uncond, f.labeled, 2, fc);
  GuidanceClassifier rej = train_rejection_classifier(f.uncond, f.s, f.labeled.xs(),
                                                      f.labeled.labels(), 2, {5, 20}, 200, 13);

  AugmentPlan plan;
  plan.per_class = {4, 0};
  plan.cfg_w = 0.0;
  plan.threshold = 0.0;
  plan.seed = 37;
  AugmentResult res = augment_dataset(cond, rej, quick_sampler(), plan);
  REQUIRE(res.synthetic.size() == 4);

  // replay the first generation chunk by hand: chunk size 64 capped by the
  // attempt budget, stream seed folded from (plan seed, class, batch)
  SamplerConfig direct = quick_sampler();
  direct.chains = 64;
  direct.seed = mix_seed(mix_seed(plan.seed, 0), 0);
  SampleResult raw = sample_loop(cond, f.s, direct, {}, 0);
  for (int i = 0; i < 4; ++i) {
    Tensor row = unstack_row(raw.samples, static_cast<std::size_t>(i));
    CHECK(res.synthetic.records[static_cast<std::size_t>(i)].x.values() == row.values());
  }
}

TEST_CASE("augment: explicit feature model equals the null-token default") {
  auto& f = fix();
  FinetuneConfig fc;
  fc.steps = 0;  // null branch still bit-identical to the base model
  fc.seed = 3;
  MlpDenoiser cond = finetune_conditional(f.uncond, f.labeled, 2, fc);
  GuidanceClassifier rej = train_rejection_classifier(f.uncond, f.s, f.labeled.xs(),
                                                      f.labeled.labels(), 2, {5, 20}, 200, 13);

  AugmentPlan plan;
  plan.per_class = {3, 3};
  plan.threshold = 0.3;
  plan.seed = 41;
  AugmentResult via_null = augment_dataset(cond, rej, quick_sampler(), plan);
  AugmentResult via_base = augment_dataset(cond, rej, quick_sampler(), plan, &f.uncond);

  CHECK(via_null.synthetic.size() == via_base.synthetic.size());
  for (std::size_t i = 0; i < via_null.synthetic.size(); ++i)
    CHECK(via_null.synthetic.records[i].x.values() == via_base.synthetic.records[i].x.values());
  for (std::size_t i = 0; i < via_null.report.size(); ++i) {
    CHECK(via_null.report[i].attempted == via_base.report[i].attempted);
    CHECK(via_null.report[i].accepted == via_base.report[i].accepted);
  }
}

TEST_CASE("augment plan validation") {
  auto& f = fix();
  FinetuneConfig fc;
  fc.steps = 0;
  MlpDenoiser cond = finetune_conditional(f.uncond, f.labeled, 2, fc);
  GuidanceClassifier rej = train_rejection_classifier(f.uncond, f.s, f.labeled.xs(),
                                                      f.labeled.labels(), 2, {5, 20}, 50, 13);

  AugmentPlan plan;
  plan.per_class = {1, 1};
  CHECK_THROWS(augment_dataset(f.uncond, rej, quick_sampler(), plan));  // no label table

  AugmentPlan bad = plan;
  bad.per_class = {1, 1, 1};
  CHECK_THROWS(augment_dataset(cond, rej, quick_sampler(), bad));
  bad = plan;
  bad.threshold = -0.1;
  CHECK_THROWS(augment_dataset(cond, rej, quick_sampler(), bad));
  bad.threshold = 1.5;
  CHECK_THROWS(augment_dataset(cond, rej, quick_sampler(), bad));
  bad = plan;
  bad.attempt_factor = 0;
  CHECK_THROWS(augment_dataset(cond, rej, quick_sampler(), bad));
  bad = plan;
  bad.per_class = {-1, 1};
  CHECK_THROWS(augment_dataset(cond, rej, quick_sampler(), bad));
  bad = plan;
  bad.cfg_w = -0.5;
  CHECK_THROWS(augment_dataset(cond, rej, quick_sampler(), bad));
}

}  // TEST_SUITE
