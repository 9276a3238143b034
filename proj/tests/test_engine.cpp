#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "simpro/engine.hpp"
#include "simpro/theory.hpp"

using namespace simpro;

namespace {

MixtureSpec triangle_spec(double radius = 3.0, double sigma = 1.0) {
  return MixtureSpec::circle(3, 2, radius, sigma);
}

TrainConfig small_config(int epochs, std::uint64_t seed) {
  TrainConfig cfg;
  cfg.hyper.tau = 1.0;
  cfg.hyper.threshold_t = 0.8;
  cfg.hyper.mu = 4.0;
  cfg.hyper.alpha = 1.0;
  cfg.hyper.batch_b = 16;
  cfg.hyper.lr_eta = 0.05;
  cfg.hyper.epochs = epochs;
  cfg.hyper.momentum_m = 0.5;
  cfg.hidden_dims = {16};
  cfg.seed = seed;
  return cfg;
}

struct SmallBench {
  Dataset labeled, unlabeled, test;
  TruthInfo truth;
};

SmallBench make_bench(std::uint64_t seed) {
  SmallBench b;
  auto spec = triangle_spec();
  b.labeled = synthesize(spec, {60, 20, 8}, SplitTag::labeled, seed);
  b.unlabeled = synthesize(spec, {30, 90, 280}, SplitTag::unlabeled, seed + 1);
  b.test = synthesize(spec, {40, 40, 40}, SplitTag::test, seed + 2);
  b.truth.unlabeled_prior = prior_from_counts({30, 90, 280});
  b.truth.class_frequency = prior_from_counts({90, 110, 288});
  return b;
}

}  // namespace

TEST_CASE("init_state starts uniform pi_u and labeled-frequency phi") {
  auto s = init_state(4, {1, 1, 1, 1}, 0.9);
  for (double p : s.unlabeled_prior.probs) CHECK(p == doctest::Approx(0.25).epsilon(1e-12));

  auto s2 = init_state(2, {3, 1}, 0.9);
  CHECK(s2.class_frequency[0] == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(s2.class_frequency[1] == doctest::Approx(0.25).epsilon(1e-12));
  for (double a : s2.pseudo_mass_epoch) CHECK(a == 0.0);
  for (auto c : s2.labeled_counts_epoch) CHECK(c == 0);
}

TEST_CASE("supervised-only step equals a plain adjusted-CE step") {
  auto cfg = small_config(1, 7);
  auto params = ModelParams::init({2, 16, 3}, 7);
  auto reference = params;
  auto state = init_state(3, {3, 2, 1}, 0.5);

  std::vector<double> x{0.5, -1.0, 1.5, 0.25, -0.5, 2.0};
  std::vector<int> y{0, 1, 2};
  std::vector<double> none;
  train_step(params, state, x, y, none, none, cfg, 0.05);

  auto direct = adjusted_ce_labeled(reference, x, y, state.class_frequency.floored(),
                                    cfg.hyper.tau);
  sgd_step(reference, direct, 0.05);
  for (std::size_t l = 0; l < params.layer_count(); ++l) {
    for (std::size_t i = 0; i < params.weights[l].size(); ++i)
      CHECK(params.weights[l][i] == doctest::Approx(reference.weights[l][i]).epsilon(1e-12));
  }
  CHECK(state.labeled_counts_epoch == std::vector<long long>{1, 1, 1});
}

TEST_CASE("an all-masked step leaves the pseudo accumulator untouched") {
  auto cfg = small_config(1, 8);
  cfg.hyper.threshold_t = 1.0;  // unreachable for a finite softmax
  auto params = ModelParams::init({2, 16, 3}, 8);
  auto state = init_state(3, {1, 1, 1}, 0.5);

  std::vector<double> weak{0.1, 0.2, -0.3, 0.4, 0.9, -0.9};
  std::vector<int> no_labels;
  std::vector<double> no_features;
  auto rec = train_step(params, state, no_features, no_labels, weak, weak, cfg, 0.05);
  CHECK(rec.kept_rows == 0);
  for (double a : state.pseudo_mass_epoch) CHECK(a == 0.0);
}

TEST_CASE("a small step on a fixed batch decreases the combined loss") {
  auto cfg = small_config(1, 9);
  cfg.hyper.threshold_t = 0.0;
  cfg.hyper.lr_eta = 1e-3;
  auto params = ModelParams::init({2, 8, 2}, 9);
  auto state = init_state(2, {4, 2}, 0.5);

  std::vector<double> xl{1.0, 0.0, -1.0, 0.5, 0.3, 0.3, -0.7, -0.2};
  std::vector<int> yl{0, 1, 0, 1};
  std::vector<double> weak{0.9, 0.1, -0.8, 0.2};
  std::vector<double> strong{1.1, -0.1, -0.6, 0.4};

  auto phi = state.class_frequency.floored();
  auto pi = state.unlabeled_prior.floored();
  auto before_l = adjusted_ce_labeled(params, xl, yl, phi, cfg.hyper.tau);
  auto before_u = unlabeled_loss(params, weak, strong, phi, pi, cfg.hyper.tau, 0.0);
  const double before = cfg.hyper.alpha * before_l.loss + before_u.grad.loss;

  train_step(params, state, xl, yl, weak, strong, cfg, 1e-3);

  auto after_l = adjusted_ce_labeled(params, xl, yl, phi, cfg.hyper.tau);
  auto after_u = unlabeled_loss(params, weak, strong, phi, pi, cfg.hyper.tau, 0.0);
  const double after = cfg.hyper.alpha * after_l.loss + after_u.grad.loss;
  CHECK(after < before);
}

TEST_CASE("epoch_update with zero momentum applies the closed-form updates") {
  auto state = init_state(2, {1, 1}, 0.0);
  state.pseudo_mass_epoch = {9.0, 1.0};
  state.labeled_counts_epoch = {5, 5};
  epoch_update(state);
  CHECK(state.class_frequency[0] == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(state.class_frequency[1] == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(state.unlabeled_prior[0] == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(state.unlabeled_prior[1] == doctest::Approx(0.1).epsilon(1e-12));
  for (double a : state.pseudo_mass_epoch) CHECK(a == 0.0);
  for (auto c : state.labeled_counts_epoch) CHECK(c == 0);
}

TEST_CASE("momentum one keeps the priors frozen in place") {
  auto state = init_state(2, {3, 1}, 0.0);
  state.momentum = 1.0 - 1e-16;  // validate() forbids exactly 1; emulate via carryover
  auto before_pi = state.unlabeled_prior.probs;
  auto before_phi = state.class_frequency.probs;
  state.pseudo_mass_epoch = {2.0, 8.0};
  state.labeled_counts_epoch = {1, 1};
  epoch_update(state);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(state.unlabeled_prior[i] == doctest::Approx(before_pi[i]).epsilon(1e-9));
    CHECK(state.class_frequency[i] == doctest::Approx(before_phi[i]).epsilon(1e-9));
  }
}

TEST_CASE("repeated updates converge geometrically to the accumulator mean") {
  auto state = init_state(2, {1, 1}, 0.5);
  for (int round = 0; round < 60; ++round) {
    state.pseudo_mass_epoch = {3.0, 1.0};
    state.labeled_counts_epoch = {0, 0};
    epoch_update(state);
  }
  CHECK(state.unlabeled_prior[0] == doctest::Approx(0.75).epsilon(1e-9));
}

TEST_CASE("a zero-mask epoch leaves pi_u unchanged but phi still updates") {
  auto state = init_state(2, {3, 1}, 0.0);
  auto before_pi = state.unlabeled_prior.probs;
  state.labeled_counts_epoch = {8, 2};
  epoch_update(state);
  CHECK(state.unlabeled_prior.probs == before_pi);
  CHECK(state.class_frequency[0] == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("one recorded epoch with m = 0 matches the closed-form oracle") {
  auto cfg = small_config(1, 10);
  cfg.hyper.threshold_t = 0.4;
  cfg.hyper.momentum_m = 0.0;
  auto params = ModelParams::init({2, 8, 3}, 10);
  auto state = init_state(3, {2, 1, 1}, 0.0);

  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  std::vector<double> xl(8), weak(12), strong(12);
  for (double& v : xl) v = g(rng);
  for (double& v : weak) v = g(rng);
  for (double& v : strong) v = g(rng);
  std::vector<int> yl{0, 0, 1, 2};

  // recompute what the step will use, before the parameters move
  auto probe = unlabeled_loss(params, weak, strong, state.class_frequency.floored(),
                              state.unlabeled_prior.floored(), cfg.hyper.tau,
                              cfg.hyper.threshold_t);
  std::vector<std::vector<double>> kept;
  for (std::size_t r = 0; r < probe.mask.size(); ++r)
    if (probe.mask[r])
      kept.push_back({probe.pseudo_labels[r * 3], probe.pseudo_labels[r * 3 + 1],
                      probe.pseudo_labels[r * 3 + 2]});

  train_step(params, state, xl, yl, weak, strong, cfg, 0.01);
  epoch_update(state);

  REQUIRE(!kept.empty());
  auto oracle = simpro::theory::closed_form_priors(yl, kept, 3);
  for (std::size_t y = 0; y < 3; ++y)
    CHECK(state.unlabeled_prior[y] == doctest::Approx(oracle.unlabeled->probs[y]).epsilon(1e-12));

  // phi blends labels and kept pseudo-mass by sample count
  std::vector<double> pooled(3, 0.0);
  for (int y : yl) pooled[static_cast<std::size_t>(y)] += 1.0;
  for (const auto& q : kept)
    for (std::size_t y = 0; y < 3; ++y) pooled[y] += q[y];
  const double total = static_cast<double>(yl.size() + kept.size());
  for (std::size_t y = 0; y < 3; ++y)
    CHECK(state.class_frequency[y] == doctest::Approx(pooled[y] / total).epsilon(1e-12));
}

TEST_CASE("anchor snap picks the nearest candidate with lower-index ties") {
  auto state = init_state(2, {1, 1}, 0.9);
  std::vector<ClassPrior> anchors{ClassPrior{{0.75, 0.25}}, ClassPrior{{0.5, 0.5}},
                                  ClassPrior{{0.25, 0.75}}};

  state.unlabeled_prior = ClassPrior{{0.75, 0.25}};
  auto snapped = anchor_snap(state, anchors, AnchorMetric::l1);
  CHECK(snapped.unlabeled_prior.probs == anchors[0].probs);
  CHECK(snapped.pi_frozen);

  state.unlabeled_prior = ClassPrior{{0.6, 0.4}};
  snapped = anchor_snap(state, anchors, AnchorMetric::l1);
  CHECK(snapped.unlabeled_prior.probs == anchors[1].probs);

  // exactly between anchors 0 and 1: distance 0.125 each, index 0 wins
  state.unlabeled_prior = ClassPrior{{0.625, 0.375}};
  snapped = anchor_snap(state, anchors, AnchorMetric::l1);
  CHECK(snapped.unlabeled_prior.probs == anchors[0].probs);
}

TEST_CASE("zero epochs return the initial parameters and empty history") {
  auto bench = make_bench(20);
  auto cfg = small_config(0, 21);
  TrainData data{&bench.labeled, &bench.unlabeled, &bench.test, AugmentationSpec{0.05, 0.5}};
  auto result = train(data, bench.truth, cfg);
  CHECK(result.history.empty());
  auto fresh = ModelParams::init({2, 16, 3}, 21);
  CHECK(result.params.weights == fresh.weights);
}

TEST_CASE("training is deterministic per seed") {
  auto bench = make_bench(30);
  auto cfg = small_config(3, 31);
  TrainData data{&bench.labeled, &bench.unlabeled, &bench.test, AugmentationSpec{0.05, 0.5}};
  auto a = train(data, bench.truth, cfg);
  auto b = train(data, bench.truth, cfg);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t e = 0; e < a.history.size(); ++e) {
    CHECK(a.history[e].top1 == b.history[e].top1);
    CHECK(a.history[e].loss_labeled == b.history[e].loss_labeled);
    CHECK(a.history[e].unlabeled_prior.probs == b.history[e].unlabeled_prior.probs);
  }
  CHECK(a.params.weights == b.params.weights);

  auto cfg2 = cfg;
  cfg2.seed = 32;
  auto c = train(data, bench.truth, cfg2);
  CHECK(a.params.weights != c.params.weights);
}

TEST_CASE("labeled-only regime drives phi to the empirical labeled frequency") {
  auto bench = make_bench(40);
  auto cfg = small_config(1, 41);
  cfg.hyper.threshold_t = 1.0;  // empty mask: nothing passes
  cfg.hyper.momentum_m = 0.0;
  TrainData data{&bench.labeled, &bench.unlabeled, &bench.test, AugmentationSpec{0.05, 0.5}};
  auto result = train(data, bench.truth, cfg);

  auto counts = bench.labeled.label_counts();
  auto expected = prior_from_counts(counts);
  REQUIRE(result.history.size() == 1);
  for (std::size_t y = 0; y < 3; ++y)
    CHECK(result.history[0].class_frequency[y] ==
          doctest::Approx(expected[y]).epsilon(1e-9));
  CHECK(result.history[0].mask_rate == 0.0);
}

TEST_CASE("priors stay on the simplex across epochs") {
  auto bench = make_bench(50);
  auto cfg = small_config(6, 51);
  TrainData data{&bench.labeled, &bench.unlabeled, &bench.test, AugmentationSpec{0.05, 0.5}};
  auto result = train(data, bench.truth, cfg);
  for (const auto& rec : result.history) {
    CHECK(rec.unlabeled_prior.on_simplex(1e-9));
    CHECK(rec.class_frequency.on_simplex(1e-9));
    CHECK(rec.mask_rate >= 0.0);
    CHECK(rec.mask_rate <= 1.0);
  }
}

TEST_CASE("simpro_star freezes pi_u bit-identically after the snap") {
  auto bench = make_bench(60);
  auto cfg = small_config(8, 61);
  cfg.variant = Variant::simpro_star;
  cfg.anchor_warmup_epochs = 3;
  auto anchors = anchor_priors(3, 7.5);
  cfg.anchors = {anchors.consistent, anchors.uniform, anchors.reversed};
  TrainData data{&bench.labeled, &bench.unlabeled, &bench.test, AugmentationSpec{0.05, 0.5}};
  auto result = train(data, bench.truth, cfg);

  REQUIRE(result.history.size() == 8);
  const auto& frozen = result.history[2].unlabeled_prior.probs;
  bool is_anchor = frozen == anchors.consistent.probs || frozen == anchors.uniform.probs ||
                   frozen == anchors.reversed.probs;
  CHECK(is_anchor);
  for (std::size_t e = 3; e < 8; ++e)
    CHECK(result.history[e].unlabeled_prior.probs == frozen);
}

TEST_CASE("fixmatch baseline pins both priors to uniform") {
  auto bench = make_bench(70);
  auto cfg = small_config(3, 71);
  TrainData data{&bench.labeled, &bench.unlabeled, &bench.test, AugmentationSpec{0.05, 0.5}};
  auto result = fixmatch_baseline(data, bench.truth, cfg);
  for (const auto& rec : result.history) {
    for (double p : rec.unlabeled_prior.probs) CHECK(p == doctest::Approx(1.0 / 3).epsilon(1e-12));
    for (double p : rec.class_frequency.probs) CHECK(p == doctest::Approx(1.0 / 3).epsilon(1e-12));
  }

  auto again = fixmatch_baseline(data, bench.truth, cfg);
  CHECK(result.params.weights == again.params.weights);
}

TEST_CASE("the unlabeled prior estimate moves toward the sealed truth") {
  auto bench = make_bench(80);
  auto cfg = small_config(12, 81);
  cfg.hyper.threshold_t = 0.6;
  cfg.hyper.momentum_m = 0.7;
  TrainData data{&bench.labeled, &bench.unlabeled, &bench.test, AugmentationSpec{0.05, 0.5}};
  auto result = train(data, bench.truth, cfg);
  REQUIRE(result.history.size() == 12);
  CHECK(result.history.back().kl_pi_u < result.history.front().kl_pi_u);
  CHECK(result.history.back().kl_pi_u < 0.15);
}

TEST_CASE("eq-7-literal accumulation sums every pseudo-label") {
  auto cfg = small_config(1, 90);
  cfg.hyper.threshold_t = 0.99;  // keep the mask mostly empty
  cfg.accumulate_all_pseudo = true;
  cfg.hyper.momentum_m = 0.0;
  auto params = ModelParams::init({2, 8, 3}, 90);
  auto state = init_state(3, {1, 1, 1}, 0.0);

  std::vector<double> weak{0.3, -0.1, 0.7, 0.2, -0.4, 0.6};
  std::vector<int> no_labels;
  std::vector<double> no_feats;
  auto probe = unlabeled_loss(params, weak, weak, state.class_frequency.floored(),
                              state.unlabeled_prior.floored(), cfg.hyper.tau, 0.99);
  train_step(params, state, no_feats, no_labels, weak, weak, cfg, 0.01);

  double mass = 0.0;
  for (double a : state.pseudo_mass_epoch) mass += a;
  CHECK(mass == doctest::Approx(3.0).epsilon(1e-9));  // all rows counted, masked or not
  for (std::size_t y = 0; y < 3; ++y) {
    double expected = probe.pseudo_labels[y] + probe.pseudo_labels[3 + y] +
                      probe.pseudo_labels[6 + y];
    CHECK(state.pseudo_mass_epoch[y] == doctest::Approx(expected).epsilon(1e-9));
  }
}
