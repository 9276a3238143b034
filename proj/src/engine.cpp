#include "simpro/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace simpro {

Variant variant_from_string(const std::string& s) {
  if (s == "simpro") return Variant::simpro;
  if (s == "simpro_star" || s == "simpro-star") return Variant::simpro_star;
  if (s == "fixmatch") return Variant::fixmatch;
  throw std::invalid_argument("unknown variant: " + s);
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::simpro: return "simpro";
    case Variant::simpro_star: return "simpro_star";
    case Variant::fixmatch: return "fixmatch";
  }
  return "?";
}

void TrainConfig::validate() const {
  hyper.validate();
  for (int d : hidden_dims)
    if (d < 1) throw std::invalid_argument("TrainConfig: hidden dims must be >= 1");
  if (variant == Variant::simpro_star) {
    if (anchor_warmup_epochs < 1)
      throw std::invalid_argument("TrainConfig: anchor_warmup_epochs must be >= 1");
    if (anchors.empty())
      throw std::invalid_argument("TrainConfig: simpro_star needs candidate anchors");
  }
}

EmState init_state(int k, const std::vector<int>& labeled_counts, double momentum) {
  if (k < 2) throw std::invalid_argument("init_state: k must be >= 2");
  EmState s;
  s.unlabeled_prior = ClassPrior::uniform(static_cast<std::size_t>(k));
  s.class_frequency = prior_from_counts(labeled_counts);
  s.pseudo_mass_epoch.assign(static_cast<std::size_t>(k), 0.0);
  s.labeled_counts_epoch.assign(static_cast<std::size_t>(k), 0);
  s.momentum = momentum;
  return s;
}

StepRecord train_step(ModelParams& params, EmState& state,
                      std::span<const double> labeled_features, std::span<const int> labels,
                      std::span<const double> weak_features,
                      std::span<const double> strong_features, const TrainConfig& config,
                      double lr) {
  const auto k = static_cast<std::size_t>(params.output_dim());
  const auto uniform = ClassPrior::uniform(k);
  const ClassPrior phi =
      config.ablation.estimate_in_m_step ? state.class_frequency.floored() : uniform;
  const ClassPrior pi =
      config.ablation.estimate_in_e_step ? state.unlabeled_prior.floored() : uniform;
  const bool hard = config.variant == Variant::fixmatch;
  const double pseudo_tau = config.pseudo_tau_one ? 1.0 : -1.0;

  StepRecord rec;
  GradReport total = GradReport::zeros_like(params);

  if (!labels.empty()) {
    auto labeled = adjusted_ce_labeled(params, labeled_features, labels, phi, config.hyper.tau);
    rec.loss_labeled = labeled.loss;
    axpy_grads(total, labeled, config.hyper.alpha);
    for (int y : labels) ++state.labeled_counts_epoch[static_cast<std::size_t>(y)];
  }

  if (!weak_features.empty()) {
    auto unl = unlabeled_loss(params, weak_features, strong_features, phi, pi, config.hyper.tau,
                              config.hyper.threshold_t, hard, pseudo_tau);
    rec.loss_unlabeled = unl.grad.loss;
    rec.unlabeled_rows = unl.mask.size();
    axpy_grads(total, unl.grad, 1.0);
    for (std::size_t r = 0; r < unl.mask.size(); ++r) {
      if (unl.mask[r]) ++rec.kept_rows;
      if (unl.mask[r] || config.accumulate_all_pseudo)
        for (std::size_t y = 0; y < k; ++y)
          state.pseudo_mass_epoch[y] += unl.pseudo_labels[r * k + y];
    }
  }

  sgd_step(params, total, lr);
  return rec;
}

void epoch_update(EmState& state) {
  const auto k = state.pseudo_mass_epoch.size();
  const double m = state.momentum;

  double pseudo_total = std::accumulate(state.pseudo_mass_epoch.begin(),
                                        state.pseudo_mass_epoch.end(), 0.0);
  long long labeled_total = std::accumulate(state.labeled_counts_epoch.begin(),
                                            state.labeled_counts_epoch.end(), 0LL);

  if (!state.phi_frozen && pseudo_total + static_cast<double>(labeled_total) > 0.0) {
    std::vector<double> blend(k);
    for (std::size_t y = 0; y < k; ++y)
      blend[y] = m * state.class_frequency[y] +
                 (1.0 - m) * (state.pseudo_mass_epoch[y] +
                              static_cast<double>(state.labeled_counts_epoch[y])) /
                     (pseudo_total + static_cast<double>(labeled_total));
    state.class_frequency = ClassPrior::from_weights(std::move(blend));
  }

  if (!state.pi_frozen && pseudo_total > 0.0) {
    std::vector<double> blend(k);
    for (std::size_t y = 0; y < k; ++y)
      blend[y] =
          m * state.unlabeled_prior[y] + (1.0 - m) * state.pseudo_mass_epoch[y] / pseudo_total;
    state.unlabeled_prior = ClassPrior::from_weights(std::move(blend));
  }

  std::fill(state.pseudo_mass_epoch.begin(), state.pseudo_mass_epoch.end(), 0.0);
  std::fill(state.labeled_counts_epoch.begin(), state.labeled_counts_epoch.end(), 0LL);
}

EmState anchor_snap(const EmState& state, std::span<const ClassPrior> anchors,
                    AnchorMetric metric) {
  if (anchors.empty()) throw std::invalid_argument("anchor_snap: no anchors");
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_idx = 0;
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    double d = 0.0;
    if (metric == AnchorMetric::l1) {
      for (std::size_t y = 0; y < state.unlabeled_prior.size(); ++y)
        d += std::abs(state.unlabeled_prior[y] - anchors[i][y]);
    } else {
      d = kl_divergence(state.unlabeled_prior, anchors[i]);
    }
    if (d < best) {
      best = d;
      best_idx = i;
    }
  }
  EmState snapped = state;
  snapped.unlabeled_prior = anchors[best_idx];
  snapped.pi_frozen = true;
  return snapped;
}

namespace {

struct BatchPlan {
  std::vector<std::size_t> labeled_order;
  std::vector<std::size_t> unlabeled_order;
  std::size_t steps = 0;
  std::size_t labeled_batch = 0;
  std::size_t unlabeled_batch = 0;
};

BatchPlan plan_epoch(std::size_t n_labeled, std::size_t n_unlabeled, const Hyperparams& h,
                     std::mt19937_64& rng) {
  BatchPlan plan;
  plan.labeled_order.resize(n_labeled);
  std::iota(plan.labeled_order.begin(), plan.labeled_order.end(), 0u);
  std::shuffle(plan.labeled_order.begin(), plan.labeled_order.end(), rng);
  plan.unlabeled_order.resize(n_unlabeled);
  std::iota(plan.unlabeled_order.begin(), plan.unlabeled_order.end(), 0u);
  std::shuffle(plan.unlabeled_order.begin(), plan.unlabeled_order.end(), rng);

  plan.labeled_batch = static_cast<std::size_t>(h.batch_b);
  plan.unlabeled_batch =
      n_unlabeled == 0 ? 0
                       : std::max<std::size_t>(
                             1, static_cast<std::size_t>(std::llround(h.mu * h.batch_b)));
  plan.steps = (n_labeled + plan.labeled_batch - 1) / plan.labeled_batch;
  return plan;
}

std::vector<double> gather_rows(const Dataset& ds, std::span<const std::size_t> order,
                                std::size_t begin, std::size_t count, bool wrap) {
  std::vector<double> out;
  out.reserve(count * static_cast<std::size_t>(ds.dim));
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t pos = wrap ? (begin + i) % order.size() : begin + i;
    auto row = ds.row(order[pos]);
    out.insert(out.end(), row.begin(), row.end());
  }
  return out;
}

std::vector<double> augment_rows(std::span<const double> rows, int dim,
                                 const AugmentationSpec& spec, AugmentStrength strength,
                                 std::mt19937_64& rng) {
  std::vector<double> out;
  out.reserve(rows.size());
  const std::size_t n = rows.size() / static_cast<std::size_t>(dim);
  for (std::size_t r = 0; r < n; ++r) {
    auto piece = augment(rows.subspan(r * static_cast<std::size_t>(dim),
                                      static_cast<std::size_t>(dim)),
                         spec, strength, rng);
    out.insert(out.end(), piece.begin(), piece.end());
  }
  return out;
}

double kl_or_nan(const ClassPrior& estimate, const std::optional<ClassPrior>& truth) {
  if (!truth) return std::numeric_limits<double>::quiet_NaN();
  return kl_divergence(estimate, *truth);
}

}  // namespace

TrainResult train(const TrainData& data, const TruthInfo& truth, const TrainConfig& config) {
  config.validate();
  if (!data.labeled || !data.unlabeled || !data.test)
    throw std::invalid_argument("train: all three splits are required");
  data.augmentation.validate();
  const Dataset& lab = *data.labeled;
  const Dataset& unl = *data.unlabeled;
  const Dataset& test = *data.test;
  if (lab.dim != unl.dim || lab.dim != test.dim)
    throw std::invalid_argument("train: feature dimensions differ across splits");
  if (!lab.has_labels()) throw std::invalid_argument("train: labeled split has no labels");

  const int k = lab.num_classes;
  std::vector<int> dims{lab.dim};
  dims.insert(dims.end(), config.hidden_dims.begin(), config.hidden_dims.end());
  dims.push_back(k);

  TrainResult result;
  result.params = ModelParams::init(dims, config.seed);
  EmState state = init_state(k, lab.label_counts(), config.hyper.momentum_m);
  if (config.variant == Variant::fixmatch) {
    state.unlabeled_prior = ClassPrior::uniform(static_cast<std::size_t>(k));
    state.class_frequency = ClassPrior::uniform(static_cast<std::size_t>(k));
    state.pi_frozen = true;
    state.phi_frozen = true;
  }

  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ull);
  const auto epochs = config.hyper.epochs;
  std::int64_t total_steps = 0;
  {
    const std::size_t per_epoch =
        (lab.size() + static_cast<std::size_t>(config.hyper.batch_b) - 1) /
        static_cast<std::size_t>(config.hyper.batch_b);
    total_steps = static_cast<std::int64_t>(per_epoch) * epochs;
  }

  std::int64_t global_step = 0;
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    auto plan = plan_epoch(lab.size(), unl.size(), config.hyper, rng);
    double sum_loss_l = 0.0, sum_loss_u = 0.0;
    std::size_t seen_u = 0, kept_u = 0;

    for (std::size_t step = 0; step < plan.steps; ++step) {
      const std::size_t lab_begin = step * plan.labeled_batch;
      const std::size_t lab_count = std::min(plan.labeled_batch, lab.size() - lab_begin);
      auto lab_rows = gather_rows(lab, plan.labeled_order, lab_begin, lab_count, false);
      auto lab_aug = augment_rows(lab_rows, lab.dim, data.augmentation, AugmentStrength::weak, rng);
      std::vector<int> lab_y(lab_count);
      for (std::size_t i = 0; i < lab_count; ++i)
        lab_y[i] = lab.labels[plan.labeled_order[lab_begin + i]];

      std::vector<double> weak_rows, strong_rows;
      if (unl.size() > 0) {
        auto unl_rows = gather_rows(unl, plan.unlabeled_order, step * plan.unlabeled_batch,
                                    plan.unlabeled_batch, true);
        weak_rows = augment_rows(unl_rows, unl.dim, data.augmentation, AugmentStrength::weak, rng);
        strong_rows =
            augment_rows(unl_rows, unl.dim, data.augmentation, AugmentStrength::strong, rng);
      }

      const double lr = cosine_lr(config.hyper.lr_eta, global_step, std::max<std::int64_t>(1, total_steps));
      auto rec = train_step(result.params, state, lab_aug, lab_y, weak_rows, strong_rows, config, lr);
      ++global_step;
      sum_loss_l += rec.loss_labeled;
      sum_loss_u += rec.loss_unlabeled;
      seen_u += rec.unlabeled_rows;
      kept_u += rec.kept_rows;
    }

    epoch_update(state);
    if (config.variant == Variant::simpro_star && epoch == config.anchor_warmup_epochs)
      state = anchor_snap(state, config.anchors, config.anchor_metric);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss_labeled = plan.steps ? sum_loss_l / static_cast<double>(plan.steps) : 0.0;
    rec.loss_unlabeled = plan.steps ? sum_loss_u / static_cast<double>(plan.steps) : 0.0;
    rec.mask_rate = seen_u ? static_cast<double>(kept_u) / static_cast<double>(seen_u) : 0.0;
    rec.unlabeled_prior = state.unlabeled_prior;
    rec.class_frequency = state.class_frequency;
    rec.top1 = top1_accuracy(result.params, test).first;
    rec.kl_pi_u = kl_or_nan(state.unlabeled_prior, truth.unlabeled_prior);
    rec.kl_phi = kl_or_nan(state.class_frequency, truth.class_frequency);
    result.history.push_back(std::move(rec));
  }
  return result;
}

TrainResult fixmatch_baseline(const TrainData& data, const TruthInfo& truth, TrainConfig config) {
  config.variant = Variant::fixmatch;
  config.ablation.estimate_in_e_step = false;
  config.ablation.estimate_in_m_step = false;
  return train(data, truth, config);
}

}  // namespace simpro
