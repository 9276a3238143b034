#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "simpro/data.hpp"
#include "simpro/distributions.hpp"
#include "simpro/metrics.hpp"
#include "simpro/model.hpp"

namespace simpro {

/// Prior state carried across the EM loop. The per-epoch accumulators are
/// filled by train_step and folded into the priors by epoch_update.
struct EmState {
  ClassPrior unlabeled_prior;                // pi_u
  ClassPrior class_frequency;                // phi
  std::vector<double> pseudo_mass_epoch;     // running sum of kept pseudo-labels
  std::vector<long long> labeled_counts_epoch;
  double momentum = 0.9;
  bool pi_frozen = false;   // anchor-snapped or baseline-pinned pi_u
  bool phi_frozen = false;  // baseline-pinned phi

  int num_classes() const { return static_cast<int>(unlabeled_prior.size()); }
};

enum class Variant { simpro, simpro_star, fixmatch };
enum class AnchorMetric { l1, kl };

Variant variant_from_string(const std::string& s);
std::string to_string(Variant v);

/// Which estimated distributions the loop consumes. Switching one off
/// replaces it with the uniform prior at the point of use.
struct AblationFlags {
  bool estimate_in_e_step = true;  // pi_u inside the pseudo-label softmax
  bool estimate_in_m_step = true;  // phi inside both adjusted losses
};

struct TrainConfig {
  Hyperparams hyper;
  AblationFlags ablation;
  Variant variant = Variant::simpro;
  std::vector<int> hidden_dims{32};
  int anchor_warmup_epochs = 5;          // simpro_star: snap after this many epochs
  AnchorMetric anchor_metric = AnchorMetric::l1;
  std::vector<ClassPrior> anchors;       // candidate priors for simpro_star
  bool accumulate_all_pseudo = false;    // sum q over every sample, not only kept ones
  bool pseudo_tau_one = false;           // exponent 1 inside the pseudo-label softmax
  std::uint64_t seed = 0;

  void validate() const;
};

struct StepRecord {
  double loss_labeled = 0.0;
  double loss_unlabeled = 0.0;
  std::size_t unlabeled_rows = 0;
  std::size_t kept_rows = 0;
};

struct TrainData {
  const Dataset* labeled = nullptr;
  const Dataset* unlabeled = nullptr;
  const Dataset* test = nullptr;  // evaluated with the uniform decision rule
  AugmentationSpec augmentation;
};

/// Sealed ground truth for evaluation. Never feeds back into training.
struct TruthInfo {
  std::optional<ClassPrior> unlabeled_prior;
  std::optional<ClassPrior> class_frequency;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochRecord> history;
};

/// pi_u starts uniform, phi at the labeled class frequency, accumulators at
/// zero.
EmState init_state(int k, const std::vector<int>& labeled_counts, double momentum);

/// One gradient step on alpha * labeled loss + unlabeled loss, plus the
/// pseudo-label bookkeeping. Does not touch pi_u or phi.
StepRecord train_step(ModelParams& params, EmState& state,
                      std::span<const double> labeled_features, std::span<const int> labels,
                      std::span<const double> weak_features,
                      std::span<const double> strong_features, const TrainConfig& config,
                      double lr);

/// Fold the epoch accumulators into the priors:
///   phi  <- m*phi  + (1-m) * (pseudo_mass + labeled_counts) / total
///   pi_u <- m*pi_u + (1-m) * pseudo_mass / sum(pseudo_mass)
/// A zero pseudo-mass epoch leaves pi_u unchanged; phi still absorbs the
/// labeled counts. Accumulators reset afterwards.
void epoch_update(EmState& state);

/// Replace pi_u by the nearest candidate prior and freeze it. Ties pick the
/// lowest-index candidate.
EmState anchor_snap(const EmState& state, std::span<const ClassPrior> anchors,
                    AnchorMetric metric);

/// Full training loop: per-epoch shuffled batches, cosine learning rate,
/// epoch_update at each epoch boundary, evaluation on the test split.
/// Deterministic given config.seed.
TrainResult train(const TrainData& data, const TruthInfo& truth, const TrainConfig& config);

/// Uniform-prior hard-pseudo-label baseline: same loop with both estimates
/// pinned to uniform and argmax targets.
TrainResult fixmatch_baseline(const TrainData& data, const TruthInfo& truth, TrainConfig config);

}  // namespace simpro
