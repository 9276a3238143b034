#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "simpro/distributions.hpp"

namespace simpro {

/// Feed-forward classifier: tanh hidden layers, linear K-way output.
/// weights[l] is row-major (out x in) for layer l.
struct ModelParams {
  std::vector<int> layer_dims;  // input dim, hidden..., K
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;

  int input_dim() const { return layer_dims.front(); }
  int output_dim() const { return layer_dims.back(); }
  std::size_t layer_count() const { return weights.size(); }

  /// Glorot-uniform weights, zero biases. Deterministic per seed.
  static ModelParams init(std::vector<int> dims, std::uint64_t seed);
  static ModelParams zeros(std::vector<int> dims);
};

struct Hyperparams {
  double tau = 1.0;                // prior-adjustment exponent, >= 0
  double threshold_t = 0.95;       // pseudo-label confidence gate, in [0,1]
  double mu = 1.0;                 // unlabeled:labeled batch ratio, > 0
  double alpha = 1.0;              // labeled-loss scale, in (0,1]
  int batch_b = 64;                // labeled batch size, >= 1
  double lr_eta = 0.17;            // initial learning rate, > 0
  int epochs = 1;                  // >= 1 for training runs
  double momentum_m = 0.9;         // prior moving-average momentum, in [0,1)

  void validate() const;
};

/// Loss value plus exact gradients, shaped like the parameters.
struct GradReport {
  double loss = 0.0;
  std::vector<std::vector<double>> weight_grads;
  std::vector<std::vector<double>> bias_grads;

  static GradReport zeros_like(const ModelParams& p);
};

std::vector<double> logits(const ModelParams& params, std::span<const double> x);

/// Row-major batch forward; returns rows x K logits.
std::vector<double> logits_batch(const ModelParams& params, std::span<const double> features);

/// Mean cross-entropy over prior-adjusted logits f + tau*log(prior) with
/// soft targets, masked per row, divided by `denom` rows. Targets and mask
/// are treated as constants (no gradient flows through them).
GradReport masked_soft_ce(const ModelParams& params, std::span<const double> features,
                          std::span<const double> targets, std::span<const std::uint8_t> mask,
                          const ClassPrior& prior, double tau, std::size_t denom);

/// Supervised loss: mean adjusted cross-entropy against one-hot labels.
GradReport adjusted_ce_labeled(const ModelParams& params, std::span<const double> features,
                               std::span<const int> labels, const ClassPrior& class_frequency,
                               double tau);

/// Pseudo-label for one row of weak-view logits: softmax(f + tau*log(pi_u)).
std::vector<double> bayes_pseudo_labels(std::span<const double> weak_logits,
                                        const ClassPrior& unlabeled_prior, double tau);

struct UnlabeledLossResult {
  GradReport grad;
  std::vector<std::uint8_t> mask;     // one entry per row
  std::vector<double> pseudo_labels;  // rows x K, the targets actually used
  double mask_rate = 0.0;
};

/// Consistency loss over weak/strong pairs of the same samples. Pseudo-labels
/// come from the weak view (gradient-stopped); the trained prediction from
/// the strong view, adjusted by class_frequency^tau. Rows whose pseudo-label
/// confidence is below `threshold` are masked out of the mean, which divides
/// by the full batch size. hard_targets swaps the soft targets for argmax
/// one-hots. pseudo_tau overrides the exponent inside the pseudo-label
/// softmax (negative means: reuse tau).
UnlabeledLossResult unlabeled_loss(const ModelParams& params,
                                   std::span<const double> weak_features,
                                   std::span<const double> strong_features,
                                   const ClassPrior& class_frequency,
                                   const ClassPrior& unlabeled_prior, double tau,
                                   double threshold, bool hard_targets = false,
                                   double pseudo_tau = -1.0);

void sgd_step(ModelParams& params, const GradReport& grads, double lr);
void axpy_grads(GradReport& acc, const GradReport& g, double scale);  // acc += scale * g

/// Half-cosine decay from eta0 at step 0 to 0 at total_steps.
double cosine_lr(double eta0, std::int64_t step, std::int64_t total_steps);

void save_model(const ModelParams& params, const std::string& path);
ModelParams load_model(const std::string& path);

}  // namespace simpro
