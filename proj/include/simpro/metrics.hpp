#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "simpro/data.hpp"
#include "simpro/distributions.hpp"
#include "simpro/model.hpp"

namespace simpro {

struct EvalReport {
  double top1 = 0.0;
  std::vector<double> per_class;
  double kl_pi_u = 0.0;
  double kl_phi = 0.0;
  double mask_rate = 0.0;
};

/// One row of the training history.
struct EpochRecord {
  int epoch = 0;
  double loss_labeled = 0.0;
  double loss_unlabeled = 0.0;
  double mask_rate = 0.0;
  ClassPrior unlabeled_prior;  // pi_u snapshot at the epoch boundary
  ClassPrior class_frequency;  // phi snapshot
  double top1 = 0.0;
  double kl_pi_u = 0.0;  // divergence of the snapshots from the sealed truth,
  double kl_phi = 0.0;   // NaN when the truth is unknown
};

/// Top-1 and per-class accuracy of the uniform-prior decision rule
/// argmax_y f(x, y). Passing a prior switches to the prior-weighted rule
/// argmax_y log(prior_y) + f(x, y) for imbalanced test sets.
std::pair<double, std::vector<double>> top1_accuracy(const ModelParams& params,
                                                     const Dataset& dataset,
                                                     const ClassPrior* prior = nullptr);

/// KL divergence sum p log(p/q) with both arguments floored at 1e-8 and
/// renormalized, so early near-degenerate estimates stay finite.
double kl_divergence(const ClassPrior& p, const ClassPrior& q);

/// CSV history (header epoch,loss_l,loss_u,mask_rate,top1,kl_pi_u,kl_phi)
/// plus a JSON summary holding the final epoch and a config echo.
void write_history(std::span<const EpochRecord> records, const std::string& path_csv,
                   const std::string& path_json,
                   const nlohmann::json& config_echo = nlohmann::json::object());

/// Parse a CSV produced by write_history (prior snapshots are not part of
/// the CSV format and come back empty).
std::vector<EpochRecord> read_history_csv(const std::string& path_csv);

}  // namespace simpro
