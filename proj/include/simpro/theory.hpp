#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "simpro/data.hpp"
#include "simpro/distributions.hpp"

namespace simpro::theory {

/// 1-D two-class Gaussian decision problem with labels {+1, -1}.
/// Priors are indexed [0] = +1, [1] = -1; the test-time class mix is uniform.
struct BinaryGaussianCase {
  double mean_pos = 1.0;
  double mean_neg = -1.0;
  double sigma = 1.0;
  ClassPrior phi_star{{0.5, 0.5}};  // frequency vector the data was generated with
  ClassPrior phi_hat{{0.5, 0.5}};   // estimated frequency driving the decision rule

  void validate() const;
};

/// Prior-dependent part of the expected complete-data log-likelihood:
/// sum_i log pi_l[y_i] + sum_j sum_y q_jy log pi_u[y].
double prior_log_likelihood(const ClassPrior& pi_l, const ClassPrior& pi_u,
                            std::span<const int> labels,
                            std::span<const std::vector<double>> pseudo_labels);

struct PriorEstimates {
  std::optional<ClassPrior> labeled;
  std::optional<ClassPrior> unlabeled;
};

/// Closed-form maximizer of prior_log_likelihood: empirical label frequency
/// and the mean of the soft pseudo-labels.
PriorEstimates closed_form_priors(std::span<const int> labels,
                                  std::span<const std::vector<double>> pseudo_labels, int k);

/// Derivative-independent check of the closed form: coarse simplex grid
/// followed by projected-gradient ascent on the log-likelihood.
PriorEstimates brute_force_priors(std::span<const int> labels,
                                  std::span<const std::vector<double>> pseudo_labels, int k,
                                  int grid_per_axis = 21);

/// Bayes posterior from the true class densities and a prior.
std::vector<double> exact_posterior(const MixtureSpec& spec, const ClassPrior& prior,
                                    std::span<const double> x);

/// Adaptive Simpson quadrature. Panels are accepted when the two-half
/// refinement agrees within tol; the returned value omits the Richardson
/// correction so a nonnegative integrand cannot integrate to a negative.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol,
                        int max_depth = 48);

struct RegretResult {
  double regret = 0.0;      // excess decision error of the phi_hat rule
  double bound = 0.0;       // |phi_hat - phi_star| / (2 phi*_+ phi*_-)
  double error_hat = 0.0;   // decision error under the estimated frequencies
  double error_star = 0.0;  // decision error under the true frequencies
};

/// Decision error of the likelihood-ratio rule l(x) >= lambda on a uniform
/// test mix, evaluated by quadrature for lambda from phi_hat and lambda = 1,
/// plus the first-order bound on their difference.
RegretResult regret_and_bound(const BinaryGaussianCase& c);

struct VerifySection {
  std::string name;
  bool passed = false;
  int cases = 0;
  double worst = 0.0;  // largest observed deviation / violation margin
  std::string detail;  // failing case serialized, empty when passed
};

struct VerifyOptions {
  std::uint64_t seed = 1234;
  int prior_instances = 60;
  int regret_instances = 200;
  // test hook: scales one coordinate of the closed-form unlabeled prior to
  // prove the oracle battery detects a wrong closed form
  double perturb_closed_form = 0.0;
};

struct VerifyReport {
  std::vector<VerifySection> sections;
  bool all_passed() const;
};

VerifyReport run_verification(const VerifyOptions& opts);

}  // namespace simpro::theory
