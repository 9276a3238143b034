#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace simpro {

/// Probability vector over K classes. Entries are nonnegative and sum to 1
/// (within 1e-9 after construction through the factory helpers).
struct ClassPrior {
  std::vector<double> probs;

  std::size_t size() const { return probs.size(); }
  double operator[](std::size_t k) const { return probs[k]; }

  static ClassPrior uniform(std::size_t k);
  static ClassPrior from_weights(std::vector<double> weights);

  /// True if entries are nonnegative and sum to 1 within tol.
  bool on_simplex(double tol = 1e-9) const;

  /// Raise entries below `floor` to `floor`, then renormalize. Used before
  /// any log(prior) so zero-mass classes stay finite.
  ClassPrior floored(double floor = 1e-8) const;
};

enum class Pattern { consistent, uniform, reversed, middle, head_tail };

Pattern pattern_from_string(const std::string& s);
std::string to_string(Pattern p);

/// Exponential class-count profile: K classes, `head_count` samples in the
/// largest class, max/min ratio `gamma`, arranged by `pattern`.
struct ImbalanceProfile {
  int k = 2;
  int head_count = 1;
  double gamma = 1.0;
  Pattern pattern = Pattern::consistent;
};

/// Per-class sample counts for a profile. Base counts follow
/// head_count * gamma^{-(k-1)/(K-1)} with round-half-up, clamped to >= 1,
/// then permuted by the profile's pattern.
std::vector<int> class_counts(const ImbalanceProfile& profile);

/// Normalized counts. Rejects all-zero and negative counts.
ClassPrior prior_from_counts(const std::vector<int>& counts);

/// The three candidate priors used for anchor matching: consistent,
/// uniform, reversed. Computed from the exact exponential weights so the
/// reversal/uniform identities hold without rounding artifacts.
struct AnchorSet {
  ClassPrior consistent;
  ClassPrior uniform;
  ClassPrior reversed;

  const ClassPrior& operator[](std::size_t i) const;
  static constexpr std::size_t count = 3;
};

AnchorSet anchor_priors(int k, double gamma);

}  // namespace simpro
