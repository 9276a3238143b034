#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "simpro/distributions.hpp"

namespace simpro {

/// Per-class isotropic Gaussians sharing one feature space. All splits of a
/// benchmark are drawn from the same spec, so they share P(x|y) by
/// construction and differ only in class frequencies.
struct MixtureSpec {
  int k = 2;
  int dim = 2;
  std::vector<std::vector<double>> means;  // K rows of length dim
  std::vector<double> sigmas;              // per-class isotropic stddev, > 0

  void validate() const;

  /// K means evenly spaced on a circle of the given radius (dims beyond the
  /// first two are zero), one shared sigma.
  static MixtureSpec circle(int k, int dim, double radius, double sigma);
};

enum class SplitTag { labeled, unlabeled, test };

std::string to_string(SplitTag s);

struct Dataset {
  std::vector<double> features;  // row-major, size() == rows * dim
  int dim = 0;
  int num_classes = 0;
  std::vector<int> labels;  // empty iff split == unlabeled
  SplitTag split = SplitTag::labeled;

  // Ground truth for synthesized unlabeled splits. Never read by the
  // training path; evaluation only.
  std::vector<int> sealed_labels;

  std::size_t size() const { return dim == 0 ? 0 : features.size() / static_cast<std::size_t>(dim); }
  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
  }
  bool has_labels() const { return !labels.empty(); }

  std::vector<int> label_counts() const;
};

/// Additive Gaussian-noise augmentation. Weak noise keeps the pseudo-label
/// view close to the clean sample; strong noise perturbs the trained view.
struct AugmentationSpec {
  double sigma_weak = 0.05;
  double sigma_strong = 0.5;

  void validate() const;
};

enum class AugmentStrength { weak, strong };

/// Draw counts[k] samples from class k. Labeled/test splits carry labels;
/// the unlabeled split hides them in sealed_labels. Deterministic in
/// (spec, counts, seed).
Dataset synthesize(const MixtureSpec& spec, const std::vector<int>& counts, SplitTag split,
                   std::uint64_t seed);

std::vector<double> augment(std::span<const double> x, const AugmentationSpec& spec,
                            AugmentStrength strength, std::uint64_t seed);
std::vector<double> augment(std::span<const double> x, const AugmentationSpec& spec,
                            AugmentStrength strength, std::mt19937_64& rng);

/// CSV with header f0,...,f{dim-1}[,label]. A label column makes a labeled
/// dataset (num_classes = max label + 1 unless expected_classes is given).
Dataset load_csv(const std::string& path, std::optional<int> expected_classes = std::nullopt);

/// Inverse of load_csv. Unlabeled datasets are written without the label
/// column; pass truth_path to emit the sealed labels as a one-column sidecar.
void save_csv(const Dataset& ds, const std::string& path,
              const std::string& truth_path = "");

/// Uniform subset: min over classes of the available count, per class,
/// sampled without replacement. Rejects datasets with an empty class.
Dataset balanced_resample(const Dataset& ds, std::uint64_t seed);

}  // namespace simpro
