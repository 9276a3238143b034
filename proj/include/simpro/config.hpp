#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "simpro/data.hpp"
#include "simpro/distributions.hpp"
#include "simpro/engine.hpp"

namespace simpro {

/// All validation problems of one config file, each as "field.path: message".
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

/// Minimal TOML reader covering the experiment schema: [section] headers,
/// key = value with integers, floats, booleans, quoted strings, and flat
/// arrays; '#' comments. Nested tables and multi-line values are out of
/// scope.
class TomlTable {
 public:
  static TomlTable parse_file(const std::string& path);
  static TomlTable parse_string(const std::string& text, const std::string& origin = "<string>");

  bool has(const std::string& section, const std::string& key) const;

  std::optional<double> number(const std::string& section, const std::string& key) const;
  std::optional<bool> boolean(const std::string& section, const std::string& key) const;
  std::optional<std::string> text(const std::string& section, const std::string& key) const;
  std::optional<std::vector<double>> numbers(const std::string& section,
                                             const std::string& key) const;

  /// keys present in the file but not consumed by the schema
  std::vector<std::string> unknown_keys(
      const std::map<std::string, std::vector<std::string>>& schema) const;

 private:
  struct Value {
    enum class Kind { number, boolean, text, array } kind;
    double num = 0.0;
    bool flag = false;
    std::string str;
    std::vector<double> arr;
  };
  std::map<std::string, std::map<std::string, Value>> sections_;
};

/// One experiment: the generating mixture, the three split profiles, the
/// augmentation magnitudes, training hyperparameters, variant switches, and
/// the seed list. A config file fully determines a run; every default is
/// echoed back into the JSON summary.
struct ExperimentConfig {
  MixtureSpec mixture;
  ImbalanceProfile labeled;
  ImbalanceProfile unlabeled;
  ImbalanceProfile test_profile;
  bool balance_test = true;
  AugmentationSpec augmentation;
  Hyperparams hyper;
  bool auto_mu = true;     // mu absent in the file: use M/N
  bool auto_alpha = true;  // alpha absent: use min(1, mu*N/M)
  Variant variant = Variant::simpro;
  AblationFlags ablation;
  std::vector<int> hidden_dims{32};
  int anchor_warmup_epochs = 5;
  AnchorMetric anchor_metric = AnchorMetric::l1;
  bool accumulate_all_pseudo = false;
  bool pseudo_tau_one = false;
  std::vector<std::uint64_t> seeds{1};
  std::string output_dir = "runs/out";

  static ExperimentConfig load(const std::string& path);
  static ExperimentConfig from_toml(const TomlTable& toml);

  nlohmann::json echo() const;
};

/// Everything train() needs for one seed, generated from the config.
struct Benchmark {
  Dataset labeled;
  Dataset unlabeled;
  Dataset test;
  TruthInfo truth;
  TrainConfig train;
  AugmentationSpec augmentation;
};

Benchmark build_benchmark(const ExperimentConfig& config, std::uint64_t seed);

}  // namespace simpro
