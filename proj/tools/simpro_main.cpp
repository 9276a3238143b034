#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "simpro/config.hpp"
#include "simpro/engine.hpp"
#include "simpro/metrics.hpp"
#include "simpro/theory.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct SeedOutcome {
  std::uint64_t seed;
  double top1 = 0.0;
  double kl_pi_u = 0.0;
};

struct RunStats {
  std::vector<SeedOutcome> per_seed;
  double top1_mean = 0.0;
  double top1_std = 0.0;  // population std, matching the mean+-std table convention
  double kl_mean = 0.0;
};

RunStats summarize(const std::vector<SeedOutcome>& outcomes) {
  RunStats stats;
  stats.per_seed = outcomes;
  if (outcomes.empty()) return stats;
  for (const auto& o : outcomes) {
    stats.top1_mean += o.top1;
    stats.kl_mean += o.kl_pi_u;
  }
  stats.top1_mean /= static_cast<double>(outcomes.size());
  stats.kl_mean /= static_cast<double>(outcomes.size());
  for (const auto& o : outcomes) {
    double d = o.top1 - stats.top1_mean;
    stats.top1_std += d * d;
  }
  stats.top1_std = std::sqrt(stats.top1_std / static_cast<double>(outcomes.size()));
  return stats;
}

RunStats run_all_seeds(const simpro::ExperimentConfig& config, const fs::path& out_dir,
                       bool quiet = false) {
  fs::create_directories(out_dir);
  std::vector<SeedOutcome> outcomes;
  for (std::uint64_t seed : config.seeds) {
    auto bench = simpro::build_benchmark(config, seed);
    simpro::TrainData data{&bench.labeled, &bench.unlabeled, &bench.test, bench.augmentation};
    auto result = simpro::train(data, bench.truth, bench.train);

    json echo = config.echo();
    echo["resolved"] = {{"seed", seed},
                        {"mu", bench.train.hyper.mu},
                        {"alpha", bench.train.hyper.alpha},
                        {"labeled_size", bench.labeled.size()},
                        {"unlabeled_size", bench.unlabeled.size()},
                        {"test_size", bench.test.size()}};
    const auto csv = out_dir / ("seed_" + std::to_string(seed) + "_history.csv");
    const auto js = out_dir / ("seed_" + std::to_string(seed) + "_summary.json");
    simpro::write_history(result.history, csv.string(), js.string(), echo);

    SeedOutcome o{seed, 0.0, 0.0};
    if (!result.history.empty()) {
      o.top1 = result.history.back().top1;
      o.kl_pi_u = result.history.back().kl_pi_u;
    }
    outcomes.push_back(o);
    if (!quiet)
      std::cout << "seed " << seed << ": top1=" << o.top1 << " kl_pi_u=" << o.kl_pi_u << "\n";
  }

  auto stats = summarize(outcomes);
  json summary;
  summary["config"] = config.echo();
  summary["top1_mean"] = stats.top1_mean;
  summary["top1_std"] = stats.top1_std;
  summary["kl_pi_u_mean"] = stats.kl_mean;
  json per_seed = json::array();
  for (const auto& o : stats.per_seed)
    per_seed.push_back({{"seed", o.seed}, {"top1", o.top1}, {"kl_pi_u", o.kl_pi_u}});
  summary["seeds"] = per_seed;
  std::ofstream out(out_dir / "summary.json");
  if (!out) throw std::runtime_error("cannot open " + (out_dir / "summary.json").string());
  out << summary.dump(2) << "\n";

  if (!quiet)
    std::cout << "mean top1 " << stats.top1_mean << " +- " << stats.top1_std << " over "
              << outcomes.size() << " seed(s)\n";
  return stats;
}

int cmd_run(const std::string& config_path, const std::optional<std::string>& out_override,
            const std::optional<std::uint64_t>& seed_override,
            const std::optional<std::string>& variant_override) {
  auto config = simpro::ExperimentConfig::load(config_path);
  if (seed_override) config.seeds = {*seed_override};
  if (variant_override) config.variant = simpro::variant_from_string(*variant_override);
  const fs::path out_dir = out_override ? *out_override : config.output_dir;
  run_all_seeds(config, out_dir);
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& axis,
              const std::vector<double>& values, const std::optional<std::string>& out_override) {
  if (values.empty()) {
    std::cerr << "sweep: empty value list\n";
    return kExitConfig;
  }
  auto base = simpro::ExperimentConfig::load(config_path);
  const fs::path out_dir = out_override ? fs::path(*out_override) : fs::path(base.output_dir);
  fs::create_directories(out_dir);

  std::ofstream csv(out_dir / "sweep.csv");
  if (!csv) throw std::runtime_error("cannot open " + (out_dir / "sweep.csv").string());
  csv << "axis_value,top1_mean,top1_std,kl_final\n";

  for (double value : values) {
    auto config = base;
    if (axis == "gamma_u") {
      config.unlabeled.gamma = value;
    } else if (axis == "threshold_t") {
      config.hyper.threshold_t = value;
    } else if (axis == "tau") {
      config.hyper.tau = value;
    } else if (axis == "momentum_m") {
      config.hyper.momentum_m = value;
    } else if (axis == "alpha") {
      config.hyper.alpha = value;
      config.auto_alpha = false;
    } else {
      std::cerr << "sweep: unknown axis '" << axis
                << "' (expected gamma_u|threshold_t|tau|momentum_m|alpha)\n";
      return kExitConfig;
    }
    std::ostringstream tag;
    tag << axis << "_" << value;
    std::cout << "sweep point " << tag.str() << "\n";
    auto stats = run_all_seeds(config, out_dir / tag.str(), true);
    csv << value << ',' << stats.top1_mean << ',' << stats.top1_std << ',' << stats.kl_mean
        << "\n";
  }
  if (!csv) throw std::runtime_error("sweep: write failed");
  std::cout << "sweep table written to " << (out_dir / "sweep.csv").string() << "\n";
  return 0;
}

int cmd_verify(const std::optional<std::string>& report_path, double perturb) {
  simpro::theory::VerifyOptions opts;
  opts.perturb_closed_form = perturb;
  auto report = simpro::theory::run_verification(opts);

  json j;
  j["all_passed"] = report.all_passed();
  json sections = json::array();
  for (const auto& sec : report.sections) {
    std::cout << (sec.passed ? "[PASS] " : "[FAIL] ") << sec.name << " (" << sec.cases
              << " cases, worst deviation " << sec.worst << ")\n";
    if (!sec.passed && !sec.detail.empty()) std::cout << "       " << sec.detail << "\n";
    sections.push_back({{"name", sec.name},
                        {"passed", sec.passed},
                        {"cases", sec.cases},
                        {"worst", sec.worst},
                        {"detail", sec.detail}});
  }
  j["sections"] = sections;
  if (report_path) {
    std::ofstream out(*report_path);
    if (!out) throw std::runtime_error("cannot open " + *report_path);
    out << j.dump(2) << "\n";
  }
  return report.all_passed() ? 0 : kExitRuntime;
}

int cmd_gen_data(const std::string& config_path, const std::optional<std::string>& out_override,
                 const std::optional<std::uint64_t>& seed_override) {
  auto config = simpro::ExperimentConfig::load(config_path);
  const std::uint64_t seed = seed_override ? *seed_override : config.seeds.front();
  const fs::path out_dir = out_override ? *out_override : config.output_dir;
  fs::create_directories(out_dir);

  auto bench = simpro::build_benchmark(config, seed);
  simpro::save_csv(bench.labeled, (out_dir / "labeled.csv").string());
  simpro::save_csv(bench.unlabeled, (out_dir / "unlabeled.csv").string(),
                   (out_dir / "unlabeled_truth.csv").string());
  simpro::save_csv(bench.test, (out_dir / "test.csv").string());
  std::cout << "wrote labeled/unlabeled/test CSVs to " << out_dir.string() << " (seed " << seed
            << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"simpro: long-tailed semi-supervised learning lab"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> variant;

  auto* run = app.add_subcommand("run", "train per the config, one run per seed");
  run->add_option("--config", config_path, "TOML experiment config")->required();
  run->add_option("--out", out_dir, "output directory (overrides output_dir)");
  run->add_option("--seed", seed, "run a single seed instead of the config list");
  run->add_option("--variant", variant, "variant override: simpro|simpro_star|fixmatch");

  std::string axis;
  std::vector<double> values;
  auto* sweep = app.add_subcommand("sweep", "repeat runs along one hyperparameter axis");
  sweep->add_option("--config", config_path, "TOML experiment config")->required();
  sweep->add_option("--axis", axis, "gamma_u|threshold_t|tau|momentum_m|alpha")->required();
  sweep->add_option("--values", values, "axis values")->expected(-1);
  sweep->add_option("--out", out_dir, "output directory");

  std::optional<std::string> report_path;
  double perturb = 0.0;
  auto* verify = app.add_subcommand("verify", "run the numerical oracle battery");
  verify->add_option("--report", report_path, "write the JSON oracle report here");
  verify
      ->add_option("--perturb-pi", perturb,
                   "scale one closed-form prior coordinate (sentinel for oracle sensitivity)")
      ->default_val(0.0);

  auto* gen = app.add_subcommand("gen-data", "synthesize and export the benchmark CSVs");
  gen->add_option("--config", config_path, "TOML experiment config")->required();
  gen->add_option("--out", out_dir, "output directory")->required();
  gen->add_option("--seed", seed, "generation seed (default: first config seed)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, out_dir, seed, variant);
    if (sweep->parsed()) return cmd_sweep(config_path, axis, values, out_dir);
    if (verify->parsed()) return cmd_verify(report_path, perturb);
    if (gen->parsed()) return cmd_gen_data(config_path, out_dir, seed);
  } catch (const simpro::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
