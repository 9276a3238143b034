#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numeric>

#include "simpro/config.hpp"

using namespace simpro;

namespace {

const char* kFullConfig = R"(
# desk benchmark
seeds = [1, 2, 3]
output_dir = "runs/demo"

[mixture]
k = 3
dim = 2
radius = 3.0
sigma = 1.0

[labeled]
head_count = 150
gamma = 10.0
pattern = "consistent"

[unlabeled]
head_count = 1000
gamma = 10.0
pattern = "reversed"

[test]
head_count = 200
gamma = 1.0      # uniform test mix
pattern = "uniform"

[augmentation]
sigma_weak = 0.05
sigma_strong = 0.5

[hyperparams]
tau = 1.0
threshold_t = 0.95
batch_b = 64
lr_eta = 0.17
epochs = 50
momentum_m = 0.9

[train]
variant = "simpro"
hidden_dims = [32]
)";

}  // namespace

TEST_CASE("a full config parses with every field in place") {
  auto cfg = ExperimentConfig::from_toml(TomlTable::parse_string(kFullConfig));
  CHECK(cfg.mixture.k == 3);
  CHECK(cfg.mixture.dim == 2);
  CHECK(cfg.labeled.head_count == 150);
  CHECK(cfg.labeled.gamma == 10.0);
  CHECK(cfg.unlabeled.pattern == Pattern::reversed);
  CHECK(cfg.test_profile.pattern == Pattern::uniform);
  CHECK(cfg.hyper.threshold_t == 0.95);
  CHECK(cfg.hyper.epochs == 50);
  CHECK(cfg.auto_mu);   // mu absent: resolved from sizes at build time
  CHECK(cfg.auto_alpha);
  CHECK(cfg.seeds == std::vector<std::uint64_t>{1, 2, 3});
  CHECK(cfg.output_dir == "runs/demo");
  CHECK(cfg.variant == Variant::simpro);
}

TEST_CASE("defaults fill in for a minimal config") {
  auto cfg = ExperimentConfig::from_toml(TomlTable::parse_string("seeds = [7]\n"));
  CHECK(cfg.mixture.k == 3);
  CHECK(cfg.hyper.batch_b == 64);
  CHECK(cfg.hyper.momentum_m == 0.9);
  CHECK(cfg.hidden_dims == std::vector<int>{32});
  CHECK(cfg.balance_test);
  CHECK(cfg.seeds == std::vector<std::uint64_t>{7});
}

TEST_CASE("nonpositive gamma is rejected with its field path") {
  try {
    ExperimentConfig::from_toml(
        TomlTable::parse_string("[labeled]\ngamma = -2.0\n"));
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    bool found = false;
    for (const auto& p : e.problems())
      if (p.find("labeled.gamma") != std::string::npos) found = true;
    CHECK(found);
  }
}

TEST_CASE("unknown keys are reported") {
  CHECK_THROWS_AS(ExperimentConfig::from_toml(
                      TomlTable::parse_string("[hyperparams]\nlearning_rate = 0.1\n")),
                  ConfigError);
}

TEST_CASE("bad pattern and bad variant are rejected") {
  CHECK_THROWS_AS(ExperimentConfig::from_toml(
                      TomlTable::parse_string("[labeled]\npattern = \"zigzag\"\n")),
                  ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_toml(
                      TomlTable::parse_string("[train]\nvariant = \"mixmatch\"\n")),
                  ConfigError);
}

TEST_CASE("empty seed list is rejected") {
  CHECK_THROWS_AS(ExperimentConfig::from_toml(TomlTable::parse_string("seeds = []\n")),
                  ConfigError);
}

TEST_CASE("malformed toml reports line numbers") {
  try {
    TomlTable::parse_string("[mixture]\nk == 3\n", "bad.toml");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    REQUIRE(!e.problems().empty());
    CHECK(e.problems()[0].find("bad.toml:2") != std::string::npos);
  }
}

TEST_CASE("toml reader handles comments, strings, booleans, arrays") {
  auto t = TomlTable::parse_string(
      "top = 3 # trailing comment\n"
      "[sec]\n"
      "name = \"with # hash\"\n"
      "flag = false\n"
      "vals = [1, 2.5, 3]\n");
  CHECK(t.number("", "top") == 3.0);
  CHECK(t.text("sec", "name") == std::string("with # hash"));
  CHECK(t.boolean("sec", "flag") == false);
  auto vals = t.numbers("sec", "vals");
  REQUIRE(vals.has_value());
  CHECK(vals->size() == 3);
  CHECK((*vals)[1] == 2.5);
}

TEST_CASE("build_benchmark produces the configured splits and truth") {
  auto cfg = ExperimentConfig::from_toml(TomlTable::parse_string(kFullConfig));
  auto bench = build_benchmark(cfg, 1);

  auto counts_l = class_counts(cfg.labeled);
  auto counts_u = class_counts(cfg.unlabeled);
  const auto n = static_cast<std::size_t>(std::accumulate(counts_l.begin(), counts_l.end(), 0));
  const auto m = static_cast<std::size_t>(std::accumulate(counts_u.begin(), counts_u.end(), 0));
  CHECK(bench.labeled.size() == n);
  CHECK(bench.unlabeled.size() == m);
  CHECK(!bench.unlabeled.has_labels());
  CHECK(bench.unlabeled.sealed_labels.size() == m);

  // balanced test: equal per-class counts
  auto tc = bench.test.label_counts();
  CHECK(tc[0] == tc[1]);
  CHECK(tc[1] == tc[2]);

  // reversed unlabeled profile: tail class is the biggest
  REQUIRE(bench.truth.unlabeled_prior.has_value());
  CHECK(bench.truth.unlabeled_prior->probs[2] > bench.truth.unlabeled_prior->probs[0]);

  // auto mu = M/N, auto alpha = min(1, mu*N/M) = 1
  CHECK(bench.train.hyper.mu ==
        doctest::Approx(static_cast<double>(m) / static_cast<double>(n)));
  CHECK(bench.train.hyper.alpha == doctest::Approx(1.0));

  // truth class frequency blends both splits
  auto pooled = bench.truth.class_frequency->probs;
  double expect0 = static_cast<double>(counts_l[0] + counts_u[0]) / static_cast<double>(n + m);
  CHECK(pooled[0] == doctest::Approx(expect0).epsilon(1e-12));
}

TEST_CASE("benchmark generation is deterministic per seed") {
  auto cfg = ExperimentConfig::from_toml(TomlTable::parse_string(kFullConfig));
  auto a = build_benchmark(cfg, 5);
  auto b = build_benchmark(cfg, 5);
  CHECK(a.labeled.features == b.labeled.features);
  CHECK(a.unlabeled.features == b.unlabeled.features);
  CHECK(a.test.features == b.test.features);
  auto c = build_benchmark(cfg, 6);
  CHECK(a.labeled.features != c.labeled.features);
}

TEST_CASE("simpro_star benchmarks carry the three anchors") {
  std::string text = std::string(kFullConfig) + "\n";
  auto cfg = ExperimentConfig::from_toml(TomlTable::parse_string(text));
  cfg.variant = Variant::simpro_star;
  auto bench = build_benchmark(cfg, 1);
  REQUIRE(bench.train.anchors.size() == 3);
  // consistent anchor leans to class 0, reversed to class 2
  CHECK(bench.train.anchors[0].probs[0] > bench.train.anchors[0].probs[2]);
  CHECK(bench.train.anchors[2].probs[2] > bench.train.anchors[2].probs[0]);
  for (double p : bench.train.anchors[1].probs) CHECK(p == doctest::Approx(1.0 / 3));
}

TEST_CASE("config echo reports every effective setting") {
  auto cfg = ExperimentConfig::from_toml(TomlTable::parse_string(kFullConfig));
  auto j = cfg.echo();
  CHECK(j["mixture"]["k"].get<int>() == 3);
  CHECK(j["hyperparams"]["mu"].get<std::string>() == "auto(M/N)");
  CHECK(j["train"]["variant"].get<std::string>() == "simpro");
  CHECK(j["labeled"]["gamma"].get<double>() == 10.0);
}
