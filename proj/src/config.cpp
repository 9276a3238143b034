#include "simpro/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace simpro {

namespace {

std::string join_problems(const std::vector<std::string>& problems) {
  std::string all = "config validation failed:";
  for (const auto& p : problems) all += "\n  " + p;
  return all;
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

// strips comments outside of quoted strings
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error(join_problems(problems)), problems_(std::move(problems)) {}

TomlTable TomlTable::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({path + ": cannot open file"});
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_string(buffer.str(), path);
}

TomlTable TomlTable::parse_string(const std::string& text, const std::string& origin) {
  TomlTable table;
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::size_t line_no = 0;
  std::vector<std::string> problems;

  auto fail = [&](const std::string& msg) {
    problems.push_back(origin + ":" + std::to_string(line_no) + ": " + msg);
  };

  while (std::getline(in, line)) {
    ++line_no;
    line = trim(strip_comment(line));
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') {
        fail("unterminated section header");
        continue;
      }
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) fail("empty section name");
      continue;
    }

    auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail("expected key = value");
      continue;
    }
    std::string key = trim(line.substr(0, eq));
    std::string raw = trim(line.substr(eq + 1));
    if (key.empty() || raw.empty()) {
      fail("expected key = value");
      continue;
    }

    Value v;
    if (raw == "true" || raw == "false") {
      v.kind = Value::Kind::boolean;
      v.flag = raw == "true";
    } else if (raw.front() == '"') {
      if (raw.size() < 2 || raw.back() != '"') {
        fail("unterminated string for key '" + key + "'");
        continue;
      }
      v.kind = Value::Kind::text;
      v.str = raw.substr(1, raw.size() - 2);
    } else if (raw.front() == '[') {
      if (raw.back() != ']') {
        fail("unterminated array for key '" + key + "' (arrays must be single-line)");
        continue;
      }
      v.kind = Value::Kind::array;
      std::string body = raw.substr(1, raw.size() - 2);
      std::stringstream items(body);
      std::string item;
      bool ok = true;
      while (std::getline(items, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        double num = 0.0;
        auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), num);
        if (ec != std::errc{} || ptr != item.data() + item.size()) {
          fail("non-numeric array element '" + item + "' for key '" + key + "'");
          ok = false;
          break;
        }
        v.arr.push_back(num);
      }
      if (!ok) continue;
    } else {
      double num = 0.0;
      auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), num);
      if (ec != std::errc{} || ptr != raw.data() + raw.size()) {
        fail("cannot parse value '" + raw + "' for key '" + key + "'");
        continue;
      }
      v.kind = Value::Kind::number;
      v.num = num;
    }
    table.sections_[section][key] = std::move(v);
  }

  if (!problems.empty()) throw ConfigError(std::move(problems));
  return table;
}

bool TomlTable::has(const std::string& section, const std::string& key) const {
  auto s = sections_.find(section);
  return s != sections_.end() && s->second.count(key) > 0;
}

std::optional<double> TomlTable::number(const std::string& section, const std::string& key) const {
  auto s = sections_.find(section);
  if (s == sections_.end()) return std::nullopt;
  auto v = s->second.find(key);
  if (v == s->second.end() || v->second.kind != Value::Kind::number) return std::nullopt;
  return v->second.num;
}

std::optional<bool> TomlTable::boolean(const std::string& section, const std::string& key) const {
  auto s = sections_.find(section);
  if (s == sections_.end()) return std::nullopt;
  auto v = s->second.find(key);
  if (v == s->second.end() || v->second.kind != Value::Kind::boolean) return std::nullopt;
  return v->second.flag;
}

std::optional<std::string> TomlTable::text(const std::string& section,
                                           const std::string& key) const {
  auto s = sections_.find(section);
  if (s == sections_.end()) return std::nullopt;
  auto v = s->second.find(key);
  if (v == s->second.end() || v->second.kind != Value::Kind::text) return std::nullopt;
  return v->second.str;
}

std::optional<std::vector<double>> TomlTable::numbers(const std::string& section,
                                                      const std::string& key) const {
  auto s = sections_.find(section);
  if (s == sections_.end()) return std::nullopt;
  auto v = s->second.find(key);
  if (v == s->second.end() || v->second.kind != Value::Kind::array) return std::nullopt;
  return v->second.arr;
}

std::vector<std::string> TomlTable::unknown_keys(
    const std::map<std::string, std::vector<std::string>>& schema) const {
  std::vector<std::string> unknown;
  for (const auto& [section, keys] : sections_) {
    auto s = schema.find(section);
    if (s == schema.end()) {
      unknown.push_back(section.empty() ? "(top level)" : section);
      continue;
    }
    for (const auto& [key, value] : keys)
      if (std::find(s->second.begin(), s->second.end(), key) == s->second.end())
        unknown.push_back((section.empty() ? key : section + "." + key));
  }
  return unknown;
}

namespace {

const std::map<std::string, std::vector<std::string>> kSchema = {
    {"", {"seeds", "output_dir"}},
    {"mixture", {"k", "dim", "radius", "sigma"}},
    {"labeled", {"k", "head_count", "gamma", "pattern"}},
    {"unlabeled", {"k", "head_count", "gamma", "pattern"}},
    {"test", {"k", "head_count", "gamma", "pattern", "balance"}},
    {"augmentation", {"sigma_weak", "sigma_strong"}},
    {"hyperparams",
     {"tau", "threshold_t", "mu", "alpha", "batch_b", "lr_eta", "epochs", "momentum_m"}},
    {"train",
     {"variant", "estimate_in_e_step", "estimate_in_m_step", "hidden_dims",
      "anchor_warmup_epochs", "anchor_metric", "accumulate_all_pseudo", "pseudo_tau_one"}},
};

class FieldReader {
 public:
  explicit FieldReader(const TomlTable& toml) : toml_(toml) {}

  double number_or(const std::string& section, const std::string& key, double fallback) {
    if (!toml_.has(section, key)) return fallback;
    auto v = toml_.number(section, key);
    if (!v) {
      problems_.push_back(path(section, key) + ": expected a number");
      return fallback;
    }
    return *v;
  }

  int int_or(const std::string& section, const std::string& key, int fallback) {
    double v = number_or(section, key, fallback);
    if (v != std::floor(v)) {
      problems_.push_back(path(section, key) + ": expected an integer");
      return fallback;
    }
    return static_cast<int>(v);
  }

  bool bool_or(const std::string& section, const std::string& key, bool fallback) {
    if (!toml_.has(section, key)) return fallback;
    auto v = toml_.boolean(section, key);
    if (!v) {
      problems_.push_back(path(section, key) + ": expected true or false");
      return fallback;
    }
    return *v;
  }

  std::string text_or(const std::string& section, const std::string& key,
                      const std::string& fallback) {
    if (!toml_.has(section, key)) return fallback;
    auto v = toml_.text(section, key);
    if (!v) {
      problems_.push_back(path(section, key) + ": expected a quoted string");
      return fallback;
    }
    return *v;
  }

  void check(bool ok, const std::string& section, const std::string& key,
             const std::string& message) {
    if (!ok) problems_.push_back(path(section, key) + ": " + message);
  }

  void note(const std::string& message) { problems_.push_back(message); }

  static std::string path(const std::string& section, const std::string& key) {
    return section.empty() ? key : section + "." + key;
  }

  std::vector<std::string> take_problems() { return std::move(problems_); }
  bool ok() const { return problems_.empty(); }

 private:
  const TomlTable& toml_;
  std::vector<std::string> problems_;
};

ImbalanceProfile read_profile(FieldReader& r, const TomlTable& toml, const std::string& section,
                              int mixture_k) {
  ImbalanceProfile p;
  p.k = r.int_or(section, "k", mixture_k);
  r.check(p.k == mixture_k, section, "k", "must match mixture.k");
  p.head_count = r.int_or(section, "head_count", 100);
  r.check(p.head_count >= 1, section, "head_count", "must be >= 1");
  p.gamma = r.number_or(section, "gamma", 1.0);
  r.check(p.gamma > 0.0, section, "gamma", "must be > 0");
  std::string pattern = r.text_or(section, "pattern", "consistent");
  try {
    p.pattern = pattern_from_string(pattern);
  } catch (const std::invalid_argument&) {
    r.check(false, section, "pattern",
            "must be one of consistent|uniform|reversed|middle|head_tail");
  }
  return p;
}

}  // namespace

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  return from_toml(TomlTable::parse_file(path));
}

ExperimentConfig ExperimentConfig::from_toml(const TomlTable& toml) {
  FieldReader r(toml);
  ExperimentConfig cfg;

  for (const auto& key : toml.unknown_keys(kSchema))
    r.note(key + ": unknown key (check the documented schema)");

  const int k = r.int_or("mixture", "k", 3);
  r.check(k >= 2, "mixture", "k", "must be >= 2");
  const int dim = r.int_or("mixture", "dim", 2);
  r.check(dim >= 1, "mixture", "dim", "must be >= 1");
  const double radius = r.number_or("mixture", "radius", 3.0);
  r.check(radius > 0.0, "mixture", "radius", "must be > 0");
  const double sigma = r.number_or("mixture", "sigma", 1.0);
  r.check(sigma > 0.0, "mixture", "sigma", "must be > 0");
  if (r.ok()) cfg.mixture = MixtureSpec::circle(k, dim, radius, sigma);

  cfg.labeled = read_profile(r, toml, "labeled", k);
  cfg.unlabeled = read_profile(r, toml, "unlabeled", k);
  cfg.test_profile = read_profile(r, toml, "test", k);
  if (!toml.has("test", "pattern")) cfg.test_profile.pattern = Pattern::uniform;
  cfg.balance_test = r.bool_or("test", "balance", true);

  cfg.augmentation.sigma_weak = r.number_or("augmentation", "sigma_weak", 0.05);
  cfg.augmentation.sigma_strong = r.number_or("augmentation", "sigma_strong", 0.5);
  r.check(cfg.augmentation.sigma_weak >= 0.0, "augmentation", "sigma_weak", "must be >= 0");
  r.check(cfg.augmentation.sigma_strong >= cfg.augmentation.sigma_weak, "augmentation",
          "sigma_strong", "must be >= sigma_weak");

  cfg.hyper.tau = r.number_or("hyperparams", "tau", 1.0);
  r.check(cfg.hyper.tau >= 0.0, "hyperparams", "tau", "must be >= 0");
  cfg.hyper.threshold_t = r.number_or("hyperparams", "threshold_t", 0.95);
  r.check(cfg.hyper.threshold_t >= 0.0 && cfg.hyper.threshold_t <= 1.0, "hyperparams",
          "threshold_t", "must be in [0,1]");
  cfg.auto_mu = !toml.has("hyperparams", "mu");
  if (!cfg.auto_mu) {
    cfg.hyper.mu = r.number_or("hyperparams", "mu", 1.0);
    r.check(cfg.hyper.mu > 0.0, "hyperparams", "mu", "must be > 0");
  }
  cfg.auto_alpha = !toml.has("hyperparams", "alpha");
  if (!cfg.auto_alpha) {
    cfg.hyper.alpha = r.number_or("hyperparams", "alpha", 1.0);
    r.check(cfg.hyper.alpha > 0.0 && cfg.hyper.alpha <= 1.0, "hyperparams", "alpha",
            "must be in (0,1]");
  }
  cfg.hyper.batch_b = r.int_or("hyperparams", "batch_b", 64);
  r.check(cfg.hyper.batch_b >= 1, "hyperparams", "batch_b", "must be >= 1");
  cfg.hyper.lr_eta = r.number_or("hyperparams", "lr_eta", 0.17);
  r.check(cfg.hyper.lr_eta > 0.0, "hyperparams", "lr_eta", "must be > 0");
  cfg.hyper.epochs = r.int_or("hyperparams", "epochs", 50);
  r.check(cfg.hyper.epochs >= 0, "hyperparams", "epochs", "must be >= 0");
  cfg.hyper.momentum_m = r.number_or("hyperparams", "momentum_m", 0.9);
  r.check(cfg.hyper.momentum_m >= 0.0 && cfg.hyper.momentum_m < 1.0, "hyperparams", "momentum_m",
          "must be in [0,1)");

  std::string variant = r.text_or("train", "variant", "simpro");
  try {
    cfg.variant = variant_from_string(variant);
  } catch (const std::invalid_argument&) {
    r.check(false, "train", "variant", "must be one of simpro|simpro_star|fixmatch");
  }
  cfg.ablation.estimate_in_e_step = r.bool_or("train", "estimate_in_e_step", true);
  cfg.ablation.estimate_in_m_step = r.bool_or("train", "estimate_in_m_step", true);
  if (auto dims = toml.numbers("train", "hidden_dims")) {
    cfg.hidden_dims.clear();
    for (double d : *dims) {
      r.check(d == std::floor(d) && d >= 1.0, "train", "hidden_dims",
              "entries must be integers >= 1");
      cfg.hidden_dims.push_back(static_cast<int>(d));
    }
    r.check(!cfg.hidden_dims.empty(), "train", "hidden_dims", "must not be empty");
  } else if (toml.has("train", "hidden_dims")) {
    r.check(false, "train", "hidden_dims", "expected an array of integers");
  }
  cfg.anchor_warmup_epochs = r.int_or("train", "anchor_warmup_epochs", 5);
  r.check(cfg.anchor_warmup_epochs >= 1, "train", "anchor_warmup_epochs", "must be >= 1");
  std::string metric = r.text_or("train", "anchor_metric", "l1");
  if (metric == "l1")
    cfg.anchor_metric = AnchorMetric::l1;
  else if (metric == "kl")
    cfg.anchor_metric = AnchorMetric::kl;
  else
    r.check(false, "train", "anchor_metric", "must be l1 or kl");
  cfg.accumulate_all_pseudo = r.bool_or("train", "accumulate_all_pseudo", false);
  cfg.pseudo_tau_one = r.bool_or("train", "pseudo_tau_one", false);

  if (auto seeds = toml.numbers("", "seeds")) {
    cfg.seeds.clear();
    for (double s : *seeds) {
      r.check(s == std::floor(s) && s >= 0.0, "", "seeds", "entries must be integers >= 0");
      cfg.seeds.push_back(static_cast<std::uint64_t>(s));
    }
  } else if (toml.has("", "seeds")) {
    r.check(false, "", "seeds", "expected an array of integers");
  }
  r.check(!cfg.seeds.empty(), "", "seeds", "must not be empty");
  cfg.output_dir = r.text_or("", "output_dir", cfg.output_dir);

  auto problems = r.take_problems();
  if (!problems.empty()) throw ConfigError(std::move(problems));
  return cfg;
}

nlohmann::json ExperimentConfig::echo() const {
  nlohmann::json j;
  j["mixture"] = {{"k", mixture.k},
                  {"dim", mixture.dim},
                  {"means", mixture.means},
                  {"sigmas", mixture.sigmas}};
  auto profile_json = [](const ImbalanceProfile& p) {
    return nlohmann::json{{"k", p.k},
                          {"head_count", p.head_count},
                          {"gamma", p.gamma},
                          {"pattern", to_string(p.pattern)}};
  };
  j["labeled"] = profile_json(labeled);
  j["unlabeled"] = profile_json(unlabeled);
  j["test"] = profile_json(test_profile);
  j["test"]["balance"] = balance_test;
  j["augmentation"] = {{"sigma_weak", augmentation.sigma_weak},
                       {"sigma_strong", augmentation.sigma_strong}};
  j["hyperparams"] = {{"tau", hyper.tau},
                      {"threshold_t", hyper.threshold_t},
                      {"mu", auto_mu ? nlohmann::json("auto(M/N)") : nlohmann::json(hyper.mu)},
                      {"alpha",
                       auto_alpha ? nlohmann::json("auto(min(1,mu*N/M))") : nlohmann::json(hyper.alpha)},
                      {"batch_b", hyper.batch_b},
                      {"lr_eta", hyper.lr_eta},
                      {"epochs", hyper.epochs},
                      {"momentum_m", hyper.momentum_m}};
  j["train"] = {{"variant", to_string(variant)},
                {"estimate_in_e_step", ablation.estimate_in_e_step},
                {"estimate_in_m_step", ablation.estimate_in_m_step},
                {"hidden_dims", hidden_dims},
                {"anchor_warmup_epochs", anchor_warmup_epochs},
                {"anchor_metric", anchor_metric == AnchorMetric::l1 ? "l1" : "kl"},
                {"accumulate_all_pseudo", accumulate_all_pseudo},
                {"pseudo_tau_one", pseudo_tau_one}};
  j["seeds"] = seeds;
  j["output_dir"] = output_dir;
  return j;
}

Benchmark build_benchmark(const ExperimentConfig& config, std::uint64_t seed) {
  Benchmark b;
  const auto counts_l = class_counts(config.labeled);
  const auto counts_u = class_counts(config.unlabeled);
  const auto counts_t = class_counts(config.test_profile);

  b.labeled = synthesize(config.mixture, counts_l, SplitTag::labeled, seed * 4 + 0);
  b.unlabeled = synthesize(config.mixture, counts_u, SplitTag::unlabeled, seed * 4 + 1);
  b.test = synthesize(config.mixture, counts_t, SplitTag::test, seed * 4 + 2);
  if (config.balance_test) b.test = balanced_resample(b.test, seed * 4 + 3);

  b.truth.unlabeled_prior = prior_from_counts(counts_u);
  std::vector<int> pooled(counts_l.size());
  for (std::size_t i = 0; i < counts_l.size(); ++i) pooled[i] = counts_l[i] + counts_u[i];
  b.truth.class_frequency = prior_from_counts(pooled);

  b.train.hyper = config.hyper;
  const double n = static_cast<double>(b.labeled.size());
  const double m_count = static_cast<double>(b.unlabeled.size());
  if (config.auto_mu) b.train.hyper.mu = m_count > 0.0 ? m_count / n : 1.0;
  if (config.auto_alpha)
    b.train.hyper.alpha =
        m_count > 0.0 ? std::min(1.0, b.train.hyper.mu * n / m_count) : 1.0;
  b.train.ablation = config.ablation;
  b.train.variant = config.variant;
  b.train.hidden_dims = config.hidden_dims;
  b.train.anchor_warmup_epochs = config.anchor_warmup_epochs;
  b.train.anchor_metric = config.anchor_metric;
  b.train.accumulate_all_pseudo = config.accumulate_all_pseudo;
  b.train.pseudo_tau_one = config.pseudo_tau_one;
  b.train.seed = seed;
  if (config.variant == Variant::simpro_star) {
    auto anchors = anchor_priors(config.mixture.k, config.labeled.gamma);
    b.train.anchors = {anchors.consistent, anchors.uniform, anchors.reversed};
  }
  b.augmentation = config.augmentation;
  return b;
}

}  // namespace simpro
