#include "simpro/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace simpro {

void MixtureSpec::validate() const {
  if (k < 2) throw std::invalid_argument("MixtureSpec: k must be >= 2");
  if (dim < 1) throw std::invalid_argument("MixtureSpec: dim must be >= 1");
  if (static_cast<int>(means.size()) != k)
    throw std::invalid_argument("MixtureSpec: means must have exactly k rows");
  for (const auto& m : means)
    if (static_cast<int>(m.size()) != dim)
      throw std::invalid_argument("MixtureSpec: mean row length must equal dim");
  if (static_cast<int>(sigmas.size()) != k)
    throw std::invalid_argument("MixtureSpec: sigmas must have exactly k entries");
  for (double s : sigmas)
    if (!(s > 0.0)) throw std::invalid_argument("MixtureSpec: sigmas must be > 0");
}

MixtureSpec MixtureSpec::circle(int k, int dim, double radius, double sigma) {
  MixtureSpec spec;
  spec.k = k;
  spec.dim = dim;
  spec.means.assign(static_cast<std::size_t>(k), std::vector<double>(static_cast<std::size_t>(dim), 0.0));
  for (int c = 0; c < k; ++c) {
    double angle = 2.0 * std::numbers::pi * c / k;
    spec.means[static_cast<std::size_t>(c)][0] = radius * std::cos(angle);
    if (dim > 1) spec.means[static_cast<std::size_t>(c)][1] = radius * std::sin(angle);
  }
  spec.sigmas.assign(static_cast<std::size_t>(k), sigma);
  spec.validate();
  return spec;
}

std::string to_string(SplitTag s) {
  switch (s) {
    case SplitTag::labeled: return "labeled";
    case SplitTag::unlabeled: return "unlabeled";
    case SplitTag::test: return "test";
  }
  return "?";
}

std::vector<int> Dataset::label_counts() const {
  const auto& src = has_labels() ? labels : sealed_labels;
  std::vector<int> counts(static_cast<std::size_t>(num_classes), 0);
  for (int y : src) ++counts[static_cast<std::size_t>(y)];
  return counts;
}

void AugmentationSpec::validate() const {
  if (sigma_weak < 0.0 || sigma_strong < 0.0)
    throw std::invalid_argument("AugmentationSpec: sigmas must be >= 0");
  if (sigma_weak > sigma_strong)
    throw std::invalid_argument("AugmentationSpec: sigma_weak must be <= sigma_strong");
}

Dataset synthesize(const MixtureSpec& spec, const std::vector<int>& counts, SplitTag split,
                   std::uint64_t seed) {
  spec.validate();
  if (static_cast<int>(counts.size()) != spec.k)
    throw std::invalid_argument("synthesize: counts length must equal spec.k");
  for (int c : counts)
    if (c < 0) throw std::invalid_argument("synthesize: counts must be >= 0");

  Dataset ds;
  ds.dim = spec.dim;
  ds.num_classes = spec.k;
  ds.split = split;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit;
  for (int c = 0; c < spec.k; ++c) {
    const auto& mean = spec.means[static_cast<std::size_t>(c)];
    const double sigma = spec.sigmas[static_cast<std::size_t>(c)];
    for (int n = 0; n < counts[static_cast<std::size_t>(c)]; ++n) {
      for (int d = 0; d < spec.dim; ++d)
        ds.features.push_back(mean[static_cast<std::size_t>(d)] + sigma * unit(rng));
      if (split == SplitTag::unlabeled)
        ds.sealed_labels.push_back(c);
      else
        ds.labels.push_back(c);
    }
  }
  return ds;
}

std::vector<double> augment(std::span<const double> x, const AugmentationSpec& spec,
                            AugmentStrength strength, std::mt19937_64& rng) {
  spec.validate();
  const double sigma = strength == AugmentStrength::weak ? spec.sigma_weak : spec.sigma_strong;
  std::vector<double> out(x.begin(), x.end());
  if (sigma == 0.0) return out;
  std::normal_distribution<double> noise(0.0, sigma);
  for (double& v : out) v += noise(rng);
  return out;
}

std::vector<double> augment(std::span<const double> x, const AugmentationSpec& spec,
                            AugmentStrength strength, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return augment(x, spec, strength, rng);
}

namespace {

double parse_field(const std::string& field, const std::string& path, std::size_t line_no) {
  double value = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end) {
    std::ostringstream msg;
    msg << path << ":" << line_no << ": malformed numeric field '" << field << "'";
    throw std::runtime_error(msg.str());
  }
  return value;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

Dataset load_csv(const std::string& path, std::optional<int> expected_classes) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_csv: cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("load_csv: empty file " + path);
  auto header = split_line(line);

  bool labeled = !header.empty() && header.back() == "label";
  int dim = static_cast<int>(header.size()) - (labeled ? 1 : 0);
  if (dim < 1) throw std::runtime_error("load_csv: no feature columns in " + path);
  for (int d = 0; d < dim; ++d) {
    if (header[static_cast<std::size_t>(d)] != "f" + std::to_string(d))
      throw std::runtime_error("load_csv: unexpected header column '" +
                               header[static_cast<std::size_t>(d)] + "' in " + path);
  }

  Dataset ds;
  ds.dim = dim;
  ds.split = labeled ? SplitTag::labeled : SplitTag::unlabeled;

  std::size_t line_no = 1;
  int max_label = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_line(line);
    if (fields.size() != header.size()) {
      std::ostringstream msg;
      msg << path << ":" << line_no << ": expected " << header.size() << " fields, got "
          << fields.size();
      throw std::runtime_error(msg.str());
    }
    for (int d = 0; d < dim; ++d)
      ds.features.push_back(parse_field(fields[static_cast<std::size_t>(d)], path, line_no));
    if (labeled) {
      double raw = parse_field(fields.back(), path, line_no);
      int y = static_cast<int>(raw);
      if (raw != y || y < 0 || (expected_classes && y >= *expected_classes)) {
        std::ostringstream msg;
        msg << path << ":" << line_no << ": label '" << fields.back() << "' outside [0, ";
        if (expected_classes)
          msg << *expected_classes;
        else
          msg << "inf";
        msg << ")";
        throw std::runtime_error(msg.str());
      }
      ds.labels.push_back(y);
      max_label = std::max(max_label, y);
    }
  }
  ds.num_classes = expected_classes ? *expected_classes : max_label + 1;
  return ds;
}

void save_csv(const Dataset& ds, const std::string& path, const std::string& truth_path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_csv: cannot open " + path);
  for (int d = 0; d < ds.dim; ++d) out << (d ? "," : "") << "f" << d;
  if (ds.has_labels()) out << ",label";
  out << "\n";

  char buf[64];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto row = ds.row(i);
    for (int d = 0; d < ds.dim; ++d) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), row[static_cast<std::size_t>(d)]);
      if (d) out << ',';
      out.write(buf, ptr - buf);
    }
    if (ds.has_labels()) out << ',' << ds.labels[i];
    out << "\n";
  }
  if (!out) throw std::runtime_error("save_csv: write failed for " + path);

  if (!truth_path.empty() && !ds.sealed_labels.empty()) {
    std::ofstream truth(truth_path);
    if (!truth) throw std::runtime_error("save_csv: cannot open " + truth_path);
    truth << "label\n";
    for (int y : ds.sealed_labels) truth << y << "\n";
    if (!truth) throw std::runtime_error("save_csv: write failed for " + truth_path);
  }
}

Dataset balanced_resample(const Dataset& ds, std::uint64_t seed) {
  if (!ds.has_labels()) throw std::invalid_argument("balanced_resample: dataset has no labels");
  auto counts = ds.label_counts();
  int quota = *std::min_element(counts.begin(), counts.end());
  if (quota == 0) throw std::invalid_argument("balanced_resample: a class has no samples");

  // class-major order keeps the output deterministic
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(ds.num_classes));
  for (std::size_t i = 0; i < ds.size(); ++i)
    by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);

  std::mt19937_64 rng(seed);
  Dataset out;
  out.dim = ds.dim;
  out.num_classes = ds.num_classes;
  out.split = ds.split;
  for (auto& idx : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng);
    for (int n = 0; n < quota; ++n) {
      auto row = ds.row(idx[static_cast<std::size_t>(n)]);
      out.features.insert(out.features.end(), row.begin(), row.end());
      out.labels.push_back(ds.labels[idx[static_cast<std::size_t>(n)]]);
    }
  }
  return out;
}

}  // namespace simpro
