#include "simpro/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace simpro {

std::pair<double, std::vector<double>> top1_accuracy(const ModelParams& params,
                                                     const Dataset& dataset,
                                                     const ClassPrior* prior) {
  if (!dataset.has_labels())
    throw std::invalid_argument("top1_accuracy: dataset has no labels");
  const auto k = static_cast<std::size_t>(params.output_dim());
  std::vector<double> adjust(k, 0.0);
  if (prior) {
    if (prior->size() != k) throw std::invalid_argument("top1_accuracy: prior size mismatch");
    for (std::size_t y = 0; y < k; ++y) {
      if (!((*prior)[y] > 0.0))
        throw std::invalid_argument("top1_accuracy: prior has a nonpositive entry");
      adjust[y] = std::log((*prior)[y]);
    }
  }

  const auto z = logits_batch(params, dataset.features);
  std::vector<double> correct(static_cast<std::size_t>(dataset.num_classes), 0.0);
  std::vector<double> totals(static_cast<std::size_t>(dataset.num_classes), 0.0);
  for (std::size_t r = 0; r < dataset.size(); ++r) {
    std::size_t best = 0;
    for (std::size_t y = 1; y < k; ++y)
      if (z[r * k + y] + adjust[y] > z[r * k + best] + adjust[best]) best = y;
    const auto truth = static_cast<std::size_t>(dataset.labels[r]);
    totals[truth] += 1.0;
    if (best == truth) correct[truth] += 1.0;
  }

  std::vector<double> per_class(totals.size(), 0.0);
  double hit = 0.0, seen = 0.0;
  for (std::size_t y = 0; y < totals.size(); ++y) {
    per_class[y] = totals[y] > 0.0 ? correct[y] / totals[y] : 0.0;
    hit += correct[y];
    seen += totals[y];
  }
  return {seen > 0.0 ? hit / seen : 0.0, per_class};
}

double kl_divergence(const ClassPrior& p, const ClassPrior& q) {
  if (p.size() != q.size()) throw std::invalid_argument("kl_divergence: size mismatch");
  auto pf = p.floored();
  auto qf = q.floored();
  double kl = 0.0;
  for (std::size_t i = 0; i < pf.size(); ++i) kl += pf[i] * std::log(pf[i] / qf[i]);
  return kl;
}

namespace {

void append_double(std::string& line, double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  line.append(buf, ptr);
}

double parse_double(const std::string& field) {
  if (field == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size())
    throw std::runtime_error("read_history_csv: bad field '" + field + "'");
  return v;
}

}  // namespace

void write_history(std::span<const EpochRecord> records, const std::string& path_csv,
                   const std::string& path_json, const nlohmann::json& config_echo) {
  std::ofstream csv(path_csv);
  if (!csv) throw std::runtime_error("write_history: cannot open " + path_csv);
  csv << "epoch,loss_l,loss_u,mask_rate,top1,kl_pi_u,kl_phi\n";
  for (const auto& r : records) {
    std::string line = std::to_string(r.epoch);
    for (double v : {r.loss_labeled, r.loss_unlabeled, r.mask_rate, r.top1, r.kl_pi_u, r.kl_phi}) {
      line += ',';
      append_double(line, v);
    }
    csv << line << "\n";
  }
  if (!csv) throw std::runtime_error("write_history: write failed for " + path_csv);

  nlohmann::json summary;
  summary["epochs"] = records.size();
  summary["config"] = config_echo;
  if (!records.empty()) {
    const auto& last = records.back();
    nlohmann::json fin;
    fin["epoch"] = last.epoch;
    fin["loss_l"] = last.loss_labeled;
    fin["loss_u"] = last.loss_unlabeled;
    fin["mask_rate"] = last.mask_rate;
    fin["top1"] = last.top1;
    fin["kl_pi_u"] = last.kl_pi_u;
    fin["kl_phi"] = last.kl_phi;
    fin["pi_u"] = last.unlabeled_prior.probs;
    fin["phi"] = last.class_frequency.probs;
    summary["final"] = fin;
  }
  std::ofstream js(path_json);
  if (!js) throw std::runtime_error("write_history: cannot open " + path_json);
  js << summary.dump(2) << "\n";
  if (!js) throw std::runtime_error("write_history: write failed for " + path_json);
}

std::vector<EpochRecord> read_history_csv(const std::string& path_csv) {
  std::ifstream in(path_csv);
  if (!in) throw std::runtime_error("read_history_csv: cannot open " + path_csv);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("read_history_csv: empty file " + path_csv);

  std::vector<EpochRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 7)
      throw std::runtime_error("read_history_csv: expected 7 fields in '" + line + "'");
    EpochRecord r;
    r.epoch = static_cast<int>(parse_double(fields[0]));
    r.loss_labeled = parse_double(fields[1]);
    r.loss_unlabeled = parse_double(fields[2]);
    r.mask_rate = parse_double(fields[3]);
    r.top1 = parse_double(fields[4]);
    r.kl_pi_u = parse_double(fields[5]);
    r.kl_phi = parse_double(fields[6]);
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace simpro
