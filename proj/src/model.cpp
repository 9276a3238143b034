#include "simpro/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>

#include <json.hpp>

namespace simpro {

namespace {

void check_dims(const std::vector<int>& dims) {
  if (dims.size() < 2) throw std::invalid_argument("ModelParams: need at least input and output dims");
  for (int d : dims)
    if (d < 1) throw std::invalid_argument("ModelParams: layer dims must be >= 1");
}

// tau * log(prior); rejects nonpositive entries since log would be undefined.
std::vector<double> adjustment(const ClassPrior& prior, double tau, int k) {
  if (static_cast<int>(prior.size()) != k)
    throw std::invalid_argument("prior size does not match class count");
  std::vector<double> adj(static_cast<std::size_t>(k), 0.0);
  if (tau == 0.0) return adj;
  for (int y = 0; y < k; ++y) {
    double p = prior[static_cast<std::size_t>(y)];
    if (!(p > 0.0)) throw std::invalid_argument("prior has a nonpositive entry; smooth it first");
    adj[static_cast<std::size_t>(y)] = tau * std::log(p);
  }
  return adj;
}

double log_sum_exp(std::span<const double> v) {
  double mx = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

// Forward pass keeping hidden activations for backprop.
// activations[0] is the input batch; activations[l] the output of layer l
// (tanh applied except for the last layer).
struct ForwardCache {
  std::vector<std::vector<double>> activations;
  std::size_t rows = 0;
};

ForwardCache forward(const ModelParams& p, std::span<const double> features) {
  const auto in_dim = static_cast<std::size_t>(p.input_dim());
  if (features.size() % in_dim != 0)
    throw std::invalid_argument("feature buffer size is not a multiple of the input dim");
  ForwardCache cache;
  cache.rows = features.size() / in_dim;
  cache.activations.resize(p.layer_count() + 1);
  cache.activations[0].assign(features.begin(), features.end());

  for (std::size_t l = 0; l < p.layer_count(); ++l) {
    const auto in = static_cast<std::size_t>(p.layer_dims[l]);
    const auto out = static_cast<std::size_t>(p.layer_dims[l + 1]);
    const auto& w = p.weights[l];
    const auto& b = p.biases[l];
    const auto& a_prev = cache.activations[l];
    auto& a = cache.activations[l + 1];
    a.assign(cache.rows * out, 0.0);
    const bool hidden = l + 1 < p.layer_count();
    for (std::size_t r = 0; r < cache.rows; ++r) {
      const double* x = a_prev.data() + r * in;
      double* z = a.data() + r * out;
      for (std::size_t o = 0; o < out; ++o) {
        double acc = b[o];
        const double* wrow = w.data() + o * in;
        for (std::size_t i = 0; i < in; ++i) acc += wrow[i] * x[i];
        z[o] = hidden ? std::tanh(acc) : acc;
      }
    }
  }
  return cache;
}

// Backprop from dL/dlogits (rows x K, already scaled) into a GradReport.
void backward(const ModelParams& p, const ForwardCache& cache, std::vector<double> delta,
              GradReport& report) {
  for (std::size_t li = p.layer_count(); li-- > 0;) {
    const auto in = static_cast<std::size_t>(p.layer_dims[li]);
    const auto out = static_cast<std::size_t>(p.layer_dims[li + 1]);
    const auto& a_prev = cache.activations[li];
    auto& wg = report.weight_grads[li];
    auto& bg = report.bias_grads[li];
    for (std::size_t r = 0; r < cache.rows; ++r) {
      const double* d = delta.data() + r * out;
      const double* x = a_prev.data() + r * in;
      for (std::size_t o = 0; o < out; ++o) {
        bg[o] += d[o];
        double* wrow = wg.data() + o * in;
        for (std::size_t i = 0; i < in; ++i) wrow[i] += d[o] * x[i];
      }
    }
    if (li == 0) break;
    // propagate through W and the tanh of the previous layer
    std::vector<double> prev(cache.rows * in, 0.0);
    const auto& w = p.weights[li];
    for (std::size_t r = 0; r < cache.rows; ++r) {
      const double* d = delta.data() + r * out;
      const double* a = a_prev.data() + r * in;
      double* pd = prev.data() + r * in;
      for (std::size_t o = 0; o < out; ++o) {
        const double* wrow = w.data() + o * in;
        for (std::size_t i = 0; i < in; ++i) pd[i] += wrow[i] * d[o];
      }
      for (std::size_t i = 0; i < in; ++i) pd[i] *= 1.0 - a[i] * a[i];
    }
    delta = std::move(prev);
  }
}

}  // namespace

ModelParams ModelParams::init(std::vector<int> dims, std::uint64_t seed) {
  check_dims(dims);
  ModelParams p;
  p.layer_dims = std::move(dims);
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < p.layer_dims.size(); ++l) {
    const auto in = static_cast<std::size_t>(p.layer_dims[l]);
    const auto out = static_cast<std::size_t>(p.layer_dims[l + 1]);
    double r = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> u(-r, r);
    std::vector<double> w(in * out);
    for (double& v : w) v = u(rng);
    p.weights.push_back(std::move(w));
    p.biases.emplace_back(out, 0.0);
  }
  return p;
}

ModelParams ModelParams::zeros(std::vector<int> dims) {
  check_dims(dims);
  ModelParams p;
  p.layer_dims = std::move(dims);
  for (std::size_t l = 0; l + 1 < p.layer_dims.size(); ++l) {
    const auto in = static_cast<std::size_t>(p.layer_dims[l]);
    const auto out = static_cast<std::size_t>(p.layer_dims[l + 1]);
    p.weights.emplace_back(in * out, 0.0);
    p.biases.emplace_back(out, 0.0);
  }
  return p;
}

void Hyperparams::validate() const {
  if (tau < 0.0) throw std::invalid_argument("hyperparams.tau must be >= 0");
  if (threshold_t < 0.0 || threshold_t > 1.0)
    throw std::invalid_argument("hyperparams.threshold_t must be in [0,1]");
  if (!(mu > 0.0)) throw std::invalid_argument("hyperparams.mu must be > 0");
  if (!(alpha > 0.0) || alpha > 1.0)
    throw std::invalid_argument("hyperparams.alpha must be in (0,1]");
  if (batch_b < 1) throw std::invalid_argument("hyperparams.batch_b must be >= 1");
  if (!(lr_eta > 0.0)) throw std::invalid_argument("hyperparams.lr_eta must be > 0");
  if (epochs < 0) throw std::invalid_argument("hyperparams.epochs must be >= 0");
  if (momentum_m < 0.0 || momentum_m >= 1.0)
    throw std::invalid_argument("hyperparams.momentum_m must be in [0,1)");
}

GradReport GradReport::zeros_like(const ModelParams& p) {
  GradReport g;
  for (std::size_t l = 0; l < p.layer_count(); ++l) {
    g.weight_grads.emplace_back(p.weights[l].size(), 0.0);
    g.bias_grads.emplace_back(p.biases[l].size(), 0.0);
  }
  return g;
}

std::vector<double> logits(const ModelParams& params, std::span<const double> x) {
  if (static_cast<int>(x.size()) != params.input_dim())
    throw std::invalid_argument("logits: input dimension mismatch");
  auto cache = forward(params, x);
  return cache.activations.back();
}

std::vector<double> logits_batch(const ModelParams& params, std::span<const double> features) {
  auto cache = forward(params, features);
  return std::move(cache.activations.back());
}

GradReport masked_soft_ce(const ModelParams& params, std::span<const double> features,
                          std::span<const double> targets, std::span<const std::uint8_t> mask,
                          const ClassPrior& prior, double tau, std::size_t denom) {
  const auto k = static_cast<std::size_t>(params.output_dim());
  GradReport report = GradReport::zeros_like(params);
  if (features.empty() || denom == 0) return report;

  const auto adj = adjustment(prior, tau, params.output_dim());
  auto cache = forward(params, features);
  const auto rows = cache.rows;
  if (targets.size() != rows * k || mask.size() != rows)
    throw std::invalid_argument("masked_soft_ce: target or mask size mismatch");

  const auto& z = cache.activations.back();
  std::vector<double> delta(rows * k, 0.0);
  std::vector<double> shifted(k);
  double loss = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (!mask[r]) continue;
    for (std::size_t y = 0; y < k; ++y) shifted[y] = z[r * k + y] + adj[y];
    const double lse = log_sum_exp(shifted);
    const double* t = targets.data() + r * k;
    double* d = delta.data() + r * k;
    for (std::size_t y = 0; y < k; ++y) {
      loss -= t[y] * (shifted[y] - lse);
      d[y] = (std::exp(shifted[y] - lse) - t[y]) / static_cast<double>(denom);
    }
  }
  report.loss = loss / static_cast<double>(denom);
  backward(params, cache, std::move(delta), report);
  return report;
}

GradReport adjusted_ce_labeled(const ModelParams& params, std::span<const double> features,
                               std::span<const int> labels, const ClassPrior& class_frequency,
                               double tau) {
  const auto k = static_cast<std::size_t>(params.output_dim());
  const auto rows = labels.size();
  std::vector<double> targets(rows * k, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    int y = labels[r];
    if (y < 0 || y >= params.output_dim())
      throw std::invalid_argument("adjusted_ce_labeled: label out of range");
    targets[r * k + static_cast<std::size_t>(y)] = 1.0;
  }
  std::vector<std::uint8_t> mask(rows, 1);
  return masked_soft_ce(params, features, targets, mask, class_frequency, tau, rows);
}

std::vector<double> bayes_pseudo_labels(std::span<const double> weak_logits,
                                        const ClassPrior& unlabeled_prior, double tau) {
  const auto k = weak_logits.size();
  if (unlabeled_prior.size() != k)
    throw std::invalid_argument("bayes_pseudo_labels: prior size mismatch");
  std::vector<double> shifted(k);
  for (std::size_t y = 0; y < k; ++y) {
    double p = unlabeled_prior[y];
    if (!(p > 0.0) && tau != 0.0)
      throw std::invalid_argument("bayes_pseudo_labels: prior has a nonpositive entry");
    shifted[y] = weak_logits[y] + (tau == 0.0 ? 0.0 : tau * std::log(p));
  }
  const double lse = log_sum_exp(shifted);
  std::vector<double> q(k);
  for (std::size_t y = 0; y < k; ++y) q[y] = std::exp(shifted[y] - lse);
  return q;
}

UnlabeledLossResult unlabeled_loss(const ModelParams& params,
                                   std::span<const double> weak_features,
                                   std::span<const double> strong_features,
                                   const ClassPrior& class_frequency,
                                   const ClassPrior& unlabeled_prior, double tau,
                                   double threshold, bool hard_targets, double pseudo_tau) {
  if (weak_features.size() != strong_features.size())
    throw std::invalid_argument("unlabeled_loss: weak/strong batches must pair up");

  UnlabeledLossResult result;
  result.grad = GradReport::zeros_like(params);
  if (weak_features.empty()) return result;

  const auto k = static_cast<std::size_t>(params.output_dim());
  const auto weak_logits = logits_batch(params, weak_features);
  const auto rows = weak_logits.size() / k;

  result.pseudo_labels.resize(rows * k);
  result.mask.resize(rows);
  std::size_t passed = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    auto q = bayes_pseudo_labels({weak_logits.data() + r * k, k}, unlabeled_prior,
                                 pseudo_tau < 0.0 ? tau : pseudo_tau);
    double confidence = *std::max_element(q.begin(), q.end());
    result.mask[r] = confidence >= threshold ? 1 : 0;
    passed += result.mask[r];
    if (hard_targets) {
      auto top = static_cast<std::size_t>(
          std::max_element(q.begin(), q.end()) - q.begin());
      std::fill(q.begin(), q.end(), 0.0);
      q[top] = 1.0;
    }
    std::copy(q.begin(), q.end(), result.pseudo_labels.begin() + static_cast<std::ptrdiff_t>(r * k));
  }
  result.mask_rate = static_cast<double>(passed) / static_cast<double>(rows);

  result.grad = masked_soft_ce(params, strong_features, result.pseudo_labels, result.mask,
                               class_frequency, tau, rows);
  return result;
}

void sgd_step(ModelParams& params, const GradReport& grads, double lr) {
  if (!(lr > 0.0)) throw std::invalid_argument("sgd_step: lr must be > 0");
  for (std::size_t l = 0; l < params.layer_count(); ++l) {
    auto& w = params.weights[l];
    const auto& wg = grads.weight_grads[l];
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * wg[i];
    auto& b = params.biases[l];
    const auto& bg = grads.bias_grads[l];
    for (std::size_t i = 0; i < b.size(); ++i) b[i] -= lr * bg[i];
  }
}

void axpy_grads(GradReport& acc, const GradReport& g, double scale) {
  acc.loss += scale * g.loss;
  for (std::size_t l = 0; l < acc.weight_grads.size(); ++l) {
    for (std::size_t i = 0; i < acc.weight_grads[l].size(); ++i)
      acc.weight_grads[l][i] += scale * g.weight_grads[l][i];
    for (std::size_t i = 0; i < acc.bias_grads[l].size(); ++i)
      acc.bias_grads[l][i] += scale * g.bias_grads[l][i];
  }
}

double cosine_lr(double eta0, std::int64_t step, std::int64_t total_steps) {
  if (total_steps < 1) throw std::invalid_argument("cosine_lr: total_steps must be >= 1");
  const double frac = std::clamp(static_cast<double>(step) / static_cast<double>(total_steps), 0.0, 1.0);
  return eta0 * 0.5 * (1.0 + std::cos(frac * std::numbers::pi));
}

void save_model(const ModelParams& params, const std::string& path) {
  nlohmann::json j;
  j["layer_dims"] = params.layer_dims;
  j["weights"] = params.weights;
  j["biases"] = params.biases;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_model: cannot open " + path);
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("save_model: write failed for " + path);
}

ModelParams load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_model: cannot open " + path);
  nlohmann::json j;
  in >> j;
  ModelParams p;
  p.layer_dims = j.at("layer_dims").get<std::vector<int>>();
  p.weights = j.at("weights").get<std::vector<std::vector<double>>>();
  p.biases = j.at("biases").get<std::vector<std::vector<double>>>();
  check_dims(p.layer_dims);
  for (std::size_t l = 0; l + 1 < p.layer_dims.size(); ++l) {
    const auto in_d = static_cast<std::size_t>(p.layer_dims[l]);
    const auto out_d = static_cast<std::size_t>(p.layer_dims[l + 1]);
    if (l >= p.weights.size() || p.weights[l].size() != in_d * out_d ||
        l >= p.biases.size() || p.biases[l].size() != out_d)
      throw std::runtime_error("load_model: inconsistent shapes in " + path);
  }
  return p;
}

}  // namespace simpro
