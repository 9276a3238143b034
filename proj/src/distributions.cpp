#include "simpro/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace simpro {

ClassPrior ClassPrior::uniform(std::size_t k) {
  if (k < 1) throw std::invalid_argument("ClassPrior::uniform: k must be >= 1");
  return ClassPrior{std::vector<double>(k, 1.0 / static_cast<double>(k))};
}

ClassPrior ClassPrior::from_weights(std::vector<double> weights) {
  if (weights.empty()) throw std::invalid_argument("ClassPrior: empty weight vector");
  double sum = 0.0;
  for (double w : weights) {
    if (w < 0.0 || !std::isfinite(w))
      throw std::invalid_argument("ClassPrior: weights must be finite and nonnegative");
    sum += w;
  }
  if (sum <= 0.0) throw std::invalid_argument("ClassPrior: weights sum to zero");
  for (double& w : weights) w /= sum;
  return ClassPrior{std::move(weights)};
}

bool ClassPrior::on_simplex(double tol) const {
  if (probs.empty()) return false;
  double sum = 0.0;
  for (double p : probs) {
    if (p < 0.0 || !std::isfinite(p)) return false;
    sum += p;
  }
  return std::abs(sum - 1.0) <= tol;
}

ClassPrior ClassPrior::floored(double floor) const {
  std::vector<double> raised = probs;
  for (double& p : raised) p = std::max(p, floor);
  return from_weights(std::move(raised));
}

Pattern pattern_from_string(const std::string& s) {
  if (s == "consistent") return Pattern::consistent;
  if (s == "uniform") return Pattern::uniform;
  if (s == "reversed") return Pattern::reversed;
  if (s == "middle") return Pattern::middle;
  if (s == "head_tail" || s == "head-tail") return Pattern::head_tail;
  throw std::invalid_argument("unknown pattern: " + s);
}

std::string to_string(Pattern p) {
  switch (p) {
    case Pattern::consistent: return "consistent";
    case Pattern::uniform: return "uniform";
    case Pattern::reversed: return "reversed";
    case Pattern::middle: return "middle";
    case Pattern::head_tail: return "head_tail";
  }
  return "?";
}

namespace {

void validate_profile(const ImbalanceProfile& p) {
  if (p.k < 2) throw std::invalid_argument("ImbalanceProfile: k must be >= 2");
  if (p.head_count < 1) throw std::invalid_argument("ImbalanceProfile: head_count must be >= 1");
  if (!(p.gamma > 0.0) || !std::isfinite(p.gamma))
    throw std::invalid_argument("ImbalanceProfile: gamma must be > 0");
}

// Descending exponential counts, round-half-up, clamped to >= 1.
std::vector<int> base_counts(int k, int head, double gamma) {
  std::vector<int> c(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    double exact = head * std::pow(gamma, -static_cast<double>(i) / (k - 1));
    c[static_cast<std::size_t>(i)] = std::max(1, static_cast<int>(std::floor(exact + 0.5)));
  }
  return c;
}

// Largest counts at center indices, alternating outward (right-first).
// 1-based target order: ceil(K/2), ceil(K/2)+1, ceil(K/2)-1, ceil(K/2)+2, ...
std::vector<int> permute_middle(const std::vector<int>& sorted_desc) {
  const int k = static_cast<int>(sorted_desc.size());
  const int center = (k + 1) / 2;  // ceil(K/2), 1-based
  std::vector<int> order;
  order.reserve(static_cast<std::size_t>(k));
  order.push_back(center);
  for (int step = 1; static_cast<int>(order.size()) < k; ++step) {
    if (center + step <= k) order.push_back(center + step);
    if (center - step >= 1) order.push_back(center - step);
  }
  std::vector<int> out(sorted_desc.size());
  for (int i = 0; i < k; ++i)
    out[static_cast<std::size_t>(order[static_cast<std::size_t>(i)] - 1)] =
        sorted_desc[static_cast<std::size_t>(i)];
  return out;
}

// Largest counts at the two ends, alternating inward (front-first).
// 1-based target order: 1, K, 2, K-1, ...
std::vector<int> permute_head_tail(const std::vector<int>& sorted_desc) {
  const int k = static_cast<int>(sorted_desc.size());
  std::vector<int> out(sorted_desc.size());
  int front = 1, back = k;
  bool take_front = true;
  for (const int count : sorted_desc) {
    int pos = take_front ? front++ : back--;
    take_front = !take_front;
    out[static_cast<std::size_t>(pos - 1)] = count;
  }
  return out;
}

}  // namespace

std::vector<int> class_counts(const ImbalanceProfile& profile) {
  validate_profile(profile);
  if (profile.pattern == Pattern::uniform)
    return std::vector<int>(static_cast<std::size_t>(profile.k), profile.head_count);

  std::vector<int> c = base_counts(profile.k, profile.head_count, profile.gamma);
  switch (profile.pattern) {
    case Pattern::consistent:
      return c;
    case Pattern::reversed:
      std::reverse(c.begin(), c.end());
      return c;
    case Pattern::middle:
      return permute_middle(c);
    case Pattern::head_tail:
      return permute_head_tail(c);
    case Pattern::uniform:
      break;  // handled above
  }
  return c;
}

ClassPrior prior_from_counts(const std::vector<int>& counts) {
  if (counts.empty()) throw std::invalid_argument("prior_from_counts: empty counts");
  long long sum = 0;
  for (int c : counts) {
    if (c < 0) throw std::invalid_argument("prior_from_counts: negative count");
    sum += c;
  }
  if (sum == 0) throw std::invalid_argument("prior_from_counts: all counts zero");
  std::vector<double> w(counts.begin(), counts.end());
  return ClassPrior::from_weights(std::move(w));
}

const ClassPrior& AnchorSet::operator[](std::size_t i) const {
  switch (i) {
    case 0: return consistent;
    case 1: return uniform;
    case 2: return reversed;
    default: throw std::out_of_range("AnchorSet index");
  }
}

AnchorSet anchor_priors(int k, double gamma) {
  if (k < 2) throw std::invalid_argument("anchor_priors: k must be >= 2");
  if (!(gamma > 0.0)) throw std::invalid_argument("anchor_priors: gamma must be > 0");
  std::vector<double> w(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i)
    w[static_cast<std::size_t>(i)] = std::pow(gamma, -static_cast<double>(i) / (k - 1));
  AnchorSet a;
  a.consistent = ClassPrior::from_weights(w);
  a.uniform = ClassPrior::uniform(static_cast<std::size_t>(k));
  std::reverse(w.begin(), w.end());
  a.reversed = ClassPrior::from_weights(std::move(w));
  return a;
}

}  // namespace simpro
