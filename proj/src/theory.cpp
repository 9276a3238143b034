#include "simpro/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace simpro::theory {

void BinaryGaussianCase::validate() const {
  if (!(sigma > 0.0)) throw std::invalid_argument("BinaryGaussianCase: sigma must be > 0");
  if (phi_star.size() != 2 || phi_hat.size() != 2)
    throw std::invalid_argument("BinaryGaussianCase: priors must have two entries");
  if (!phi_star.on_simplex(1e-9) || !phi_hat.on_simplex(1e-9))
    throw std::invalid_argument("BinaryGaussianCase: priors must be valid distributions");
  for (std::size_t i = 0; i < 2; ++i)
    if (!(phi_star[i] > 0.0) || !(phi_hat[i] > 0.0))
      throw std::invalid_argument("BinaryGaussianCase: priors must be strictly positive");
}

double prior_log_likelihood(const ClassPrior& pi_l, const ClassPrior& pi_u,
                            std::span<const int> labels,
                            std::span<const std::vector<double>> pseudo_labels) {
  for (double p : pi_l.probs)
    if (!(p > 0.0)) throw std::invalid_argument("prior_log_likelihood: pi_l has a zero entry");
  for (double p : pi_u.probs)
    if (!(p > 0.0)) throw std::invalid_argument("prior_log_likelihood: pi_u has a zero entry");

  double value = 0.0;
  for (int y : labels) {
    if (y < 0 || y >= static_cast<int>(pi_l.size()))
      throw std::invalid_argument("prior_log_likelihood: label out of range");
    value += std::log(pi_l[static_cast<std::size_t>(y)]);
  }
  for (const auto& q : pseudo_labels) {
    if (q.size() != pi_u.size())
      throw std::invalid_argument("prior_log_likelihood: pseudo-label size mismatch");
    for (std::size_t y = 0; y < q.size(); ++y) value += q[y] * std::log(pi_u[y]);
  }
  return value;
}

PriorEstimates closed_form_priors(std::span<const int> labels,
                                  std::span<const std::vector<double>> pseudo_labels, int k) {
  if (labels.empty() && pseudo_labels.empty())
    throw std::invalid_argument("closed_form_priors: no labels and no pseudo-labels");
  PriorEstimates est;
  if (!labels.empty()) {
    std::vector<double> w(static_cast<std::size_t>(k), 0.0);
    for (int y : labels) w.at(static_cast<std::size_t>(y)) += 1.0;
    est.labeled = ClassPrior::from_weights(std::move(w));
  }
  if (!pseudo_labels.empty()) {
    std::vector<double> w(static_cast<std::size_t>(k), 0.0);
    for (const auto& q : pseudo_labels)
      for (std::size_t y = 0; y < q.size(); ++y) w.at(y) += q[y];
    est.unlabeled = ClassPrior::from_weights(std::move(w));
  }
  return est;
}

namespace {

// Euclidean projection onto the probability simplex.
std::vector<double> project_simplex(std::vector<double> v) {
  std::vector<double> u = v;
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumsum = 0.0, theta = 0.0;
  int rho = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    cumsum += u[i];
    double candidate = (cumsum - 1.0) / static_cast<double>(i + 1);
    if (u[i] - candidate > 0.0) {
      rho = static_cast<int>(i + 1);
      theta = candidate;
    }
  }
  (void)rho;
  for (double& x : v) x = std::max(0.0, x - theta);
  return v;
}

// sum_k c_k log pi_k, -inf when mass sits on a zero coordinate
double weighted_loglik(std::span<const double> c, std::span<const double> pi) {
  double v = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c[i] == 0.0) continue;
    if (pi[i] <= 0.0) return -std::numeric_limits<double>::infinity();
    v += c[i] * std::log(pi[i]);
  }
  return v;
}

// Maximize sum_k c_k log pi_k over the simplex without using the known
// analytic optimum: enumerate a coarse grid, then run projected-gradient
// ascent with an adaptive step until the objective stalls.
std::vector<double> maximize_weighted_loglik(const std::vector<double>& c, int grid_per_axis) {
  const auto k = c.size();
  const double total = std::accumulate(c.begin(), c.end(), 0.0);
  if (total <= 0.0) throw std::invalid_argument("maximize_weighted_loglik: zero total mass");

  const int r = std::max(1, grid_per_axis - 1);
  std::vector<double> best(k, 1.0 / static_cast<double>(k));
  double best_val = weighted_loglik(c, best);

  // enumerate compositions of r into k parts
  std::vector<int> comp(k, 0);
  comp[0] = r;
  while (true) {
    std::vector<double> pi(k);
    for (std::size_t i = 0; i < k; ++i) pi[i] = comp[i] / static_cast<double>(r);
    double v = weighted_loglik(c, pi);
    if (v > best_val) {
      best_val = v;
      best = pi;
    }
    // next composition in colex order
    std::size_t i = 0;
    while (i + 1 < k && comp[i] == 0) ++i;
    if (i + 1 >= k) break;
    int take = comp[i];
    comp[i] = 0;
    comp[0] = take - 1;
    comp[i + 1] += 1;
  }

  double step = 1.0 / total;
  for (int iter = 0; iter < 200000; ++iter) {
    std::vector<double> grad(k, 0.0);
    for (std::size_t i = 0; i < k; ++i)
      if (c[i] > 0.0) grad[i] = c[i] / std::max(best[i], 1e-300);

    bool improved = false;
    while (step > 1e-14) {
      std::vector<double> trial(k);
      for (std::size_t i = 0; i < k; ++i) trial[i] = best[i] + step * grad[i];
      trial = project_simplex(std::move(trial));
      double v = weighted_loglik(c, trial);
      if (v > best_val) {
        improved = v - best_val > 1e-15 * std::abs(best_val);
        best = std::move(trial);
        best_val = v;
        step *= 1.5;
        break;
      }
      step *= 0.5;
    }
    if (!improved && step <= 1e-14) break;
    if (!improved && iter > 1000) break;
  }
  return best;
}

}  // namespace

PriorEstimates brute_force_priors(std::span<const int> labels,
                                  std::span<const std::vector<double>> pseudo_labels, int k,
                                  int grid_per_axis) {
  if (k > 5) throw std::invalid_argument("brute_force_priors: only tractable for k <= 5");
  if (labels.empty() && pseudo_labels.empty())
    throw std::invalid_argument("brute_force_priors: no labels and no pseudo-labels");

  // The two prior blocks of the objective are independent, so each side is
  // maximized on its own simplex.
  PriorEstimates est;
  if (!labels.empty()) {
    std::vector<double> c(static_cast<std::size_t>(k), 0.0);
    for (int y : labels) c.at(static_cast<std::size_t>(y)) += 1.0;
    est.labeled = ClassPrior{maximize_weighted_loglik(c, grid_per_axis)};
  }
  if (!pseudo_labels.empty()) {
    std::vector<double> c(static_cast<std::size_t>(k), 0.0);
    for (const auto& q : pseudo_labels)
      for (std::size_t y = 0; y < q.size(); ++y) c.at(y) += q[y];
    est.unlabeled = ClassPrior{maximize_weighted_loglik(c, grid_per_axis)};
  }
  return est;
}

std::vector<double> exact_posterior(const MixtureSpec& spec, const ClassPrior& prior,
                                    std::span<const double> x) {
  spec.validate();
  if (prior.size() != static_cast<std::size_t>(spec.k))
    throw std::invalid_argument("exact_posterior: prior size mismatch");
  if (x.size() != static_cast<std::size_t>(spec.dim))
    throw std::invalid_argument("exact_posterior: input dimension mismatch");

  std::vector<double> score(static_cast<std::size_t>(spec.k));
  for (int c = 0; c < spec.k; ++c) {
    const auto& mean = spec.means[static_cast<std::size_t>(c)];
    const double sigma = spec.sigmas[static_cast<std::size_t>(c)];
    double sq = 0.0;
    for (int d = 0; d < spec.dim; ++d) {
      double diff = x[static_cast<std::size_t>(d)] - mean[static_cast<std::size_t>(d)];
      sq += diff * diff;
    }
    double log_density = -sq / (2.0 * sigma * sigma) - spec.dim * std::log(sigma);
    double p = prior[static_cast<std::size_t>(c)];
    score[static_cast<std::size_t>(c)] =
        (p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity()) + log_density;
  }
  double mx = *std::max_element(score.begin(), score.end());
  double lse = 0.0;
  for (double s : score) lse += std::exp(s - mx);
  lse = mx + std::log(lse);
  for (double& s : score) s = std::exp(s - lse);
  return score;
}

namespace {

double simpson_panel(double fa, double fm, double fb, double h) {
  return (fa + 4.0 * fm + fb) * h / 6.0;
}

double simpson_recurse(const std::function<double(double)>& f, double a, double b, double fa,
                       double fm, double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = simpson_panel(fa, flm, fm, m - a);
  const double right = simpson_panel(fm, frm, fb, b - m);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol) return left + right;
  return simpson_recurse(f, a, m, fa, flm, fm, left, tol * 0.5, depth - 1) +
         simpson_recurse(f, m, b, fm, frm, fb, right, tol * 0.5, depth - 1);
}

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol,
                        int max_depth) {
  if (!(b > a)) throw std::invalid_argument("adaptive_simpson: need b > a");
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  if (!std::isfinite(fa) || !std::isfinite(fb) || !std::isfinite(fm))
    throw std::runtime_error("adaptive_simpson: integrand not finite on the interval");
  const double whole = simpson_panel(fa, fm, fb, b - a);
  return simpson_recurse(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

RegretResult regret_and_bound(const BinaryGaussianCase& c) {
  c.validate();

  const double s2 = c.sigma * c.sigma;
  auto log_density = [s2](double x, double mean) { return -(x - mean) * (x - mean) / (2.0 * s2); };
  auto density = [&](double x, double mean) {
    return std::exp(log_density(x, mean)) / (c.sigma * std::sqrt(2.0 * std::numbers::pi));
  };

  // decision "+1" iff l(x) = g+(x)/g-(x) >= lambda, compared in log space
  const double lambda = (c.phi_hat[0] * c.phi_star[1]) / (c.phi_hat[1] * c.phi_star[0]);
  const double log_lambda = std::log(lambda);

  auto error_integrand = [&](double thr) {
    return [&, thr](double x) {
      const bool decide_pos = log_density(x, c.mean_pos) - log_density(x, c.mean_neg) >= thr;
      // uniform test mix: P(y, x) = g_y(x) / 2
      return 0.5 * (decide_pos ? density(x, c.mean_neg) : density(x, c.mean_pos));
    };
  };

  const double lo = std::min(c.mean_pos, c.mean_neg) - 8.0 * c.sigma;
  const double hi = std::max(c.mean_pos, c.mean_neg) + 8.0 * c.sigma;
  const double tol = 1e-9;

  RegretResult out;
  out.error_star = adaptive_simpson(error_integrand(0.0), lo, hi, tol);
  out.error_hat = adaptive_simpson(error_integrand(log_lambda), lo, hi, tol);

  // The excess error is integrated directly: the integrand is pointwise
  // nonnegative (the two rules disagree only between their thresholds, where
  // the hat rule picks the minority class), so the quadrature cannot go
  // negative.
  auto diff_integrand = [&](double x) {
    const double gap = log_density(x, c.mean_pos) - log_density(x, c.mean_neg);
    const bool hat_pos = gap >= log_lambda;
    const bool star_pos = gap >= 0.0;
    if (hat_pos == star_pos) return 0.0;
    const double err_hat = hat_pos ? density(x, c.mean_neg) : density(x, c.mean_pos);
    const double err_star = star_pos ? density(x, c.mean_neg) : density(x, c.mean_pos);
    return 0.5 * (err_hat - err_star);
  };
  out.regret = adaptive_simpson(diff_integrand, lo, hi, tol);

  out.bound = std::abs(c.phi_hat[0] - c.phi_star[0]) / (2.0 * c.phi_star[0] * c.phi_star[1]);
  return out;
}

bool VerifyReport::all_passed() const {
  return std::all_of(sections.begin(), sections.end(),
                     [](const VerifySection& s) { return s.passed; });
}

namespace {

std::vector<std::vector<double>> random_pseudo_labels(std::mt19937_64& rng, int m, int k) {
  std::uniform_real_distribution<double> u(0.01, 1.0);
  std::vector<std::vector<double>> qs;
  qs.reserve(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) {
    std::vector<double> q(static_cast<std::size_t>(k));
    double sum = 0.0;
    for (double& v : q) {
      v = u(rng);
      sum += v;
    }
    for (double& v : q) v /= sum;
    qs.push_back(std::move(q));
  }
  return qs;
}

VerifySection verify_prior_estimation(const VerifyOptions& opts) {
  VerifySection sec;
  sec.name = "prior_estimation";
  std::mt19937_64 rng(opts.seed);
  std::uniform_int_distribution<int> kd(2, 5), nd(1, 50), md(1, 50);

  double worst = 0.0;
  for (int inst = 0; inst < opts.prior_instances; ++inst) {
    const int k = kd(rng), n = nd(rng), m = md(rng);
    std::uniform_int_distribution<int> yd(0, k - 1);
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (int& y : labels) y = yd(rng);
    auto pseudo = random_pseudo_labels(rng, m, k);

    auto closed = closed_form_priors(labels, pseudo, k);
    if (opts.perturb_closed_form != 0.0 && closed.unlabeled) {
      auto w = closed.unlabeled->probs;
      w[0] *= 1.0 + opts.perturb_closed_form;
      closed.unlabeled = ClassPrior::from_weights(std::move(w));
    }
    auto brute = brute_force_priors(labels, pseudo, k);

    for (std::size_t i = 0; i < static_cast<std::size_t>(k); ++i) {
      worst = std::max(worst, std::abs(closed.labeled->probs[i] - brute.labeled->probs[i]));
      worst = std::max(worst, std::abs(closed.unlabeled->probs[i] - brute.unlabeled->probs[i]));
    }
    if (worst > 1e-6 && sec.detail.empty()) {
      std::ostringstream ss;
      ss << "instance " << inst << " (k=" << k << ", n=" << n << ", m=" << m
         << "): closed-form and brute-force priors differ by " << worst;
      sec.detail = ss.str();
    }
  }
  sec.cases = opts.prior_instances;
  sec.worst = worst;
  sec.passed = worst <= 1e-6;
  return sec;
}

VerifySection verify_bayes_classifier(const VerifyOptions& opts) {
  VerifySection sec;
  sec.name = "bayes_classifier";
  std::mt19937_64 rng(opts.seed + 1);
  std::uniform_int_distribution<int> kd(2, 5), nd(5, 40), md(5, 40);

  double worst = 0.0;
  // pooled-frequency identity: the optimal overall frequency is the sample
  // weighted blend of the labeled and unlabeled estimates
  for (int inst = 0; inst < 50; ++inst) {
    const int k = kd(rng), n = nd(rng), m = md(rng);
    std::uniform_int_distribution<int> yd(0, k - 1);
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (int& y : labels) y = yd(rng);
    auto pseudo = random_pseudo_labels(rng, m, k);

    auto est = closed_form_priors(labels, pseudo, k);
    std::vector<double> pooled(static_cast<std::size_t>(k), 0.0);
    for (int y : labels) pooled[static_cast<std::size_t>(y)] += 1.0;
    for (const auto& q : pseudo)
      for (std::size_t y = 0; y < q.size(); ++y) pooled[y] += q[y];
    for (double& v : pooled) v /= static_cast<double>(n + m);

    const double wl = static_cast<double>(n) / (n + m);
    for (std::size_t y = 0; y < static_cast<std::size_t>(k); ++y) {
      double blend = wl * est.labeled->probs[y] + (1.0 - wl) * est.unlabeled->probs[y];
      worst = std::max(worst, std::abs(blend - pooled[y]));
    }
  }
  bool identity_ok = worst <= 1e-12;

  // 1-D two-class case: the posterior has a closed logistic form, giving an
  // independent route to the same value
  double dual_worst = 0.0;
  {
    MixtureSpec g;
    g.k = 2;
    g.dim = 1;
    std::uniform_real_distribution<double> md(-2.0, 2.0), sd(0.5, 2.0), pd(0.1, 0.9);
    std::uniform_real_distribution<double> xd(-4.0, 4.0);
    for (int inst = 0; inst < 50; ++inst) {
      double m0 = md(rng), m1 = md(rng), s = sd(rng), p0 = pd(rng);
      g.means = {{m0}, {m1}};
      g.sigmas = {s, s};
      ClassPrior prior{{p0, 1.0 - p0}};
      double x = xd(rng);
      auto post = exact_posterior(g, prior, std::vector<double>{x});
      double logit = std::log(p0 / (1.0 - p0)) +
                     ((x - m1) * (x - m1) - (x - m0) * (x - m0)) / (2.0 * s * s);
      double direct = 1.0 / (1.0 + std::exp(-logit));
      dual_worst = std::max(dual_worst, std::abs(post[0] - direct));
    }
  }
  bool dual_ok = dual_worst <= 1e-12;

  // Monte-Carlo: class mix of samples landing in an axis-aligned box versus
  // the box posterior computed from exact per-class Gaussian box masses
  auto spec = MixtureSpec::circle(3, 2, 2.0, 1.2);
  ClassPrior prior = ClassPrior::from_weights({0.6, 0.3, 0.1});
  std::vector<int> counts;
  const int draws = 400000;
  for (double p : prior.probs) counts.push_back(static_cast<int>(p * draws));
  auto ds = synthesize(spec, counts, SplitTag::labeled, opts.seed + 2);

  const std::vector<double> box_lo{0.65, 0.15}, box_hi{1.15, 0.65};
  std::vector<double> hits(3, 0.0);
  double total_hits = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto row = ds.row(i);
    if (row[0] >= box_lo[0] && row[0] <= box_hi[0] && row[1] >= box_lo[1] && row[1] <= box_hi[1]) {
      hits[static_cast<std::size_t>(ds.labels[i])] += 1.0;
      total_hits += 1.0;
    }
  }
  auto normal_cdf = [](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); };
  std::vector<double> box_posterior(3, 0.0);
  double norm = 0.0;
  for (int y = 0; y < 3; ++y) {
    double mass = prior[static_cast<std::size_t>(y)];
    for (int d = 0; d < 2; ++d) {
      double mu = spec.means[static_cast<std::size_t>(y)][static_cast<std::size_t>(d)];
      double s = spec.sigmas[static_cast<std::size_t>(y)];
      mass *= normal_cdf((box_hi[static_cast<std::size_t>(d)] - mu) / s) -
              normal_cdf((box_lo[static_cast<std::size_t>(d)] - mu) / s);
    }
    box_posterior[static_cast<std::size_t>(y)] = mass;
    norm += mass;
  }
  for (double& v : box_posterior) v /= norm;

  double mc_worst = 0.0;
  bool posterior_ok = total_hits >= 200.0;
  if (posterior_ok) {
    for (std::size_t y = 0; y < 3; ++y) {
      double p_hat = hits[y] / total_hits;
      double band =
          3.0 * std::sqrt(std::max(box_posterior[y] * (1.0 - box_posterior[y]), 1e-8) / total_hits);
      mc_worst = std::max(mc_worst, std::abs(p_hat - box_posterior[y]) - band);
    }
    posterior_ok = mc_worst <= 0.0;
  }

  sec.cases = 50 + 50 + 1;
  sec.worst = std::max({worst, dual_worst, mc_worst});
  sec.passed = identity_ok && dual_ok && posterior_ok;
  if (!sec.passed) {
    std::ostringstream ss;
    ss << "pooled-identity deviation " << worst << ", closed-form posterior deviation "
       << dual_worst << ", Monte-Carlo box margin " << mc_worst << " (hits " << total_hits << ")";
    sec.detail = ss.str();
  }
  return sec;
}

VerifySection verify_regret_bound(const VerifyOptions& opts) {
  VerifySection sec;
  sec.name = "regret_bound";
  std::mt19937_64 rng(opts.seed + 3);
  std::uniform_real_distribution<double> mean_d(0.2, 3.0), sigma_d(0.3, 2.0), prior_d(0.05, 0.95);

  double worst = 0.0;
  for (int inst = 0; inst < opts.regret_instances; ++inst) {
    BinaryGaussianCase c;
    c.mean_pos = mean_d(rng);
    c.mean_neg = -mean_d(rng);
    c.sigma = sigma_d(rng);
    double ps = prior_d(rng), ph = prior_d(rng);
    c.phi_star = ClassPrior{{ps, 1.0 - ps}};
    c.phi_hat = ClassPrior{{ph, 1.0 - ph}};
    auto r = regret_and_bound(c);

    double violation = std::max(-r.regret, r.regret - (r.bound + 1e-8));
    worst = std::max(worst, violation);
    if (violation > 0.0 && sec.detail.empty()) {
      std::ostringstream ss;
      ss << "case " << inst << ": regret=" << r.regret << " bound=" << r.bound
         << " phi_star=" << ps << " phi_hat=" << ph;
      sec.detail = ss.str();
    }
  }
  sec.cases = opts.regret_instances;
  sec.worst = worst;
  sec.passed = worst <= 0.0;
  return sec;
}

}  // namespace

VerifyReport run_verification(const VerifyOptions& opts) {
  VerifyReport report;
  report.sections.push_back(verify_prior_estimation(opts));
  report.sections.push_back(verify_bayes_classifier(opts));
  report.sections.push_back(verify_regret_bound(opts));
  return report;
}

}  // namespace simpro::theory
