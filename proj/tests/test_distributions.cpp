#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "simpro/distributions.hpp"

using namespace simpro;

namespace {

// Independent evaluation of the exponential count formula with
// round-half-up, used to freeze expected values.
int formula_count(int head, double gamma, int k_index, int k_total) {
  double exact = head * std::pow(gamma, -static_cast<double>(k_index) / (k_total - 1));
  return std::max(1, static_cast<int>(std::floor(exact + 0.5)));
}

ImbalanceProfile profile(int k, int head, double gamma, Pattern p) {
  return ImbalanceProfile{k, head, gamma, p};
}

}  // namespace

TEST_CASE("class_counts endpoints for the canonical long-tail profile") {
  auto c = class_counts(profile(10, 500, 100.0, Pattern::consistent));
  REQUIRE(c.size() == 10);
  CHECK(c[0] == 500);
  CHECK(c[9] == 5);
  // 500 * 100^{-1/9} = 299.742..., round-half-up -> 300
  CHECK(c[1] == 300);
  CHECK(c[1] == formula_count(500, 100.0, 1, 10));
  // full vector frozen from the formula oracle
  std::vector<int> expected{500, 300, 180, 108, 65, 39, 23, 14, 8, 5};
  CHECK(c == expected);
}

TEST_CASE("gamma = 1 collapses the exponential") {
  auto c = class_counts(profile(3, 8, 1.0, Pattern::consistent));
  CHECK(c == std::vector<int>{8, 8, 8});
}

TEST_CASE("uniform pattern repeats head_count") {
  auto c = class_counts(profile(5, 7, 100.0, Pattern::uniform));
  CHECK(c == std::vector<int>{7, 7, 7, 7, 7});
}

TEST_CASE("reversed pattern is element-wise reverse of consistent") {
  auto cons = class_counts(profile(10, 500, 100.0, Pattern::consistent));
  auto rev = class_counts(profile(10, 500, 100.0, Pattern::reversed));
  std::reverse(cons.begin(), cons.end());
  CHECK(rev == cons);
}

TEST_CASE("middle pattern uses the frozen center-out right-first layout") {
  // sorted-descending base counts go to 1-based positions 5,6,4,7,3,8,2,9,1,10
  auto base = class_counts(profile(10, 500, 100.0, Pattern::consistent));
  auto mid = class_counts(profile(10, 500, 100.0, Pattern::middle));
  std::vector<int> order{5, 6, 4, 7, 3, 8, 2, 9, 1, 10};
  for (std::size_t i = 0; i < base.size(); ++i)
    CHECK(mid[static_cast<std::size_t>(order[i] - 1)] == base[i]);
}

TEST_CASE("head_tail pattern uses the frozen ends-in front-first layout") {
  auto base = class_counts(profile(10, 500, 100.0, Pattern::consistent));
  auto ht = class_counts(profile(10, 500, 100.0, Pattern::head_tail));
  std::vector<int> order{1, 10, 2, 9, 3, 8, 4, 7, 5, 6};
  for (std::size_t i = 0; i < base.size(); ++i)
    CHECK(ht[static_cast<std::size_t>(order[i] - 1)] == base[i]);
}

TEST_CASE("middle and head_tail are permutations of consistent") {
  std::mt19937 rng(7);
  std::uniform_int_distribution<int> kd(2, 12), hd(1, 400);
  std::uniform_real_distribution<double> gd(0.2, 200.0);
  for (int trial = 0; trial < 50; ++trial) {
    int k = kd(rng), h = hd(rng);
    double g = gd(rng);
    auto cons = class_counts(profile(k, h, g, Pattern::consistent));
    for (Pattern p : {Pattern::middle, Pattern::head_tail, Pattern::reversed}) {
      auto permuted = class_counts(profile(k, h, g, p));
      auto a = cons, b = permuted;
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      CHECK(a == b);
    }
  }
}

TEST_CASE("counts are length K, >= 1, with max/min near gamma") {
  std::mt19937 rng(11);
  std::uniform_int_distribution<int> kd(2, 15);
  std::uniform_real_distribution<double> gd(1.0, 150.0);
  for (int trial = 0; trial < 50; ++trial) {
    int k = kd(rng);
    int head = 1000;
    double g = gd(rng);
    auto c = class_counts(profile(k, head, g, Pattern::consistent));
    REQUIRE(static_cast<int>(c.size()) == k);
    CHECK(*std::min_element(c.begin(), c.end()) >= 1);
    // rounding perturbs the ratio by at most half a count at the tail
    double tail_exact = head / g;
    double ratio = static_cast<double>(c.front()) / c.back();
    CHECK(ratio >= head / (tail_exact + 0.5) - 1e-9);
    CHECK(ratio <= head / std::max(1.0, tail_exact - 0.5) + 1e-9);
  }
}

TEST_CASE("class_counts rejects invalid profiles") {
  CHECK_THROWS_AS(class_counts(profile(1, 10, 2.0, Pattern::consistent)), std::invalid_argument);
  CHECK_THROWS_AS(class_counts(profile(3, 0, 2.0, Pattern::consistent)), std::invalid_argument);
  CHECK_THROWS_AS(class_counts(profile(3, 10, 0.0, Pattern::consistent)), std::invalid_argument);
  CHECK_THROWS_AS(class_counts(profile(3, 10, -1.0, Pattern::consistent)), std::invalid_argument);
}

TEST_CASE("prior_from_counts basics") {
  auto p = prior_from_counts({5, 5});
  CHECK(p.probs[0] == doctest::Approx(0.5).epsilon(1e-12));
  auto q = prior_from_counts({3, 1});
  CHECK(q.probs[0] == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(q.probs[1] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK_THROWS_AS(prior_from_counts({0, 0}), std::invalid_argument);
  CHECK_THROWS_AS(prior_from_counts({}), std::invalid_argument);
  CHECK_THROWS_AS(prior_from_counts({-1, 2}), std::invalid_argument);
}

TEST_CASE("prior of the canonical profile matches normalized formula values") {
  auto c = class_counts(profile(10, 500, 100.0, Pattern::consistent));
  auto p = prior_from_counts(c);
  double sum = std::accumulate(c.begin(), c.end(), 0.0);
  for (std::size_t i = 0; i < c.size(); ++i)
    CHECK(p.probs[i] == doctest::Approx(c[i] / sum).epsilon(1e-9));
  CHECK(p.on_simplex());
}

TEST_CASE("prior_from_counts always lands on the simplex") {
  std::mt19937 rng(3);
  std::uniform_int_distribution<int> cd(0, 1000);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<int> counts(1 + trial % 8);
    for (auto& c : counts) c = cd(rng);
    counts[0] += 1;  // avoid the all-zero reject
    CHECK(prior_from_counts(counts).on_simplex());
  }
}

TEST_CASE("anchor_priors identities") {
  auto a1 = anchor_priors(2, 1.0);
  for (std::size_t i = 0; i < AnchorSet::count; ++i) {
    CHECK(a1[i].probs[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(a1[i].probs[1] == doctest::Approx(0.5).epsilon(1e-12));
  }

  auto a3 = anchor_priors(2, 3.0);
  CHECK(a3.consistent.probs[0] == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(a3.consistent.probs[1] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(a3.reversed.probs[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(a3.reversed.probs[1] == doctest::Approx(0.75).epsilon(1e-12));

  auto a = anchor_priors(10, 150.0);
  for (std::size_t i = 0; i < 10; ++i)
    CHECK(a.reversed.probs[i] == doctest::Approx(a.consistent.probs[9 - i]).epsilon(1e-12));
  CHECK(a.consistent.on_simplex());
  CHECK(a.reversed.on_simplex());
}

TEST_CASE("floored prior stays on simplex and respects the floor") {
  ClassPrior p{std::vector<double>{1.0, 0.0, 0.0}};
  auto f = p.floored(1e-8);
  CHECK(f.on_simplex());
  CHECK(f.probs[1] > 0.0);
  CHECK(f.probs[1] == doctest::Approx(1e-8).epsilon(1e-3));
}
