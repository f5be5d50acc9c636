#include "cegcl/eval.hpp"
#include "cegcl/rng.hpp"
#include "cegcl/synthetic.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

using namespace cegcl;

namespace {

Labels random_labels(SplitMix64& gen, std::size_t n, int k) {
  Labels y(n);
  for (auto& v : y) v = static_cast<int>(uniform_below(gen, static_cast<std::uint64_t>(k)));
  return y;
}

// Exhaustive: every injective map from predicted clusters into (classes + dummies).
double brute_force_acc(const Labels& pred, const Labels& truth) {
  int kp = 0, kt = 0;
  for (int p : pred) kp = std::max(kp, p + 1);
  for (int t : truth) kt = std::max(kt, t + 1);
  const int slots = std::max(kp, kt);
  std::vector<int> perm(static_cast<std::size_t>(slots));
  std::iota(perm.begin(), perm.end(), 0);
  double best = 0.0;
  do {
    int hit = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hit += perm[pred[i]] == truth[i] ? 1 : 0;
    best = std::max(best, hit / static_cast<double>(pred.size()));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

double pair_counting_ari(const Labels& a, const Labels& b) {
  const std::size_t n = a.size();
  double both = 0, only_a = 0, only_b = 0, neither = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool sa = a[i] == a[j], sb = b[i] == b[j];
      both += sa && sb;
      only_a += sa && !sb;
      only_b += !sa && sb;
      neither += !sa && !sb;
    }
  }
  const double pairs = both + only_a + only_b + neither;
  const double expected = (both + only_a) * (both + only_b) / pairs;
  const double maximum = 0.5 * ((both + only_a) + (both + only_b));
  if (maximum == expected) return 1.0;
  return (both - expected) / (maximum - expected);
}

Labels relabel(const Labels& y, const std::vector<int>& perm) {
  Labels out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = perm[y[i]];
  return out;
}

}  // namespace

TEST_CASE("accuracy examples") {
  CHECK(accuracy_hungarian({0, 0, 1, 1}, {1, 1, 0, 0}).acc == 1.0);
  CHECK(accuracy_hungarian({0, 0, 1, 1}, {1, 1, 0, 1}).acc == doctest::Approx(0.75));
  CHECK(accuracy_hungarian({0, 0, 1, 1}, {1, 1, 0, 0}).mapping == std::vector<int>{1, 0});
  CHECK_THROWS(accuracy_hungarian({}, {}));
  CHECK_THROWS(accuracy_hungarian({0, 1}, {0}));
}

TEST_CASE("metrics agree with independent oracles on random instances") {
  SplitMix64 gen(1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + uniform_below(gen, 29);
    const int kp = 1 + static_cast<int>(uniform_below(gen, 6));
    const int kt = 1 + static_cast<int>(uniform_below(gen, 6));
    const Labels pred = random_labels(gen, n, kp);
    const Labels truth = random_labels(gen, n, kt);
    const auto acc = accuracy_hungarian(pred, truth);
    CHECK(acc.acc == doctest::Approx(brute_force_acc(pred, truth)));
    CHECK(ari(pred, truth) == doctest::Approx(pair_counting_ari(pred, truth)));
    const double v = nmi(pred, truth);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    // Relabeling the prediction changes nothing.
    std::vector<int> perm(static_cast<std::size_t>(kp));
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[uniform_below(gen, i)]);
    const Labels moved = relabel(pred, perm);
    CHECK(accuracy_hungarian(moved, truth).acc == doctest::Approx(acc.acc));
    CHECK(nmi(moved, truth) == doctest::Approx(v));
    CHECK(ari(moved, truth) == doctest::Approx(ari(pred, truth)));
    const auto f1a = f1_scores(apply_mapping(pred, acc.mapping), truth);
    const auto f1b = f1_scores(apply_mapping(moved, accuracy_hungarian(moved, truth).mapping), truth);
    // With more clusters than classes, equally optimal matchings may leave
    // different clusters unmatched, so micro-F1 is only invariant otherwise.
    if (kp <= kt) CHECK(f1a.micro == doctest::Approx(f1b.micro));
    CHECK(f1a.micro >= 0.0);
    CHECK(f1a.micro <= 1.0);
    CHECK(f1a.macro >= 0.0);
    CHECK(f1a.macro <= 1.0);
    // Optimality against random one-to-one mappings.
    for (int r = 0; r < 5; ++r) {
      int hit = 0;
      const int width = std::max(kp, kt);
      std::vector<int> map(static_cast<std::size_t>(width));
      std::iota(map.begin(), map.end(), 0);
      for (std::size_t i = map.size(); i > 1; --i) std::swap(map[i - 1], map[uniform_below(gen, i)]);
      for (std::size_t i = 0; i < n; ++i) hit += map[pred[i]] == truth[i] ? 1 : 0;
      CHECK(acc.acc >= hit / static_cast<double>(n) - 1e-12);
    }
  }
}

TEST_CASE("micro F1 equals accuracy for bijective mappings") {
  SplitMix64 gen(2);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 2 + static_cast<int>(uniform_below(gen, 4));
    Labels truth = random_labels(gen, 30, k);
    Labels pred = random_labels(gen, 30, k);
    for (int c = 0; c < k; ++c) {
      truth[c] = c;
      pred[c] = c;
    }
    const auto acc = accuracy_hungarian(pred, truth);
    CHECK(std::count(acc.mapping.begin(), acc.mapping.end(), -1) == 0);
    CHECK(f1_scores(apply_mapping(pred, acc.mapping), truth).micro == doctest::Approx(acc.acc));
  }
}

TEST_CASE("nmi examples") {
  CHECK(nmi({0, 0, 1, 2}, {0, 0, 1, 2}) == doctest::Approx(1.0));
  CHECK(nmi({0, 0, 0, 0}, {0, 0, 1, 1}) == doctest::Approx(0.0));
  CHECK(nmi({0, 0, 0}, {0, 0, 0}) == 1.0);
  const double expected = (2.0 / 3.0 * std::log(2.0)) / (0.5 * (std::log(3.0) + std::log(2.0)));
  CHECK(nmi({0, 0, 1, 1, 2, 2}, {0, 0, 0, 1, 1, 1}) == doctest::Approx(expected));
  const double geometric = (2.0 / 3.0 * std::log(2.0)) / std::sqrt(std::log(3.0) * std::log(2.0));
  CHECK(nmi({0, 0, 1, 1, 2, 2}, {0, 0, 0, 1, 1, 1}, NmiNormalization::geometric) == doctest::Approx(geometric));
}

TEST_CASE("ari examples") {
  CHECK(ari({0, 0, 1, 1, 2}, {1, 1, 0, 0, 2}) == doctest::Approx(1.0));
  CHECK(ari({0, 0, 0, 0, 0, 0}, {0, 0, 1, 1, 2, 2}) == doctest::Approx(0.0));
  CHECK(ari({0, 0}, {1, 1}) == 1.0);
  CHECK_THROWS(ari({0}, {0}));
}

TEST_CASE("f1 examples") {
  const auto perfect = f1_scores({0, 1, 2, 1}, {0, 1, 2, 1});
  CHECK(perfect.micro == 1.0);
  CHECK(perfect.macro == 1.0);
  // Hand confusion: class 0 (TP 2, FN 1), class 1 (TP 1, FP 1, FN 1), class 2 (TP 1, FP 1).
  const auto hand = f1_scores({0, 0, 1, 1, 2, 2}, {0, 0, 0, 1, 1, 2});
  CHECK(hand.micro == doctest::Approx(4.0 / 6.0));
  CHECK(hand.macro == doctest::Approx((0.8 + 0.5 + 2.0 / 3.0) / 3.0));
  // Class 2 swallowed by class 1: a zero-F1 class drags the macro average down.
  const Labels truth{0, 0, 0, 0, 1, 1, 1, 1, 2, 2};
  const Labels pred{0, 0, 0, 0, 1, 1, 1, 1, 1, 1};
  const auto acc = accuracy_hungarian(pred, truth);
  const auto absorbed = f1_scores(apply_mapping(pred, acc.mapping), truth);
  CHECK(absorbed.macro < absorbed.micro);
  // Unmatched cluster (-1) is a miss only.
  const auto miss = f1_scores({0, -1}, {0, 1});
  CHECK(miss.micro == doctest::Approx(1.0 / (1.0 + 0.5)));
}

TEST_CASE("modularity examples") {
  const EdgeList triangles{{0, 1}, {0, 2}, {1, 2}, {3, 4}, {3, 5}, {4, 5}};
  CHECK(modularity(triangles, {0, 0, 0, 1, 1, 1}) == doctest::Approx(0.5));
  CHECK(modularity(triangles, {0, 0, 0, 0, 0, 0}) == doctest::Approx(0.0));
  CHECK(modularity(triangles, {1, 1, 1, 0, 0, 0}) == doctest::Approx(0.5));
  CHECK_THROWS(modularity({}, {0, 0}));

  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto edges = random_connected_graph(200, 0.05, seed);
    Labels half(200);
    for (int i = 0; i < 200; ++i) half[i] = i < 100 ? 0 : 1;
    SplitMix64 gen(seed + 100);
    for (std::size_t i = half.size(); i > 1; --i) std::swap(half[i - 1], half[uniform_below(gen, i)]);
    const double q = modularity(edges, half);
    CHECK(q >= -0.5);
    CHECK(q < 1.0);
    worst = std::max(worst, std::abs(q));
  }
  CHECK(worst < 0.15);
}

TEST_CASE("evaluate bundles everything and writes counts") {
  const Labels truth{0, 0, 1, 1};
  const Labels pred{1, 1, 0, 1};
  const EdgeList edges{{0, 1}, {2, 3}};
  const auto r = evaluate(pred, truth, edges);
  CHECK(r.acc == doctest::Approx(0.75));
  CHECK(r.true_counts == std::vector<Index>{2, 2});
  CHECK(r.predicted_counts == std::vector<Index>{3, 1});
  CHECK(r.modularity == doctest::Approx(modularity(edges, pred)));
  const auto path = std::filesystem::temp_directory_path() / "cegcl_counts.tsv";
  write_community_counts(path, r, {"a", "b"});
  std::ifstream in(path);
  std::string all((std::istreambuf_iterator<char>(in)), {});
  CHECK(all == "community\ttrue_size\tpredicted_size\na\t2\t3\nb\t2\t1\n");
}
