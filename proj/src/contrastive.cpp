#include "cegcl/contrastive.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

namespace cegcl {

std::vector<Index> debiased_negative_set(Index anchor, const Labels& pseudo_labels) {
  std::vector<Index> out;
  const int own = pseudo_labels.at(static_cast<std::size_t>(anchor));
  for (std::size_t m = 0; m < pseudo_labels.size(); ++m) {
    if (pseudo_labels[m] != own) out.push_back(static_cast<Index>(m));
  }
  return out;
}

std::vector<Index> sample_ranks(Index pool, Index budget, SplitMix64& gen) {
  if (budget < 0) throw std::invalid_argument("negative sample budget must be non-negative");
  const Index take = std::min(budget, pool);
  std::vector<Index> out;
  out.reserve(static_cast<std::size_t>(take));
  if (take == 0) return out;
  if (4 * take >= pool) {
    // Dense case: partial Fisher-Yates over the whole pool.
    std::vector<Index> all(static_cast<std::size_t>(pool));
    std::iota(all.begin(), all.end(), Index{0});
    for (Index i = 0; i < take; ++i) {
      const Index j = i + static_cast<Index>(uniform_below(gen, static_cast<std::uint64_t>(pool - i)));
      std::swap(all[i], all[j]);
      out.push_back(all[i]);
    }
    return out;
  }
  // Sparse case: Floyd's algorithm, O(take) expected.
  std::unordered_set<Index> seen;
  seen.reserve(static_cast<std::size_t>(2 * take));
  for (Index j = pool - take; j < pool; ++j) {
    const Index t = static_cast<Index>(uniform_below(gen, static_cast<std::uint64_t>(j + 1)));
    const Index pick = seen.count(t) ? j : t;
    seen.insert(pick);
    out.push_back(pick);
  }
  return out;
}

SplitMix64 negative_stream(std::uint64_t seed, std::uint64_t epoch, Index anchor) {
  return substream(seed, "negatives", epoch, static_cast<std::uint64_t>(anchor));
}

std::vector<Index> sample_negatives(std::span<const Index> full_set, Index budget, SplitMix64& gen) {
  auto ranks = sample_ranks(static_cast<Index>(full_set.size()), budget, gen);
  for (auto& r : ranks) r = full_set[static_cast<std::size_t>(r)];
  return ranks;
}

std::vector<Index> sample_negatives(std::span<const Index> full_set, Index budget, std::uint64_t seed,
                                    std::uint64_t epoch, Index anchor) {
  auto gen = negative_stream(seed, epoch, anchor);
  return sample_negatives(full_set, budget, gen);
}

Index NegativeSampleSet::count(Index anchor) const {
  return (indices.row(anchor).array() >= 0).count();
}

Index NegativeSampleSet::total() const { return (indices.array() >= 0).count(); }

NegativeSampler::NegativeSampler(Index nodes) : nodes_(nodes) {}

NegativeSampler::NegativeSampler(const Labels& pseudo_labels)
    : nodes_(static_cast<Index>(pseudo_labels.size())), labels_(pseudo_labels) {
  int groups = 0;
  for (int y : labels_) {
    if (y < 0) throw std::invalid_argument("pseudo-labels must be non-negative");
    groups = std::max(groups, y + 1);
  }
  members_.resize(static_cast<std::size_t>(groups));
  for (Index i = 0; i < nodes_; ++i) members_[labels_[i]].push_back(i);
  shifted_.resize(members_.size());
  for (std::size_t g = 0; g < members_.size(); ++g) {
    for (std::size_t j = 0; j < members_[g].size(); ++j) {
      shifted_[g].push_back(members_[g][j] - static_cast<Index>(j));
    }
  }
}

NegativeSampleSet NegativeSampler::sample(Index budget, std::uint64_t seed, std::uint64_t epoch) const {
  if (budget < 0) throw std::invalid_argument("negative sample budget must be non-negative");
  NegativeSampleSet out;
  out.indices = ad::IndexMatrix::Constant(nodes_, budget, -1);
  out.fallback.assign(static_cast<std::size_t>(nodes_), 0);
  for (Index i = 0; i < nodes_; ++i) {
    auto gen = negative_stream(seed, epoch, i);
    const std::vector<Index>* shifted = nullptr;
    Index pool = 0;
    if (!labels_.empty()) {
      const auto g = static_cast<std::size_t>(labels_[i]);
      pool = nodes_ - static_cast<Index>(members_[g].size());
      shifted = &shifted_[g];
    }
    if (pool == 0) {
      out.fallback[i] = labels_.empty() ? 0 : 1;
      pool = nodes_ - 1;
      shifted = nullptr;
    }
    const auto ranks = sample_ranks(pool, budget, gen);
    for (std::size_t s = 0; s < ranks.size(); ++s) {
      const Index r = ranks[s];
      Index node;
      if (shifted) {
        // The r-th node (ascending) outside the group is r + #{j : member_j - j <= r}.
        node = r + static_cast<Index>(std::upper_bound(shifted->begin(), shifted->end(), r) - shifted->begin());
      } else {
        node = r < i ? r : r + 1;
      }
      out.indices(i, static_cast<Index>(s)) = node;
    }
  }
  return out;
}

ad::Var infonce_loss(ad::Var anchor, ad::Var positive, ad::Var negatives, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("temperature must be positive");
  auto& tape = *anchor.tape;
  const Index m = tape.value(negatives).rows();
  ad::Var s_pos = ad::sum(ad::hadamard(anchor, positive));
  if (m == 0) return 0.0 * s_pos;
  ad::Var s_neg = ad::matmul(negatives, ad::transpose(anchor));
  ad::Var diff = s_neg - ad::matmul(tape.constant(Matrix::Ones(m, 1)), s_pos);
  return ad::log(ad::add_constant(ad::sum(ad::exp((1.0 / tau) * diff)), 1.0));
}

ContrastiveTerm infonce_mean(ad::Var anchors, ad::Var positives, ad::Var negative_pool,
                             const NegativeSampleSet& negatives, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("temperature must be positive");
  auto& tape = *anchors.tape;
  const Index n = tape.value(anchors).rows();
  if (negatives.anchors() != n) throw std::invalid_argument("negative sample set does not match anchor count");
  ContrastiveTerm term;
  term.similarity_evaluations = static_cast<std::size_t>(n + negatives.total());

  ad::IndexMatrix self(n, 1);
  for (Index i = 0; i < n; ++i) self(i, 0) = i;
  ad::Var s_pos = tape.gather_dot(anchors, positives, self);
  const Index budget = negatives.budget();
  if (budget == 0) {
    term.loss = ad::mean(0.0 * s_pos);
    return term;
  }
  ad::Var s_neg = tape.gather_dot(anchors, negative_pool, negatives.indices);
  ad::Var diff = s_neg - ad::matmul(s_pos, tape.constant(Matrix::Ones(1, budget)));
  const Matrix mask = (negatives.indices.array() >= 0).cast<double>().matrix();
  ad::Var weighted = ad::hadamard(ad::exp((1.0 / tau) * diff), tape.constant(mask));
  term.loss = ad::mean(ad::log(ad::add_constant(ad::row_sum(weighted), 1.0)));
  return term;
}

}  // namespace cegcl
