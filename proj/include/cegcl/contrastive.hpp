#pragma once

#include "cegcl/rng.hpp"
#include "cegcl/tape.hpp"
#include "cegcl/types.hpp"

#include <span>
#include <vector>

namespace cegcl {

/// All nodes whose pseudo-label differs from the anchor's, in ascending order.
std::vector<Index> debiased_negative_set(Index anchor, const Labels& pseudo_labels);

/// Draws min(budget, pool) distinct ranks in [0, pool), uniformly.
std::vector<Index> sample_ranks(Index pool, Index budget, SplitMix64& gen);

/// Generator for one anchor in one epoch.
SplitMix64 negative_stream(std::uint64_t seed, std::uint64_t epoch, Index anchor);

/// Uniform sample without replacement of min(budget, |full_set|) entries.
std::vector<Index> sample_negatives(std::span<const Index> full_set, Index budget, SplitMix64& gen);
std::vector<Index> sample_negatives(std::span<const Index> full_set, Index budget, std::uint64_t seed,
                                    std::uint64_t epoch, Index anchor);

/// Negatives for every anchor: row i lists the sampled node indices, padded
/// with -1 up to the budget.
struct NegativeSampleSet {
  ad::IndexMatrix indices;
  std::vector<char> fallback;  // anchor had no differently-labelled node

  Index anchors() const { return indices.rows(); }
  Index budget() const { return indices.cols(); }
  Index count(Index anchor) const;
  Index total() const;
};

/// Samples negatives from the debiased pools without materializing them, so
/// the cost per epoch is O(n * budget) rather than O(n^2). Draws are identical
/// to sample_negatives(debiased_negative_set(i, labels), budget, seed, epoch, i).
/// When an anchor's pool is empty, it samples from every other node instead.
class NegativeSampler {
 public:
  /// Uniform sampler over all other nodes (no pseudo-labels yet).
  explicit NegativeSampler(Index nodes);
  explicit NegativeSampler(const Labels& pseudo_labels);

  NegativeSampleSet sample(Index budget, std::uint64_t seed, std::uint64_t epoch) const;

 private:
  Index nodes_ = 0;
  Labels labels_;
  std::vector<std::vector<Index>> members_;   // per label, ascending node ids
  std::vector<std::vector<Index>> shifted_;   // members_[g][j] - j
};

/// -ln( e^{s_p/tau} / (e^{s_p/tau} + sum_k e^{s_k/tau}) ) for a single anchor;
/// anchor and positive are 1 x d rows, negatives m x d.
ad::Var infonce_loss(ad::Var anchor, ad::Var positive, ad::Var negatives, double tau);

struct ContrastiveTerm {
  ad::Var loss;                            // mean over anchors
  std::size_t similarity_evaluations = 0;  // one per positive pair plus one per negative
};

/// Batched InfoNCE. Row i of `anchors` is contrasted with row i of `positives`
/// and with rows negatives.indices(i, :) of `negative_pool`.
ContrastiveTerm infonce_mean(ad::Var anchors, ad::Var positives, ad::Var negative_pool,
                             const NegativeSampleSet& negatives, double tau);

}  // namespace cegcl
