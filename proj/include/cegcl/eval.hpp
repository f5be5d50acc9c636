#pragma once

#include "cegcl/types.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace cegcl {

/// Counts n_ij of rows in predicted cluster i and true class j.
Matrix contingency(const Labels& pred, const Labels& truth);

struct AccuracyResult {
  double acc = 0.0;
  std::vector<int> mapping;  // predicted cluster -> class, -1 when left unmatched
};

/// Best accuracy over injective cluster -> class maps, solved as a rectangular
/// assignment on the contingency table.
AccuracyResult accuracy_hungarian(const Labels& pred, const Labels& truth);

/// Predictions translated through a cluster -> class mapping (-1 for unmatched).
Labels apply_mapping(const Labels& pred, const std::vector<int>& mapping);

enum class NmiNormalization { arithmetic, geometric };

/// Mutual information over a mean of the two entropies. Two single-block
/// partitions score 1.
double nmi(const Labels& pred, const Labels& truth, NmiNormalization norm = NmiNormalization::arithmetic);

/// Pair-counting adjusted Rand index; 1 when both partitions are trivial in the
/// same way (the index is 0/0 there).
double ari(const Labels& pred, const Labels& truth);

struct F1Scores {
  double micro = 0.0;
  double macro = 0.0;
};

/// One-vs-rest F1 over the true classes for already-mapped predictions. A
/// prediction of -1 (unmatched cluster) is a miss for its true class and a
/// false positive for none.
F1Scores f1_scores(const Labels& mapped_pred, const Labels& truth);

/// Newman modularity of a partition of an undirected simple graph.
double modularity(const EdgeList& edges, const Labels& partition);

struct MetricsReport {
  double acc = 0.0;
  double nmi = 0.0;
  double ari = 0.0;
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  double modularity = 0.0;
  std::vector<int> mapping;
  std::vector<Index> true_counts;       // per true class
  std::vector<Index> predicted_counts;  // nodes mapped onto each true class
};

/// All metrics at once; modularity is computed on the predicted partition when
/// the graph has edges and left at 0 otherwise.
MetricsReport evaluate(const Labels& pred, const Labels& truth, const EdgeList& edges,
                       NmiNormalization norm = NmiNormalization::arithmetic);

/// community \t true_size \t predicted_size
void write_community_counts(const std::filesystem::path& path, const MetricsReport& report,
                            const std::vector<std::string>& class_names = {});

}  // namespace cegcl
