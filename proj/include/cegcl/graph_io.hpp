#pragma once

#include "cegcl/types.hpp"

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cegcl {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : std::runtime_error(file + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Counters collected while ingesting raw dataset files.
struct LoadReport {
  std::size_t citation_lines = 0;     // non-empty lines in the citation file
  std::size_t dropped_unknown = 0;    // citations naming an id absent from the node file
  std::size_t dropped_self_loops = 0;
  std::size_t duplicate_edges = 0;    // repeats after discarding direction
  std::size_t isolated_nodes = 0;
};

/// An attributed undirected graph with optional ground truth.
///
/// Invariants (checked by validate()): features has one row per node id, edges
/// are stored once with u < v, there are no self-loops, and labels (when
/// present) lie in [0, num_communities).
struct GraphBundle {
  std::vector<std::string> node_ids;
  Matrix features;
  EdgeList edges;
  std::optional<Labels> labels;
  int num_communities = 0;

  std::vector<std::string> class_names;    // index -> name, when known
  std::vector<std::string> feature_names;  // column -> token, when known
  LoadReport report;

  Index num_nodes() const { return static_cast<Index>(node_ids.size()); }
  Index num_features() const { return features.cols(); }

  /// Throws std::invalid_argument describing the first violated invariant.
  void validate() const;
};

/// Sorts each pair as (min, max), drops self-loops and duplicates. Returns the
/// canonical list; the counters in `report` are incremented when given.
EdgeList canonicalize_edges(EdgeList edges, LoadReport* report = nullptr);

GraphBundle load_linqs_bundle(const std::filesystem::path& content_path,
                              const std::filesystem::path& cites_path);

GraphBundle load_pubmed_bundle(const std::filesystem::path& node_tab_path,
                               const std::filesystem::path& edge_tab_path);

/// Canonical directory: features.tsv, edges.tsv, labels.tsv (optional), meta.json.
void save_bundle_dir(const GraphBundle& bundle, const std::filesystem::path& dir);
GraphBundle load_bundle_dir(const std::filesystem::path& dir);

/// Dispatches on directory contents: a canonical bundle (meta.json), LINQS
/// (*.content + *.cites) or PubMed (*.NODE.paper.tab + *.cites.tab).
GraphBundle load_any(const std::filesystem::path& path);

/// Keeps the listed nodes (in the given order) and the edges among them.
GraphBundle induced_subgraph(const GraphBundle& bundle, const std::vector<Index>& keep);

/// D^{-1/2} (A + I) D^{-1/2} together with the self-loop degrees.
template <typename Scalar>
struct BasicNormalizedAdjacency {
  SparseMatrixT<Scalar> matrix;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> degrees;

  Index size() const { return matrix.rows(); }
};

using NormalizedAdjacency = BasicNormalizedAdjacency<double>;

template <typename Scalar = double>
BasicNormalizedAdjacency<Scalar> build_normalized_adjacency(const EdgeList& edges, Index n) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> degrees =
      Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Ones(n);
  for (const auto& e : edges) {
    degrees[e.u] += Scalar(1);
    degrees[e.v] += Scalar(1);
  }
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv_sqrt = degrees.cwiseSqrt().cwiseInverse();

  std::vector<Eigen::Triplet<Scalar>> triplets;
  triplets.reserve(static_cast<std::size_t>(n) + 2 * edges.size());
  for (Index i = 0; i < n; ++i) triplets.emplace_back(i, i, inv_sqrt[i] * inv_sqrt[i]);
  for (const auto& e : edges) {
    const Scalar w = inv_sqrt[e.u] * inv_sqrt[e.v];
    triplets.emplace_back(e.u, e.v, w);
    triplets.emplace_back(e.v, e.u, w);
  }
  BasicNormalizedAdjacency<Scalar> out;
  out.matrix.resize(n, n);
  // setFromTriplets sorts inner indices, which gives the row-major ascending-column order.
  out.matrix.setFromTriplets(triplets.begin(), triplets.end());
  out.matrix.makeCompressed();
  out.degrees = std::move(degrees);
  return out;
}

inline NormalizedAdjacency build_normalized_adjacency(const GraphBundle& bundle) {
  return build_normalized_adjacency<double>(bundle.edges, bundle.num_nodes());
}

}  // namespace cegcl
