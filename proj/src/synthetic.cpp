#include "cegcl/synthetic.hpp"

#include "cegcl/rng.hpp"

#include <numeric>
#include <stdexcept>

namespace cegcl {

GraphBundle make_sbm(const SbmSpec& spec, std::uint64_t seed) {
  if (spec.nodes < spec.blocks || spec.blocks <= 0) throw std::invalid_argument("make_sbm: need nodes >= blocks > 0");
  auto gen = substream(seed, "sbm");
  GraphBundle bundle;
  const Index n = spec.nodes;
  Labels labels(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    labels[i] = static_cast<int>(i * spec.blocks / n);
    bundle.node_ids.push_back("v" + std::to_string(i));
  }
  EdgeList edges;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const double p = labels[i] == labels[j] ? spec.p_in : spec.p_out;
      if (uniform01(gen) < p) edges.push_back({i, j});
    }
  }
  bundle.edges = canonicalize_edges(std::move(edges));

  const Index width = std::max<Index>(1, spec.feature_dim / spec.blocks);
  bundle.features = Matrix::Zero(n, spec.feature_dim);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < spec.feature_dim; ++j) {
      const bool on = j / width == labels[i];
      bundle.features(i, j) = (on ? 1.0 : 0.0) + spec.feature_noise * standard_normal(gen);
    }
  }
  bundle.labels = std::move(labels);
  bundle.num_communities = spec.blocks;
  for (int b = 0; b < spec.blocks; ++b) bundle.class_names.push_back("block" + std::to_string(b));
  bundle.report.citation_lines = bundle.edges.size();
  bundle.validate();
  return bundle;
}

EdgeList random_connected_graph(Index n, double p, std::uint64_t seed) {
  auto gen = substream(seed, "er");
  EdgeList edges;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      if (uniform01(gen) < p) edges.push_back({i, j});
    }
  }
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_below(gen, i)]);
  for (std::size_t i = 1; i < order.size(); ++i) edges.push_back({order[i - 1], order[i]});
  return canonicalize_edges(std::move(edges));
}

}  // namespace cegcl
