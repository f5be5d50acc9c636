#pragma once

#include "cegcl/graph_io.hpp"

#include <cstdint>

namespace cegcl {

/// Planted-partition graph with noisy block-indicator features.
struct SbmSpec {
  Index nodes = 400;
  int blocks = 4;
  double p_in = 0.1;
  double p_out = 0.01;
  Index feature_dim = 16;
  double feature_noise = 1.0;  // std-dev of Gaussian noise added to the indicator
};

/// Node i belongs to block floor(i * blocks / nodes). The indicator for block b
/// is 1 on the feature columns [b*w, (b+1)*w) with w = feature_dim / blocks.
GraphBundle make_sbm(const SbmSpec& spec, std::uint64_t seed);

/// Erdos-Renyi G(n, p) with a random spanning path added, so it is connected.
EdgeList random_connected_graph(Index n, double p, std::uint64_t seed);

}  // namespace cegcl
