#include "cegcl/rng.hpp"
#include "cegcl/synthetic.hpp"
#include "cegcl/theory_check.hpp"

#include <doctest.h>

#include <cmath>
#include <queue>

using namespace cegcl;

namespace {

Matrix random_matrix(SplitMix64& gen, Index rows, Index cols) {
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = standard_normal(gen);
  return m;
}

// Independent traversal: BFS from every unvisited node in index order.
Labels bfs_components(const EdgeList& edges, Index n) {
  std::vector<std::vector<Index>> adj(static_cast<std::size_t>(n));
  for (const auto& e : edges) {
    adj[e.u].push_back(e.v);
    adj[e.v].push_back(e.u);
  }
  Labels label(static_cast<std::size_t>(n), -1);
  int next = 0;
  for (Index s = 0; s < n; ++s) {
    if (label[s] >= 0) continue;
    std::queue<Index> q;
    q.push(s);
    label[s] = next;
    while (!q.empty()) {
      const Index u = q.front();
      q.pop();
      for (Index v : adj[u]) {
        if (label[v] < 0) {
          label[v] = next;
          q.push(v);
        }
      }
    }
    ++next;
  }
  return label;
}

}  // namespace

TEST_CASE("connected_components examples") {
  CHECK(connected_components({{0, 1}, {1, 2}}, 3).count == 1);
  const auto two = connected_components({{0, 1}, {2, 3}}, 4);
  CHECK(two.count == 2);
  CHECK(two.labels == Labels{0, 0, 1, 1});
  const auto order = connected_components({{2, 3}, {0, 3}}, 5);
  CHECK(order.labels == Labels{0, 1, 0, 0, 2});
  SplitMix64 gen(1);
  for (int trial = 0; trial < 30; ++trial) {
    const Index n = 5 + static_cast<Index>(uniform_below(gen, 80));
    EdgeList edges;
    for (Index e = 0; e < n * 2 / 3; ++e) {
      const Index u = static_cast<Index>(uniform_below(gen, n)), v = static_cast<Index>(uniform_below(gen, n));
      if (u != v) edges.push_back({std::min(u, v), std::max(u, v)});
    }
    const auto c = connected_components(edges, n);
    const auto oracle = bfs_components(edges, n);
    CHECK(c.labels == oracle);
    CHECK(c.count == *std::max_element(oracle.begin(), oracle.end()) + 1);
  }
}

TEST_CASE("propagation on a single edge collapses in one step") {
  SplitMix64 gen(2);
  const auto trace = propagation_convergence({{0, 1}}, 2, random_matrix(gen, 2, 3), 1e-12, 10);
  REQUIRE(trace.dispersion.size() >= 2);
  CHECK(trace.dispersion[0] > 0.0);
  CHECK(trace.dispersion[1] < 1e-15);
  CHECK(trace.converged_at == 1);
}

TEST_CASE("disconnected components keep their separation") {
  // Two triangles; rows differ across components.
  const EdgeList edges{{0, 1}, {0, 2}, {1, 2}, {3, 4}, {3, 5}, {4, 5}};
  Matrix h0(6, 2);
  h0 << 1, 0, 2, 0, 3, 0, 0, 5, 0, 6, 0, 7;
  const auto trace = propagation_convergence(edges, 6, h0, 1e-10, 500);
  CHECK(trace.converged());
  CHECK(trace.components.count == 2);
  const auto adj = build_normalized_adjacency<double>(edges, 6);
  const Matrix means = component_means(trace.final_state, adj.degrees, trace.components);
  CHECK((means.row(0) - means.row(1)).norm() > 1.0);
  // Cross-component difference at every step is bounded away from zero.
  Matrix h = h0;
  for (int t = 0; t < 50; ++t) {
    const Matrix m = component_means(h, adj.degrees, trace.components);
    CHECK((m.row(0) - m.row(1)).norm() > 1.0);
    h = adj.matrix * h;
  }
}

TEST_CASE("path graph decays at the rate of the second eigenvalue") {
  const EdgeList path{{0, 1}, {1, 2}, {2, 3}, {3, 4}};
  SplitMix64 gen(3);
  const auto trace = propagation_convergence(path, 5, random_matrix(gen, 5, 2), 1e-13, 2000);
  CHECK(trace.converged());
  const auto adj = build_normalized_adjacency<double>(path, 5);
  const double lambda = second_eigenvalue_magnitude(adj, trace.components);
  // Independent check of the oracle against a dense symmetric eigensolver.
  Eigen::SelfAdjointEigenSolver<Matrix> eig{Matrix(adj.matrix)};
  Vector mags = eig.eigenvalues().cwiseAbs();
  std::sort(mags.data(), mags.data() + mags.size(), std::greater<>());
  CHECK(mags[0] == doctest::Approx(1.0));
  CHECK(lambda == doctest::Approx(mags[1]).epsilon(1e-8));
  // Late ratios approach lambda.
  const auto& d = trace.dispersion;
  const std::size_t late = d.size() - 3;
  CHECK(d[late] / d[late - 1] == doctest::Approx(lambda).epsilon(1e-3));
  CHECK(log_dispersion_slope(d) < 0.0);
  CHECK(log_dispersion_slope(d) == doctest::Approx(std::log(lambda)).epsilon(0.05));
}

TEST_CASE("fixed point rows are constant per component after rescaling") {
  const auto edges = random_connected_graph(20, 0.2, 4);
  SplitMix64 gen(4);
  const auto trace = propagation_convergence(edges, 20, random_matrix(gen, 20, 3), 1e-10, 2000);
  CHECK(trace.converged());
  const auto adj = build_normalized_adjacency<double>(edges, 20);
  const Matrix scaled = adj.degrees.cwiseSqrt().cwiseInverse().asDiagonal() * trace.final_state;
  for (Index i = 1; i < 20; ++i) CHECK((scaled.row(i) - scaled.row(0)).norm() < 1e-9);
  for (double v : trace.dispersion) CHECK(v >= 0.0);
}

TEST_CASE("non-convergence is reported") {
  const EdgeList path{{0, 1}, {1, 2}, {2, 3}, {3, 4}};
  SplitMix64 gen(5);
  const auto trace = propagation_convergence(path, 5, random_matrix(gen, 5, 2), 1e-12, 3);
  CHECK_FALSE(trace.converged());
  CHECK(trace.dispersion.size() == 4);
  CHECK_THROWS(propagation_convergence(path, 5, random_matrix(gen, 5, 2), 0.0, 3));
  CHECK_THROWS(propagation_convergence(path, 5, random_matrix(gen, 4, 2), 1e-3, 3));
}
