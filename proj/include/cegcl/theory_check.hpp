#pragma once

#include "cegcl/graph_io.hpp"
#include "cegcl/types.hpp"

#include <filesystem>
#include <vector>

namespace cegcl {

struct Components {
  Labels labels;  // numbered in order of each component's smallest node
  int count = 0;
};

/// Union-find over the edge list.
Components connected_components(const EdgeList& edges, Index n);

/// Largest over components of the largest pairwise row distance of
/// D^{-1/2} H within the component.
double within_component_dispersion(const Matrix& h, const Vector& degrees, const Components& components);

/// Mean of the rows of D^{-1/2} H per component (components x p).
Matrix component_means(const Matrix& h, const Vector& degrees, const Components& components);

struct PropagationTrace {
  std::vector<double> dispersion;  // entry t is measured on H^(t); t = 0 is the input
  Components components;
  int converged_at = -1;           // first t with dispersion below tol, -1 if never
  Matrix final_state;

  bool converged() const { return converged_at >= 0; }
};

/// Iterates H <- A_hat H (normalized adjacency with self-loops) until the
/// within-component dispersion drops below tol or max_t steps have been taken.
PropagationTrace propagation_convergence(const EdgeList& edges, Index n, const Matrix& h0, double tol, int max_t);
PropagationTrace propagation_convergence(const GraphBundle& bundle, const Matrix& h0, double tol, int max_t);

/// Least-squares slope of log(dispersion) against t over entries above `floor`.
double log_dispersion_slope(const std::vector<double>& dispersion, double floor = 1e-300);

/// Largest |eigenvalue| of A_hat once the eigenvalue-1 eigenspace (one
/// D^{1/2} indicator per component) is projected out; power iteration.
double second_eigenvalue_magnitude(const NormalizedAdjacency& adj, const Components& components, int iterations = 5000,
                                   std::uint64_t seed = 0);

/// t,dispersion
void write_trace_csv(const std::filesystem::path& path, const PropagationTrace& trace);

}  // namespace cegcl
