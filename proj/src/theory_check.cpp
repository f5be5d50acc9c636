#include "cegcl/theory_check.hpp"

#include "cegcl/rng.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace cegcl {

namespace {

Index find(std::vector<Index>& parent, Index x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

std::vector<std::vector<Index>> members_of(const Components& components) {
  std::vector<std::vector<Index>> out(static_cast<std::size_t>(components.count));
  for (std::size_t i = 0; i < components.labels.size(); ++i) out[components.labels[i]].push_back(static_cast<Index>(i));
  return out;
}

}  // namespace

Components connected_components(const EdgeList& edges, Index n) {
  std::vector<Index> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), Index{0});
  for (const auto& e : edges) {
    if (e.u < 0 || e.v < 0 || e.u >= n || e.v >= n) throw std::out_of_range("edge endpoint out of range");
    Index a = find(parent, e.u), b = find(parent, e.v);
    if (a == b) continue;
    if (b < a) std::swap(a, b);
    parent[b] = a;  // the root is always the smallest node seen so far
  }
  Components out;
  out.labels.assign(static_cast<std::size_t>(n), -1);
  std::vector<int> root_label(static_cast<std::size_t>(n), -1);
  for (Index i = 0; i < n; ++i) {
    const Index r = find(parent, i);
    if (root_label[r] < 0) root_label[r] = out.count++;
    out.labels[i] = root_label[r];
  }
  return out;
}

double within_component_dispersion(const Matrix& h, const Vector& degrees, const Components& components) {
  const Matrix scaled = degrees.cwiseSqrt().cwiseInverse().asDiagonal() * h;
  double worst = 0.0;
  for (const auto& members : members_of(components)) {
    for (std::size_t a = 0; a < members.size(); ++a) {
      for (std::size_t b = a + 1; b < members.size(); ++b) {
        worst = std::max(worst, (scaled.row(members[a]) - scaled.row(members[b])).squaredNorm());
      }
    }
  }
  return std::sqrt(worst);
}

Matrix component_means(const Matrix& h, const Vector& degrees, const Components& components) {
  const Matrix scaled = degrees.cwiseSqrt().cwiseInverse().asDiagonal() * h;
  Matrix out = Matrix::Zero(components.count, h.cols());
  Vector count = Vector::Zero(components.count);
  for (std::size_t i = 0; i < components.labels.size(); ++i) {
    out.row(components.labels[i]) += scaled.row(static_cast<Index>(i));
    count[components.labels[i]] += 1.0;
  }
  return count.cwiseInverse().asDiagonal() * out;
}

PropagationTrace propagation_convergence(const EdgeList& edges, Index n, const Matrix& h0, double tol, int max_t) {
  if (!(tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
  if (h0.rows() != n) throw std::invalid_argument("initial state must have one row per node");
  const auto adj = build_normalized_adjacency<double>(edges, n);
  PropagationTrace trace;
  trace.components = connected_components(edges, n);
  Matrix h = h0;
  for (int t = 0;; ++t) {
    const double d = within_component_dispersion(h, adj.degrees, trace.components);
    trace.dispersion.push_back(d);
    if (d < tol) {
      trace.converged_at = t;
      break;
    }
    if (t == max_t) break;
    h = adj.matrix * h;
  }
  trace.final_state = std::move(h);
  return trace;
}

PropagationTrace propagation_convergence(const GraphBundle& bundle, const Matrix& h0, double tol, int max_t) {
  return propagation_convergence(bundle.edges, bundle.num_nodes(), h0, tol, max_t);
}

double log_dispersion_slope(const std::vector<double>& dispersion, double floor) {
  double st = 0, sy = 0, stt = 0, sty = 0, m = 0;
  for (std::size_t t = 0; t < dispersion.size(); ++t) {
    if (!(dispersion[t] > floor)) continue;
    const double x = static_cast<double>(t), y = std::log(dispersion[t]);
    st += x;
    sy += y;
    stt += x * x;
    sty += x * y;
    m += 1;
  }
  if (m < 2) throw std::invalid_argument("need at least two positive dispersion values to fit a slope");
  return (m * sty - st * sy) / (m * stt - st * st);
}

double second_eigenvalue_magnitude(const NormalizedAdjacency& adj, const Components& components, int iterations,
                                   std::uint64_t seed) {
  const Index n = adj.size();
  // Orthonormal basis of the eigenvalue-1 eigenspace.
  const auto members = members_of(components);
  std::vector<Vector> basis;
  for (const auto& m : members) {
    Vector v = Vector::Zero(n);
    for (Index i : m) v[i] = std::sqrt(adj.degrees[i]);
    basis.push_back(v.normalized());
  }
  auto deflate = [&](Vector& x) {
    for (const auto& b : basis) x -= b.dot(x) * b;
  };
  auto gen = substream(seed, "power-iteration");
  Vector x(n);
  for (Index i = 0; i < n; ++i) x[i] = standard_normal(gen);
  deflate(x);
  if (x.norm() == 0.0) return 0.0;
  x.normalize();
  // Two steps at a time so that a dominant negative eigenvalue cannot make the
  // estimate oscillate.
  double estimate = 0.0;
  for (int it = 0; it < iterations; ++it) {
    Vector y = adj.matrix * (adj.matrix * x);
    deflate(y);
    const double norm = y.norm();
    if (norm == 0.0) return 0.0;
    estimate = std::sqrt(norm);
    x = y / norm;
  }
  return estimate;
}

void write_trace_csv(const std::filesystem::path& path, const PropagationTrace& trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "t,dispersion\n";
  out.precision(17);
  for (std::size_t t = 0; t < trace.dispersion.size(); ++t) out << t << ',' << trace.dispersion[t] << '\n';
}

}  // namespace cegcl
