#pragma once

#include "cegcl/encoder.hpp"
#include "cegcl/tape.hpp"
#include "cegcl/types.hpp"

#include <stdexcept>

namespace cegcl {

/// Added inside every log of the clustering objectives.
inline constexpr double kLogEpsilon = 1e-12;

/// Lloyd k-means with k-means++ seeding on a detached copy of the embeddings;
/// returns the k x d centroids. An emptied cluster keeps its previous center.
Matrix init_centers(const Matrix& embeddings, Index k, std::uint64_t seed, int max_iter = 100);

/// Student-t soft assignment q_ik proportional to (1 + |h_i - mu_k|^2 / alpha)^(-(alpha+1)/2),
/// differentiable in both the embeddings and the centers.
ad::Var soft_assign(ad::Var embeddings, ad::Var centers, double alpha = 1.0);

/// Sharpened targets p_ik = (q_ik^2 / f_k) / sum_k' (q_ik'^2 / f_k'), f_k = sum_i q_ik.
template <typename Derived>
Matrix target_distribution(const Eigen::MatrixBase<Derived>& q) {
  const RowVector f = q.colwise().sum();
  Matrix p = q.array().square().rowwise() / f.array();
  p.array().colwise() /= p.rowwise().sum().array();
  return p;
}

/// KL(P || Q) summed over all rows, with P held constant.
ad::Var clustering_loss(const Matrix& p, ad::Var q);

/// Each center row is fed through the head and supervised toward its own index.
ad::Var alignment_loss(ad::Var centers, const MlpVars& mlp);

/// Row-wise argmax; the lowest column wins ties.
template <typename Derived>
Labels pseudo_labels(const Eigen::MatrixBase<Derived>& q) {
  Labels out(static_cast<std::size_t>(q.rows()));
  for (Index i = 0; i < q.rows(); ++i) {
    Index best = 0;
    for (Index k = 1; k < q.cols(); ++k) {
      if (q(i, k) > q(i, best)) best = k;
    }
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

}  // namespace cegcl
