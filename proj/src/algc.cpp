#include "cegcl/algc.hpp"

#include "cegcl/rng.hpp"

#include <numeric>

namespace cegcl {

Matrix init_centers(const Matrix& embeddings, Index k, std::uint64_t seed, int max_iter) {
  const Index n = embeddings.rows();
  if (k <= 0) throw std::invalid_argument("init_centers: k must be positive");
  if (n < k) {
    throw std::invalid_argument("init_centers: " + std::to_string(n) + " points for " + std::to_string(k) +
                                " clusters");
  }
  auto gen = substream(seed, "kmeans-init");
  Matrix centers(k, embeddings.cols());
  centers.row(0) = embeddings.row(static_cast<Index>(uniform_below(gen, static_cast<std::uint64_t>(n))));
  Vector d2 = (embeddings.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (Index c = 1; c < k; ++c) {
    const double total = d2.sum();
    Index pick = 0;
    if (total > 0.0) {
      double target = uniform01(gen) * total;
      pick = n - 1;
      for (Index i = 0; i < n; ++i) {
        target -= d2[i];
        if (target < 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Index>(uniform_below(gen, static_cast<std::uint64_t>(n)));
    }
    centers.row(c) = embeddings.row(pick);
    d2 = d2.cwiseMin((embeddings.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }

  std::vector<Index> assignment(static_cast<std::size_t>(n), -1);
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    const Vector cn = centers.rowwise().squaredNorm();
    const Matrix cross = embeddings * centers.transpose();
    for (Index i = 0; i < n; ++i) {
      Index best = 0;
      double best_d = cn[0] - 2.0 * cross(i, 0);
      for (Index c = 1; c < k; ++c) {
        const double d = cn[c] - 2.0 * cross(i, c);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (assignment[i] != best) {
        assignment[i] = best;
        changed = true;
      }
    }
    if (!changed) break;
    Matrix sums = Matrix::Zero(k, embeddings.cols());
    Vector counts = Vector::Zero(k);
    for (Index i = 0; i < n; ++i) {
      sums.row(assignment[i]) += embeddings.row(i);
      counts[assignment[i]] += 1.0;
    }
    for (Index c = 0; c < k; ++c) {
      if (counts[c] > 0.0) centers.row(c) = sums.row(c) / counts[c];
    }
  }
  return centers;
}

ad::Var soft_assign(ad::Var embeddings, ad::Var centers, double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("soft_assign: alpha must be positive");
  auto& tape = *embeddings.tape;
  const Index n = tape.value(embeddings).rows();
  const Index k = tape.value(centers).rows();
  // |h|^2 1^T + 1 |mu|^2^T - 2 h mu^T
  ad::Var h_sq = ad::matmul(ad::row_sum(ad::square(embeddings)), tape.constant(Matrix::Ones(1, k)));
  ad::Var mu_sq = ad::matmul(tape.constant(Matrix::Ones(n, 1)), ad::transpose(ad::row_sum(ad::square(centers))));
  ad::Var d2 = h_sq + mu_sq - 2.0 * ad::matmul(embeddings, ad::transpose(centers));
  // Normalizing the kernel row-wise is a softmax over its logarithm.
  ad::Var logits = (-(alpha + 1.0) / 2.0) * ad::log(ad::add_constant((1.0 / alpha) * d2, 1.0));
  return ad::row_softmax(logits);
}

ad::Var clustering_loss(const Matrix& p, ad::Var q) {
  auto& tape = *q.tape;
  if (p.rows() != tape.value(q).rows() || p.cols() != tape.value(q).cols()) {
    throw ad::ShapeError("clustering_loss: target and soft assignment shapes differ");
  }
  const double entropy_term = (p.array() * (p.array() + kLogEpsilon).log()).sum();
  ad::Var cross = ad::sum(ad::hadamard(tape.constant(p), ad::log(ad::add_constant(q, kLogEpsilon))));
  return ad::add_constant(-1.0 * cross, entropy_term);
}

ad::Var alignment_loss(ad::Var centers, const MlpVars& mlp) {
  Labels targets(static_cast<std::size_t>(centers.tape->value(centers).rows()));
  std::iota(targets.begin(), targets.end(), 0);
  return cross_entropy(mlp_predict(centers, mlp), targets);
}

}  // namespace cegcl
