#include "cegcl/encoder.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace cegcl {

Matrix glorot_uniform(Index rows, Index cols, SplitMix64& gen) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix w(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) w(i, j) = limit * (2.0 * uniform01(gen) - 1.0);
  }
  return w;
}

GcnParams init_gcn(Index input_dim, Index hidden, int layers, Activation activation, SplitMix64& gen) {
  if (layers < 1) throw std::invalid_argument("init_gcn: need at least one layer");
  GcnParams p;
  p.activation = activation;
  Index in = input_dim;
  for (int l = 0; l < layers; ++l) {
    p.weights.push_back(glorot_uniform(in, hidden, gen));
    in = hidden;
  }
  return p;
}

MlpParams init_mlp(Index input_dim, Index hidden, Index classes, SplitMix64& gen) {
  MlpParams p;
  p.w1 = glorot_uniform(input_dim, hidden, gen);
  p.b1 = Matrix::Zero(1, hidden);
  p.w2 = glorot_uniform(hidden, classes, gen);
  p.b2 = Matrix::Zero(1, classes);
  return p;
}

std::vector<ad::Var> record(ad::Tape& tape, const GcnParams& params, const std::string& prefix) {
  std::vector<ad::Var> vars;
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    vars.push_back(tape.input(prefix + ".W" + std::to_string(l), params.weights[l]));
  }
  return vars;
}

MlpVars record(ad::Tape& tape, const MlpParams& params, const std::string& prefix) {
  return {tape.input(prefix + ".W1", params.w1), tape.input(prefix + ".b1", params.b1),
          tape.input(prefix + ".W2", params.w2), tape.input(prefix + ".b2", params.b2)};
}

namespace {

ad::Var activate(ad::Var h, Activation activation) {
  return activation == Activation::relu ? ad::relu(h) : h;
}

ad::Var propagate_rest(const std::shared_ptr<const SparseMatrix>& adj, ad::Var h,
                       std::span<const ad::Var> weights, Activation activation) {
  for (std::size_t l = 1; l < weights.size(); ++l) {
    h = activate(h.tape->sparse_matmul(adj, ad::matmul(h, weights[l])), activation);
  }
  return h;
}

}  // namespace

ad::Var gcn_forward(const std::shared_ptr<const SparseMatrix>& adj, ad::Var features,
                    std::span<const ad::Var> weights, Activation activation) {
  if (weights.empty()) throw std::invalid_argument("gcn_forward: no layers");
  auto& tape = *features.tape;
  // A (X W) is cheaper than (A X) W whenever the embedding is narrower than the input.
  ad::Var h = activate(tape.sparse_matmul(adj, ad::matmul(features, weights[0])), activation);
  return propagate_rest(adj, h, weights, activation);
}

ad::Var gcn_forward(const std::shared_ptr<const SparseMatrix>& adj,
                    const std::shared_ptr<const SparseMatrix>& features, std::span<const ad::Var> weights,
                    Activation activation) {
  if (weights.empty()) throw std::invalid_argument("gcn_forward: no layers");
  auto& tape = *weights[0].tape;
  ad::Var h = activate(tape.sparse_matmul(adj, tape.sparse_matmul(features, weights[0])), activation);
  return propagate_rest(adj, h, weights, activation);
}

ad::Var mlp_predict(ad::Var rows, const MlpVars& mlp) {
  ad::Var hidden = ad::relu(ad::add_row_broadcast(ad::matmul(rows, mlp.w1), mlp.b1));
  return ad::row_softmax(ad::add_row_broadcast(ad::matmul(hidden, mlp.w2), mlp.b2));
}

ad::Var cross_entropy(ad::Var probs, const Labels& targets) {
  auto& tape = *probs.tape;
  const Matrix& p = tape.value(probs);
  if (static_cast<Index>(targets.size()) != p.rows()) {
    throw ad::ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                         std::to_string(p.rows()) + " rows");
  }
  if (p.rows() == 0) throw std::invalid_argument("cross_entropy: no rows");
  Matrix onehot = Matrix::Zero(p.rows(), p.cols());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] < 0 || targets[i] >= p.cols()) throw std::out_of_range("cross_entropy: target out of range");
    onehot(static_cast<Index>(i), targets[i]) = 1.0;
  }
  const double scale = -1.0 / static_cast<double>(p.rows());
  return scale * ad::sum(ad::hadamard(tape.constant(std::move(onehot)), ad::log(ad::add_constant(probs, 1e-12))));
}

Vector column_keep_mask(Index columns, double mask_rate, SplitMix64& gen) {
  if (!(mask_rate >= 0.0 && mask_rate <= 1.0)) throw std::invalid_argument("mask_rate must lie in [0, 1]");
  Vector keep(columns);
  for (Index j = 0; j < columns; ++j) keep[j] = uniform01(gen) < mask_rate ? 0.0 : 1.0;
  return keep;
}

Matrix mask_features(const Matrix& x, double mask_rate, SplitMix64& gen, MaskMode mode) {
  if (!(mask_rate >= 0.0 && mask_rate <= 1.0)) throw std::invalid_argument("mask_rate must lie in [0, 1]");
  if (mode == MaskMode::columns) return x * column_keep_mask(x.cols(), mask_rate, gen).asDiagonal();
  Matrix out = x;
  for (Index j = 0; j < x.cols(); ++j) {
    for (Index i = 0; i < x.rows(); ++i) {
      if (uniform01(gen) < mask_rate) out(i, j) = 0.0;
    }
  }
  return out;
}

Matrix mask_features(const Matrix& x, double mask_rate, std::uint64_t seed, MaskMode mode) {
  SplitMix64 gen(seed);
  return mask_features(x, mask_rate, gen, mode);
}

}  // namespace cegcl
