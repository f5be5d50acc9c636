#pragma once

#include "cegcl/rng.hpp"
#include "cegcl/tape.hpp"
#include "cegcl/types.hpp"

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace cegcl {

enum class Activation { identity, relu };

/// Weights of a stack of graph convolutions H' = act(A H W). Layer l maps
/// dims[l] -> dims[l + 1].
struct GcnParams {
  std::vector<Matrix> weights;
  Activation activation = Activation::relu;

  Index input_dim() const { return weights.front().rows(); }
  Index output_dim() const { return weights.back().cols(); }
};

/// Two-layer perceptron with a softmax output: softmax(relu(H W1 + b1) W2 + b2).
struct MlpParams {
  Matrix w1;  // d_emb x d
  Matrix b1;  // 1 x d
  Matrix w2;  // d x K
  Matrix b2;  // 1 x K
};

/// Glorot-uniform weights; every layer has `hidden` outputs.
GcnParams init_gcn(Index input_dim, Index hidden, int layers, Activation activation, SplitMix64& gen);
MlpParams init_mlp(Index input_dim, Index hidden, Index classes, SplitMix64& gen);
Matrix glorot_uniform(Index rows, Index cols, SplitMix64& gen);

struct MlpVars {
  ad::Var w1, b1, w2, b2;
};

std::vector<ad::Var> record(ad::Tape& tape, const GcnParams& params, const std::string& prefix = "gcn");
MlpVars record(ad::Tape& tape, const MlpParams& params, const std::string& prefix = "mlp");

ad::Var gcn_forward(const std::shared_ptr<const SparseMatrix>& adj, ad::Var features,
                    std::span<const ad::Var> weights, Activation activation);
/// Same propagation with a sparse constant feature matrix (bag-of-words inputs).
ad::Var gcn_forward(const std::shared_ptr<const SparseMatrix>& adj,
                    const std::shared_ptr<const SparseMatrix>& features, std::span<const ad::Var> weights,
                    Activation activation);

ad::Var mlp_predict(ad::Var rows, const MlpVars& mlp);

/// -(1/m) sum_i ln(probs(i, targets[i]) + 1e-12) over the m rows of `probs`.
ad::Var cross_entropy(ad::Var probs, const Labels& targets);

/// Which entries a feature mask zeroes.
enum class MaskMode {
  columns,  // one Bernoulli draw per feature column, shared by all nodes
  entries,  // one draw per (node, feature) entry
};

/// Zeroes randomly chosen features with probability mask_rate. Deterministic
/// for a given generator state.
Matrix mask_features(const Matrix& x, double mask_rate, SplitMix64& gen, MaskMode mode = MaskMode::columns);
Matrix mask_features(const Matrix& x, double mask_rate, std::uint64_t seed, MaskMode mode = MaskMode::columns);

/// Per-column keep mask (1 = kept) as drawn by mask_features in column mode.
Vector column_keep_mask(Index columns, double mask_rate, SplitMix64& gen);

}  // namespace cegcl
