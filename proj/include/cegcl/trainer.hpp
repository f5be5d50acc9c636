#pragma once

#include "cegcl/config.hpp"
#include "cegcl/encoder.hpp"
#include "cegcl/eval.hpp"
#include "cegcl/graph_io.hpp"
#include "cegcl/pest.hpp"
#include "cegcl/types.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

namespace cegcl {

/// Raised when a loss component or the total becomes NaN or infinite.
class NonFiniteLoss : public std::runtime_error {
 public:
  NonFiniteLoss(int epoch, const std::string& what)
      : std::runtime_error("epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

/// Mean contrastive loss plus the weighted auxiliary terms. Throws
/// std::domain_error when any component is not finite.
double total_loss(double l_cl_mean, double l_st, double l_clus, double l_al, double gamma_st, double gamma_clus,
                  double gamma_al);

/// Adam with bias correction.
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  /// One update of every parameter from its gradient; the parameter list must
  /// keep the same order and shapes across calls.
  void step(const std::vector<Matrix*>& params, const std::vector<const Matrix*>& grads);
  long steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Matrix> m_, v_;
};

struct EpochLosses {
  int epoch = 0;
  double l_cl = 0.0;
  double l_st = 0.0;
  double l_clus = 0.0;
  double l_al = 0.0;
  double total = 0.0;
  std::size_t similarity_evaluations = 0;
  std::size_t max_negatives = 0;  // largest per-anchor negative count this epoch
};

/// epoch,l_cl,l_st,l_clus,l_al,total
void write_loss_csv(const std::filesystem::path& path, const std::vector<EpochLosses>& history);

struct TrainState {
  GcnParams gcn;
  MlpParams mlp;
  Matrix centers;
  int epoch = 0;
  SamplingSchedule schedule;
  MedoidTrainingSet medoids;
  std::vector<EpochLosses> pretrain_history;
  std::vector<EpochLosses> history;
  int exhausted_at = -1;  // epoch at which medoid sampling ran out, if it did
};

struct TrainResult {
  TrainState state;
  Matrix embeddings;  // encoder output on the unmasked features
  Matrix soft_assignment;
  Labels assignments;
  std::optional<MetricsReport> metrics;
};

struct TrainOptions {
  std::function<void(const EpochLosses&, bool pretraining)> on_epoch;
};

/// Encoder trained on the contrastive loss alone with uniform negatives, then
/// cluster centers from k-means on its embeddings.
TrainState pretrain(const TrainConfig& config, const GraphBundle& bundle, const TrainOptions& options = {});

/// Pretraining followed by the joint objective.
TrainResult train(const TrainConfig& config, const GraphBundle& bundle, const TrainOptions& options = {});

/// Raw encoder output on the unmasked features.
Matrix encode(const GcnParams& gcn, const GraphBundle& bundle);

/// Parameters (encoder, head, centers) in a small binary format.
void save_params(const std::filesystem::path& path, const TrainState& state);
TrainState load_params(const std::filesystem::path& path);

}  // namespace cegcl
