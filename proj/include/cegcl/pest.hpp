#pragma once

#include "cegcl/tape.hpp"
#include "cegcl/types.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace cegcl {

/// Fewer candidate nodes than communities remain; sampling stops for good.
class ScheduleExhausted : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct KMedoidsResult {
  std::vector<Index> medoids;      // row index per cluster
  std::vector<int> assignment;     // cluster per row
  std::vector<double> objective;   // after initialization, then after every iteration
  int iterations = 0;

  double final_objective() const { return objective.back(); }
};

/// Voronoi-iteration k-medoids on Euclidean distances between rows: assign
/// every row to its nearest medoid, then move each medoid to the member
/// minimizing the summed in-cluster distance. Initialized by greedy
/// farthest-point seeding from a seeded start row. Ties go to the lowest index.
KMedoidsResult kmedoids(const Matrix& points, Index k, int max_iter = 50, std::uint64_t seed = 0);

/// Sum over rows of the distance to the nearest listed medoid.
double kmedoids_objective(const Matrix& points, const std::vector<Index>& medoids);

/// Euclidean distance matrix between the rows of a and b.
Matrix pairwise_distances(const Matrix& a, const Matrix& b);

/// Medoid sampling schedule: a round every `period` epochs over the nodes not
/// chosen in earlier rounds.
struct SamplingSchedule {
  int period = 1;
  int rounds = 0;
  std::vector<Index> remaining;  // ascending
  bool exhausted = false;

  static SamplingSchedule start(Index nodes, int period);
  bool due(int epoch) const { return !exhausted && period > 0 && epoch % period == 0; }
};

struct MedoidEntry {
  Index node;
  int round;  // 1-based
  int label;
};

/// Medoids accumulated over rounds, each with its community label.
struct MedoidTrainingSet {
  std::vector<MedoidEntry> entries;
  std::vector<Index> reference;  // first-round medoid node per label

  bool empty() const { return entries.empty(); }
  std::size_t size() const { return entries.size(); }
  std::vector<Index> nodes() const;
  Labels labels() const;

  /// node_id \t round \t label
  void write_tsv(const std::filesystem::path& path, const std::vector<std::string>& node_ids) const;
};

/// One sampling round: k-medoids over the remaining nodes' rows of H, labels
/// aligned to the first round's medoids by minimum-distance matching, chosen
/// medoids removed from the schedule. Returns the new entries. Throws
/// ScheduleExhausted (and marks the schedule) when fewer than k nodes remain.
std::vector<MedoidEntry> incremental_sample(SamplingSchedule& schedule, MedoidTrainingSet& training,
                                            const Matrix& embeddings, Index k, std::uint64_t seed,
                                            int max_iter = 50);

/// Cross-entropy of the head's predictions on the medoid rows against their labels.
ad::Var self_training_loss(ad::Var predictions, const MedoidTrainingSet& training);

}  // namespace cegcl
