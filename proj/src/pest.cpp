#include "cegcl/pest.hpp"

#include "cegcl/assignment.hpp"
#include "cegcl/encoder.hpp"
#include "cegcl/rng.hpp"

#include <algorithm>
#include <fstream>
#include <limits>

namespace cegcl {

namespace {

// Relative slack under which two costs count as tied.
constexpr double kTieSlack = 1e-12;

bool better(double candidate, double incumbent) {
  return candidate < incumbent - kTieSlack * std::max(1.0, std::abs(incumbent));
}

// Nearest medoid per row; ties go to the medoid with the lowest row index.
double assign(const Matrix& points, const std::vector<Index>& medoids, std::vector<int>& assignment) {
  const Index n = points.rows();
  assignment.assign(static_cast<std::size_t>(n), 0);
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    int best_c = -1;
    for (std::size_t c = 0; c < medoids.size(); ++c) {
      if (medoids[c] == i) {
        best = 0.0;
        best_c = static_cast<int>(c);
        break;
      }
      const double d = (points.row(i) - points.row(medoids[c])).norm();
      if (best_c < 0 || better(d, best) || (!better(best, d) && medoids[c] < medoids[best_c])) {
        best = d;
        best_c = static_cast<int>(c);
      }
    }
    assignment[i] = best_c;
    total += best;
  }
  return total;
}

// Member minimizing summed distance to the other members.
Index cluster_medoid(const Matrix& points, const std::vector<Index>& members) {
  const Index m = static_cast<Index>(members.size());
  if (m <= 2) return members.front();
  Matrix sub(m, points.cols());
  for (Index r = 0; r < m; ++r) sub.row(r) = points.row(members[r]);
  Vector cost = Vector::Zero(m);
  constexpr Index block = 512;
  for (Index start = 0; start < m; start += block) {
    const Index len = std::min(block, m - start);
    cost.segment(start, len) = pairwise_distances(sub.middleRows(start, len), sub).rowwise().sum();
  }
  Index best = 0;
  for (Index r = 1; r < m; ++r) {
    if (better(cost[r], cost[best])) best = r;
  }
  return members[best];
}

}  // namespace

Matrix pairwise_distances(const Matrix& a, const Matrix& b) {
  const Vector na = a.rowwise().squaredNorm();
  const Vector nb = b.rowwise().squaredNorm();
  Matrix d2 = -2.0 * a * b.transpose();
  d2.colwise() += na;
  d2.rowwise() += nb.transpose();
  return d2.cwiseMax(0.0).cwiseSqrt();
}

double kmedoids_objective(const Matrix& points, const std::vector<Index>& medoids) {
  std::vector<int> assignment;
  return assign(points, medoids, assignment);
}

KMedoidsResult kmedoids(const Matrix& points, Index k, int max_iter, std::uint64_t seed) {
  const Index n = points.rows();
  if (k <= 0) throw std::invalid_argument("kmedoids: k must be positive");
  if (n < k) {
    throw ScheduleExhausted("kmedoids: " + std::to_string(n) + " candidate nodes for " + std::to_string(k) +
                            " medoids");
  }
  KMedoidsResult out;
  // Greedy farthest-point seeding.
  auto gen = substream(seed, "kmedoids-init");
  out.medoids.push_back(static_cast<Index>(uniform_below(gen, static_cast<std::uint64_t>(n))));
  Vector nearest = (points.rowwise() - points.row(out.medoids[0])).rowwise().norm();
  while (static_cast<Index>(out.medoids.size()) < k) {
    Index far = -1;
    for (Index i = 0; i < n; ++i) {
      if (std::find(out.medoids.begin(), out.medoids.end(), i) != out.medoids.end()) continue;
      if (far < 0 || nearest[i] > nearest[far]) far = i;
    }
    out.medoids.push_back(far);
    nearest = nearest.cwiseMin((points.rowwise() - points.row(far)).rowwise().norm());
  }
  out.objective.push_back(assign(points, out.medoids, out.assignment));

  for (int iter = 0; iter < max_iter; ++iter) {
    std::vector<std::vector<Index>> members(static_cast<std::size_t>(k));
    for (Index i = 0; i < n; ++i) members[out.assignment[i]].push_back(i);
    auto next = out.medoids;
    for (Index c = 0; c < k; ++c) next[c] = cluster_medoid(points, members[c]);
    if (next == out.medoids) break;
    std::vector<int> assignment;
    const double objective = assign(points, next, assignment);
    if (better(out.objective.back(), objective)) break;  // guard against tie cycling
    out.medoids = std::move(next);
    out.assignment = std::move(assignment);
    out.objective.push_back(objective);
    out.iterations = iter + 1;
  }
  return out;
}

SamplingSchedule SamplingSchedule::start(Index nodes, int period) {
  if (period <= 0) throw std::invalid_argument("sampling period must be positive");
  SamplingSchedule s;
  s.period = period;
  s.remaining.resize(static_cast<std::size_t>(nodes));
  for (Index i = 0; i < nodes; ++i) s.remaining[i] = i;
  return s;
}

std::vector<Index> MedoidTrainingSet::nodes() const {
  std::vector<Index> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.node);
  return out;
}

Labels MedoidTrainingSet::labels() const {
  Labels out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.label);
  return out;
}

void MedoidTrainingSet::write_tsv(const std::filesystem::path& path, const std::vector<std::string>& node_ids) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "node_id\tround\tlabel\n";
  for (const auto& e : entries) out << node_ids.at(static_cast<std::size_t>(e.node)) << '\t' << e.round << '\t' << e.label << '\n';
}

std::vector<MedoidEntry> incremental_sample(SamplingSchedule& schedule, MedoidTrainingSet& training,
                                            const Matrix& embeddings, Index k, std::uint64_t seed, int max_iter) {
  if (schedule.exhausted) throw ScheduleExhausted("sampling schedule already exhausted");
  const auto& pool = schedule.remaining;
  if (static_cast<Index>(pool.size()) < k) {
    schedule.exhausted = true;
    throw ScheduleExhausted("only " + std::to_string(pool.size()) + " unselected nodes remain for " +
                            std::to_string(k) + " communities");
  }
  Matrix sub(static_cast<Index>(pool.size()), embeddings.cols());
  for (std::size_t r = 0; r < pool.size(); ++r) sub.row(static_cast<Index>(r)) = embeddings.row(pool[r]);
  const int round = schedule.rounds + 1;
  const auto result = kmedoids(sub, k, max_iter, mix64(seed, static_cast<std::uint64_t>(round)));

  std::vector<Index> chosen(static_cast<std::size_t>(k));
  for (Index c = 0; c < k; ++c) chosen[c] = pool[result.medoids[c]];

  std::vector<int> label(static_cast<std::size_t>(k));
  if (training.reference.empty()) {
    for (Index c = 0; c < k; ++c) label[c] = static_cast<int>(c);
    training.reference = chosen;
  } else {
    Matrix a(k, embeddings.cols()), b(k, embeddings.cols());
    for (Index c = 0; c < k; ++c) {
      a.row(c) = embeddings.row(chosen[c]);
      b.row(c) = embeddings.row(training.reference[c]);
    }
    const auto match = min_cost_assignment(pairwise_distances(a, b));
    for (Index c = 0; c < k; ++c) label[c] = static_cast<int>(match[c]);
  }

  std::vector<MedoidEntry> added;
  for (Index c = 0; c < k; ++c) added.push_back({chosen[c], round, label[c]});
  std::sort(added.begin(), added.end(), [](const MedoidEntry& x, const MedoidEntry& y) { return x.label < y.label; });
  training.entries.insert(training.entries.end(), added.begin(), added.end());

  auto sorted = chosen;
  std::sort(sorted.begin(), sorted.end());
  std::vector<Index> rest;
  rest.reserve(pool.size() - sorted.size());
  std::set_difference(pool.begin(), pool.end(), sorted.begin(), sorted.end(), std::back_inserter(rest));
  schedule.remaining = std::move(rest);
  schedule.rounds = round;
  return added;
}

ad::Var self_training_loss(ad::Var predictions, const MedoidTrainingSet& training) {
  return cross_entropy(predictions, training.labels());
}

}  // namespace cegcl
