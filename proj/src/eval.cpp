#include "cegcl/eval.hpp"

#include "cegcl/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace cegcl {

namespace {

void check_labels(const Labels& pred, const Labels& truth) {
  if (pred.empty()) throw std::invalid_argument("no labels to evaluate");
  if (pred.size() != truth.size()) {
    throw std::invalid_argument("label length mismatch: " + std::to_string(pred.size()) + " predicted vs " +
                                std::to_string(truth.size()) + " true");
  }
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] < 0 || truth[i] < 0) throw std::invalid_argument("labels must be non-negative");
  }
}

int label_count(const Labels& y) {
  int k = 0;
  for (int v : y) k = std::max(k, v + 1);
  return k;
}

double entropy(const Vector& counts, double n) {
  double h = 0.0;
  for (Index i = 0; i < counts.size(); ++i) {
    if (counts[i] > 0.0) h -= counts[i] / n * std::log(counts[i] / n);
  }
  return h;
}

double choose2(double x) { return x * (x - 1.0) / 2.0; }

}  // namespace

Matrix contingency(const Labels& pred, const Labels& truth) {
  check_labels(pred, truth);
  Matrix c = Matrix::Zero(label_count(pred), label_count(truth));
  for (std::size_t i = 0; i < pred.size(); ++i) c(pred[i], truth[i]) += 1.0;
  return c;
}

AccuracyResult accuracy_hungarian(const Labels& pred, const Labels& truth) {
  const Matrix c = contingency(pred, truth);
  const auto match = max_weight_assignment(c);
  AccuracyResult out;
  out.mapping.assign(match.size(), -1);
  double hit = 0.0;
  for (std::size_t r = 0; r < match.size(); ++r) {
    if (match[r] < 0) continue;
    out.mapping[r] = static_cast<int>(match[r]);
    hit += c(static_cast<Index>(r), match[r]);
  }
  out.acc = hit / static_cast<double>(pred.size());
  return out;
}

Labels apply_mapping(const Labels& pred, const std::vector<int>& mapping) {
  Labels out(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    out[i] = pred[i] < static_cast<int>(mapping.size()) ? mapping[static_cast<std::size_t>(pred[i])] : -1;
  }
  return out;
}

double nmi(const Labels& pred, const Labels& truth, NmiNormalization norm) {
  const Matrix c = contingency(pred, truth);
  const double n = static_cast<double>(pred.size());
  const Vector a = c.rowwise().sum();
  const Vector b = c.colwise().sum().transpose();
  const double ha = entropy(a, n), hb = entropy(b, n);
  if (ha == 0.0 && hb == 0.0) return 1.0;  // both partitions are a single block
  double mi = 0.0;
  for (Index i = 0; i < c.rows(); ++i) {
    for (Index j = 0; j < c.cols(); ++j) {
      if (c(i, j) > 0.0) mi += c(i, j) / n * std::log(n * c(i, j) / (a[i] * b[j]));
    }
  }
  const double denom = norm == NmiNormalization::arithmetic ? 0.5 * (ha + hb) : std::sqrt(ha * hb);
  if (denom == 0.0) return 0.0;
  return std::clamp(mi / denom, 0.0, 1.0);
}

double ari(const Labels& pred, const Labels& truth) {
  if (pred.size() < 2) throw std::invalid_argument("ari needs at least two items");
  const Matrix c = contingency(pred, truth);
  double index = 0.0;
  for (Index i = 0; i < c.size(); ++i) index += choose2(c.data()[i]);
  double sa = 0.0, sb = 0.0;
  const Vector a = c.rowwise().sum();
  const Vector b = c.colwise().sum().transpose();
  for (Index i = 0; i < a.size(); ++i) sa += choose2(a[i]);
  for (Index j = 0; j < b.size(); ++j) sb += choose2(b[j]);
  const double expected = sa * sb / choose2(static_cast<double>(pred.size()));
  const double maximum = 0.5 * (sa + sb);
  if (maximum == expected) return 1.0;
  return (index - expected) / (maximum - expected);
}

F1Scores f1_scores(const Labels& mapped_pred, const Labels& truth) {
  if (mapped_pred.empty()) throw std::invalid_argument("no labels to evaluate");
  if (mapped_pred.size() != truth.size()) throw std::invalid_argument("label length mismatch");
  int k = label_count(truth);
  for (int p : mapped_pred) k = std::max(k, p + 1);
  std::vector<double> tp(static_cast<std::size_t>(k), 0.0), fp = tp, fn = tp;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i], p = mapped_pred[i];
    if (t < 0) throw std::invalid_argument("labels must be non-negative");
    if (p == t) {
      tp[t] += 1.0;
    } else {
      fn[t] += 1.0;
      if (p >= 0) fp[p] += 1.0;
    }
  }
  double stp = 0.0, sfp = 0.0, sfn = 0.0, macro = 0.0;
  int classes = 0;
  for (int c = 0; c < k; ++c) {
    stp += tp[c];
    sfp += fp[c];
    sfn += fn[c];
    const double denom = 2.0 * tp[c] + fp[c] + fn[c];
    if (denom == 0.0) continue;  // class absent everywhere
    macro += 2.0 * tp[c] / denom;
    ++classes;
  }
  F1Scores out;
  out.micro = stp / (stp + 0.5 * (sfp + sfn));
  out.macro = classes > 0 ? macro / classes : 0.0;
  return out;
}

double modularity(const EdgeList& edges, const Labels& partition) {
  if (edges.empty()) throw std::invalid_argument("modularity is undefined for a graph without edges");
  const double m = static_cast<double>(edges.size());
  const int k = label_count(partition);
  std::vector<double> inside(static_cast<std::size_t>(k), 0.0), degree = inside;
  for (const auto& e : edges) {
    const auto n = static_cast<Index>(partition.size());
    if (e.u < 0 || e.v < 0 || e.u >= n || e.v >= n) throw std::out_of_range("edge endpoint outside the partition");
    const int cu = partition[e.u], cv = partition[e.v];
    if (cu < 0 || cv < 0) throw std::invalid_argument("labels must be non-negative");
    degree[cu] += 1.0;
    degree[cv] += 1.0;
    if (cu == cv) inside[cu] += 1.0;
  }
  double q = 0.0;
  for (int c = 0; c < k; ++c) q += inside[c] / m - (degree[c] / (2.0 * m)) * (degree[c] / (2.0 * m));
  return q;
}

MetricsReport evaluate(const Labels& pred, const Labels& truth, const EdgeList& edges, NmiNormalization norm) {
  MetricsReport r;
  const auto acc = accuracy_hungarian(pred, truth);
  r.acc = acc.acc;
  r.mapping = acc.mapping;
  r.nmi = nmi(pred, truth, norm);
  r.ari = pred.size() >= 2 ? ari(pred, truth) : 1.0;
  const Labels mapped = apply_mapping(pred, acc.mapping);
  const auto f1 = f1_scores(mapped, truth);
  r.micro_f1 = f1.micro;
  r.macro_f1 = f1.macro;
  r.modularity = edges.empty() ? 0.0 : modularity(edges, pred);
  const int k = label_count(truth);
  r.true_counts.assign(static_cast<std::size_t>(k), 0);
  r.predicted_counts.assign(static_cast<std::size_t>(k), 0);
  for (int t : truth) ++r.true_counts[t];
  for (int p : mapped) {
    if (p >= 0 && p < k) ++r.predicted_counts[p];
  }
  return r;
}

void write_community_counts(const std::filesystem::path& path, const MetricsReport& report,
                            const std::vector<std::string>& class_names) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "community\ttrue_size\tpredicted_size\n";
  for (std::size_t c = 0; c < report.true_counts.size(); ++c) {
    out << (c < class_names.size() ? class_names[c] : std::to_string(c)) << '\t' << report.true_counts[c] << '\t'
        << report.predicted_counts[c] << '\n';
  }
}

}  // namespace cegcl
