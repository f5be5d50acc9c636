#include "cegcl/trainer.hpp"

#include "cegcl/algc.hpp"
#include "cegcl/contrastive.hpp"
#include "cegcl/rng.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace cegcl {

namespace {

constexpr Activation kActivation = Activation::relu;

struct Graph {
  std::shared_ptr<const SparseMatrix> adj;
  std::shared_ptr<const SparseMatrix> features;
  Index nodes = 0;
  Index communities = 0;
};

Graph prepare(const GraphBundle& bundle) {
  bundle.validate();
  if (bundle.num_communities <= 0) throw std::invalid_argument("graph bundle has no community count");
  Graph g;
  g.adj = std::make_shared<const SparseMatrix>(build_normalized_adjacency(bundle).matrix);
  g.features = std::make_shared<const SparseMatrix>(bundle.features.sparseView());
  g.nodes = bundle.num_nodes();
  g.communities = bundle.num_communities;
  return g;
}

struct Views {
  ad::Var anchor;     // embeddings compared by the contrastive loss and clustered
  ad::Var augmented;
};

// Column masking of X is the same as zeroing the matching rows of the first
// weight matrix, which keeps the features sparse and constant.
Views encode_views(ad::Tape& tape, const Graph& g, const std::vector<ad::Var>& weights, const TrainConfig& c,
                   std::uint64_t phase, int epoch) {
  ad::Var h = gcn_forward(g.adj, g.features, weights, kActivation);
  std::vector<ad::Var> masked = weights;
  if (c.mask_rate > 0.0) {
    auto gen = substream(c.seed, "mask", phase, static_cast<std::uint64_t>(epoch));
    const Vector keep = column_keep_mask(g.features->cols(), c.mask_rate, gen);
    const Matrix& w0 = tape.value(weights[0]);
    masked[0] = ad::hadamard(weights[0], tape.constant(keep.replicate(1, w0.cols())));
  }
  ad::Var h_aug = gcn_forward(g.adj, g.features, masked, kActivation);
  if (c.normalize_similarity) return {ad::row_l2_normalize(h), ad::row_l2_normalize(h_aug)};
  return {h, h_aug};
}

ContrastiveTerm contrast(const Views& v, const NegativeSampleSet& negatives, const TrainConfig& c) {
  ContrastiveTerm forward = infonce_mean(v.anchor, v.augmented, v.anchor, negatives, c.tau);
  if (!c.symmetric_contrast) return forward;
  ContrastiveTerm backward = infonce_mean(v.augmented, v.anchor, v.augmented, negatives, c.tau);
  ContrastiveTerm both;
  both.loss = 0.5 * (forward.loss + backward.loss);
  both.similarity_evaluations = forward.similarity_evaluations + backward.similarity_evaluations;
  return both;
}

std::size_t max_count(const NegativeSampleSet& s) {
  Index best = 0;
  for (Index i = 0; i < s.anchors(); ++i) best = std::max(best, s.count(i));
  return static_cast<std::size_t>(best);
}

Matrix embed(const Graph& g, const GcnParams& gcn, bool normalize) {
  ad::Tape tape;
  const auto w = record(tape, gcn);
  ad::Var h = gcn_forward(g.adj, g.features, w, kActivation);
  return normalize ? tape.value(ad::row_l2_normalize(h)) : tape.value(h);
}

Matrix soft_assignment_of(const Matrix& e, const Matrix& centers) {
  ad::Tape tape;
  return tape.value(soft_assign(tape.constant(e), tape.constant(centers)));
}

void require_finite(int epoch, const EpochLosses& l) {
  try {
    (void)total_loss(l.l_cl, l.l_st, l.l_clus, l.l_al, 0.0, 0.0, 0.0);
    if (!std::isfinite(l.total)) throw std::domain_error("total loss is not finite");
  } catch (const std::domain_error& e) {
    throw NonFiniteLoss(epoch, e.what());
  }
}

TrainState pretrain_on(const TrainConfig& c, const Graph& g, const TrainOptions& options) {
  TrainState s;
  auto gcn_gen = substream(c.seed, "gcn-init");
  s.gcn = init_gcn(g.features->cols(), c.hidden_gcn, c.gcn_layers, kActivation, gcn_gen);
  auto mlp_gen = substream(c.seed, "mlp-init");
  s.mlp = init_mlp(c.hidden_gcn, c.mlp_hidden, g.communities, mlp_gen);

  const NegativeSampler uniform(g.nodes);
  const std::uint64_t neg_seed = mix64(c.seed, fnv1a("pretrain-negatives"));
  Adam opt(c.learning_rate);
  for (int e = 0; e < c.pretrain_epochs; ++e) {
    ad::Tape tape;
    const auto w = record(tape, s.gcn);
    const Views v = encode_views(tape, g, w, c, 0, e);
    const auto negatives = uniform.sample(c.n_neg, neg_seed, static_cast<std::uint64_t>(e));
    const ContrastiveTerm term = contrast(v, negatives, c);

    EpochLosses l;
    l.epoch = e;
    l.l_cl = tape.scalar(term.loss);
    l.total = l.l_cl;
    l.similarity_evaluations = term.similarity_evaluations;
    l.max_negatives = max_count(negatives);
    require_finite(e, l);
    tape.backward(term.loss);

    std::vector<Matrix*> params;
    std::vector<const Matrix*> grads;
    for (std::size_t i = 0; i < w.size(); ++i) {
      params.push_back(&s.gcn.weights[i]);
      grads.push_back(&tape.grad(w[i]));
    }
    opt.step(params, grads);
    s.pretrain_history.push_back(l);
    if (options.on_epoch) options.on_epoch(l, true);
  }
  s.centers = init_centers(embed(g, s.gcn, c.normalize_similarity), g.communities, mix64(c.seed, fnv1a("centers")));
  s.schedule = SamplingSchedule::start(g.nodes, c.sample_period);
  return s;
}

}  // namespace

double total_loss(double l_cl_mean, double l_st, double l_clus, double l_al, double gamma_st, double gamma_clus,
                  double gamma_al) {
  const std::pair<const char*, double> parts[] = {
      {"contrastive", l_cl_mean}, {"self-training", l_st}, {"clustering", l_clus}, {"alignment", l_al}};
  for (const auto& [name, v] : parts) {
    if (!std::isfinite(v)) throw std::domain_error(std::string(name) + " loss is not finite");
  }
  return l_cl_mean + gamma_st * l_st + gamma_clus * l_clus + gamma_al * l_al;
}

void Adam::step(const std::vector<Matrix*>& params, const std::vector<const Matrix*>& grads) {
  if (params.size() != grads.size()) throw std::invalid_argument("Adam: parameter/gradient count mismatch");
  if (m_.empty()) {
    for (const Matrix* p : params) {
      m_.push_back(Matrix::Zero(p->rows(), p->cols()));
      v_.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }
  if (m_.size() != params.size()) throw std::invalid_argument("Adam: parameter list changed between steps");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& g = *grads[i];
    if (g.rows() != m_[i].rows() || g.cols() != m_[i].cols()) throw std::invalid_argument("Adam: gradient shape changed");
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
    params[i]->array() -= lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
  }
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<EpochLosses>& history) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  out << "epoch,l_cl,l_st,l_clus,l_al,total\n";
  for (const auto& l : history) {
    out << l.epoch << ',' << l.l_cl << ',' << l.l_st << ',' << l.l_clus << ',' << l.l_al << ',' << l.total << '\n';
  }
}

TrainState pretrain(const TrainConfig& config, const GraphBundle& bundle, const TrainOptions& options) {
  config.validate();
  return pretrain_on(config, prepare(bundle), options);
}

TrainResult train(const TrainConfig& c, const GraphBundle& bundle, const TrainOptions& options) {
  c.validate();
  const Graph g = prepare(bundle);
  TrainResult result;
  TrainState& s = result.state;
  s = pretrain_on(c, g, options);

  const std::uint64_t neg_seed = mix64(c.seed, fnv1a("negatives"));
  const std::uint64_t medoid_seed = mix64(c.seed, fnv1a("kmedoids"));
  Adam opt(c.learning_rate);
  Matrix target;
  for (int e = 0; e < c.epochs; ++e) {
    ad::Tape tape;
    const auto w = record(tape, s.gcn);
    const MlpVars head = record(tape, s.mlp);
    ad::Var mu = tape.input("centers", s.centers);
    const Views v = encode_views(tape, g, w, c, 1, e);

    ad::Var q = soft_assign(v.anchor, mu);
    if (e % c.target_refresh == 0) target = target_distribution(tape.value(q));
    const Labels pseudo = pseudo_labels(tape.value(q));
    const auto negatives = NegativeSampler(pseudo).sample(c.n_neg, neg_seed, static_cast<std::uint64_t>(e));
    const ContrastiveTerm term = contrast(v, negatives, c);

    if (s.schedule.due(e)) {
      try {
        incremental_sample(s.schedule, s.medoids, tape.value(v.anchor), g.communities, medoid_seed);
      } catch (const ScheduleExhausted&) {
        s.exhausted_at = e;
      }
    }
    ad::Var l_st = s.medoids.empty()
                       ? tape.constant(Matrix::Zero(1, 1))
                       : self_training_loss(mlp_predict(ad::gather_rows(v.anchor, s.medoids.nodes()), head), s.medoids);
    ad::Var l_clus = clustering_loss(target, q);
    ad::Var l_al = alignment_loss(c.align_updates_centers ? mu : tape.constant(s.centers), head);
    ad::Var total = term.loss + c.gamma_st * l_st + c.gamma_clus * l_clus + c.gamma_al * l_al;

    EpochLosses l;
    l.epoch = e;
    l.l_cl = tape.scalar(term.loss);
    l.l_st = tape.scalar(l_st);
    l.l_clus = tape.scalar(l_clus);
    l.l_al = tape.scalar(l_al);
    l.total = tape.scalar(total);
    l.similarity_evaluations = term.similarity_evaluations;
    l.max_negatives = max_count(negatives);
    require_finite(e, l);
    tape.backward(total);

    std::vector<Matrix*> params;
    std::vector<const Matrix*> grads;
    for (std::size_t i = 0; i < w.size(); ++i) {
      params.push_back(&s.gcn.weights[i]);
      grads.push_back(&tape.grad(w[i]));
    }
    Matrix* mlp_params[] = {&s.mlp.w1, &s.mlp.b1, &s.mlp.w2, &s.mlp.b2};
    const ad::Var mlp_vars[] = {head.w1, head.b1, head.w2, head.b2};
    for (int i = 0; i < 4; ++i) {
      params.push_back(mlp_params[i]);
      grads.push_back(&tape.grad(mlp_vars[i]));
    }
    params.push_back(&s.centers);
    grads.push_back(&tape.grad(mu));
    opt.step(params, grads);

    s.epoch = e + 1;
    s.history.push_back(l);
    if (options.on_epoch) options.on_epoch(l, false);
  }

  result.embeddings = embed(g, s.gcn, false);
  result.soft_assignment = soft_assignment_of(
      c.normalize_similarity ? embed(g, s.gcn, true) : result.embeddings, s.centers);
  result.assignments = pseudo_labels(result.soft_assignment);
  if (bundle.labels) {
    const auto norm = c.nmi_normalization == "geometric" ? NmiNormalization::geometric : NmiNormalization::arithmetic;
    result.metrics = evaluate(result.assignments, *bundle.labels, bundle.edges, norm);
  }
  return result;
}

Matrix encode(const GcnParams& gcn, const GraphBundle& bundle) { return embed(prepare(bundle), gcn, false); }

namespace {

constexpr char kMagic[8] = {'C', 'E', 'G', 'C', 'L', 'P', '1', '\n'};

void write_matrix(std::ofstream& out, const Matrix& m) {
  const std::int64_t dims[2] = {m.rows(), m.cols()};
  out.write(reinterpret_cast<const char*>(dims), sizeof dims);
  // Row-major on disk regardless of the in-memory layout.
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      const double v = m(i, j);
      out.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
  }
}

Matrix read_matrix(std::ifstream& in) {
  std::int64_t dims[2];
  in.read(reinterpret_cast<char*>(dims), sizeof dims);
  if (!in || dims[0] < 0 || dims[1] < 0 || dims[0] * dims[1] > (std::int64_t{1} << 34)) {
    throw std::runtime_error("corrupt parameter file");
  }
  Matrix m(dims[0], dims[1]);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      double v;
      in.read(reinterpret_cast<char*>(&v), sizeof v);
      m(i, j) = v;
    }
  }
  if (!in) throw std::runtime_error("truncated parameter file");
  return m;
}

}  // namespace

void save_params(const std::filesystem::path& path, const TrainState& state) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(kMagic, sizeof kMagic);
  const std::int64_t header[2] = {static_cast<std::int64_t>(state.gcn.weights.size()),
                                  state.gcn.activation == Activation::relu ? 1 : 0};
  out.write(reinterpret_cast<const char*>(header), sizeof header);
  for (const auto& w : state.gcn.weights) write_matrix(out, w);
  for (const Matrix* m : {&state.mlp.w1, &state.mlp.b1, &state.mlp.w2, &state.mlp.b2, &state.centers}) {
    write_matrix(out, *m);
  }
}

TrainState load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw std::runtime_error(path.string() + " is not a parameter file");
  std::int64_t header[2];
  in.read(reinterpret_cast<char*>(header), sizeof header);
  if (!in || header[0] < 1 || header[0] > 64) throw std::runtime_error("corrupt parameter file");
  TrainState s;
  s.gcn.activation = header[1] ? Activation::relu : Activation::identity;
  for (std::int64_t l = 0; l < header[0]; ++l) s.gcn.weights.push_back(read_matrix(in));
  s.mlp.w1 = read_matrix(in);
  s.mlp.b1 = read_matrix(in);
  s.mlp.w2 = read_matrix(in);
  s.mlp.b2 = read_matrix(in);
  s.centers = read_matrix(in);
  return s;
}

}  // namespace cegcl
