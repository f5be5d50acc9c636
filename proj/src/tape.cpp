#include "cegcl/tape.hpp"

#include <algorithm>
#include <cmath>

namespace cegcl::ad {

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::input: return "input";
    case OpKind::matmul: return "matmul";
    case OpKind::sparse_matmul: return "sparse_matmul";
    case OpKind::add: return "add";
    case OpKind::sub: return "sub";
    case OpKind::scalar_mul: return "scalar_mul";
    case OpKind::elementwise_mul: return "elementwise_mul";
    case OpKind::relu: return "relu";
    case OpKind::exp: return "exp";
    case OpKind::log: return "log";
    case OpKind::row_softmax: return "row_softmax";
    case OpKind::row_l2_normalize: return "row_l2_normalize";
    case OpKind::sum: return "sum";
    case OpKind::mean: return "mean";
    case OpKind::gather_rows: return "gather_rows";
    case OpKind::transpose: return "transpose";
    case OpKind::square: return "square";
    case OpKind::sqrt: return "sqrt";
    case OpKind::gather_dot: return "gather_dot";
  }
  return "?";
}

namespace {

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

std::string Tape::describe(std::size_t id) const {
  const auto& n = nodes_[id];
  std::string s = std::string(op_name(n.kind)) + " (node " + std::to_string(id);
  if (!n.name.empty()) s += " '" + n.name + "'";
  return s + ")";
}

const Tape::Node& Tape::node(Var v) const {
  if (v.tape != this || v.id >= nodes_.size()) throw std::invalid_argument("variable does not belong to this tape");
  return nodes_[v.id];
}

void Tape::check_same_tape(Var a) const { (void)node(a); }

Var Tape::push(Node n) {
  n.requires_grad = n.kind == OpKind::input
                        ? n.requires_grad
                        : (nodes_[n.a].requires_grad ||
                           ((n.kind == OpKind::matmul || n.kind == OpKind::add || n.kind == OpKind::sub ||
                             n.kind == OpKind::elementwise_mul || n.kind == OpKind::gather_dot) &&
                            nodes_[n.b].requires_grad));
  nodes_.push_back(std::move(n));
  const std::size_t id = nodes_.size() - 1;
  try {
    evaluate(nodes_[id]);
  } catch (...) {
    nodes_.pop_back();
    throw;
  }
  has_grads_ = false;
  return {this, id};
}

Var Tape::input(std::string name, Matrix value, bool requires_grad) {
  if (!name.empty()) {
    for (const auto& n : nodes_) {
      if (n.kind == OpKind::input && n.name == name) throw std::invalid_argument("duplicate input name '" + name + "'");
    }
  }
  Node n;
  n.kind = OpKind::input;
  n.name = std::move(name);
  n.requires_grad = requires_grad;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

#define CEGCL_BINARY(fn, KIND)      \
  Var Tape::fn(Var a, Var b) {      \
    check_same_tape(a);             \
    check_same_tape(b);             \
    Node n;                         \
    n.kind = OpKind::KIND;          \
    n.a = a.id;                     \
    n.b = b.id;                     \
    return push(std::move(n));      \
  }
#define CEGCL_UNARY(fn, KIND)       \
  Var Tape::fn(Var a) {             \
    check_same_tape(a);             \
    Node n;                         \
    n.kind = OpKind::KIND;          \
    n.a = a.id;                     \
    return push(std::move(n));      \
  }

CEGCL_BINARY(matmul, matmul)
CEGCL_BINARY(add, add)
CEGCL_BINARY(sub, sub)
CEGCL_BINARY(elementwise_mul, elementwise_mul)
CEGCL_UNARY(relu, relu)
CEGCL_UNARY(exp, exp)
CEGCL_UNARY(log, log)
CEGCL_UNARY(row_softmax, row_softmax)
CEGCL_UNARY(sum, sum)
CEGCL_UNARY(mean, mean)
CEGCL_UNARY(transpose, transpose)
CEGCL_UNARY(square, square)
CEGCL_UNARY(sqrt, sqrt)

#undef CEGCL_BINARY
#undef CEGCL_UNARY

Var Tape::sparse_matmul(std::shared_ptr<const SparseMatrix> lhs, Var b) {
  check_same_tape(b);
  if (!lhs) throw std::invalid_argument("sparse_matmul: null operand");
  Node n;
  n.kind = OpKind::sparse_matmul;
  n.a = b.id;
  n.sparse = std::move(lhs);
  return push(std::move(n));
}

Var Tape::scalar_mul(double c, Var a) {
  check_same_tape(a);
  Node n;
  n.kind = OpKind::scalar_mul;
  n.a = a.id;
  n.scalar = c;
  return push(std::move(n));
}

Var Tape::row_l2_normalize(Var a, double eps) {
  check_same_tape(a);
  if (!(eps > 0.0)) throw std::invalid_argument("row_l2_normalize: eps must be positive");
  Node n;
  n.kind = OpKind::row_l2_normalize;
  n.a = a.id;
  n.scalar = eps;
  return push(std::move(n));
}

Var Tape::gather_rows(Var a, std::vector<Index> rows) {
  check_same_tape(a);
  Node n;
  n.kind = OpKind::gather_rows;
  n.a = a.id;
  n.rows = std::make_shared<const std::vector<Index>>(std::move(rows));
  return push(std::move(n));
}

Var Tape::gather_dot(Var a, Var b, IndexMatrix idx) {
  check_same_tape(a);
  check_same_tape(b);
  Node n;
  n.kind = OpKind::gather_dot;
  n.a = a.id;
  n.b = b.id;
  n.index = std::make_shared<const IndexMatrix>(std::move(idx));
  return push(std::move(n));
}

void Tape::evaluate(Node& n) {
  const auto fail = [&](const std::string& what) -> void {
    throw ShapeError(describe(static_cast<std::size_t>(&n - nodes_.data())) + ": " + what);
  };
  const Matrix* A = &nodes_[n.a].value;
  const Matrix* B = &nodes_[n.b].value;
  switch (n.kind) {
    case OpKind::input:
      return;
    case OpKind::matmul:
      if (A->cols() != B->rows()) fail("cannot multiply " + shape(*A) + " by " + shape(*B));
      n.value.noalias() = (*A) * (*B);
      return;
    case OpKind::sparse_matmul:
      if (n.sparse->cols() != A->rows()) {
        fail("cannot multiply sparse " + std::to_string(n.sparse->rows()) + "x" +
             std::to_string(n.sparse->cols()) + " by " + shape(*A));
      }
      n.value.noalias() = (*n.sparse) * (*A);
      return;
    case OpKind::add:
    case OpKind::sub:
    case OpKind::elementwise_mul:
      if (A->rows() != B->rows() || A->cols() != B->cols()) fail("shape " + shape(*A) + " vs " + shape(*B));
      if (n.kind == OpKind::add) n.value = *A + *B;
      else if (n.kind == OpKind::sub) n.value = *A - *B;
      else n.value = A->cwiseProduct(*B);
      return;
    case OpKind::scalar_mul:
      n.value = n.scalar * (*A);
      return;
    case OpKind::relu:
      n.value = A->cwiseMax(0.0);
      return;
    case OpKind::exp:
      n.value = A->array().exp().matrix();
      return;
    case OpKind::log:
    case OpKind::sqrt:
      if (A->size() > 0 && !(A->minCoeff() > 0.0)) {
        throw DomainError(describe(static_cast<std::size_t>(&n - nodes_.data())) +
                          ": argument has a non-positive entry");
      }
      if (n.kind == OpKind::log) n.value = A->array().log().matrix();
      else n.value = A->cwiseSqrt();
      return;
    case OpKind::row_softmax: {
      n.value.resize(A->rows(), A->cols());
      for (Index i = 0; i < A->rows(); ++i) {
        const double m = A->row(i).maxCoeff();
        n.value.row(i) = (A->row(i).array() - m).exp().matrix();
        n.value.row(i) /= n.value.row(i).sum();
      }
      return;
    }
    case OpKind::row_l2_normalize: {
      const Vector norms = (A->rowwise().squaredNorm().array() + n.scalar).sqrt().matrix();
      n.value = norms.cwiseInverse().asDiagonal() * (*A);
      return;
    }
    case OpKind::sum:
      n.value = Matrix::Constant(1, 1, A->sum());
      return;
    case OpKind::mean:
      if (A->size() == 0) fail("mean of an empty matrix");
      n.value = Matrix::Constant(1, 1, A->mean());
      return;
    case OpKind::gather_rows: {
      n.value.resize(static_cast<Index>(n.rows->size()), A->cols());
      for (std::size_t r = 0; r < n.rows->size(); ++r) {
        const Index src = (*n.rows)[r];
        if (src < 0 || src >= A->rows()) fail("row index " + std::to_string(src) + " out of range");
        n.value.row(static_cast<Index>(r)) = A->row(src);
      }
      return;
    }
    case OpKind::transpose:
      n.value = A->transpose();
      return;
    case OpKind::square:
      n.value = A->cwiseAbs2();
      return;
    case OpKind::gather_dot: {
      const auto& idx = *n.index;
      if (idx.rows() != A->rows()) fail("index has " + std::to_string(idx.rows()) + " rows, operand " + shape(*A));
      if (A->cols() != B->cols()) fail("row width " + shape(*A) + " vs " + shape(*B));
      n.value.resize(idx.rows(), idx.cols());
      for (Index i = 0; i < idx.rows(); ++i) {
        for (Index j = 0; j < idx.cols(); ++j) {
          const Index r = idx(i, j);
          if (r >= B->rows()) fail("index " + std::to_string(r) + " out of range");
          n.value(i, j) = r < 0 ? 0.0 : A->row(i).dot(B->row(r));
        }
      }
      return;
    }
  }
}

void Tape::bind(std::string_view name, const Matrix& value) {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].kind == OpKind::input && nodes_[i].name == name) {
      bind(Var{this, i}, value);
      return;
    }
  }
  throw std::invalid_argument("no input named '" + std::string(name) + "'");
}

void Tape::bind(Var v, const Matrix& value) {
  auto& n = nodes_.at(v.id);
  if (v.tape != this || n.kind != OpKind::input) throw std::invalid_argument("bind: not an input of this tape");
  if (n.value.rows() != value.rows() || n.value.cols() != value.cols()) {
    throw ShapeError(describe(v.id) + ": rebinding " + shape(n.value) + " with " + shape(value));
  }
  n.value = value;
  stale_ = true;
}

void Tape::forward() {
  for (auto& n : nodes_) evaluate(n);
  stale_ = false;
  has_grads_ = false;
}

double Tape::forward(Var loss, const std::map<std::string, Matrix>& inputs) {
  for (const auto& [name, value] : inputs) bind(name, value);
  forward();
  return scalar(loss);
}

void Tape::propagate(const Node& n) {
  const Matrix& G = n.grad;
  Node& na = nodes_[n.a];
  Node& nb = nodes_[n.b];
  const bool ga = na.requires_grad;
  const bool gb = nb.requires_grad;
  switch (n.kind) {
    case OpKind::input:
      return;
    case OpKind::matmul:
      if (ga) na.grad.noalias() += G * nb.value.transpose();
      if (gb) nb.grad.noalias() += na.value.transpose() * G;
      return;
    case OpKind::sparse_matmul:
      if (ga) na.grad.noalias() += n.sparse->transpose() * G;
      return;
    case OpKind::add:
      if (ga) na.grad += G;
      if (gb) nb.grad += G;
      return;
    case OpKind::sub:
      if (ga) na.grad += G;
      if (gb) nb.grad -= G;
      return;
    case OpKind::elementwise_mul:
      if (ga) na.grad += G.cwiseProduct(nb.value);
      if (gb) nb.grad += G.cwiseProduct(na.value);
      return;
    case OpKind::scalar_mul:
      if (ga) na.grad += n.scalar * G;
      return;
    case OpKind::relu:
      if (ga) na.grad += (na.value.array() > 0.0).select(G, 0.0);
      return;
    case OpKind::exp:
      if (ga) na.grad += G.cwiseProduct(n.value);
      return;
    case OpKind::log:
      if (ga) na.grad += G.cwiseQuotient(na.value);
      return;
    case OpKind::sqrt:
      if (ga) na.grad += (0.5 * G.array() / n.value.array()).matrix();
      return;
    case OpKind::row_softmax:
      if (ga) {
        const Vector dots = G.cwiseProduct(n.value).rowwise().sum();
        na.grad += n.value.cwiseProduct(G - dots.replicate(1, G.cols()));
      }
      return;
    case OpKind::row_l2_normalize:
      if (ga) {
        const Vector norms = (na.value.rowwise().squaredNorm().array() + n.scalar).sqrt().matrix();
        const Vector dots = G.cwiseProduct(n.value).rowwise().sum();
        na.grad += norms.cwiseInverse().asDiagonal() * (G - dots.asDiagonal() * n.value);
      }
      return;
    case OpKind::sum:
      if (ga) na.grad.array() += G(0, 0);
      return;
    case OpKind::mean:
      if (ga) na.grad.array() += G(0, 0) / static_cast<double>(na.value.size());
      return;
    case OpKind::gather_rows:
      if (ga) {
        for (std::size_t r = 0; r < n.rows->size(); ++r) na.grad.row((*n.rows)[r]) += G.row(static_cast<Index>(r));
      }
      return;
    case OpKind::transpose:
      if (ga) na.grad += G.transpose();
      return;
    case OpKind::square:
      if (ga) na.grad += 2.0 * G.cwiseProduct(na.value);
      return;
    case OpKind::gather_dot: {
      const auto& idx = *n.index;
      for (Index i = 0; i < idx.rows(); ++i) {
        for (Index j = 0; j < idx.cols(); ++j) {
          const Index r = idx(i, j);
          if (r < 0) continue;
          const double g = G(i, j);
          if (g == 0.0) continue;
          if (ga) na.grad.row(i) += g * nb.value.row(r);
          if (gb) nb.grad.row(r) += g * na.value.row(i);
        }
      }
      return;
    }
  }
}

void Tape::backward(Var loss) {
  const Node& ln = node(loss);
  if (stale_) throw std::logic_error("backward called before forward: inputs were rebound");
  if (ln.value.rows() != 1 || ln.value.cols() != 1) {
    throw ShapeError("backward: loss " + describe(loss.id) + " is " + shape(ln.value) + ", expected 1x1");
  }
  for (auto& n : nodes_) {
    if (n.requires_grad) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    else n.grad.resize(0, 0);
  }
  if (!ln.requires_grad) {
    has_grads_ = true;
    return;
  }
  nodes_[loss.id].grad(0, 0) = 1.0;
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    const Node& n = nodes_[id];
    if (!n.requires_grad || n.kind == OpKind::input) continue;
    propagate(n);
  }
  has_grads_ = true;
}

const Matrix& Tape::value(Var v) const { return node(v).value; }

const Matrix& Tape::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad.rows() != n.value.rows() || n.grad.cols() != n.value.cols()) {
    n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  }
  return n.grad;
}

double Tape::scalar(Var v) const {
  const Matrix& m = value(v);
  if (m.rows() != 1 || m.cols() != 1) throw ShapeError(describe(v.id) + " is not 1x1");
  return m(0, 0);
}

std::vector<std::size_t> Tape::relu_nodes() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].kind == OpKind::relu) out.push_back(i);
  }
  return out;
}

const Matrix& Tape::operand_value(std::size_t relu_id) const { return nodes_.at(nodes_.at(relu_id).a).value; }

Var add_constant(Var a, double c) {
  const Matrix& v = a.tape->value(a);
  return a + a.tape->constant(Matrix::Constant(v.rows(), v.cols(), c));
}

Var row_sum(Var a) {
  return matmul(a, a.tape->constant(Matrix::Ones(a.tape->value(a).cols(), 1)));
}

Var add_row_broadcast(Var a, Var row) {
  return a + matmul(a.tape->constant(Matrix::Ones(a.tape->value(a).rows(), 1)), row);
}

namespace {

using SignPattern = std::vector<Eigen::Array<signed char, Eigen::Dynamic, Eigen::Dynamic>>;

SignPattern relu_signs(const Tape& tape, const std::vector<std::size_t>& relus) {
  SignPattern out;
  out.reserve(relus.size());
  for (auto id : relus) {
    const Matrix& v = tape.operand_value(id);
    out.push_back(((v.array() > 0.0).cast<signed char>() - (v.array() < 0.0).cast<signed char>()));
  }
  return out;
}

bool same_signs(const SignPattern& a, const SignPattern& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if ((a[i] != b[i]).any()) return false;
  }
  return true;
}

}  // namespace

FiniteDifferenceReport finite_difference_check(Tape& tape, Var loss, const std::vector<Var>& inputs, double eps,
                                               double floor) {
  if (!(eps > 0.0 && eps <= 1e-2)) throw std::invalid_argument("finite_difference_check: eps must be in (0, 1e-2]");
  if (!(floor > 0.0)) throw std::invalid_argument("finite_difference_check: floor must be positive");
  tape.forward();
  tape.backward(loss);
  std::vector<Matrix> analytic;
  for (Var v : inputs) {
    if (tape.kind(v) != OpKind::input) throw std::invalid_argument("finite_difference_check: not an input node");
    analytic.push_back(tape.grad(v));
  }
  const auto relus = tape.relu_nodes();
  const SignPattern base = relu_signs(tape, relus);

  FiniteDifferenceReport report;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Var v = inputs[k];
    Matrix x = tape.value(v);
    for (Index c = 0; c < x.cols(); ++c) {
      for (Index r = 0; r < x.rows(); ++r) {
        const double saved = x(r, c);
        x(r, c) = saved + eps;
        tape.bind(v, x);
        tape.forward();
        const double plus = tape.scalar(loss);
        const bool plus_same = same_signs(base, relu_signs(tape, relus));
        x(r, c) = saved - eps;
        tape.bind(v, x);
        tape.forward();
        const double minus = tape.scalar(loss);
        const bool minus_same = same_signs(base, relu_signs(tape, relus));
        x(r, c) = saved;
        if (!std::isfinite(plus) || !std::isfinite(minus) || !std::isfinite(analytic[k](r, c))) {
          tape.bind(v, x);
          tape.forward();
          throw std::runtime_error("finite_difference_check: non-finite value encountered");
        }
        if (!plus_same || !minus_same) {
          report.skipped.push_back({v.id, r, c});
          continue;
        }
        const double numeric = (plus - minus) / (2.0 * eps);
        const double a = analytic[k](r, c);
        const double denom = std::max({std::abs(a), std::abs(numeric), floor});
        report.max_relative_error = std::max(report.max_relative_error, std::abs(a - numeric) / denom);
        ++report.checked;
      }
    }
    tape.bind(v, x);
  }
  tape.forward();
  tape.backward(loss);
  return report;
}

}  // namespace cegcl::ad
