#pragma once

#include "cegcl/types.hpp"

#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cegcl::ad {

enum class OpKind {
  input,
  matmul,
  sparse_matmul,
  add,
  sub,
  scalar_mul,
  elementwise_mul,
  relu,
  exp,
  log,
  row_softmax,
  row_l2_normalize,
  sum,
  mean,
  gather_rows,
  transpose,
  square,
  sqrt,
  gather_dot,
};

std::string_view op_name(OpKind kind);

class ShapeError : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

class DomainError : public std::domain_error {
  using std::domain_error::domain_error;
};

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; only valid while the
/// tape is alive.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;
};

/// Index matrix for gather_dot; entries < 0 are padding and produce a zero.
using IndexMatrix = Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic>;

/// A define-by-run record of a computation over dense matrices.
///
/// Every op evaluates eagerly when it is recorded. Inputs can later be
/// rebound and the whole record replayed with forward(), which is what the
/// finite-difference checker relies on. Sparse operands are constants: no
/// gradient ever flows into them.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var input(std::string name, Matrix value, bool requires_grad = true);
  Var constant(Matrix value) { return input({}, std::move(value), false); }

  Var matmul(Var a, Var b);
  Var sparse_matmul(std::shared_ptr<const SparseMatrix> lhs, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var scalar_mul(double c, Var a);
  Var elementwise_mul(Var a, Var b);
  Var relu(Var a);
  Var exp(Var a);
  Var log(Var a);
  Var row_softmax(Var a);
  Var row_l2_normalize(Var a, double eps = 1e-12);
  Var sum(Var a);
  Var mean(Var a);
  Var gather_rows(Var a, std::vector<Index> rows);
  Var transpose(Var a);
  Var square(Var a);
  Var sqrt(Var a);
  /// out(i, j) = <a.row(i), b.row(idx(i, j))>; idx(i, j) < 0 gives 0.
  Var gather_dot(Var a, Var b, IndexMatrix idx);

  /// Replaces the value of a named input. Values downstream are stale until
  /// forward() runs again.
  void bind(std::string_view name, const Matrix& value);
  void bind(Var input, const Matrix& value);

  /// Re-evaluates every recorded node in recording order.
  void forward();
  double forward(Var loss, const std::map<std::string, Matrix>& inputs);

  /// Reverse sweep from a 1x1 loss node. Gradients are reset first.
  void backward(Var loss);

  const Matrix& value(Var v) const;
  /// Gradient of the last backward() loss; zeros for nodes off the gradient path.
  const Matrix& grad(Var v) const;
  double scalar(Var v) const;

  OpKind kind(Var v) const { return node(v).kind; }
  bool requires_grad(Var v) const { return node(v).requires_grad; }
  const std::string& name(Var v) const { return node(v).name; }
  std::size_t size() const { return nodes_.size(); }
  bool stale() const { return stale_; }

  /// Ids of relu nodes; used to detect kinks during finite differencing.
  std::vector<std::size_t> relu_nodes() const;
  const Matrix& operand_value(std::size_t relu_id) const;

 private:
  struct Node {
    OpKind kind = OpKind::input;
    std::string name;
    std::size_t a = 0;
    std::size_t b = 0;
    double scalar = 0.0;
    bool requires_grad = false;
    std::shared_ptr<const SparseMatrix> sparse;
    std::shared_ptr<const std::vector<Index>> rows;
    std::shared_ptr<const IndexMatrix> index;
    Matrix value;
    mutable Matrix grad;
  };

  const Node& node(Var v) const;
  Var push(Node n);
  void evaluate(Node& n);
  void propagate(const Node& n);
  std::string describe(std::size_t id) const;
  void check_same_tape(Var a) const;

  std::vector<Node> nodes_;
  bool stale_ = false;
  bool has_grads_ = false;
};

// Expression-style free functions.
inline Var matmul(Var a, Var b) { return a.tape->matmul(a, b); }
inline Var relu(Var a) { return a.tape->relu(a); }
inline Var exp(Var a) { return a.tape->exp(a); }
inline Var log(Var a) { return a.tape->log(a); }
inline Var sqrt(Var a) { return a.tape->sqrt(a); }
inline Var square(Var a) { return a.tape->square(a); }
inline Var transpose(Var a) { return a.tape->transpose(a); }
inline Var row_softmax(Var a) { return a.tape->row_softmax(a); }
inline Var row_l2_normalize(Var a, double eps = 1e-12) { return a.tape->row_l2_normalize(a, eps); }
inline Var sum(Var a) { return a.tape->sum(a); }
inline Var mean(Var a) { return a.tape->mean(a); }
inline Var gather_rows(Var a, std::vector<Index> rows) { return a.tape->gather_rows(a, std::move(rows)); }
inline Var hadamard(Var a, Var b) { return a.tape->elementwise_mul(a, b); }
inline Var operator+(Var a, Var b) { return a.tape->add(a, b); }
inline Var operator-(Var a, Var b) { return a.tape->sub(a, b); }
inline Var operator*(double c, Var a) { return a.tape->scalar_mul(c, a); }

/// a + c elementwise, with c recorded as a constant.
Var add_constant(Var a, double c);
/// Sum over columns, as an n x 1 column (matmul with a constant ones vector).
Var row_sum(Var a);
/// Adds a 1 x d row vector to every row of an n x d matrix.
Var add_row_broadcast(Var a, Var row);

struct FiniteDifferenceEntry {
  std::size_t input_id;
  Index row;
  Index col;
};

struct FiniteDifferenceReport {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::vector<FiniteDifferenceEntry> skipped;  // perturbation crossed a relu kink
};

/// Central-difference check of the analytic gradient of `loss` with respect
/// to every entry of every listed input. The relative error per entry is
/// |analytic - numeric| / max(|analytic|, |numeric|, floor); the floor keeps
/// entries that are zero up to round-off from dominating the maximum.
FiniteDifferenceReport finite_difference_check(Tape& tape, Var loss, const std::vector<Var>& inputs,
                                               double eps = 1e-5, double floor = 1e-8);

}  // namespace cegcl::ad
