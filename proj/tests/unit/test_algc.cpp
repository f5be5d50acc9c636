#include "cegcl/algc.hpp"
#include "cegcl/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace cegcl;
using namespace cegcl::ad;

namespace {

Matrix random_matrix(SplitMix64& gen, Index rows, Index cols) {
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = standard_normal(gen);
  return m;
}

Matrix random_stochastic(SplitMix64& gen, Index rows, Index cols) {
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = 0.05 + uniform01(gen);
  m.array().colwise() /= m.rowwise().sum().array();
  return m;
}

Matrix q_of(const Matrix& h, const Matrix& mu) {
  Tape tape;
  return tape.value(soft_assign(tape.constant(h), tape.constant(mu)));
}

// Plain Lloyd from random distinct starting points; returns (centers, inertia).
std::pair<Matrix, double> reference_lloyd(const Matrix& x, Index k, SplitMix64& gen) {
  Matrix c(k, x.cols());
  std::vector<Index> picks;
  while (static_cast<Index>(picks.size()) < k) {
    const Index p = static_cast<Index>(uniform_below(gen, static_cast<std::uint64_t>(x.rows())));
    if (std::find(picks.begin(), picks.end(), p) == picks.end()) picks.push_back(p);
  }
  for (Index j = 0; j < k; ++j) c.row(j) = x.row(picks[j]);
  std::vector<Index> a(static_cast<std::size_t>(x.rows()));
  double inertia = 0.0;
  for (int it = 0; it < 200; ++it) {
    inertia = 0.0;
    for (Index i = 0; i < x.rows(); ++i) {
      Index best = 0;
      for (Index j = 1; j < k; ++j) {
        if ((x.row(i) - c.row(j)).squaredNorm() < (x.row(i) - c.row(best)).squaredNorm()) best = j;
      }
      a[i] = best;
      inertia += (x.row(i) - c.row(best)).squaredNorm();
    }
    Matrix next = Matrix::Zero(k, x.cols());
    Vector count = Vector::Zero(k);
    for (Index i = 0; i < x.rows(); ++i) {
      next.row(a[i]) += x.row(i);
      count[a[i]] += 1;
    }
    for (Index j = 0; j < k; ++j) {
      if (count[j] > 0) c.row(j) = next.row(j) / count[j];
    }
  }
  return {c, inertia};
}

}  // namespace

TEST_CASE("init_centers") {
  SplitMix64 gen(1);
  SUBCASE("single cluster is the mean") {
    const Matrix h = random_matrix(gen, 20, 3);
    CHECK(init_centers(h, 1, 5).isApprox(h.colwise().mean(), 1e-12));
  }
  SUBCASE("two blobs agree with the best of ten reference restarts") {
    Matrix h(60, 2);
    for (Index i = 0; i < 60; ++i) {
      const double cx = i < 30 ? -5.0 : 5.0;
      h(i, 0) = cx + 0.5 * standard_normal(gen);
      h(i, 1) = 0.5 * standard_normal(gen);
    }
    double best = std::numeric_limits<double>::infinity();
    Matrix ref;
    for (int r = 0; r < 10; ++r) {
      auto [c, inertia] = reference_lloyd(h, 2, gen);
      if (inertia < best) {
        best = inertia;
        ref = c;
      }
    }
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const Matrix mu = init_centers(h, 2, seed);
      for (Index j = 0; j < 2; ++j) {
        const double d = std::min((mu.row(j) - ref.row(0)).norm(), (mu.row(j) - ref.row(1)).norm());
        CHECK(d < 0.1);
      }
      // And near the blob means.
      const RowVector left = h.topRows(30).colwise().mean();
      const RowVector right = h.bottomRows(30).colwise().mean();
      const bool order = (mu.row(0) - left).norm() < (mu.row(0) - right).norm();
      CHECK((mu.row(order ? 0 : 1) - left).norm() < 0.1);
      CHECK((mu.row(order ? 1 : 0) - right).norm() < 0.1);
    }
  }
  SUBCASE("deterministic and validated") {
    const Matrix h = random_matrix(gen, 30, 4);
    CHECK(init_centers(h, 3, 9) == init_centers(h, 3, 9));
    CHECK_THROWS(init_centers(h, 31, 9));
    CHECK_THROWS(init_centers(h, 0, 9));
  }
}

TEST_CASE("soft_assign examples") {
  Matrix mu(2, 2);
  mu << 1, 0, -1, 0;
  Matrix h(1, 2);
  h << 0, 3;
  CHECK(q_of(h, mu).isApprox(RowVector::Constant(2, 0.5)));

  Matrix mu2(2, 1);
  mu2 << 0, 1;
  Matrix h2(1, 1);
  h2 << 0;
  const Matrix q = q_of(h2, mu2);
  CHECK(q(0, 0) == doctest::Approx(2.0 / 3.0));
  CHECK(q(0, 1) == doctest::Approx(1.0 / 3.0));

  SplitMix64 gen(2);
  const Matrix hr = random_matrix(gen, 30, 4);
  const Matrix mr = random_matrix(gen, 5, 4);
  const Matrix qr = q_of(hr, mr);
  CHECK((qr.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
  // Matches the kernel written out directly.
  for (Index i = 0; i < 30; ++i) {
    RowVector kern(5);
    for (Index k = 0; k < 5; ++k) kern[k] = 1.0 / (1.0 + (hr.row(i) - mr.row(k)).squaredNorm());
    CHECK((qr.row(i) - kern / kern.sum()).cwiseAbs().maxCoeff() < 1e-12);
  }
  // Permuting centers permutes columns.
  const std::vector<Index> perm{3, 0, 4, 1, 2};
  Matrix mp(5, 4);
  for (Index k = 0; k < 5; ++k) mp.row(k) = mr.row(perm[k]);
  const Matrix qp = q_of(hr, mp);
  for (Index k = 0; k < 5; ++k) CHECK((qp.col(k) - qr.col(perm[k])).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS([&] {
    Tape tape;
    (void)soft_assign(tape.constant(hr), tape.constant(mr), 0.0);
  }());
}

TEST_CASE("target_distribution examples") {
  const Matrix uniform = Matrix::Constant(4, 3, 1.0 / 3.0);
  CHECK(target_distribution(uniform).isApprox(uniform));
  CHECK(target_distribution(target_distribution(uniform)).isApprox(uniform));

  Matrix one(1, 3);
  one << 0.2, 0.5, 0.3;
  CHECK(target_distribution(one).isApprox(one));

  Matrix q(2, 2);
  q << 0.9, 0.1, 0.5, 0.5;
  const Matrix p = target_distribution(q);
  CHECK(p(0, 0) == doctest::Approx(0.9720).epsilon(1e-4));
  CHECK(p(0, 1) == doctest::Approx(0.0280).epsilon(1e-2));
  const double u0 = 0.81 / 1.4, u1 = 0.01 / 0.6;
  CHECK(p(0, 0) == doctest::Approx(u0 / (u0 + u1)));

  SplitMix64 gen(3);
  const Matrix r = random_stochastic(gen, 10, 4);
  CHECK((target_distribution(r).rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
  // Works on expressions too.
  CHECK(target_distribution(r.topRows(5)).rows() == 5);
}

TEST_CASE("clustering_loss examples") {
  SplitMix64 gen(4);
  const Matrix q = random_stochastic(gen, 6, 3);
  {
    Tape tape;
    CHECK(std::abs(tape.scalar(clustering_loss(q, tape.constant(q)))) < 1e-9);
  }
  for (int t = 0; t < 20; ++t) {
    Tape tape;
    const Matrix p = random_stochastic(gen, 6, 3);
    CHECK(tape.scalar(clustering_loss(p, tape.constant(random_stochastic(gen, 6, 3)))) >= 0.0);
  }
  {
    Tape tape;
    Matrix p(1, 2), qq(1, 2);
    p << 1, 0;
    qq << 0.5, 0.5;
    CHECK(tape.scalar(clustering_loss(p, tape.constant(qq))) == doctest::Approx(std::log(2.0)));
  }
  {
    Tape tape;
    CHECK_THROWS_AS(clustering_loss(Matrix::Ones(2, 2), tape.constant(Matrix::Ones(2, 3))), ShapeError);
  }
}

TEST_CASE("clustering_loss gradient passes finite differences on 8x2 instances") {
  SplitMix64 gen(5);
  for (int trial = 0; trial < 10; ++trial) {
    Tape tape;
    auto h = tape.input("h", random_matrix(gen, 8, 2));
    auto mu = tape.input("mu", random_matrix(gen, 3, 2));
    auto q = soft_assign(h, mu);
    const Matrix p = target_distribution(tape.value(q));
    auto loss = clustering_loss(p, q);
    const auto report = finite_difference_check(tape, loss, {h, mu}, 1e-6);
    CHECK(report.max_relative_error < 1e-4);
    CHECK(report.checked == 22);
  }
}

TEST_CASE("alignment_loss examples") {
  SplitMix64 gen(6);
  MlpParams mlp = init_mlp(4, 8, 3, gen);
  SUBCASE("uniform head output") {
    mlp.w2.setZero();
    Tape tape;
    auto loss = alignment_loss(tape.constant(random_matrix(gen, 3, 4)), record(tape, mlp));
    CHECK(tape.scalar(loss) == doctest::Approx(std::log(3.0)));
  }
  SUBCASE("hand evaluation of diagonal predictions") {
    // Head wired so that softmax logits equal log of a chosen probability table.
    Matrix probs(3, 3);
    probs << 0.5, 0.25, 0.25, 0.375, 0.25, 0.375, 0.4375, 0.4375, 0.125;
    MlpParams fixed;
    fixed.w1 = Matrix::Identity(3, 3);
    fixed.b1 = Matrix::Zero(1, 3);
    fixed.w2 = probs.array().log().matrix();
    fixed.b2 = Matrix::Zero(1, 3);
    Tape tape;
    // Centers are the unit vectors, so row k of the output is softmax(log probs.row(k)).
    auto loss = alignment_loss(tape.constant(Matrix::Identity(3, 3)), record(tape, fixed));
    CHECK(tape.scalar(loss) == doctest::Approx((std::log(2.0) + std::log(4.0) + std::log(8.0)) / 3.0).epsilon(1e-9));
    CHECK(tape.scalar(loss) == doctest::Approx(1.3863).epsilon(1e-4));
  }
  SUBCASE("no gradient reaches the embeddings through detached centers") {
    Tape tape;
    auto h = tape.input("h", random_matrix(gen, 10, 4));
    auto mu = tape.input("mu", init_centers(tape.value(h), 3, 1));
    const auto vars = record(tape, mlp);
    auto loss = 0.0 * sum(h) + alignment_loss(mu, vars);
    tape.backward(loss);
    CHECK(tape.grad(h).isZero());
    CHECK_FALSE(tape.grad(mu).isZero());
    const auto report = finite_difference_check(tape, loss, {mu, vars.w1, vars.w2}, 1e-6);
    CHECK(report.max_relative_error < 1e-4);
  }
}

TEST_CASE("pseudo_labels") {
  Matrix q(3, 2);
  q << 0.2, 0.8, 0.5, 0.5, 0.9, 0.1;
  CHECK(pseudo_labels(q) == Labels{1, 0, 0});
  SplitMix64 gen(7);
  const Matrix r = random_stochastic(gen, 20, 4);
  const std::vector<int> perm{2, 0, 3, 1};
  Matrix rp(20, 4);
  for (Index k = 0; k < 4; ++k) rp.col(k) = r.col(perm[k]);
  const Labels base = pseudo_labels(r);
  const Labels permuted = pseudo_labels(rp);
  for (std::size_t i = 0; i < base.size(); ++i) CHECK(perm[permuted[i]] == base[i]);
}
