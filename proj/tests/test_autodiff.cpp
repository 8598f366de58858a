#include <doctest.h>

#include <cmath>
#include <source_location>
#include <vector>

#include "cdcp/autodiff.hpp"
#include "cdcp/complexity.hpp"
#include "cdcp/errors.hpp"
#include "cdcp/gradcheck.hpp"
#include "cdcp/rng.hpp"

using namespace cdcp;
using namespace cdcp::ad;

namespace {

Matrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, Real lo = -1.0, Real hi = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(lo, hi);
  return m;
}

// Random projection to a scalar, so every output element contributes.
Var project(const Var& v, const Matrix& weights) { return sum(mul(v, constant(weights))); }

void expect_grad(const std::function<Var()>& f, std::vector<Var> params, Real tol = 1e-8, Real step = 1e-4,
                 std::source_location where = std::source_location::current()) {
  const GradCheckResult r = grad_check(f, params, step);
  INFO("line " << where.line() << " " << "worst param " << r.worst_param << " index " << r.worst_index << " analytic " << r.analytic << " numeric "
                      << r.numeric);
  CHECK(r.max_relative_error < tol);
}

}  // namespace

TEST_CASE("closed-form gradients") {
  Var a = parameter((Matrix(2, 2) << 1, 2, 3, 4).finished());
  Var b = parameter((Matrix(2, 1) << 5, 6).finished());
  backward(sum(matmul(a, b)));
  // d/dA sum(A b) = 1 b^T ; d/db = A^T 1
  CHECK(a.grad() == (Matrix(2, 2) << 5, 6, 5, 6).finished());
  CHECK(b.grad() == (Matrix(2, 1) << 4, 6).finished());

  Var x = parameter(Matrix::Constant(1, 1, 0.0));
  backward(tanh(x));
  CHECK(x.grad()(0, 0) == 1.0);
}

TEST_CASE("leaf gradients accumulate across passes") {
  Var w = parameter(Matrix::Constant(1, 1, 3.0));
  backward(scale(w, 2.0));
  backward(scale(w, 2.0));
  CHECK(w.grad()(0, 0) == 4.0);
  w.zero_grad();
  CHECK(w.grad()(0, 0) == 0.0);
}

TEST_CASE("retained graph supports repeated backward") {
  Var w = parameter(Matrix::Constant(2, 2, 0.5));
  Var h = tanh(matmul(w, w));
  Var y = sum(h);
  backward(y, Retain::Graph);
  const Matrix once = w.grad();
  backward(y, Retain::Graph);
  CHECK((w.grad() - 2.0 * once).cwiseAbs().maxCoeff() < 1e-15);
  // A second root sharing the retained subgraph.
  w.zero_grad();
  backward(mean(h));
  CHECK((w.grad() - 0.25 * once).cwiseAbs().maxCoeff() < 1e-15);
  CHECK_THROWS_AS(backward(y), LifecycleError);
}

TEST_CASE("backward argument checks") {
  Var w = parameter(Matrix::Ones(2, 2));
  CHECK_THROWS_AS(backward(scale(w, 1.0)), ShapeError);
  CHECK_THROWS_AS(backward(scalar_constant(1.0)), LifecycleError);
  CHECK_THROWS_AS(backward(Var{}), LifecycleError);
  Var y = sum(w);
  backward(y);
  CHECK(y.released());
  CHECK_THROWS_AS(backward(y), LifecycleError);
}

TEST_CASE("recording off builds nothing") {
  Var w = parameter(Matrix::Ones(3, 3));
  const std::size_t before = tape_stats().nodes;
  Var y = record_scope(false, [&] { return sum(matmul(w, w)); });
  CHECK(tape_stats().nodes == before);
  CHECK(y.is_leaf());
  CHECK_FALSE(y.requires_grad());
  CHECK(y.scalar() == 27.0);
  CHECK(recording());
}

TEST_CASE("retained element accounting") {
  const std::size_t base = tape_stats().elements;
  RetainedEpoch epoch;
  {
    Var w = parameter(Matrix::Ones(4, 5));
    Var h = scale(w, 2.0);     // 20
    Var t = transpose(h);      // 20
    Var s = sum(t);            // 1
    CHECK(tape_stats().elements == base + 41);
    backward(s);
    CHECK(tape_stats().elements == base);
  }
  CHECK(epoch.peak() == 41);
  CHECK(epoch.peak_nodes() == 3);
  {
    Var w = parameter(Matrix::Ones(2, 2));
    Var s = sum(scale(w, 1.0));
  }
  CHECK(tape_stats().elements == base);
}

TEST_CASE("masked softmax") {
  Var x = parameter((Matrix(2, 3) << 1, 2, 3, 0, 0, 0).finished());
  Mask row = Mask::Constant(1, 3, false);
  row(0, 1) = true;
  const Matrix p = masked_softmax(x, row).value();
  CHECK(p(0, 1) == 0.0);
  CHECK(p(1, 1) == 0.0);
  CHECK(p(1, 0) == doctest::Approx(0.5));
  CHECK(p(0, 2) / p(0, 0) == doctest::Approx(std::exp(2.0)));
  const Matrix lp = masked_log_softmax(x, row).value();
  CHECK(std::isinf(lp(0, 1)));
  CHECK(lp(0, 1) < 0.0);
  CHECK(std::exp(lp(0, 0)) + std::exp(lp(0, 2)) == doctest::Approx(1.0).epsilon(1e-15));

  Mask all = Mask::Constant(1, 3, true);
  CHECK_THROWS_AS(masked_softmax(x, all), DegenerateMaskError);
  CHECK_THROWS_AS(masked_log_softmax(x, Mask::Constant(2, 2, false)), ShapeError);

  // Large logits stay finite.
  Var big = constant((Matrix(1, 2) << 1000.0, 999.0).finished());
  CHECK(std::isfinite(masked_log_softmax(big, Mask::Constant(1, 2, false)).value()(0, 1)));
}

TEST_CASE("primitive gradients match finite differences") {
  Rng rng(5);
  Var a = parameter(random_matrix(rng, 3, 4));
  Var b = parameter(random_matrix(rng, 4, 2));
  Var c = parameter(random_matrix(rng, 3, 4));
  Var row = parameter(random_matrix(rng, 1, 4));
  Var col = parameter(random_matrix(rng, 3, 1));
  Var pos = parameter(random_matrix(rng, 3, 4, 0.5, 2.0));
  const Matrix w34 = random_matrix(rng, 3, 4);
  const Matrix w32 = random_matrix(rng, 3, 2);
  const Matrix w43 = random_matrix(rng, 4, 3);
  const Matrix w33 = random_matrix(rng, 3, 3);
  Mask mask = Mask::Constant(3, 4, false);
  mask(0, 1) = mask(2, 3) = mask(2, 0) = true;

  SUBCASE("algebra") {
    expect_grad([&] { return project(matmul(a, b), w32); }, {a, b});
    expect_grad([&] { return project(matmul_nt(a, c), w33); }, {a, c});
    expect_grad([&] { return project(transpose(a), w43); }, {a});
    expect_grad([&] { return project(mul(a, c) + sub(a, c), w34); }, {a, c});
    expect_grad([&] { return project(affine(scale(a, 0.3), 2.0, 1.0), w34); }, {a});
    expect_grad([&] { return project(add_col_broadcast(add_row_broadcast(a, row), col), w34); }, {a, row, col});
  }
  SUBCASE("structure") {
    std::vector<Var> parts{a, c};
    expect_grad([&] { return project(slice_cols(concat_cols(parts), 2, 4), w34); }, {a, c});
    expect_grad([&] { return project(slice_rows(concat_rows(parts), 1, 3), w34); }, {a, c});
    expect_grad([&] { return project(reshape(a, 4, 3), w43); }, {a});
    const std::vector<int> pick{2, 0, 2};
    expect_grad([&] { return project(gather_rows(a, pick), w34) + gather(a, 1, 3); }, {a});
    expect_grad([&] { return project(mean_rows(a), row.value()) + mean(c); }, {a, c});
  }
  SUBCASE("nonlinear") {
    expect_grad([&] { return project(tanh(a), w34); }, {a});
    expect_grad([&] { return project(sigmoid(a), w34); }, {a});
    expect_grad([&] { return project(exp(a), w34); }, {a});
    expect_grad([&] { return project(log(pos), w34); }, {pos});
    expect_grad([&] { return project(leaky_relu(a, 0.2), w34); }, {a});
    expect_grad([&] { return project(minimum(a, c), w34); }, {a, c});
    expect_grad([&] { return project(clamp(a, -0.5, 0.5), w34); }, {a});
  }
  SUBCASE("softmax") {
    expect_grad([&] { return project(masked_softmax(a, mask), w34); }, {a});
    expect_grad([&] { return project(softmax(a), w34); }, {a});
    Mask fresh = Mask::Constant(3, 4, false);
    fresh(1, 2) = true;
    expect_grad([&] { return gather(masked_log_softmax(a, fresh), 1, 1) + gather(masked_log_softmax(a, fresh), 0, 3); },
                {a});
  }
  SUBCASE("edge aggregation") {
    Var alpha = parameter(random_matrix(rng, 3, 3));
    Var edges = parameter(random_matrix(rng, 9, 2));
    expect_grad([&] { return project(edge_aggregate(alpha, edges), w32); }, {alpha, edges});
  }
}

TEST_CASE("edge_aggregate matches a dense loop") {
  Rng rng(9);
  const Matrix alpha = random_matrix(rng, 4, 4);
  const Matrix edges = random_matrix(rng, 16, 3);
  const Matrix out = edge_aggregate(constant(alpha), constant(edges)).value();
  for (int i = 0; i < 4; ++i) {
    for (int k = 0; k < 3; ++k) {
      double s = 0.0;
      for (int j = 0; j < 4; ++j) s += alpha(i, j) * edges(i * 4 + j, k);
      CHECK(std::abs(out(i, k) - s) < 1e-14);
    }
  }
}

TEST_CASE("reshape is row-major") {
  const Matrix m = (Matrix(2, 3) << 1, 2, 3, 4, 5, 6).finished();
  const Matrix r = reshape(constant(m), 3, 2).value();
  CHECK(r == (Matrix(3, 2) << 1, 2, 3, 4, 5, 6).finished());
}

TEST_CASE("minimum and clamp tie rules") {
  Var a = parameter(Matrix::Constant(1, 1, 1.0));
  Var b = parameter(Matrix::Constant(1, 1, 1.0));
  backward(minimum(a, b));
  CHECK(a.grad()(0, 0) == 1.0);
  CHECK(b.grad()(0, 0) == 0.0);
  Var x = parameter((Matrix(1, 3) << -1.0, 0.5, 2.0).finished());
  backward(sum(clamp(x, -1.0, 1.0)));
  CHECK(x.grad() == (Matrix(1, 3) << 1.0, 1.0, 0.0).finished());
}

TEST_CASE("branch replay holds piecewise-linear pieces") {
  Var x = parameter((Matrix(1, 3) << -0.5, 0.25, 2.0).finished());
  Var y = parameter((Matrix(1, 3) << 0.0, 1.0, 1.0).finished());
  auto f = [&] { return sum(add(leaky_relu(x, 0.1), add(minimum(x, y), clamp(x, -1.0, 1.0)))); };
  BranchLog log;
  Real base = 0.0;
  {
    BranchScope capture(log, BranchScope::Mode::Capture);
    base = f().scalar();
  }
  CHECK(log.picks.size() == 3);
  CHECK(base == doctest::Approx(-0.05 + 0.25 + 2.0 + (-0.5 + 0.25 + 1.0) + (-0.5 + 0.25 + 1.0)));

  // Every element crosses a kink; the replayed pieces extend linearly.
  x.value_mut() = (Matrix(1, 3) << 0.5, 1.5, -2.0).finished();
  Real frozen = 0.0;
  {
    BranchScope replay(log, BranchScope::Mode::Replay);
    frozen = f().scalar();
    replay.finish();
  }
  CHECK(frozen == doctest::Approx((0.05 + 1.5 - 2.0) + (0.5 + 1.5 + 1.0) + (0.5 + 1.5 + 1.0)));

  {
    BranchScope replay(log, BranchScope::Mode::Replay);
    (void)leaky_relu(x, 0.1);
    CHECK_THROWS_AS(replay.finish(), DeterminismError);
    CHECK_THROWS_AS(leaky_relu(parameter(Matrix::Ones(2, 2)), 0.1), DeterminismError);
  }
  // Without a scope the pieces follow the inputs again.
  CHECK(relu(x).value()(0, 2) == 0.0);
}

TEST_CASE("shape errors") {
  Var a = parameter(Matrix::Ones(2, 3));
  CHECK_THROWS_AS(matmul(a, a), ShapeError);
  CHECK_THROWS_AS(add(a, transpose(a)), ShapeError);
  CHECK_THROWS_AS(reshape(a, 4, 2), ShapeError);
  CHECK_THROWS_AS(slice_cols(a, 2, 2), ShapeError);
  CHECK_THROWS_AS(scalar_constant(1.0) + a, ShapeError);
  CHECK_THROWS_AS(a.scalar(), ShapeError);
}

TEST_CASE("fit_complexity") {
  std::vector<Real> sizes{10, 20, 40, 80};
  std::vector<Real> cubic, quadratic;
  for (Real n : sizes) {
    cubic.push_back(2.0 * n * n * n + 5.0 * n + 1.0);
    quadratic.push_back(3.0 * n * n + 7.0);
  }
  const ComplexityFit c = fit_complexity(sizes, cubic);
  CHECK(c.coefficients(0) == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(c.coefficients(2) == doctest::Approx(5.0).epsilon(1e-6));
  CHECK(c.residual < 1e-6);
  CHECK(c.predict(30.0) == doctest::Approx(2.0 * 27000 + 151).epsilon(1e-9));
  CHECK(c.dominant_exponent == doctest::Approx(std::log(cubic[3] / cubic[2]) / std::log(2.0)));
  CHECK(c.dominant_exponent > 2.9);
  const ComplexityFit q = fit_complexity(sizes, quadratic);
  CHECK(std::abs(q.coefficients(0)) < 1e-9);
  CHECK(q.dominant_exponent == doctest::Approx(2.0).epsilon(0.01));

  CHECK_THROWS_AS(fit_complexity({10, 20, 20, 40}, {1, 2, 3, 4}), ParameterError);
  CHECK_THROWS_AS(fit_complexity({10, 20, 30}, {1, 2}), ParameterError);
}

TEST_CASE("composite networks match central differences") {
  Rng rng(12);
  for (int rep = 0; rep < 5; ++rep) {
    Var w1 = parameter(random_matrix(rng, 4, 5));
    Var w2 = parameter(random_matrix(rng, 5, 5));
    Var w3 = parameter(random_matrix(rng, 5, 3));
    const Var x = constant(random_matrix(rng, 6, 4));
    std::vector<Var> params{w1, w2, w3};
    auto net = [&] { return softmax(matmul(sigmoid(matmul(tanh(matmul(x, w1)), w2)), w3)); };
    const Matrix w = random_matrix(rng, 6, 3);
    expect_grad([&] { return project(net(), w); }, params, 1e-6);
    // Softmax cross-entropy against fixed labels.
    const int labels[6] = {0, 2, 1, 1, 0, 2};
    expect_grad(
        [&] {
          Var lp = masked_log_softmax(matmul(tanh(matmul(x, w1)), matmul(w2, w3)), Mask::Constant(1, 3, false));
          Var loss = scalar_constant(0.0);
          for (int i = 0; i < 6; ++i) loss = loss - gather(lp, i, labels[i]);
          return loss;
        },
        params, 1e-6);
  }
}
