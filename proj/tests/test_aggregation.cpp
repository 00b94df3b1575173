#include <doctest.h>

#include <cmath>
#include <random>

#include "magsim/aggregation.hpp"
#include "magsim/errors.hpp"
#include "magsim/theory.hpp"
#include "support.hpp"

using namespace magsim;

namespace {

Matrix dense_linear(const Matrix& x, Linear& lin) {
  Matrix y = matmul(x, lin.weight().value);
  if (lin.bias()) {
    for (std::size_t i = 0; i < y.rows; ++i) {
      for (std::size_t j = 0; j < y.cols; ++j) y(i, j) += lin.bias()->value(0, j);
    }
  }
  return y;
}

Matrix dense_relu(Matrix x) {
  for (double& v : x.data) v = std::max(v, 0.0);
  return x;
}

Matrix dense_mix(const Matrix& h, const Matrix& a, double alpha) {
  Matrix ah = matmul(a, h);
  Matrix out(h.rows, h.cols);
  for (std::size_t i = 0; i < h.size(); ++i) out.data[i] = alpha * h.data[i] + (1.0 - alpha) * ah.data[i];
  return out;
}

// The stack's weights are reachable only through its parameter list, in
// layer order (weight, bias).
Matrix dense_stack(const Matrix& h, const Matrix& a, GnnStack& stack) {
  auto params = stack.parameters();
  Matrix x = h;
  for (std::size_t l = 0; l < stack.num_layers(); ++l) {
    x = dense_mix(x, a, stack.options().alpha);
    Matrix y = matmul(x, params[2 * l]->value);
    for (std::size_t i = 0; i < y.rows; ++i) {
      for (std::size_t j = 0; j < y.cols; ++j) y(i, j) += params[2 * l + 1]->value(0, j);
    }
    x = l + 1 < stack.num_layers() ? dense_relu(y) : y;
  }
  return x;
}

Matrix matrix_power_diag_oracle(const Matrix& a, double alpha, std::size_t layers) {
  const std::size_t n = a.rows;
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) m(i, j) = (i == j ? alpha : 0.0) + (1.0 - alpha) * a(i, j);
  }
  Matrix p = Matrix::identity(n);
  for (std::size_t l = 0; l < layers; ++l) p = matmul(p, m);
  return p;
}

}  // namespace

TEST_CASE("mean_aggregate examples") {
  const CsrMatrix pair = CsrMatrix::from_edges(2, std::vector<Edge>{{0, 1}}, true).row_normalized();
  const Tensor out = mean_aggregate(Tensor(Matrix::from_rows({{1, 0}, {0, 1}})), pair, 0.5);
  CHECK(out.value() == Matrix::from_rows({{0.5, 0.5}, {0.5, 0.5}}));

  std::mt19937_64 rng(1);
  const CsrMatrix adj = testing::random_graph(10, rng);
  Matrix same(10, 3);
  for (std::size_t i = 0; i < 10; ++i) {
    same(i, 0) = 1.5;
    same(i, 1) = -2.0;
    same(i, 2) = 0.25;
  }
  // Rows with neighbors keep their value; isolated nodes are scaled by alpha.
  const Matrix fixed = mean_aggregate(Tensor(same), adj, 0.3).value();
  for (std::size_t i = 0; i < 10; ++i) {
    if (adj.degree(i) == 0) continue;
    for (std::size_t j = 0; j < 3; ++j) CHECK(fixed(i, j) == doctest::Approx(same(i, j)).epsilon(1e-14));
  }

  const Matrix h = testing::random_matrix(10, 4, rng);
  const Matrix got = mean_aggregate(Tensor(h), adj, 0.7).value();
  const Matrix want = dense_mix(h, adj.to_dense(), 0.7);
  for (std::size_t i = 0; i < h.size(); ++i) CHECK(std::abs(got.data[i] - want.data[i]) < 1e-12);
}

TEST_CASE("alpha outside (0,1) is rejected") {
  CHECK_THROWS_AS(MeanAggLayer(0.0), ValueError);
  CHECK_THROWS_AS(MeanAggLayer(1.0), ValueError);
  std::mt19937_64 rng(0);
  StackOptions opts;
  opts.layers = 0;
  CHECK_THROWS_AS(GnnStack("s", opts, 3, 3, rng), ValueError);
}

TEST_CASE("ego_jacobian_diag") {
  const CsrMatrix chain = directed_chain(50);
  CHECK(ego_jacobian_diag(chain, 0.5, 3, 10) == 0.125);

  std::mt19937_64 rng(6);
  const CsrMatrix g = testing::random_graph(12, rng);
  for (std::size_t v = 0; v < 12; ++v) {
    if (g.degree(v) == 0) continue;
    CHECK(ego_jacobian_diag(g, 0.35, 1, v) == doctest::Approx(0.35).epsilon(1e-15));
  }

  // Triangle, alpha = 0.5, two layers: matrix-power oracle.
  const CsrMatrix tri =
      CsrMatrix::from_edges(3, std::vector<Edge>{{0, 1}, {1, 2}, {0, 2}}, true).row_normalized();
  const Matrix p = matrix_power_diag_oracle(tri.to_dense(), 0.5, 2);
  CHECK(p(0, 0) == doctest::Approx(0.375).epsilon(1e-15));
  CHECK(ego_jacobian_diag(tri, 0.5, 2, 0) == doctest::Approx(p(0, 0)).epsilon(1e-14));

  for (std::size_t layers : {1u, 2u, 4u}) {
    const Matrix q = matrix_power_diag_oracle(g.to_dense(), 0.6, layers);
    for (std::size_t v = 0; v < 12; ++v) CHECK(std::abs(ego_jacobian_diag(g, 0.6, layers, v) - q(v, v)) < 1e-12);
  }
  CHECK_THROWS_AS(ego_jacobian_diag(g, 0.5, 2, 12), ValueError);
  CHECK_THROWS_AS(ego_jacobian_diag(CsrMatrix::from_edges(3, std::vector<Edge>{{0, 1}}, true), 0.5, 2, 0),
                  ContractError);
}

TEST_CASE("joint_forward") {
  std::mt19937_64 rng(2);
  const CsrMatrix adj = testing::random_graph(8, rng);
  StackOptions opts{StackVariant::MeanMix, 2, 0.4, true, true};
  JointModel model({3, 2}, opts, 5, 3, rng);
  const Matrix x0 = testing::random_matrix(8, 3, rng);
  const Matrix x1 = testing::random_matrix(8, 2, rng);
  ForwardContext ctx;
  const Matrix got = joint_forward(ctx, {Tensor(x0), Tensor(x1)}, adj, model).value();

  Matrix x(8, 5);
  for (std::size_t i = 0; i < 8; ++i) {
    for (std::size_t j = 0; j < 3; ++j) x(i, j) = x0(i, j);
    for (std::size_t j = 0; j < 2; ++j) x(i, 3 + j) = x1(i, j);
  }
  const Matrix z = dense_stack(dense_relu(dense_linear(x, model.projector.linear())), adj.to_dense(), model.stack);
  const Matrix want = dense_linear(z, model.head);
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got.data[i] - want.data[i]) < 1e-10);

  CHECK_THROWS_AS(joint_forward(ctx, {Tensor(x0)}, adj, model), DimensionError);

  // Identical input rows on a graph without isolated nodes give identical logits.
  const std::vector<Edge> ring{{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 6}, {6, 7}, {7, 0}};
  const CsrMatrix cyc = CsrMatrix::from_edges(8, ring, true).row_normalized();
  Matrix r0(8, 3, 0.3), r1(8, 2, -0.7);
  const Matrix flat = joint_forward(ctx, {Tensor(r0), Tensor(r1)}, cyc, model).value();
  for (std::size_t i = 1; i < 8; ++i) {
    for (std::size_t j = 0; j < 3; ++j) CHECK(flat(i, j) == doctest::Approx(flat(0, j)).epsilon(1e-12));
  }
}

TEST_CASE("independent_forward") {
  std::mt19937_64 rng(3);
  const CsrMatrix adj = testing::random_graph(5, rng);
  StackOptions opts{StackVariant::MeanMix, 2, 0.5, true, true};
  IndependentModel model({2, 3}, opts, 4, 3, rng);
  const Matrix x0 = testing::random_matrix(5, 2, rng);
  const Matrix x1 = testing::random_matrix(5, 3, rng);
  ForwardContext ctx;
  const Matrix got = independent_forward(ctx, {Tensor(x0), Tensor(x1)}, adj, model).value();

  const Matrix a = adj.to_dense();
  const Matrix z0 = dense_stack(dense_relu(dense_linear(x0, model.projectors[0].linear())), a, model.stacks[0]);
  const Matrix z1 = dense_stack(dense_relu(dense_linear(x1, model.projectors[1].linear())), a, model.stacks[1]);
  Matrix fused(5, 8);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      fused(i, j) = z0(i, j);
      fused(i, 4 + j) = z1(i, j);
    }
  }
  const Matrix want = dense_linear(fused, model.head);
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got.data[i] - want.data[i]) < 1e-10);

  // Zeroing branch 1's head rows leaves branch 0's contribution plus bias.
  for (std::size_t r = 4; r < 8; ++r) {
    for (std::size_t c = 0; c < 3; ++c) model.head.weight().value(r, c) = 0.0;
  }
  const Matrix only0 = independent_forward(ctx, {Tensor(x0), Tensor(x1)}, adj, model).value();
  Matrix fused0 = fused;
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 4; j < 8; ++j) fused0(i, j) = 0.0;
  }
  const Matrix want0 = dense_linear(fused0, model.head);
  for (std::size_t i = 0; i < only0.size(); ++i) CHECK(std::abs(only0.data[i] - want0.data[i]) < 1e-12);

  CHECK_THROWS_AS(independent_forward(ctx, {Tensor(x0)}, adj, model), DimensionError);
}

TEST_CASE("independent branches are symmetric under identical weights and inputs") {
  std::mt19937_64 rng(4);
  const CsrMatrix adj = testing::random_graph(6, rng);
  StackOptions opts{StackVariant::MeanMix, 2, 0.5, true, true};
  IndependentModel model({3, 3}, opts, 4, 2, rng);
  auto p0 = model.projectors[0].parameters();
  auto p1 = model.projectors[1].parameters();
  for (std::size_t i = 0; i < p0.size(); ++i) p1[i]->value = p0[i]->value;
  auto s0 = model.stacks[0].parameters();
  auto s1 = model.stacks[1].parameters();
  for (std::size_t i = 0; i < s0.size(); ++i) s1[i]->value = s0[i]->value;
  const Matrix x = testing::random_matrix(6, 3, rng);
  ForwardContext ctx;
  const Tensor a = model.stacks[0].forward(ctx, adj, model.projectors[0].forward(ctx, Tensor(x)));
  const Tensor b = model.stacks[1].forward(ctx, adj, model.projectors[1].forward(ctx, Tensor(x)));
  CHECK(a.value() == b.value());
}

TEST_CASE("ego-concat stack doubles pre-transform width") {
  std::mt19937_64 rng(5);
  StackOptions opts{StackVariant::EgoConcat, 2, 0.5, true, true};
  GnnStack s("sage", opts, 3, 4, rng);
  CHECK(s.parameter_count() == (6 * 4 + 4) + (8 * 4 + 4));
  StackOptions bare{StackVariant::MeanMix, 3, 0.5, false, false};
  GnnStack p("prop", bare, 3, 3, rng);
  CHECK(p.parameter_count() == 0);
  CHECK(p.out_dim() == 3);
}
