#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "merc/eig.hpp"
#include "merc/error.hpp"
#include "test_util.hpp"

using namespace merc;

namespace {

Tensor random_symmetric(std::size_t n, Rng& rng) {
  Tensor a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) a(i, j) = a(j, i) = rng.uniform(-1.0, 1.0);
  return a;
}

}  // namespace

TEST(Eig, Identity) {
  const auto e = symmetric_eig(Tensor::identity(3));
  for (double v : e.values) EXPECT_NEAR(v, 1.0, 1e-15);
  EXPECT_LE(orthogonality_residual(e.vectors), 1e-10);
}

TEST(Eig, SwapMatrix) {
  const auto e = symmetric_eig(Tensor::from_rows({{0, 1}, {1, 0}}));
  EXPECT_NEAR(e.values[0], -1.0, 1e-14);
  EXPECT_NEAR(e.values[1], 1.0, 1e-14);
}

TEST(Eig, RankOnePerturbationOfIdentity) {
  Tensor l = Tensor::identity(3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) l(i, j) -= 1.0 / 3.0;
  const auto e = symmetric_eig(l);
  EXPECT_NEAR(e.values[0], 0.0, 1e-14);
  EXPECT_NEAR(e.values[1], 1.0, 1e-14);
  EXPECT_NEAR(e.values[2], 1.0, 1e-14);
}

TEST(Eig, AsymmetricRejected) {
  EXPECT_THROW(symmetric_eig(Tensor::from_rows({{0, 1}, {0.5, 0}})), Error);
}

TEST(Eig, SizeCapEnforced) {
  EigOptions opts;
  opts.size_cap = 4;
  EXPECT_THROW(symmetric_eig(Tensor::identity(5), opts), Error);
}

TEST(Eig, NonConvergenceReported) {
  Rng rng(2);
  EigOptions opts;
  opts.max_sweeps = 1;
  EXPECT_THROW(symmetric_eig(random_symmetric(12, rng), opts), NumericError);
}

// Independent oracle: Eigen's self-adjoint solver.
TEST(Eig, MatchesEigenOracleOnRandomMatrices) {
  Rng rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 1 + rng.below(24);
    const Tensor a = random_symmetric(n, rng);
    const auto e = symmetric_eig(a);

    Eigen::MatrixXd m(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) m(i, j) = a(i, j);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> oracle(m);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(e.values[i], oracle.eigenvalues()(i), 1e-10);

    EXPECT_TRUE(std::is_sorted(e.values.begin(), e.values.end()));
    EXPECT_LE(orthogonality_residual(e.vectors), 1e-10);
    EXPECT_LE(reconstruction_residual(e, a), 1e-8);
  }
}

TEST(Eig, EigenvectorsSatisfyDefinition) {
  Rng rng(4);
  const Tensor a = random_symmetric(9, rng);
  const auto e = symmetric_eig(a);
  const Tensor av = kernels::matmul(a, e.vectors);
  for (std::size_t j = 0; j < 9; ++j)
    for (std::size_t i = 0; i < 9; ++i) EXPECT_NEAR(av(i, j), e.values[j] * e.vectors(i, j), 1e-10);
}
