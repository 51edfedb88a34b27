#include "slipuq/design.hpp"
#include "slipuq/error.hpp"
#include "slipuq/pc_basis.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

using namespace slipuq;

namespace {

long binomial(int n, int k) {
  long r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

std::vector<int> deg(std::initializer_list<int> d) { return d; }

}  // namespace

TEST(TotalOrderIndices, OneDimensional) {
  const auto idx = total_order_indices(1, 3);
  ASSERT_EQ(idx.size(), 4u);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(idx[i].degrees, deg({i}));
}

TEST(TotalOrderIndices, TwoDimensionalOrderTwo) {
  const auto idx = total_order_indices(2, 2);
  const std::vector<std::vector<int>> expected = {{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}};
  ASSERT_EQ(idx.size(), expected.size());
  for (std::size_t k = 0; k < idx.size(); ++k) EXPECT_EQ(idx[k].degrees, expected[k]);
}

TEST(TotalOrderIndices, CountsMatchBinomial) {
  for (int m = 1; m <= 6; ++m) {
    for (int p = 0; p <= 5; ++p) {
      const auto idx = total_order_indices(m, p);
      EXPECT_EQ(static_cast<long>(idx.size()), binomial(m + p, p)) << m << "," << p;
      EXPECT_EQ(idx.front().total_degree(), 0);
      std::set<std::vector<int>> unique;
      for (std::size_t k = 0; k < idx.size(); ++k) {
        EXPECT_LE(idx[k].total_degree(), p);
        EXPECT_EQ(idx[k].size(), static_cast<std::size_t>(m));
        if (k > 0) EXPECT_GE(idx[k].total_degree(), idx[k - 1].total_degree());
        unique.insert(idx[k].degrees);
      }
      EXPECT_EQ(unique.size(), idx.size());
    }
  }
  EXPECT_EQ(total_order_indices(6, 5).size(), 462u);
}

TEST(TotalOrderIndices, RegenerationIsIdentical) {
  const PCBasis a(5, 4);
  const PCBasis b = PCBasis::from_indices(5, 4, a.indices());
  EXPECT_EQ(a.indices(), b.indices());
  auto shuffled = a.indices();
  std::swap(shuffled[1], shuffled[2]);
  EXPECT_THROW(PCBasis::from_indices(5, 4, shuffled), ConfigError);
}

TEST(Legendre, KnownValues) {
  EXPECT_DOUBLE_EQ(legendre_eval(0, 0.37), 1.0);
  EXPECT_DOUBLE_EQ(legendre_eval(2, 0.5), -0.125);
  for (int n = 0; n <= 10; ++n) {
    EXPECT_NEAR(legendre_eval(n, 1.0), 1.0, 1e-14);
    EXPECT_NEAR(legendre_eval(n, -1.0), n % 2 ? -1.0 : 1.0, 1e-14);
  }
}

TEST(Legendre, ClosedFormOracle) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double x = trial == 0 ? 0.3 : u(rng);
    const double x2 = x * x;
    EXPECT_NEAR(legendre_eval(3, x), 0.5 * (5 * x2 * x - 3 * x), 1e-14);
    EXPECT_NEAR(legendre_eval(4, x), (35 * x2 * x2 - 30 * x2 + 3) / 8.0, 1e-14);
    EXPECT_NEAR(legendre_eval(5, x), (63 * x2 * x2 * x - 70 * x2 * x + 15 * x) / 8.0, 1e-14);
  }
}

TEST(Legendre, DomainError) {
  EXPECT_THROW(legendre_eval(2, 1.1), std::domain_error);
  EXPECT_NO_THROW(legendre_eval(2, 1.0 + 1e-13));
}

TEST(BasisEval, TensorProduct) {
  const MultiIndex idx{{1, 0, 2}};
  const std::vector<double> xi = {0.3, -0.7, 0.5};
  EXPECT_NEAR(basis_eval(idx, xi), 0.3 * 1.0 * -0.125, 1e-15);
  EXPECT_THROW(basis_eval(idx, std::vector<double>{0.1, 0.2}), DimensionMismatch);
}

TEST(BasisNorm, ProductFormula) {
  EXPECT_DOUBLE_EQ(basis_norm_sq(MultiIndex{{0, 0}}), 1.0);
  EXPECT_NEAR(basis_norm_sq(MultiIndex{{1, 2}}), 1.0 / 3.0 / 5.0, 1e-16);
}

// Orthogonality under a tensor Gauss-Legendre rule exact to degree 9 per axis.
TEST(BasisProperty, OrthogonalityTensorGauss) {
  const PCBasis basis(3, 4);
  const auto gl = gauss_legendre(6);
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(basis.size(), basis.size());
  std::vector<double> xi(3);
  for (std::size_t a = 0; a < gl.nodes.size(); ++a) {
    for (std::size_t b = 0; b < gl.nodes.size(); ++b) {
      for (std::size_t c = 0; c < gl.nodes.size(); ++c) {
        xi = {gl.nodes[a], gl.nodes[b], gl.nodes[c]};
        const double w = gl.weights[a] * gl.weights[b] * gl.weights[c] / 8.0;
        const Eigen::VectorXd psi = basis.evaluate(xi);
        gram.noalias() += w * psi * psi.transpose();
      }
    }
  }
  for (std::size_t i = 0; i < basis.size(); ++i) {
    for (std::size_t j = 0; j < basis.size(); ++j) {
      const double expected = i == j ? basis_norm_sq(basis[i]) : 0.0;
      EXPECT_NEAR(gram(i, j), expected, 1e-10) << i << "," << j;
    }
  }
}

TEST(PCExpansion, ValidatesShape) {
  const PCBasis basis(2, 2);
  EXPECT_THROW(PCExpansion(basis, Eigen::MatrixXd::Zero(5, 1)), DimensionMismatch);
  Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(6, 1);
  bad(2, 0) = std::nan("");
  EXPECT_THROW(PCExpansion(basis, bad), NumericError);
}

TEST(PCExpansion, EvalMeanVariance) {
  // G = 2 + xi_1 + 3 L_2(xi_2)
  const PCBasis basis(2, 2);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(6, 1);
  c(0, 0) = 2.0;
  c(1, 0) = 1.0;
  c(5, 0) = 3.0;
  const PCExpansion exp(basis, c);
  const std::vector<double> xi = {0.4, -0.6};
  EXPECT_NEAR(pce_eval(exp, xi)[0], 2.0 + 0.4 + 3.0 * legendre_eval(2, -0.6), 1e-14);
  EXPECT_DOUBLE_EQ(pce_mean(exp)[0], 2.0);
  EXPECT_NEAR(pce_variance(exp)[0], 1.0 / 3.0 + 9.0 / 5.0, 1e-15);
}

TEST(PCExpansionProperty, VarianceMatchesMonteCarlo) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n(0.0, 1.0);
  const PCBasis basis(3, 3);
  Eigen::MatrixXd c(basis.size(), 2);
  for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = n(rng);
  const PCExpansion exp(basis, c);
  const Eigen::VectorXd var = pce_variance(exp);
  const int samples = 1000000;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(2), s2 = Eigen::VectorXd::Zero(2),
                  s4 = Eigen::VectorXd::Zero(2);
  Eigen::VectorXd psi(basis.size());
  std::vector<double> xi(3);
  const Eigen::VectorXd mean = pce_mean(exp);
  for (int k = 0; k < samples; ++k) {
    for (double& x : xi) x = u(rng);
    basis.evaluate(xi, std::span<double>(psi.data(), psi.size()));
    const Eigen::VectorXd g = c.transpose() * psi - mean;
    s1 += g;
    s2 += g.cwiseProduct(g);
    s4 += g.cwiseProduct(g).cwiseProduct(g).cwiseProduct(g);
  }
  for (int j = 0; j < 2; ++j) {
    const double mc_var = s2[j] / samples - std::pow(s1[j] / samples, 2);
    // Standard error of the sample variance from the fourth moment.
    const double se = std::sqrt((s4[j] / samples - std::pow(s2[j] / samples, 2)) / samples);
    EXPECT_NEAR(mc_var, var[j], 3.0 * se) << "output " << j;
  }
}

TEST(Sobol, SingleVariable) {
  const PCBasis basis(3, 2);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(basis.size(), 1);
  c(1, 0) = 1.0;  // xi_1
  const PCExpansion exp(basis, c);
  const auto s0 = sobol_indices(exp, 0)[0];
  EXPECT_NEAR(s0.main, 1.0, 1e-15);
  EXPECT_NEAR(s0.total, 1.0, 1e-15);
  for (int d = 1; d < 3; ++d) {
    EXPECT_EQ(sobol_indices(exp, d)[0].main, 0.0);
    EXPECT_EQ(sobol_indices(exp, d)[0].total, 0.0);
  }
}

TEST(Sobol, InteractionSplitAndMonteCarlo) {
  // G = xi_1 + xi_1 xi_2: Var = 1/3 + 1/9, main_1 = 3/4, total_2 = 1/4.
  const PCBasis basis(2, 2);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(6, 1);
  c(1, 0) = 1.0;
  c(4, 0) = 1.0;
  const PCExpansion exp(basis, c);
  const auto s1 = sobol_indices(exp, 0)[0];
  const auto s2 = sobol_indices(exp, 1)[0];
  EXPECT_NEAR(s1.main, 0.75, 1e-14);
  EXPECT_NEAR(s1.total, 1.0, 1e-14);
  EXPECT_NEAR(s2.main, 0.0, 1e-14);
  EXPECT_NEAR(s2.total, 0.25, 1e-14);

  // Pick-freeze Monte Carlo estimate of the first-order index of xi_1.
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto g = [](double a, double b) { return a + a * b; };
  const int n = 400000;
  double f0 = 0.0, f2 = 0.0, cross = 0.0;
  for (int k = 0; k < n; ++k) {
    const double a = u(rng), b = u(rng), b2 = u(rng);
    const double y = g(a, b), y1 = g(a, b2);
    f0 += y;
    f2 += y * y;
    cross += y * y1;
  }
  const double mean = f0 / n;
  const double var = f2 / n - mean * mean;
  EXPECT_NEAR((cross / n - mean * mean) / var, s1.main, 0.01);
}

TEST(Sobol, ConstantFlagged) {
  const PCBasis basis(2, 1);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(3, 1);
  c(0, 0) = 4.0;
  const auto s = sobol_indices(PCExpansion(basis, c), 0)[0];
  EXPECT_TRUE(s.zero_variance);
  EXPECT_EQ(s.main, 0.0);
  EXPECT_EQ(s.total, 0.0);
}

TEST(SobolProperty, IndexSumBounds) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0.0, 1.0);
  const PCBasis basis(4, 3);
  Eigen::MatrixXd c(basis.size(), 5);
  for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = n(rng);
  const PCExpansion exp(basis, c);
  for (int j = 0; j < 5; ++j) {
    double main = 0.0, total = 0.0;
    for (int d = 0; d < 4; ++d) {
      const auto s = sobol_indices(exp, d)[j];
      EXPECT_GE(s.total - s.main, -1e-14);
      main += s.main;
      total += s.total;
    }
    EXPECT_LE(main, 1.0 + 1e-12);
    EXPECT_GE(total, 1.0 - 1e-12);
  }
}
