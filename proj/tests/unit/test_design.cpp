#include "slipuq/design.hpp"
#include "slipuq/error.hpp"
#include "slipuq/pc_basis.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <set>

using namespace slipuq;

namespace {

// Exact mean of prod x_i^{a_i} under the uniform density on [-1,1]^m.
double monomial_mean(const std::vector<int>& a) {
  double v = 1.0;
  for (int k : a) v *= k % 2 ? 0.0 : 1.0 / (k + 1);
  return v;
}

double quad_monomial(const SparseQuadrature& q, const std::vector<int>& a) {
  double s = 0.0;
  for (std::size_t r = 0; r < q.size(); ++r) {
    double v = q.weights[static_cast<Eigen::Index>(r)];
    for (std::size_t d = 0; d < a.size(); ++d) {
      v *= std::pow(q.nodes(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(d)), a[d]);
    }
    s += v;
  }
  return s;
}

std::set<std::vector<double>> node_set(const SparseQuadrature& q) {
  std::set<std::vector<double>> s;
  for (Eigen::Index r = 0; r < q.nodes.rows(); ++r) {
    std::vector<double> row(q.nodes.cols());
    for (Eigen::Index c = 0; c < q.nodes.cols(); ++c) row[c] = q.nodes(r, c);
    s.insert(row);
  }
  return s;
}

}  // namespace

TEST(SlipMap, Endpoints) {
  const SlipBounds b{0.0, 30.0};
  const auto xi = slip_to_canonical(std::vector<double>{0.0, 15.0, 30.0, 7.5}, b);
  EXPECT_DOUBLE_EQ(xi[0], -1.0);
  EXPECT_DOUBLE_EQ(xi[1], 0.0);
  EXPECT_DOUBLE_EQ(xi[2], 1.0);
  EXPECT_DOUBLE_EQ(xi[3], -0.5);
}

TEST(SlipMap, RoundTripNonzeroMinimum) {
  const SlipBounds b{2.0, 12.0};
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(2.0, 12.0);
  for (int i = 0; i < 100; ++i) {
    const std::vector<double> s = {u(rng), u(rng)};
    const auto back = canonical_to_slip(slip_to_canonical(s, b), b);
    EXPECT_NEAR(back[0], s[0], 1e-12);
    EXPECT_NEAR(back[1], s[1], 1e-12);
  }
  EXPECT_DOUBLE_EQ(slip_to_canonical(std::vector<double>{7.0}, b)[0], 0.0);
}

TEST(SlipMap, OutOfRange) {
  const SlipBounds b{0.0, 30.0};
  EXPECT_THROW(slip_to_canonical(std::vector<double>{-0.1}, b), std::out_of_range);
  EXPECT_THROW(slip_to_canonical(std::vector<double>{30.5}, b), std::out_of_range);
  EXPECT_THROW(canonical_to_slip(std::vector<double>{1.01}, b), std::out_of_range);
  EXPECT_THROW(slip_to_canonical(std::vector<double>{1.0}, SlipBounds{3.0, 3.0}),
               std::invalid_argument);
}

TEST(GaussLegendre, ExactToDegree2nMinus1) {
  for (int n = 1; n <= 8; ++n) {
    const auto r = gauss_legendre(n);
    ASSERT_EQ(r.nodes.size(), static_cast<std::size_t>(n));
    for (int k = 0; k <= 2 * n - 1; ++k) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += r.weights[i] * std::pow(r.nodes[i], k);
      EXPECT_NEAR(s, k % 2 ? 0.0 : 2.0 / (k + 1), 1e-13) << n << "," << k;
    }
  }
}

TEST(GaussPatterson, SizesAndExactness) {
  const int expected_sizes[] = {1, 3, 7, 15, 31, 63};
  for (int l = 0; l <= kMaxPattersonLevel; ++l) {
    const auto& r = gauss_patterson(l);
    ASSERT_EQ(r.nodes.size(), static_cast<std::size_t>(expected_sizes[l]));
    EXPECT_TRUE(std::is_sorted(r.nodes.begin(), r.nodes.end()));
    const int exact = gauss_patterson_exactness(l);
    EXPECT_EQ(exact, l == 0 ? 1 : 3 * (1 << l) - 1);
    for (int k = 0; k <= exact; ++k) {
      double s = 0.0;
      for (std::size_t i = 0; i < r.nodes.size(); ++i) s += r.weights[i] * std::pow(r.nodes[i], k);
      EXPECT_NEAR(s, k % 2 ? 0.0 : 2.0 / (k + 1), 1e-12) << l << "," << k;
    }
    for (double w : r.weights) EXPECT_GT(w, 0.0);
  }
  EXPECT_THROW(gauss_patterson(kMaxPattersonLevel + 1), ConfigError);
}

TEST(GaussPatterson, NestedBitForBit) {
  for (int l = 1; l <= kMaxPattersonLevel; ++l) {
    const auto& coarse = gauss_patterson(l - 1).nodes;
    const auto& fine = gauss_patterson(l).nodes;
    for (double x : coarse) {
      EXPECT_NE(std::find(fine.begin(), fine.end(), x), fine.end()) << "level " << l;
    }
  }
}

TEST(Smolyak, NodeCountsSixDimensions) {
  const std::size_t expected[] = {1, 13, 97, 545, 2561};
  for (int l = 0; l <= 4; ++l) EXPECT_EQ(smolyak_grid(6, l).size(), expected[l]) << l;
}

TEST(Smolyak, OneDimensionalEqualsPatterson) {
  for (int l = 0; l <= 4; ++l) {
    const auto q = smolyak_grid(1, l);
    const auto& gp = gauss_patterson(l);
    ASSERT_EQ(q.size(), gp.nodes.size());
    std::vector<std::pair<double, double>> nw;
    for (Eigen::Index i = 0; i < q.nodes.rows(); ++i) nw.emplace_back(q.nodes(i, 0), q.weights[i]);
    std::sort(nw.begin(), nw.end());
    for (std::size_t i = 0; i < gp.nodes.size(); ++i) {
      EXPECT_DOUBLE_EQ(nw[i].first, gp.nodes[i]);
      EXPECT_NEAR(nw[i].second, gp.weights[i] / 2.0, 1e-14);
    }
  }
}

TEST(Smolyak, TensorGridWhenDimOneEquivalent) {
  const auto q = smolyak_grid(6, 0);
  ASSERT_EQ(q.size(), 1u);
  EXPECT_DOUBLE_EQ(q.weights[0], 1.0);
  for (Eigen::Index d = 0; d < 6; ++d) EXPECT_EQ(q.nodes(0, d), 0.0);
}

TEST(SmolyakProperty, MonomialExactness) {
  // Every monomial of total degree <= 2l + 1 in m = 3 dimensions.
  for (int l = 0; l <= 3; ++l) {
    const auto q = smolyak_grid(3, l);
    EXPECT_NEAR(q.weights.sum(), 1.0, 1e-13);
    const int deg = smolyak_exactness(l);
    EXPECT_EQ(deg, 2 * l + 1);
    for (const auto& idx : total_order_indices(3, deg)) {
      EXPECT_NEAR(quad_monomial(q, idx.degrees), monomial_mean(idx.degrees), 1e-12)
          << "level " << l << " degree " << idx.total_degree();
    }
  }
}

TEST(SmolyakProperty, MonomialExactnessSixDimensions) {
  const auto q = smolyak_grid(6, 2);
  for (const auto& idx : total_order_indices(6, 5)) {
    EXPECT_NEAR(quad_monomial(q, idx.degrees), monomial_mean(idx.degrees), 1e-12);
  }
}

TEST(SmolyakProperty, NestedAcrossLevels) {
  for (int l = 1; l <= 3; ++l) {
    const auto coarse = node_set(smolyak_grid(4, l - 1));
    const auto fine = node_set(smolyak_grid(4, l));
    for (const auto& p : coarse) EXPECT_TRUE(fine.count(p)) << "level " << l;
  }
}

TEST(SmolyakProperty, NodesUniqueAndInBox) {
  const auto q = smolyak_grid(6, 3);
  EXPECT_EQ(node_set(q).size(), q.size());
  EXPECT_LE(q.nodes.cwiseAbs().maxCoeff(), 1.0);
  EXPECT_TRUE(q.weights.allFinite());
}

TEST(Smolyak, RejectsTooDeep) {
  EXPECT_THROW(smolyak_grid(2, kMaxPattersonLevel + 1), ConfigError);
}

TEST(Lhs, StratificationProperty) {
  for (std::uint64_t seed : {1ull, 2ull, 99ull}) {
    const int n = 50, m = 6;
    const auto d = lhs_sample(m, n, seed);
    ASSERT_EQ(d.size(), static_cast<std::size_t>(n));
    ASSERT_EQ(d.dim(), m);
    EXPECT_EQ(d.kind, DesignKind::lhs);
    for (int c = 0; c < m; ++c) {
      std::vector<int> count(n, 0);
      for (int r = 0; r < n; ++r) {
        const double x = d.points(r, c);
        ASSERT_GE(x, -1.0);
        ASSERT_LT(x, 1.0);
        ++count[std::min(n - 1, static_cast<int>(std::floor((x + 1.0) * n / 2.0)))];
      }
      for (int j = 0; j < n; ++j) EXPECT_EQ(count[j], 1) << "dim " << c << " stratum " << j;
    }
  }
}

TEST(Lhs, DeterministicInSeed) {
  const auto a = lhs_sample(6, 20, 11);
  const auto b = lhs_sample(6, 20, 11);
  const auto c = lhs_sample(6, 20, 12);
  EXPECT_EQ(a.points, b.points);
  EXPECT_NE(a.points, c.points);
}

TEST(Lhs, SinglePoint) {
  const auto d = lhs_sample(3, 1, 5);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_LE(d.points.cwiseAbs().maxCoeff(), 1.0);
}

TEST(DesignKind, StringRoundTrip) {
  EXPECT_EQ(design_kind_from_string(to_string(DesignKind::smolyak)), DesignKind::smolyak);
  EXPECT_EQ(design_kind_from_string(to_string(DesignKind::lhs)), DesignKind::lhs);
  EXPECT_THROW(design_kind_from_string("grid"), ConfigError);
}

TEST(DesignFromQuadrature, CopiesWeights) {
  const auto q = smolyak_grid(2, 2);
  const auto d = design_from_quadrature(q);
  EXPECT_EQ(d.kind, DesignKind::smolyak);
  EXPECT_EQ(d.level, 2);
  EXPECT_EQ(d.points, q.nodes);
  EXPECT_EQ(d.weights, q.weights);
}
