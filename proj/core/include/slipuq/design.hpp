#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace slipuq {

// Admissible slip range, in meters. Shared by every subfault.
struct SlipBounds {
  double min = 0.0;
  double max = 30.0;
};

// Affine map [min, max] -> [-1, 1]. Throws std::out_of_range for inputs
// outside the admissible range (1e-12 relative slack).
std::vector<double> slip_to_canonical(std::span<const double> slip,
                                      const SlipBounds& bounds);
std::vector<double> canonical_to_slip(std::span<const double> xi,
                                      const SlipBounds& bounds);

// One-dimensional rule on [-1, 1]; weights sum to 2 (Lebesgue measure).
struct QuadratureRule1D {
  std::vector<double> nodes;
  std::vector<double> weights;
};

QuadratureRule1D gauss_legendre(int n);

// Highest supported Gauss-Patterson level. Level l has 2^(l+1) - 1 nodes and
// integrates polynomials up to degree 1 (l = 0) or 3 * 2^l - 1 (l >= 1).
inline constexpr int kMaxPattersonLevel = 5;

// Nested Gauss-Patterson rule at `level`, nodes sorted ascending. Each level
// reuses the previous level's node values bit-for-bit.
const QuadratureRule1D& gauss_patterson(int level);
int gauss_patterson_exactness(int level);

// Node/weight set w.r.t. the uniform probability density on [-1, 1]^m.
struct SparseQuadrature {
  Eigen::MatrixXd nodes;     // Q x m
  Eigen::VectorXd weights;   // Q, sums to 1; may contain negative entries
  int level = 0;
  std::string rule = "gauss-patterson";

  std::size_t size() const { return static_cast<std::size_t>(nodes.rows()); }
};

// Smolyak combination of nested Gauss-Patterson rules. A level-l grid
// integrates every polynomial of total degree <= 2l + 1 exactly.
SparseQuadrature smolyak_grid(int dim, int level);
int smolyak_exactness(int level);

enum class DesignKind { smolyak, lhs };

std::string to_string(DesignKind kind);
DesignKind design_kind_from_string(const std::string& s);

// Sample points in canonical coordinates, one row per forward run.
struct DesignMatrix {
  Eigen::MatrixXd points;     // n x m, entries in [-1, 1]
  Eigen::VectorXd weights;    // quadrature weights (smolyak only)
  DesignKind kind = DesignKind::lhs;
  std::uint64_t seed = 0;
  int level = -1;

  std::size_t size() const { return static_cast<std::size_t>(points.rows()); }
  int dim() const { return static_cast<int>(points.cols()); }
};

// Latin hypercube: each dimension has exactly one point in each of the n
// strata [-1 + 2j/n, -1 + 2(j+1)/n), uniformly jittered. Deterministic in seed.
DesignMatrix lhs_sample(int dim, int n, std::uint64_t seed);

DesignMatrix design_from_quadrature(const SparseQuadrature& quad);

}  // namespace slipuq
