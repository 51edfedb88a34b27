#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace slipuq {

// Per-dimension polynomial degrees of one multivariate basis term.
struct MultiIndex {
  std::vector<int> degrees;

  int total_degree() const;
  std::size_t size() const { return degrees.size(); }
  bool operator==(const MultiIndex&) const = default;
};

// All multi-indices of dimension `dim` with total degree <= `order`, in graded
// lexicographic order: by total degree, then by descending degree in the
// leading dimensions. The all-zeros index comes first.
std::vector<MultiIndex> total_order_indices(int dim, int order);

// Standard Legendre polynomial L_n(x) with L_n(1) = 1, by forward recurrence.
// Throws std::domain_error for |x| > 1 + 1e-12.
double legendre_eval(int n, double x);

// Writes L_0(x) .. L_{out.size()-1}(x) into `out`.
void legendre_table(double x, std::span<double> out);

// Tensor-product Legendre polynomial for `index` at canonical point `xi`.
double basis_eval(const MultiIndex& index, std::span<const double> xi);

// <psi_k^2> under the uniform probability density on [-1,1]^m.
double basis_norm_sq(const MultiIndex& index);

// Total-order Legendre chaos basis over the canonical hypercube [-1,1]^m.
class PCBasis {
 public:
  PCBasis() = default;
  PCBasis(int dim, int order);

  // Rebuilds a basis from a stored index list. The list must equal the
  // generated total-order list for (dim, order); throws ConfigError if not.
  static PCBasis from_indices(int dim, int order,
                              std::vector<MultiIndex> indices);

  int dim() const { return dim_; }
  int order() const { return order_; }
  std::size_t size() const { return indices_.size(); }
  const MultiIndex& operator[](std::size_t k) const { return indices_[k]; }
  const std::vector<MultiIndex>& indices() const { return indices_; }
  const Eigen::VectorXd& norms_sq() const { return norms_sq_; }

  // psi_k(xi) for every term k.
  void evaluate(std::span<const double> xi, std::span<double> out) const;
  Eigen::VectorXd evaluate(std::span<const double> xi) const;

  // Rows are sample points (n x dim); result is n x size().
  Eigen::MatrixXd design_matrix(const Eigen::MatrixXd& points) const;

 private:
  int dim_ = 0;
  int order_ = 0;
  std::vector<MultiIndex> indices_;
  Eigen::VectorXd norms_sq_;
};

// Identifies one surrogate output column.
struct OutputLabel {
  int gauge = 0;
  int time_index = 0;
  bool operator==(const OutputLabel&) const = default;
};

// Surrogate G(xi) ~ sum_k g_k psi_k(xi), one coefficient column per output.
class PCExpansion {
 public:
  PCExpansion() = default;
  PCExpansion(PCBasis basis, Eigen::MatrixXd coefficients,
              std::vector<OutputLabel> labels = {});

  const PCBasis& basis() const { return basis_; }
  const Eigen::MatrixXd& coefficients() const { return coefficients_; }
  const std::vector<OutputLabel>& labels() const { return labels_; }
  std::size_t num_outputs() const {
    return static_cast<std::size_t>(coefficients_.cols());
  }

 private:
  PCBasis basis_;
  Eigen::MatrixXd coefficients_;  // basis terms x outputs
  std::vector<OutputLabel> labels_;
};

Eigen::VectorXd pce_eval(const PCExpansion& exp, std::span<const double> xi);
Eigen::VectorXd pce_mean(const PCExpansion& exp);
Eigen::VectorXd pce_variance(const PCExpansion& exp);

struct SobolIndex {
  double main = 0.0;
  double total = 0.0;
  bool zero_variance = false;
};

// First-order and total Sobol indices of dimension `dim` (0-based) for every
// output column. Zero-variance columns report (0, 0) with the flag set.
std::vector<SobolIndex> sobol_indices(const PCExpansion& exp, int dim);

}  // namespace slipuq
