#include "slipuq/pc_basis.hpp"

#include "slipuq/error.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace slipuq {

int MultiIndex::total_degree() const {
  return std::accumulate(degrees.begin(), degrees.end(), 0);
}

namespace {

// Appends every index with exactly `remaining` degrees spread over
// dimensions [pos, dim), leading dimensions taking the largest share first.
void enumerate_degree(int pos, int remaining, std::vector<int>& current,
                      std::vector<MultiIndex>& out) {
  const int dim = static_cast<int>(current.size());
  if (pos == dim - 1) {
    current[pos] = remaining;
    out.push_back(MultiIndex{current});
    current[pos] = 0;
    return;
  }
  for (int d = remaining; d >= 0; --d) {
    current[pos] = d;
    enumerate_degree(pos + 1, remaining - d, current, out);
  }
  current[pos] = 0;
}

}  // namespace

std::vector<MultiIndex> total_order_indices(int dim, int order) {
  if (dim < 1 || order < 0) {
    throw std::invalid_argument("total_order_indices: need dim >= 1, order >= 0");
  }
  std::vector<MultiIndex> out;
  std::vector<int> current(static_cast<std::size_t>(dim), 0);
  for (int degree = 0; degree <= order; ++degree) {
    enumerate_degree(0, degree, current, out);
  }
  return out;
}

double legendre_eval(int n, double x) {
  if (n < 0) throw std::invalid_argument("legendre_eval: negative degree");
  if (!(std::abs(x) <= 1.0 + 1e-12)) {
    throw std::domain_error("legendre_eval: x outside [-1, 1]");
  }
  if (n == 0) return 1.0;
  double prev = 1.0;
  double cur = x;
  for (int k = 1; k < n; ++k) {
    const double next = ((2.0 * k + 1.0) * x * cur - k * prev) / (k + 1.0);
    prev = cur;
    cur = next;
  }
  return cur;
}

void legendre_table(double x, std::span<double> out) {
  if (out.empty()) return;
  if (!(std::abs(x) <= 1.0 + 1e-12)) {
    throw std::domain_error("legendre_table: x outside [-1, 1]");
  }
  out[0] = 1.0;
  if (out.size() == 1) return;
  out[1] = x;
  for (std::size_t k = 1; k + 1 < out.size(); ++k) {
    const double kd = static_cast<double>(k);
    out[k + 1] = ((2.0 * kd + 1.0) * x * out[k] - kd * out[k - 1]) / (kd + 1.0);
  }
}

double basis_eval(const MultiIndex& index, std::span<const double> xi) {
  if (index.size() != xi.size()) {
    throw DimensionMismatch("basis_eval: index has " +
                            std::to_string(index.size()) +
                            " dimensions, point has " +
                            std::to_string(xi.size()));
  }
  double value = 1.0;
  for (std::size_t i = 0; i < xi.size(); ++i) {
    value *= legendre_eval(index.degrees[i], xi[i]);
  }
  return value;
}

double basis_norm_sq(const MultiIndex& index) {
  double value = 1.0;
  for (int d : index.degrees) value /= (2.0 * d + 1.0);
  return value;
}

PCBasis::PCBasis(int dim, int order)
    : dim_(dim), order_(order), indices_(total_order_indices(dim, order)) {
  norms_sq_.resize(static_cast<Eigen::Index>(indices_.size()));
  for (std::size_t k = 0; k < indices_.size(); ++k) {
    norms_sq_[static_cast<Eigen::Index>(k)] = basis_norm_sq(indices_[k]);
  }
}

PCBasis PCBasis::from_indices(int dim, int order,
                              std::vector<MultiIndex> indices) {
  PCBasis basis(dim, order);
  if (indices != basis.indices_) {
    throw ConfigError("stored basis index list does not match the total-order "
                      "graded lexicographic basis for dim=" +
                      std::to_string(dim) + ", order=" + std::to_string(order));
  }
  return basis;
}

void PCBasis::evaluate(std::span<const double> xi,
                       std::span<double> out) const {
  if (static_cast<int>(xi.size()) != dim_) {
    throw DimensionMismatch("PCBasis::evaluate: expected " +
                            std::to_string(dim_) + " coordinates, got " +
                            std::to_string(xi.size()));
  }
  if (out.size() != indices_.size()) {
    throw DimensionMismatch("PCBasis::evaluate: output span has wrong size");
  }
  const std::size_t stride = static_cast<std::size_t>(order_) + 1;
  std::vector<double> table(stride * xi.size());
  for (std::size_t i = 0; i < xi.size(); ++i) {
    legendre_table(xi[i], std::span<double>(table).subspan(i * stride, stride));
  }
  for (std::size_t k = 0; k < indices_.size(); ++k) {
    const auto& deg = indices_[k].degrees;
    double value = 1.0;
    for (std::size_t i = 0; i < deg.size(); ++i) {
      if (deg[i] != 0) value *= table[i * stride + static_cast<std::size_t>(deg[i])];
    }
    out[k] = value;
  }
}

Eigen::VectorXd PCBasis::evaluate(std::span<const double> xi) const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(indices_.size()));
  evaluate(xi, std::span<double>(out.data(), indices_.size()));
  return out;
}

Eigen::MatrixXd PCBasis::design_matrix(const Eigen::MatrixXd& points) const {
  if (points.cols() != dim_) {
    throw DimensionMismatch("PCBasis::design_matrix: points have " +
                            std::to_string(points.cols()) + " columns, basis has " +
                            std::to_string(dim_) + " dimensions");
  }
  Eigen::MatrixXd psi(points.rows(), static_cast<Eigen::Index>(indices_.size()));
  std::vector<double> xi(static_cast<std::size_t>(dim_));
  std::vector<double> row(indices_.size());
  for (Eigen::Index r = 0; r < points.rows(); ++r) {
    for (int i = 0; i < dim_; ++i) xi[static_cast<std::size_t>(i)] = points(r, i);
    evaluate(xi, row);
    for (std::size_t k = 0; k < row.size(); ++k) {
      psi(r, static_cast<Eigen::Index>(k)) = row[k];
    }
  }
  return psi;
}

PCExpansion::PCExpansion(PCBasis basis, Eigen::MatrixXd coefficients,
                         std::vector<OutputLabel> labels)
    : basis_(std::move(basis)),
      coefficients_(std::move(coefficients)),
      labels_(std::move(labels)) {
  if (static_cast<std::size_t>(coefficients_.rows()) != basis_.size()) {
    throw DimensionMismatch("PCExpansion: coefficient rows (" +
                            std::to_string(coefficients_.rows()) +
                            ") != basis size (" + std::to_string(basis_.size()) +
                            ")");
  }
  if (!coefficients_.allFinite()) {
    throw NumericError("PCExpansion: non-finite coefficient");
  }
  if (labels_.empty()) {
    labels_.resize(static_cast<std::size_t>(coefficients_.cols()));
    for (std::size_t j = 0; j < labels_.size(); ++j) {
      labels_[j] = OutputLabel{0, static_cast<int>(j)};
    }
  } else if (labels_.size() != static_cast<std::size_t>(coefficients_.cols())) {
    throw DimensionMismatch("PCExpansion: label count != output count");
  }
}

Eigen::VectorXd pce_eval(const PCExpansion& exp, std::span<const double> xi) {
  const Eigen::VectorXd psi = exp.basis().evaluate(xi);
  return exp.coefficients().transpose() * psi;
}

Eigen::VectorXd pce_mean(const PCExpansion& exp) {
  return exp.coefficients().row(0).transpose();
}

Eigen::VectorXd pce_variance(const PCExpansion& exp) {
  const auto& c = exp.coefficients();
  const auto& norms = exp.basis().norms_sq();
  Eigen::VectorXd var = Eigen::VectorXd::Zero(c.cols());
  for (Eigen::Index k = 1; k < c.rows(); ++k) {
    var += norms[k] * c.row(k).transpose().cwiseAbs2();
  }
  return var;
}

std::vector<SobolIndex> sobol_indices(const PCExpansion& exp, int dim) {
  const PCBasis& basis = exp.basis();
  if (dim < 0 || dim >= basis.dim()) {
    throw std::out_of_range("sobol_indices: dimension out of range");
  }
  const auto& c = exp.coefficients();
  const auto& norms = basis.norms_sq();
  const Eigen::Index n_out = c.cols();
  Eigen::VectorXd total_var = Eigen::VectorXd::Zero(n_out);
  Eigen::VectorXd main_var = Eigen::VectorXd::Zero(n_out);
  Eigen::VectorXd touching_var = Eigen::VectorXd::Zero(n_out);
  for (std::size_t k = 1; k < basis.size(); ++k) {
    const auto& deg = basis[k].degrees;
    const auto kk = static_cast<Eigen::Index>(k);
    const Eigen::VectorXd contrib = norms[kk] * c.row(kk).transpose().cwiseAbs2();
    total_var += contrib;
    if (deg[static_cast<std::size_t>(dim)] == 0) continue;
    touching_var += contrib;
    if (basis[k].total_degree() == deg[static_cast<std::size_t>(dim)]) {
      main_var += contrib;
    }
  }
  std::vector<SobolIndex> out(static_cast<std::size_t>(n_out));
  for (Eigen::Index j = 0; j < n_out; ++j) {
    auto& s = out[static_cast<std::size_t>(j)];
    if (!(total_var[j] > 0.0)) {
      s.zero_variance = true;
      continue;
    }
    s.main = main_var[j] / total_var[j];
    s.total = touching_var[j] / total_var[j];
  }
  return out;
}

}  // namespace slipuq
