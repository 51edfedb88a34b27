#pragma once

#include "slipuq/design.hpp"
#include "slipuq/pc_basis.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace slipuq {

// Galerkin projection g_k = sum_q G(xi_q) psi_k(xi_q) w_q / <psi_k^2>.
// `outputs` is Q x n_outputs with rows aligned to the quadrature nodes.
PCExpansion nisp_project(const Eigen::MatrixXd& outputs,
                         const SparseQuadrature& quad, const PCBasis& basis,
                         std::vector<OutputLabel> labels = {});

struct BpdnOptions {
  double opt_tol = 1e-6;      // relative duality gap of the LASSO subproblem
  double bp_tol = 1e-9;       // residual floor relative to ||G||_2
  double ls_tol = 1e-6;       // ||Psi^T r||_inf <= ls_tol ||r||: least squares
  double dec_tol = 1e-4;      // relative objective change triggering a tau update
  int max_iterations = 10000;
  int line_search_window = 3;
  double step_min = 1e-16;
  double step_max = 1e5;
};

struct BpdnSolution {
  Eigen::VectorXd coefficients;
  double residual_norm = 0.0;
  double delta = 0.0;
  double tau = 0.0;           // final l1-ball radius
  int iterations = 0;
  int newton_updates = 0;
  bool converged = false;
  std::string status;
};

// min ||g||_1 subject to ||G - Psi g||_2 <= delta. Root-finding on the
// Pareto curve phi(tau) = min{||G - Psi g||_2 : ||g||_1 <= tau} with each
// LASSO subproblem solved by spectral projected gradient. `warm_start`, if
// given, seeds both g and tau = ||g||_1.
BpdnSolution bpdn_solve(const Eigen::MatrixXd& psi, const Eigen::VectorXd& g,
                        double delta, const BpdnOptions& opts = {},
                        const Eigen::VectorXd* warm_start = nullptr);

// Euclidean projection onto {x : ||x||_1 <= tau}.
Eigen::VectorXd project_l1_ball(const Eigen::VectorXd& x, double tau);

// Default candidate list: 12 log-spaced values over [1e-6, 1] * ||G||_2.
std::vector<double> default_delta_candidates(double g_norm, int count = 12);

struct CrossValidationResult {
  double delta = 0.0;                 // selected candidate scaled to full S
  double candidate = 0.0;             // selected candidate before scaling
  std::vector<double> candidates;
  std::vector<double> validation_error;  // mean over folds, per candidate
};

// K-fold selection of the BPDN tolerance. Rows are assigned to fold r % K.
// For each candidate the coefficients are fit on the reconstruction rows and
// scored by the validation residual; the winner is scaled by
// sqrt(S / S_reconstruction).
CrossValidationResult cross_validate_delta(const Eigen::MatrixXd& psi,
                                           const Eigen::VectorXd& g, int folds,
                                           const std::vector<double>& candidates,
                                           const BpdnOptions& opts = {});

struct ColumnFitReport {
  OutputLabel label;
  double delta = 0.0;
  double residual_norm = 0.0;
  int iterations = 0;
  int nonzeros = 0;
  bool converged = false;
};

struct BpdnFitOptions {
  int folds = 4;
  int candidate_count = 12;
  BpdnOptions solver;
  // Iteration cap for the fits inside cross-validation.
  int cv_max_iterations = 300;
  int workers = 1;  // columns are fit concurrently; results do not depend on it
};

struct BpdnFit {
  PCExpansion expansion;
  std::vector<ColumnFitReport> report;
};

// Per-column cross-validated BPDN over shared sample points (n x m, canonical).
BpdnFit fit_bpdn(const Eigen::MatrixXd& points, const Eigen::MatrixXd& outputs,
                 const PCBasis& basis, const BpdnFitOptions& opts = {},
                 std::vector<OutputLabel> labels = {});

// ||G_val - PC(xi_val)||_2 / ||G_val||_2 per output column; nullopt where the
// denominator vanishes.
std::vector<std::optional<double>> nre(const PCExpansion& surrogate,
                                       const Eigen::MatrixXd& points,
                                       const Eigen::MatrixXd& outputs);

}  // namespace slipuq
