#include "slipuq/coeff_solvers.hpp"

#include "slipuq/error.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

namespace slipuq {

PCExpansion nisp_project(const Eigen::MatrixXd& outputs,
                         const SparseQuadrature& quad, const PCBasis& basis,
                         std::vector<OutputLabel> labels) {
  if (static_cast<std::size_t>(outputs.rows()) != quad.size()) {
    throw IntegrityError("nisp_project: " + std::to_string(outputs.rows()) +
                         " ensemble rows for " + std::to_string(quad.size()) +
                         " quadrature nodes");
  }
  if (quad.nodes.cols() != basis.dim()) {
    throw DimensionMismatch("nisp_project: quadrature dimension != basis dimension");
  }
  if (!outputs.allFinite()) {
    throw IntegrityError("nisp_project: ensemble contains non-finite values");
  }
  const Eigen::MatrixXd psi = basis.design_matrix(quad.nodes);
  Eigen::MatrixXd coeffs = psi.transpose() * quad.weights.asDiagonal() * outputs;
  coeffs.array().colwise() /= basis.norms_sq().array();
  return PCExpansion(basis, std::move(coeffs), std::move(labels));
}

Eigen::VectorXd project_l1_ball(const Eigen::VectorXd& x, double tau) {
  if (tau <= 0.0) return Eigen::VectorXd::Zero(x.size());
  const Eigen::VectorXd ax = x.cwiseAbs();
  if (ax.sum() <= tau) return x;
  std::vector<double> u(ax.data(), ax.data() + ax.size());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumsum = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cumsum += u[j];
    const double t = (cumsum - tau) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) theta = t;
  }
  Eigen::VectorXd out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double m = std::max(ax[i] - theta, 0.0);
    out[i] = x[i] >= 0.0 ? m : -m;
  }
  return out;
}

BpdnSolution bpdn_solve(const Eigen::MatrixXd& psi, const Eigen::VectorXd& b,
                        double delta, const BpdnOptions& opts,
                        const Eigen::VectorXd* warm_start) {
  if (!(delta >= 0.0)) throw std::invalid_argument("bpdn_solve: delta must be >= 0");
  if (psi.rows() != b.size()) {
    throw DimensionMismatch("bpdn_solve: Psi rows != length of G");
  }
  const Eigen::Index n = psi.cols();
  BpdnSolution sol;
  sol.delta = delta;
  const double b_norm = b.norm();
  if (b_norm <= delta) {
    sol.coefficients = Eigen::VectorXd::Zero(n);
    sol.residual_norm = b_norm;
    sol.converged = true;
    sol.status = "zero solution feasible";
    return sol;
  }
  if (psi.norm() == 0.0) throw std::invalid_argument("bpdn_solve: Psi is zero");

  const double floor = opts.bp_tol * b_norm;
  const double feasible_limit = delta * (1.0 + 1e-6) + floor;

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  double tau = 0.0;
  if (warm_start != nullptr && warm_start->size() == n) {
    x = *warm_start;
    tau = x.lpNorm<1>();
  }
  Eigen::VectorXd r = b - psi * x;
  double f = 0.5 * r.squaredNorm();
  Eigen::VectorXd g = -(psi.transpose() * r);

  double gstep = 1.0;
  {
    const Eigen::VectorXd dx = project_l1_ball(x - g, tau) - x;
    const double dxn = dx.lpNorm<Eigen::Infinity>();
    gstep = dxn < 1.0 / opts.step_max ? opts.step_max
                                      : std::clamp(1.0 / dxn, opts.step_min, opts.step_max);
  }
  const int window = std::max(1, opts.line_search_window);
  std::vector<double> last_f(static_cast<std::size_t>(window),
                             -std::numeric_limits<double>::infinity());
  last_f[0] = f;
  double f_old = f;
  bool updated_last = false;
  // Set when the projected step vanishes: x solves the current LASSO
  // subproblem, so only a tau update can make progress.
  bool subproblem_solved = false;

  auto finish = [&](bool converged, const char* status, double r_norm) {
    sol.coefficients = x;
    sol.residual_norm = r_norm;
    sol.tau = tau;
    sol.converged = converged;
    sol.status = status;
    return sol;
  };

  for (int iter = 0;; ++iter) {
    sol.iterations = iter;
    if (iter % 25 == 0) {
      r = b - psi * x;
      f = 0.5 * r.squaredNorm();
      g = -(psi.transpose() * r);
      // The recomputed objective can exceed the incrementally tracked
      // history by round-off, which would block every non-monotone step.
      std::fill(last_f.begin(), last_f.end(), -std::numeric_limits<double>::infinity());
      last_f[0] = f;
    }
    const double r_norm = r.norm();
    const double g_norm = g.lpNorm<Eigen::Infinity>();
    const double r_error = std::abs(r_norm - delta) / std::max(1.0, r_norm);
    const bool feasible = r_norm <= feasible_limit;

    if (r_norm <= floor) return finish(true, "basis pursuit solution", r_norm);
    if (feasible && r_error <= opts.opt_tol) return finish(true, "root found", r_norm);
    if (g_norm <= opts.ls_tol * r_norm) {
      return finish(feasible, feasible ? "least-squares solution"
                                       : "least-squares residual exceeds delta",
                    r_norm);
    }
    if (iter >= opts.max_iterations) return finish(false, "iteration limit", r_norm);

    // Newton step on the Pareto curve once the subproblem stalls.
    const double change = std::abs(f - f_old);
    const bool stall_far = change <= opts.dec_tol * f && r_norm > 2.0 * delta;
    const bool stall_near = change <= 0.1 * f * std::abs(r_norm - delta) &&
                            r_norm <= 2.0 * delta;
    if ((stall_far || stall_near || subproblem_solved) && !updated_last) {
      const double tau_old = tau;
      tau = std::max(0.0, tau + r_norm * (r_norm - delta) / g_norm);
      ++sol.newton_updates;
      updated_last = true;
      if (tau < tau_old) {
        x = project_l1_ball(x, tau);
        r = b - psi * x;
        f = 0.5 * r.squaredNorm();
        g = -(psi.transpose() * r);
      }
      std::fill(last_f.begin(), last_f.end(), -std::numeric_limits<double>::infinity());
      last_f[0] = f;
    } else if (subproblem_solved) {
      return finish(false, "no progress after tau update", r_norm);
    } else {
      updated_last = false;
    }
    subproblem_solved = false;

    // Non-monotone projected line search along d = P(x - a g) - x.
    f_old = f;
    const Eigen::VectorXd x_old = x;
    const Eigen::VectorXd g_old = g;
    const double f_max = *std::max_element(last_f.begin(), last_f.end());
    bool accepted = false;
    bool descent = false;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      const Eigen::VectorXd d = project_l1_ball(x - gstep * g, tau) - x;
      const double gtd = g.dot(d);
      // A predicted decrease below round-off in f is not a usable direction.
      if (!(gtd < -1e-12 * f)) {
        gstep = 1.0;
        continue;
      }
      descent = true;
      const Eigen::VectorXd ad = psi * d;
      double step = 1.0;
      for (int ls = 0; ls < 10; ++ls) {
        const Eigen::VectorXd r_new = r - step * ad;
        const double f_new = 0.5 * r_new.squaredNorm();
        if (f_new < f_max + 1e-4 * step * gtd) {
          x = x + step * d;
          r = r_new;
          f = f_new;
          accepted = true;
          break;
        }
        // Safeguarded quadratic backtracking.
        const double denom = 2.0 * (f_new - f - step * gtd);
        double tmp = denom > 0.0 ? -gtd * step * step / denom : 0.5 * step;
        tmp = std::clamp(tmp, 0.1 * step, 0.9 * step);
        step = tmp;
      }
      if (!accepted) gstep = 1.0;
    }
    if (!accepted && !descent) {
      subproblem_solved = true;
      gstep = 1.0;
      continue;
    }
    if (!accepted) return finish(false, "line search failure", r.norm());

    g = -(psi.transpose() * r);
    const Eigen::VectorXd s = x - x_old;
    const Eigen::VectorXd y = g - g_old;
    const double sts = s.squaredNorm();
    const double sty = s.dot(y);
    gstep = sty <= 0.0 ? opts.step_max
                       : std::clamp(sts / sty, opts.step_min, opts.step_max);
    last_f[static_cast<std::size_t>((iter + 1) % window)] = f;
  }
}

std::vector<double> default_delta_candidates(double g_norm, int count) {
  if (count < 1) throw std::invalid_argument("candidate count must be >= 1");
  std::vector<double> out(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const double e = count == 1 ? 0.0 : -6.0 + 6.0 * i / (count - 1);
    out[static_cast<std::size_t>(i)] = g_norm * std::pow(10.0, e);
  }
  return out;
}

CrossValidationResult cross_validate_delta(const Eigen::MatrixXd& psi,
                                           const Eigen::VectorXd& g, int folds,
                                           const std::vector<double>& candidates,
                                           const BpdnOptions& opts) {
  const Eigen::Index s = psi.rows();
  if (folds < 2) throw std::invalid_argument("cross_validate_delta: folds >= 2");
  if (s < 2 * folds) {
    throw std::invalid_argument("cross_validate_delta: need at least 2 rows per fold");
  }
  if (candidates.empty()) {
    throw std::invalid_argument("cross_validate_delta: empty candidate list");
  }
  for (double c : candidates) {
    if (!(c >= 0.0) || !std::isfinite(c)) {
      throw std::invalid_argument("cross_validate_delta: invalid candidate");
    }
  }
  // Largest tolerance first so each fit warm-starts the next.
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return candidates[a] > candidates[b];
  });

  CrossValidationResult res;
  res.candidates = candidates;
  res.validation_error.assign(candidates.size(), 0.0);
  double recon_rows = 0.0;
  for (int f = 0; f < folds; ++f) {
    std::vector<Eigen::Index> rec;
    std::vector<Eigen::Index> val;
    for (Eigen::Index r = 0; r < s; ++r) (r % folds == f ? val : rec).push_back(r);
    recon_rows += static_cast<double>(rec.size());
    const Eigen::MatrixXd psi_r = psi(rec, Eigen::all);
    const Eigen::VectorXd g_r = g(rec);
    const Eigen::MatrixXd psi_v = psi(val, Eigen::all);
    const Eigen::VectorXd g_v = g(val);
    Eigen::VectorXd warm = Eigen::VectorXd::Zero(psi.cols());
    for (std::size_t idx : order) {
      const BpdnSolution sol = bpdn_solve(psi_r, g_r, candidates[idx], opts, &warm);
      warm = sol.coefficients;
      res.validation_error[idx] += (g_v - psi_v * sol.coefficients).norm() / folds;
    }
  }
  // Ties resolve to the larger tolerance.
  std::size_t best = order.front();
  for (std::size_t idx : order) {
    if (res.validation_error[idx] < res.validation_error[best]) best = idx;
  }
  res.candidate = candidates[best];
  res.delta = res.candidate * std::sqrt(static_cast<double>(s) * folds / recon_rows);
  return res;
}

BpdnFit fit_bpdn(const Eigen::MatrixXd& points, const Eigen::MatrixXd& outputs,
                 const PCBasis& basis, const BpdnFitOptions& opts,
                 std::vector<OutputLabel> labels) {
  if (points.rows() != outputs.rows()) {
    throw IntegrityError("fit_bpdn: sample count mismatch between points and outputs");
  }
  if (!outputs.allFinite()) throw IntegrityError("fit_bpdn: non-finite outputs");
  const Eigen::MatrixXd psi = basis.design_matrix(points);
  const Eigen::Index n_out = outputs.cols();
  if (labels.empty()) {
    for (Eigen::Index j = 0; j < n_out; ++j) labels.push_back(OutputLabel{0, static_cast<int>(j)});
  }
  if (labels.size() != static_cast<std::size_t>(n_out)) {
    throw DimensionMismatch("fit_bpdn: one label per output column required");
  }
  Eigen::MatrixXd coeffs(psi.cols(), n_out);
  std::vector<ColumnFitReport> report(static_cast<std::size_t>(n_out));
  BpdnOptions cv_opts = opts.solver;
  cv_opts.max_iterations = std::min(cv_opts.max_iterations, opts.cv_max_iterations);
  auto fit_column = [&](Eigen::Index j) {
    const Eigen::VectorXd col = outputs.col(j);
    const double norm = col.norm();
    ColumnFitReport& rep = report[static_cast<std::size_t>(j)];
    rep.label = labels[static_cast<std::size_t>(j)];
    if (norm == 0.0) {
      coeffs.col(j).setZero();
      rep.converged = true;
      return;
    }
    const auto cands = default_delta_candidates(norm, opts.candidate_count);
    const auto cv = cross_validate_delta(psi, col, opts.folds, cands, cv_opts);
    const BpdnSolution sol = bpdn_solve(psi, col, cv.delta, opts.solver);
    coeffs.col(j) = sol.coefficients;
    rep.delta = cv.delta;
    rep.residual_norm = sol.residual_norm;
    rep.iterations = sol.iterations;
    rep.converged = sol.converged;
    rep.nonzeros = static_cast<int>((sol.coefficients.array().abs() > 1e-10).count());
  };
  const int workers = std::max(1, std::min<int>(opts.workers, static_cast<int>(n_out)));
  if (workers == 1) {
    for (Eigen::Index j = 0; j < n_out; ++j) fit_column(j);
  } else {
    std::atomic<Eigen::Index> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (Eigen::Index j = next++; j < n_out; j = next++) {
          try {
            fit_column(j);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }
  return BpdnFit{PCExpansion(basis, std::move(coeffs), std::move(labels)), std::move(report)};
}

std::vector<std::optional<double>> nre(const PCExpansion& surrogate,
                                       const Eigen::MatrixXd& points,
                                       const Eigen::MatrixXd& outputs) {
  if (points.rows() != outputs.rows()) {
    throw IntegrityError("nre: sample count mismatch between points and outputs");
  }
  if (static_cast<std::size_t>(outputs.cols()) != surrogate.num_outputs()) {
    throw IntegrityError("nre: output count mismatch with surrogate");
  }
  const Eigen::MatrixXd psi = surrogate.basis().design_matrix(points);
  const Eigen::MatrixXd pred = psi * surrogate.coefficients();
  std::vector<std::optional<double>> out(static_cast<std::size_t>(outputs.cols()));
  for (Eigen::Index j = 0; j < outputs.cols(); ++j) {
    const double denom = outputs.col(j).norm();
    if (denom == 0.0) continue;
    out[static_cast<std::size_t>(j)] = (outputs.col(j) - pred.col(j)).norm() / denom;
  }
  return out;
}

}  // namespace slipuq
