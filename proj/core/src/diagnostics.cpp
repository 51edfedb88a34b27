#include "slipuq/diagnostics.hpp"

#include "slipuq/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <stdexcept>

namespace slipuq {

std::vector<MomentBand> moment_bands(const PCExpansion& exp,
                                     const std::vector<double>& times) {
  const Eigen::VectorXd mean = pce_mean(exp);
  const Eigen::VectorXd var = pce_variance(exp);
  std::map<int, std::vector<std::size_t>> by_gauge;
  for (std::size_t c = 0; c < exp.num_outputs(); ++c) {
    by_gauge[exp.labels()[c].gauge].push_back(c);
  }
  std::vector<MomentBand> out;
  for (auto& [gauge, cols] : by_gauge) {
    std::sort(cols.begin(), cols.end(), [&](std::size_t a, std::size_t b) {
      return exp.labels()[a].time_index < exp.labels()[b].time_index;
    });
    MomentBand band;
    band.gauge = gauge;
    for (std::size_t c : cols) {
      const int ti = exp.labels()[c].time_index;
      if (!times.empty() && (ti < 0 || static_cast<std::size_t>(ti) >= times.size())) {
        throw IntegrityError("moment_bands: time index beyond the time base");
      }
      const auto k = static_cast<Eigen::Index>(c);
      const double sd = std::sqrt(std::max(var[k], 0.0));
      band.times.push_back(times.empty() ? static_cast<double>(ti) : times[static_cast<std::size_t>(ti)]);
      band.mean.push_back(mean[k]);
      band.lower.push_back(mean[k] - 2.0 * sd);
      band.upper.push_back(mean[k] + 2.0 * sd);
    }
    out.push_back(std::move(band));
  }
  return out;
}

EmpiricalCdf::EmpiricalCdf(std::span<const double> samples)
    : sorted_(samples.begin(), samples.end()) {
  if (sorted_.empty()) throw std::invalid_argument("empirical CDF of an empty sample");
  if (std::any_of(sorted_.begin(), sorted_.end(), [](double v) { return !std::isfinite(v); })) {
    throw std::invalid_argument("empirical CDF of non-finite samples");
  }
  std::sort(sorted_.begin(), sorted_.end());
  const double n = static_cast<double>(sorted_.size());
  for (std::size_t i = 0; i < sorted_.size(); ++i) {
    if (i + 1 < sorted_.size() && sorted_[i + 1] == sorted_[i]) continue;
    support_.push_back(sorted_[i]);
    values_.push_back(static_cast<double>(i + 1) / n);
  }
}

double EmpiricalCdf::operator()(double x) const {
  const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), x);
  return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
}

EmpiricalCdf empirical_cdf(std::span<const double> samples) { return EmpiricalCdf(samples); }

double ks_statistic(std::span<const double> a, std::span<const double> b) {
  const EmpiricalCdf fa(a);
  const EmpiricalCdf fb(b);
  double d = 0.0;
  // The supremum is attained at a jump of either step function.
  for (double x : fa.support()) d = std::max(d, std::abs(fa(x) - fb(x)));
  for (double x : fb.support()) d = std::max(d, std::abs(fa(x) - fb(x)));
  return d;
}

double ks_p_value(double statistic, std::size_t n_a, std::size_t n_b) {
  if (n_a == 0 || n_b == 0) throw std::invalid_argument("ks_p_value: empty sample");
  const double ne = static_cast<double>(n_a) * static_cast<double>(n_b) /
                    static_cast<double>(n_a + n_b);
  const double sq = std::sqrt(ne);
  const double lambda = (sq + 0.12 + 0.11 / sq) * statistic;
  if (lambda < 1e-3) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
    sum += term;
    if (std::abs(term) < 1e-12) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

ResidualStats residual_stats(const GaugeRecord& obs, const GaugeRecord& model) {
  if (obs.times.size() != model.times.size() || obs.eta.size() != obs.times.size() ||
      model.eta.size() != model.times.size()) {
    throw IntegrityError("residual_variance: records of different length");
  }
  for (std::size_t i = 0; i < obs.times.size(); ++i) {
    if (std::abs(obs.times[i] - model.times[i]) > 1e-9) {
      throw IntegrityError("residual_variance: time bases differ at sample " +
                           std::to_string(i));
    }
  }
  ResidualStats st;
  st.count = obs.eta.size();
  if (st.count == 0) return st;
  for (std::size_t i = 0; i < st.count; ++i) st.bias += model.eta[i] - obs.eta[i];
  st.bias /= static_cast<double>(st.count);
  for (std::size_t i = 0; i < st.count; ++i) {
    const double d = model.eta[i] - obs.eta[i] - st.bias;
    st.variance += d * d;
  }
  st.variance /= static_cast<double>(st.count);
  return st;
}

double residual_variance(const GaugeRecord& obs, const GaugeRecord& model) {
  return residual_stats(obs, model).variance;
}

SweepResult ensemble_sweep(const EnsembleMatrix& ens, const DesignMatrix& design,
                           const SlipBounds& bounds, double threshold) {
  if (ens.size() != design.size()) {
    throw IntegrityError("ensemble_sweep: ensemble and design sizes differ");
  }
  constexpr double kTol = 1e-12;
  const Eigen::Index m = design.points.cols();
  // slices[i] holds the design rows of the slice along dimension i.
  std::vector<std::vector<std::size_t>> slices(static_cast<std::size_t>(m));
  for (Eigen::Index r = 0; r < design.points.rows(); ++r) {
    std::vector<Eigen::Index> off;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (std::abs(design.points(r, i)) > kTol) off.push_back(i);
    }
    if (off.size() > 1) continue;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (off.empty() || off.front() == i) slices[static_cast<std::size_t>(i)].push_back(static_cast<std::size_t>(r));
    }
  }
  SweepResult res;
  for (std::size_t g = 0; g < ens.gauge_ids.size(); ++g) {
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto& rows = slices[static_cast<std::size_t>(i)];
      // A slice needs a varying row; a lone centre row counts only in a
      // single-row design.
      const bool varying = std::any_of(rows.begin(), rows.end(), [&](std::size_t r) {
        return std::abs(design.points(static_cast<Eigen::Index>(r), i)) > kTol;
      });
      if (rows.empty() || (!varying && design.size() > 1)) continue;
      if (!varying && i > 0) continue;
      SweepTable table;
      table.gauge = ens.gauge_ids[g];
      table.slip_index = static_cast<int>(i);
      for (std::size_t r : rows) {
        if (!ens.rows[r].ok) {
          throw IntegrityError("ensemble_sweep: realization " + std::to_string(r) + " failed");
        }
        const auto recs = ens.records(r);
        const double xi = design.points(static_cast<Eigen::Index>(r), i);
        const double slip = canonical_to_slip(std::span<const double>(&xi, 1), bounds)[0];
        table.rows.push_back({slip, arrival_time(recs[g], threshold), max_wave_amplitude(recs[g])});
      }
      std::sort(table.rows.begin(), table.rows.end(),
                [](const SweepRow& a, const SweepRow& b) { return a.slip < b.slip; });
      res.tables.push_back(std::move(table));
    }
  }
  if (res.tables.empty()) {
    res.note = "design has no axis slices (rows with all but one slip at the midpoint)";
  }
  return res;
}

Eigen::MatrixXd sample_surrogate(const PCExpansion& exp, std::size_t n,
                                 std::uint64_t seed) {
  const int m = exp.basis().dim();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Eigen::MatrixXd points(static_cast<Eigen::Index>(n), m);
  for (Eigen::Index r = 0; r < points.rows(); ++r) {
    for (int i = 0; i < m; ++i) points(r, i) = unif(rng);
  }
  return exp.basis().design_matrix(points) * exp.coefficients();
}

}  // namespace slipuq
