#pragma once

#include "slipuq/design.hpp"
#include "slipuq/forward_swe.hpp"
#include "slipuq/pc_basis.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace slipuq {

// Mean and +-2 sigma envelope of one gauge's surrogate output series.
struct MomentBand {
  int gauge = 0;
  std::vector<double> times;
  std::vector<double> mean;
  std::vector<double> lower;
  std::vector<double> upper;
};

// One band per gauge appearing in the expansion labels, ordered by gauge.
// `times` maps time indices to seconds; when empty the index itself is used.
std::vector<MomentBand> moment_bands(const PCExpansion& exp,
                                     const std::vector<double>& times = {});

// Right-continuous step function F(x) = #{samples <= x} / n.
class EmpiricalCdf {
 public:
  // Throws std::invalid_argument on an empty or non-finite sample.
  explicit EmpiricalCdf(std::span<const double> samples);

  double operator()(double x) const;
  // Distinct sample values and F at each of them.
  const std::vector<double>& support() const { return support_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return sorted_.size(); }

 private:
  std::vector<double> sorted_;
  std::vector<double> support_;
  std::vector<double> values_;
};

EmpiricalCdf empirical_cdf(std::span<const double> samples);

// Two-sample Kolmogorov-Smirnov statistic sup_x |F_a(x) - F_b(x)|.
double ks_statistic(std::span<const double> a, std::span<const double> b);

// Asymptotic two-sample KS p-value.
double ks_p_value(double statistic, std::size_t n_a, std::size_t n_b);

struct ResidualStats {
  double variance = 0.0;  // population variance of model - obs
  double bias = 0.0;      // mean of model - obs
  std::size_t count = 0;
};

// Records must share their time base (within 1e-9 s); IntegrityError if not.
ResidualStats residual_stats(const GaugeRecord& obs, const GaugeRecord& model);
double residual_variance(const GaugeRecord& obs, const GaugeRecord& model);

struct SweepRow {
  double slip = 0.0;  // m, the varied slip
  std::optional<double> arrival;
  double mwa = 0.0;
};

struct SweepTable {
  std::string gauge;
  int slip_index = 0;  // 0-based subfault whose slip varies
  std::vector<SweepRow> rows;  // sorted by slip
};

struct SweepResult {
  std::vector<SweepTable> tables;
  std::string note;  // set when the design holds no axis slices
};

// Axis slices of the design: rows where every coordinate but one sits at the
// canonical midpoint. The all-midpoint row joins every slice.
SweepResult ensemble_sweep(const EnsembleMatrix& ens, const DesignMatrix& design,
                           const SlipBounds& bounds, double threshold = 0.05);

// n x outputs matrix of surrogate evaluations at uniform random points.
Eigen::MatrixXd sample_surrogate(const PCExpansion& exp, std::size_t n,
                                 std::uint64_t seed);

}  // namespace slipuq
