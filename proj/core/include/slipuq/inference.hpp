#pragma once

#include "slipuq/design.hpp"
#include "slipuq/forward_swe.hpp"
#include "slipuq/pc_basis.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace slipuq {

// Observations snapped onto the surrogate output time base. For gauge j,
// eta[j][k] is compared against surrogate output column columns[j][k].
struct ObservationSet {
  std::vector<std::string> gauge_ids;
  std::vector<std::vector<std::size_t>> columns;
  std::vector<std::vector<double>> eta;
  std::size_t dropped = 0;  // observations outside the snapping tolerance

  std::size_t num_gauges() const { return gauge_ids.size(); }
  std::size_t num_points() const;
};

// Nearest-neighbour snapping of each observed sample onto `times` with a
// tolerance of half the cadence. `gauge_ids` and `times` describe the
// surrogate outputs, whose labels must use gauge = position in `gauge_ids`
// and time_index = position in `times`. Throws IntegrityError for an
// observed gauge the surrogate does not cover.
ObservationSet align_observations(const std::vector<GaugeRecord>& observed,
                                  const std::vector<std::string>& gauge_ids,
                                  const std::vector<double>& times,
                                  const std::vector<OutputLabel>& labels);

struct PosteriorState {
  std::vector<double> slips;      // m
  std::vector<double> variances;  // m^2, one per observed gauge
};

// Uniform prior on slips, Jeffreys prior on each variance.
double log_prior(const PosteriorState& state, const SlipBounds& bounds);

// Gaussian likelihood with per-gauge variance. The state must be in support.
double log_likelihood(const PosteriorState& state, const ObservationSet& obs,
                      const PCExpansion& surrogate, const SlipBounds& bounds);

double log_posterior(const PosteriorState& state, const ObservationSet& obs,
                     const PCExpansion& surrogate, const SlipBounds& bounds);

// Posterior with the surrogate restricted to the observed columns, so one
// evaluation costs a basis evaluation plus one small matrix-vector product.
class PosteriorModel {
 public:
  PosteriorModel(const PCExpansion& surrogate, ObservationSet obs,
                 SlipBounds bounds);

  std::size_t num_slips() const { return static_cast<std::size_t>(basis_.dim()); }
  std::size_t num_gauges() const { return obs_.num_gauges(); }
  std::size_t num_params() const { return num_slips() + num_gauges(); }
  const ObservationSet& observations() const { return obs_; }
  const SlipBounds& bounds() const { return bounds_; }

  // Surrogate prediction at the observed columns, concatenated per gauge.
  Eigen::VectorXd predict(std::span<const double> slips) const;
  // Per-gauge mean squared residual at the given slips.
  std::vector<double> mean_squared_residual(std::span<const double> slips) const;

  double log_prior(const PosteriorState& state) const;
  double log_likelihood(const PosteriorState& state) const;
  double log_posterior(const PosteriorState& state) const;

  // Sampler coordinates u = (slips, log variances). Includes the log-variance
  // Jacobian, so the Jeffreys prior is flat in u.
  double log_target(const Eigen::VectorXd& u) const;
  static Eigen::VectorXd to_sampler(const PosteriorState& state);
  PosteriorState from_sampler(const Eigen::VectorXd& u) const;

 private:
  PCBasis basis_;
  ObservationSet obs_;
  SlipBounds bounds_;
  Eigen::MatrixXd coeffs_;  // basis terms x observed points
  Eigen::VectorXd eta_;
  std::vector<std::size_t> offsets_;  // gauge j occupies [offsets_[j], offsets_[j+1])
};

struct AdaptiveMetropolisOptions {
  long iterations = 100000;
  long adapt_start = 1000;     // non-adaptive phase length
  double epsilon = 1e-10;
  double scale = 0.0;          // s_d; 0 selects 2.4^2 / d
  Eigen::VectorXd initial_step;  // proposal std devs of the non-adaptive phase
  bool adapt = true;           // false keeps the diagonal proposal throughout
  long checkpoint_every = 10000;
};

struct PosteriorChain {
  Eigen::MatrixXd samples;  // iterations x parameters
  std::vector<double> log_target;
  std::vector<std::uint8_t> accepted;
  long acceptance_count = 0;
  std::vector<std::pair<long, Eigen::MatrixXd>> covariance_checkpoints;
  std::uint64_t seed = 0;

  long size() const { return static_cast<long>(samples.rows()); }
  double acceptance_rate() const;
};

using LogDensity = std::function<double(const Eigen::VectorXd&)>;

// Haario-style adaptive random-walk Metropolis. Throws NumericError when no
// proposal is accepted during the non-adaptive phase or the proposal
// covariance loses positive definiteness; ConfigError on a bad init.
PosteriorChain adaptive_metropolis(const LogDensity& log_target,
                                   const Eigen::VectorXd& init,
                                   std::uint64_t seed,
                                   const AdaptiveMetropolisOptions& opts);

// Drops the first `fraction` of the chain.
PosteriorChain discard_burn_in(const PosteriorChain& chain, double fraction);

std::vector<double> running_mean(const PosteriorChain& chain, std::size_t param);

struct DensityGrid {
  std::vector<double> x;
  std::vector<double> density;
  double bandwidth = 0.0;
  bool degenerate = false;  // all samples equal: one grid point, unit mass

  double integral() const;  // trapezoid rule; 1 for a degenerate grid
};

struct KdeOptions {
  std::optional<double> bandwidth;  // default: Silverman's rule
  int grid_points = 512;
  double padding = 4.0;             // grid extends this many bandwidths past the data
};

// Gaussian kernel density. Throws std::invalid_argument for < 2 samples.
DensityGrid kde(std::span<const double> samples, const KdeOptions& opts = {});

double silverman_bandwidth(std::span<const double> samples);

struct MapEstimate {
  double value = 0.0;
  bool tied = false;  // another grid point attains the same maximum
};

// Argmax over the grid; ties resolve to the lowest grid value and are flagged.
MapEstimate map_estimate(const DensityGrid& density);

// Shortest interval containing ceil(mass * n) of the samples.
std::pair<double, double> hpd_interval(std::span<const double> samples,
                                       double mass = 0.95);

struct SeismicMoment {
  double moment = 0.0;     // N m
  double magnitude = 0.0;  // M_w
};

double moment_magnitude(double moment);

// M_o = sum_i mu A_i s_i. Throws std::invalid_argument on mu <= 0 or a
// non-positive area, NumericError when M_o <= 0.
SeismicMoment seismic_moment(std::span<const double> slips, double rigidity,
                             std::span<const double> areas);

struct ParameterSummary {
  std::string name;
  double map = 0.0;
  double mean = 0.0;
  double hpd_lo = 0.0;
  double hpd_hi = 0.0;
  bool map_tied = false;
};

// Per-parameter summary of a (burned-in) chain. Variance parameters are
// summarized in m^2.
std::vector<ParameterSummary> summarize(const PosteriorChain& chain,
                                        const PosteriorModel& model,
                                        double hpd_mass = 0.95);

}  // namespace slipuq
