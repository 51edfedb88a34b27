#include "slipuq/inference.hpp"

#include "slipuq/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace slipuq {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

bool slips_in_bounds(std::span<const double> s, const SlipBounds& b) {
  return std::all_of(s.begin(), s.end(),
                     [&](double v) { return v >= b.min && v <= b.max; });
}

void check_state_shape(const PosteriorState& state, std::size_t slips,
                       std::size_t gauges) {
  if (state.slips.size() != slips || state.variances.size() != gauges) {
    throw DimensionMismatch("posterior state has " +
                            std::to_string(state.slips.size()) + " slips and " +
                            std::to_string(state.variances.size()) +
                            " variances; expected " + std::to_string(slips) +
                            " and " + std::to_string(gauges));
  }
}

double gaussian_term(double sq_sum, std::size_t n, double var) {
  return -0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi * var) -
         sq_sum / (2.0 * var);
}

}  // namespace

std::size_t ObservationSet::num_points() const {
  std::size_t n = 0;
  for (const auto& e : eta) n += e.size();
  return n;
}

ObservationSet align_observations(const std::vector<GaugeRecord>& observed,
                                  const std::vector<std::string>& gauge_ids,
                                  const std::vector<double>& times,
                                  const std::vector<OutputLabel>& labels) {
  if (times.empty()) throw IntegrityError("surrogate has an empty time base");
  double cadence = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < times.size(); ++k) {
    cadence = std::min(cadence, times[k] - times[k - 1]);
  }
  if (!(cadence > 0.0)) throw IntegrityError("surrogate times not increasing");
  const double tol = std::isfinite(cadence) ? 0.5 * cadence * (1.0 + 1e-9) : 0.0;

  // (gauge, time) -> column
  std::vector<std::vector<long>> column_of(
      gauge_ids.size(), std::vector<long>(times.size(), -1));
  for (std::size_t c = 0; c < labels.size(); ++c) {
    const auto& l = labels[c];
    if (l.gauge < 0 || static_cast<std::size_t>(l.gauge) >= gauge_ids.size() ||
        l.time_index < 0 || static_cast<std::size_t>(l.time_index) >= times.size()) {
      throw IntegrityError("surrogate label out of range at column " +
                           std::to_string(c));
    }
    column_of[l.gauge][l.time_index] = static_cast<long>(c);
  }

  ObservationSet out;
  for (std::size_t g = 0; g < gauge_ids.size(); ++g) {
    auto rec = std::find_if(observed.begin(), observed.end(),
                            [&](const GaugeRecord& r) { return r.id == gauge_ids[g]; });
    if (rec == observed.end()) continue;
    if (rec->times.size() != rec->eta.size()) {
      throw IntegrityError("gauge " + rec->id + ": times/eta length mismatch");
    }
    // Keep the closest observation per surrogate time.
    std::vector<double> best_dist(times.size(), std::numeric_limits<double>::infinity());
    std::vector<double> best_eta(times.size(), 0.0);
    for (std::size_t i = 0; i < rec->times.size(); ++i) {
      const double t = rec->times[i];
      auto it = std::lower_bound(times.begin(), times.end(), t);
      std::size_t k = static_cast<std::size_t>(it - times.begin());
      if (k == times.size() ||
          (k > 0 && std::abs(times[k - 1] - t) <= std::abs(times[k] - t))) {
        --k;
      }
      const double d = std::abs(times[k] - t);
      if (!(d <= tol) || column_of[g][k] < 0) {
        ++out.dropped;
        continue;
      }
      if (d < best_dist[k]) {
        if (std::isfinite(best_dist[k])) ++out.dropped;
        best_dist[k] = d;
        best_eta[k] = rec->eta[i];
      } else {
        ++out.dropped;
      }
    }
    std::vector<std::size_t> cols;
    std::vector<double> vals;
    for (std::size_t k = 0; k < times.size(); ++k) {
      if (std::isfinite(best_dist[k])) {
        cols.push_back(static_cast<std::size_t>(column_of[g][k]));
        vals.push_back(best_eta[k]);
      }
    }
    out.gauge_ids.push_back(gauge_ids[g]);
    out.columns.push_back(std::move(cols));
    out.eta.push_back(std::move(vals));
  }
  for (const auto& r : observed) {
    if (std::find(gauge_ids.begin(), gauge_ids.end(), r.id) == gauge_ids.end()) {
      throw IntegrityError("observed gauge '" + r.id +
                           "' is not an output of the surrogate");
    }
  }
  return out;
}

double log_prior(const PosteriorState& state, const SlipBounds& bounds) {
  if (!slips_in_bounds(state.slips, bounds)) return kNegInf;
  double lp = -static_cast<double>(state.slips.size()) *
              std::log(bounds.max - bounds.min);
  for (double v : state.variances) {
    if (!(v > 0.0) || !std::isfinite(v)) return kNegInf;
    lp -= std::log(v);
  }
  return lp;
}

double log_likelihood(const PosteriorState& state, const ObservationSet& obs,
                      const PCExpansion& surrogate, const SlipBounds& bounds) {
  check_state_shape(state, static_cast<std::size_t>(surrogate.basis().dim()),
                    obs.num_gauges());
  const auto xi = slip_to_canonical(state.slips, bounds);
  const Eigen::VectorXd g = pce_eval(surrogate, xi);
  double ll = 0.0;
  for (std::size_t j = 0; j < obs.num_gauges(); ++j) {
    double sq = 0.0;
    for (std::size_t k = 0; k < obs.eta[j].size(); ++k) {
      const std::size_t c = obs.columns[j][k];
      if (c >= static_cast<std::size_t>(g.size())) {
        throw IntegrityError("observation column beyond surrogate outputs");
      }
      const double r = g[static_cast<Eigen::Index>(c)] - obs.eta[j][k];
      sq += r * r;
    }
    ll += gaussian_term(sq, obs.eta[j].size(), state.variances[j]);
  }
  return ll;
}

double log_posterior(const PosteriorState& state, const ObservationSet& obs,
                     const PCExpansion& surrogate, const SlipBounds& bounds) {
  const double lp = log_prior(state, bounds);
  if (lp == kNegInf) return kNegInf;
  return lp + log_likelihood(state, obs, surrogate, bounds);
}

PosteriorModel::PosteriorModel(const PCExpansion& surrogate, ObservationSet obs,
                               SlipBounds bounds)
    : basis_(surrogate.basis()), obs_(std::move(obs)), bounds_(bounds) {
  if (obs_.columns.size() != obs_.num_gauges() || obs_.eta.size() != obs_.num_gauges()) {
    throw IntegrityError("observation set is internally inconsistent");
  }
  const std::size_t n = obs_.num_points();
  coeffs_.resize(static_cast<Eigen::Index>(basis_.size()), static_cast<Eigen::Index>(n));
  eta_.resize(static_cast<Eigen::Index>(n));
  offsets_.assign(1, 0);
  Eigen::Index p = 0;
  for (std::size_t j = 0; j < obs_.num_gauges(); ++j) {
    if (obs_.columns[j].size() != obs_.eta[j].size()) {
      throw IntegrityError("gauge " + obs_.gauge_ids[j] + ": columns/eta mismatch");
    }
    for (std::size_t k = 0; k < obs_.eta[j].size(); ++k, ++p) {
      const std::size_t c = obs_.columns[j][k];
      if (c >= surrogate.num_outputs()) {
        throw IntegrityError("observation column beyond surrogate outputs");
      }
      coeffs_.col(p) = surrogate.coefficients().col(static_cast<Eigen::Index>(c));
      eta_[p] = obs_.eta[j][k];
    }
    offsets_.push_back(static_cast<std::size_t>(p));
  }
}

Eigen::VectorXd PosteriorModel::predict(std::span<const double> slips) const {
  if (slips.size() != num_slips()) throw DimensionMismatch("slip count mismatch");
  const auto xi = slip_to_canonical(slips, bounds_);
  const Eigen::VectorXd psi = basis_.evaluate(xi);
  return coeffs_.transpose() * psi;
}

std::vector<double> PosteriorModel::mean_squared_residual(
    std::span<const double> slips) const {
  const Eigen::VectorXd r = predict(slips) - eta_;
  std::vector<double> out(num_gauges(), 0.0);
  for (std::size_t j = 0; j < num_gauges(); ++j) {
    const auto a = static_cast<Eigen::Index>(offsets_[j]);
    const auto n = static_cast<Eigen::Index>(offsets_[j + 1] - offsets_[j]);
    if (n > 0) out[j] = r.segment(a, n).squaredNorm() / static_cast<double>(n);
  }
  return out;
}

double PosteriorModel::log_prior(const PosteriorState& state) const {
  check_state_shape(state, num_slips(), num_gauges());
  return slipuq::log_prior(state, bounds_);
}

double PosteriorModel::log_likelihood(const PosteriorState& state) const {
  check_state_shape(state, num_slips(), num_gauges());
  const Eigen::VectorXd r = predict(state.slips) - eta_;
  double ll = 0.0;
  for (std::size_t j = 0; j < num_gauges(); ++j) {
    const auto a = static_cast<Eigen::Index>(offsets_[j]);
    const auto n = static_cast<Eigen::Index>(offsets_[j + 1] - offsets_[j]);
    ll += gaussian_term(r.segment(a, n).squaredNorm(), static_cast<std::size_t>(n),
                        state.variances[j]);
  }
  return ll;
}

double PosteriorModel::log_posterior(const PosteriorState& state) const {
  const double lp = log_prior(state);
  if (lp == kNegInf) return kNegInf;
  return lp + log_likelihood(state);
}

Eigen::VectorXd PosteriorModel::to_sampler(const PosteriorState& state) {
  Eigen::VectorXd u(static_cast<Eigen::Index>(state.slips.size() + state.variances.size()));
  Eigen::Index i = 0;
  for (double s : state.slips) u[i++] = s;
  for (double v : state.variances) {
    if (!(v > 0.0)) throw ConfigError("variance must be positive");
    u[i++] = std::log(v);
  }
  return u;
}

PosteriorState PosteriorModel::from_sampler(const Eigen::VectorXd& u) const {
  if (static_cast<std::size_t>(u.size()) != num_params()) {
    throw DimensionMismatch("sampler vector length mismatch");
  }
  PosteriorState s;
  s.slips.assign(u.data(), u.data() + num_slips());
  for (std::size_t j = 0; j < num_gauges(); ++j) {
    s.variances.push_back(std::exp(u[static_cast<Eigen::Index>(num_slips() + j)]));
  }
  return s;
}

double PosteriorModel::log_target(const Eigen::VectorXd& u) const {
  const auto m = static_cast<Eigen::Index>(num_slips());
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!(u[i] >= bounds_.min && u[i] <= bounds_.max)) return kNegInf;
  }
  const PosteriorState s = from_sampler(u);
  const double lp = log_posterior(s);
  if (!std::isfinite(lp)) return kNegInf;
  return lp + u.tail(u.size() - m).sum();
}

double PosteriorChain::acceptance_rate() const {
  return samples.rows() == 0
             ? 0.0
             : static_cast<double>(acceptance_count) / static_cast<double>(samples.rows());
}

PosteriorChain adaptive_metropolis(const LogDensity& log_target,
                                   const Eigen::VectorXd& init,
                                   std::uint64_t seed,
                                   const AdaptiveMetropolisOptions& opts) {
  const Eigen::Index d = init.size();
  if (d == 0) throw ConfigError("empty initial state");
  if (opts.iterations <= 0) throw ConfigError("iterations must be positive");
  if (opts.adapt_start < 1) throw ConfigError("adapt_start must be >= 1");
  Eigen::VectorXd step = opts.initial_step.size() == 0
                             ? Eigen::VectorXd::Ones(d)
                             : opts.initial_step;
  if (step.size() != d || (step.array() <= 0.0).any()) {
    throw ConfigError("initial_step must have one positive entry per parameter");
  }
  double lp = log_target(init);
  if (!std::isfinite(lp)) throw ConfigError("initial state outside the support");
  const double sd = opts.scale > 0.0 ? opts.scale : 2.4 * 2.4 / static_cast<double>(d);

  PosteriorChain chain;
  chain.seed = seed;
  chain.samples.resize(opts.iterations, d);
  chain.log_target.resize(static_cast<std::size_t>(opts.iterations));
  chain.accepted.resize(static_cast<std::size_t>(opts.iterations));

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  Eigen::VectorXd x = init;
  Eigen::MatrixXd chol = step.asDiagonal();
  // Running mean and scatter of the history X_0 .. X_t.
  Eigen::VectorXd mean = x;
  Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(d, d);
  double count = 1.0;
  const Eigen::MatrixXd eps_i = sd * opts.epsilon * Eigen::MatrixXd::Identity(d, d);
  Eigen::VectorXd z(d);
  Eigen::LLT<Eigen::MatrixXd> llt(d);

  for (long t = 0; t < opts.iterations; ++t) {
    if (opts.adapt && t >= opts.adapt_start) {
      llt.compute(sd * scatter / (count - 1.0) + eps_i);
      if (llt.info() != Eigen::Success) {
        throw NumericError("proposal covariance not positive definite at iteration " +
                           std::to_string(t));
      }
      chol = llt.matrixL();
    }
    for (Eigen::Index i = 0; i < d; ++i) z[i] = normal(rng);
    const Eigen::VectorXd prop = x + chol * z;
    const double lp_prop = log_target(prop);
    const double u = uniform(rng);
    const bool accept = std::isfinite(lp_prop) && std::log(u) < lp_prop - lp;
    if (accept) {
      x = prop;
      lp = lp_prop;
      ++chain.acceptance_count;
    }
    chain.samples.row(t) = x.transpose();
    chain.log_target[static_cast<std::size_t>(t)] = lp;
    chain.accepted[static_cast<std::size_t>(t)] = accept ? 1 : 0;

    count += 1.0;
    const Eigen::VectorXd delta = x - mean;
    mean += delta / count;
    scatter.noalias() += delta * (x - mean).transpose();

    if (t + 1 == opts.adapt_start && chain.acceptance_count == 0) {
      std::ostringstream msg;
      msg << "no proposal accepted in the first " << opts.adapt_start
          << " iterations; log target at init " << lp << ", initial steps "
          << step.transpose();
      throw NumericError(msg.str());
    }
    if (opts.checkpoint_every > 0 && (t + 1) % opts.checkpoint_every == 0) {
      chain.covariance_checkpoints.emplace_back(t + 1, chol * chol.transpose());
    }
  }
  return chain;
}

PosteriorChain discard_burn_in(const PosteriorChain& chain, double fraction) {
  if (!(fraction >= 0.0 && fraction < 1.0)) {
    throw std::invalid_argument("burn-in fraction must be in [0, 1)");
  }
  const long n = chain.size();
  const long drop = static_cast<long>(std::floor(fraction * static_cast<double>(n)));
  PosteriorChain out;
  out.seed = chain.seed;
  out.samples = chain.samples.bottomRows(n - drop);
  out.log_target.assign(chain.log_target.begin() + drop, chain.log_target.end());
  out.accepted.assign(chain.accepted.begin() + drop, chain.accepted.end());
  out.acceptance_count = std::count(out.accepted.begin(), out.accepted.end(), 1);
  for (const auto& cp : chain.covariance_checkpoints) {
    if (cp.first > drop) out.covariance_checkpoints.push_back(cp);
  }
  return out;
}

std::vector<double> running_mean(const PosteriorChain& chain, std::size_t param) {
  if (param >= static_cast<std::size_t>(chain.samples.cols())) {
    throw std::out_of_range("parameter index out of range");
  }
  std::vector<double> out(static_cast<std::size_t>(chain.size()));
  double sum = 0.0;
  for (long t = 0; t < chain.size(); ++t) {
    sum += chain.samples(t, static_cast<Eigen::Index>(param));
    out[static_cast<std::size_t>(t)] = sum / static_cast<double>(t + 1);
  }
  return out;
}

double DensityGrid::integral() const {
  if (degenerate) return 1.0;
  double s = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) {
    s += 0.5 * (density[i] + density[i - 1]) * (x[i] - x[i - 1]);
  }
  return s;
}

namespace {

double quantile_sorted(const std::vector<double>& v, double q) {
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

double silverman_bandwidth(std::span<const double> samples) {
  const std::size_t n = samples.size();
  if (n < 2) throw std::invalid_argument("bandwidth needs at least 2 samples");
  double mean = 0.0;
  for (double v : samples) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : samples) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
  double spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0)) spread = sd;
  return 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
}

DensityGrid kde(std::span<const double> samples, const KdeOptions& opts) {
  const std::size_t n = samples.size();
  if (n < 2) throw std::invalid_argument("kde needs at least 2 samples");
  if (opts.grid_points < 2) throw std::invalid_argument("kde grid needs >= 2 points");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  DensityGrid out;
  if (sorted.front() == sorted.back()) {
    out.degenerate = true;
    out.x = {sorted.front()};
    out.density = {1.0};
    return out;
  }
  const double h = opts.bandwidth ? *opts.bandwidth : silverman_bandwidth(sorted);
  if (!(h > 0.0)) throw std::invalid_argument("kde bandwidth must be positive");
  out.bandwidth = h;
  const double lo = sorted.front() - opts.padding * h;
  const double hi = sorted.back() + opts.padding * h;
  const auto m = static_cast<std::size_t>(opts.grid_points);
  out.x.resize(m);
  out.density.assign(m, 0.0);
  const double norm = 1.0 / (static_cast<double>(n) * h * std::sqrt(2.0 * std::numbers::pi));
  constexpr double kCut = 9.0;  // exp(-40.5) is below double resolution of the sum
  for (std::size_t i = 0; i < m; ++i) {
    const double x = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(m - 1);
    out.x[i] = x;
    auto a = std::lower_bound(sorted.begin(), sorted.end(), x - kCut * h);
    auto b = std::upper_bound(a, sorted.end(), x + kCut * h);
    double s = 0.0;
    for (auto it = a; it != b; ++it) {
      const double u = (x - *it) / h;
      s += std::exp(-0.5 * u * u);
    }
    out.density[i] = s * norm;
  }
  return out;
}

MapEstimate map_estimate(const DensityGrid& density) {
  if (density.x.empty() || density.x.size() != density.density.size()) {
    throw std::invalid_argument("empty or inconsistent density grid");
  }
  std::size_t best = 0;
  bool tied = false;
  for (std::size_t i = 1; i < density.density.size(); ++i) {
    if (density.density[i] > density.density[best]) {
      best = i;
      tied = false;
    } else if (density.density[i] == density.density[best]) {
      tied = true;
    }
  }
  return {density.x[best], tied};
}

std::pair<double, double> hpd_interval(std::span<const double> samples, double mass) {
  if (samples.empty()) throw std::invalid_argument("hpd of empty sample");
  if (!(mass > 0.0 && mass <= 1.0)) throw std::invalid_argument("mass must be in (0, 1]");
  std::vector<double> v(samples.begin(), samples.end());
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  const std::size_t k = std::max<std::size_t>(
      1, std::min(n, static_cast<std::size_t>(std::ceil(mass * static_cast<double>(n) - 1e-9))));
  std::size_t best = 0;
  double width = v[k - 1] - v[0];
  for (std::size_t i = 1; i + k <= n; ++i) {
    const double w = v[i + k - 1] - v[i];
    if (w < width) {
      width = w;
      best = i;
    }
  }
  return {v[best], v[best + k - 1]};
}

double moment_magnitude(double moment) {
  if (!(moment > 0.0)) throw NumericError("seismic moment must be positive");
  return (std::log10(moment) - 9.05) / 1.5;
}

SeismicMoment seismic_moment(std::span<const double> slips, double rigidity,
                             std::span<const double> areas) {
  if (!(rigidity > 0.0)) throw std::invalid_argument("rigidity must be positive");
  if (areas.size() != slips.size()) throw DimensionMismatch("one area per slip required");
  double m0 = 0.0;
  for (std::size_t i = 0; i < slips.size(); ++i) {
    if (!(areas[i] > 0.0)) throw std::invalid_argument("subfault area must be positive");
    m0 += rigidity * areas[i] * slips[i];
  }
  return {m0, moment_magnitude(m0)};
}

std::vector<ParameterSummary> summarize(const PosteriorChain& chain,
                                        const PosteriorModel& model,
                                        double hpd_mass) {
  if (static_cast<std::size_t>(chain.samples.cols()) != model.num_params()) {
    throw DimensionMismatch("chain width does not match the posterior model");
  }
  if (chain.size() < 2) throw NumericError("chain too short to summarize");
  std::vector<ParameterSummary> out;
  const std::size_t m = model.num_slips();
  for (std::size_t p = 0; p < model.num_params(); ++p) {
    std::vector<double> v(static_cast<std::size_t>(chain.size()));
    for (long t = 0; t < chain.size(); ++t) {
      const double u = chain.samples(t, static_cast<Eigen::Index>(p));
      v[static_cast<std::size_t>(t)] = p < m ? u : std::exp(u);
    }
    ParameterSummary s;
    s.name = p < m ? "s" + std::to_string(p + 1)
                   : "sigma2_" + model.observations().gauge_ids[p - m];
    const auto map = map_estimate(kde(v));
    s.map = map.value;
    s.map_tied = map.tied;
    double sum = 0.0;
    for (double x : v) sum += x;
    s.mean = sum / static_cast<double>(v.size());
    std::tie(s.hpd_lo, s.hpd_hi) = hpd_interval(v, hpd_mass);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace slipuq
