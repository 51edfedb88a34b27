#include "slipuq/diagnostics.hpp"
#include "slipuq/error.hpp"
#include "slipuq/inference.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

using namespace slipuq;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Two-slip surrogate with two gauges and three times per gauge:
// G(g, t)(xi) = a_gt + b_gt xi_1 + c_gt xi_2.
struct Fixture {
  PCExpansion exp;
  std::vector<std::string> gauges = {"A", "B"};
  std::vector<double> times = {0.0, 60.0, 120.0};
  SlipBounds bounds{0.0, 30.0};

  Fixture() {
    const PCBasis basis(2, 1);
    Eigen::MatrixXd c(3, 6);
    c << 0.1, 0.2, 0.3, -0.1, 0.0, 0.5,
         0.4, -0.3, 0.2, 0.1, 0.6, -0.2,
         -0.2, 0.1, 0.5, 0.3, -0.4, 0.2;
    std::vector<OutputLabel> labels;
    for (int g = 0; g < 2; ++g) {
      for (int t = 0; t < 3; ++t) labels.push_back({g, t});
    }
    exp = PCExpansion(basis, c, labels);
  }

  ObservationSet observations(const std::vector<double>& slips, double noise,
                              std::uint64_t seed) const {
    const auto xi = slip_to_canonical(slips, bounds);
    const Eigen::VectorXd g = pce_eval(exp, xi);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, noise);
    std::vector<GaugeRecord> recs;
    for (int j = 0; j < 2; ++j) {
      GaugeRecord r{gauges[j], times, {}};
      for (int t = 0; t < 3; ++t) r.eta.push_back(g[3 * j + t] + n(rng));
      recs.push_back(r);
    }
    return align_observations(recs, gauges, times, exp.labels());
  }
};

std::vector<double> normal_samples(std::size_t n, std::uint64_t seed, double mu = 0.0,
                                   double sigma = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(mu, sigma);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

std::vector<double> column(const PosteriorChain& c, Eigen::Index j) {
  std::vector<double> v(static_cast<std::size_t>(c.size()));
  for (long t = 0; t < c.size(); ++t) v[static_cast<std::size_t>(t)] = c.samples(t, j);
  return v;
}

}  // namespace

TEST(LogPrior, Examples) {
  const SlipBounds b{0.0, 30.0};
  PosteriorState s{{1, 2, 3, 4, 5, 6}, {1, 1, 1, 1}};
  EXPECT_NEAR(log_prior(s, b), 6.0 * std::log(1.0 / 30.0), 1e-14);
  s.slips[0] = -0.1;
  EXPECT_EQ(log_prior(s, b), kNegInf);
  s.slips[0] = 1.0;
  s.variances[1] = 0.0;
  EXPECT_EQ(log_prior(s, b), kNegInf);
  s.variances = {2.0, 0.5, 1.0, 1.0};
  EXPECT_NEAR(log_prior(s, b), 6.0 * std::log(1.0 / 30.0) - std::log(2.0) - std::log(0.5), 1e-14);
}

TEST(LogLikelihood, SinglePointExamples) {
  const PCBasis basis(1, 0);
  Eigen::MatrixXd c(1, 1);
  c(0, 0) = 0.7;
  const PCExpansion exp(basis, c, {{0, 0}});
  ObservationSet obs{{"A"}, {{0}}, {{0.7}}, 0};
  const SlipBounds b{0.0, 30.0};
  PosteriorState s{{10.0}, {1.0}};
  const double base = log_likelihood(s, obs, exp, b);
  EXPECT_NEAR(base, -0.5 * std::log(2.0 * std::numbers::pi), 1e-15);
  s.variances[0] = 2.0;
  EXPECT_NEAR(log_likelihood(s, obs, exp, b), base - 0.5 * std::log(2.0), 1e-15);
}

TEST(LogLikelihood, NaiveProductOracle) {
  Fixture f;
  const auto obs = f.observations({12.0, 4.0}, 0.1, 3);
  const PosteriorState s{{7.5, 21.0}, {0.02, 0.05}};
  const auto xi = slip_to_canonical(s.slips, f.bounds);
  double product = 1.0;
  for (std::size_t j = 0; j < 2; ++j) {
    for (std::size_t k = 0; k < obs.eta[j].size(); ++k) {
      double g = f.exp.coefficients()(0, obs.columns[j][k]);
      g += f.exp.coefficients()(1, obs.columns[j][k]) * xi[0];
      g += f.exp.coefficients()(2, obs.columns[j][k]) * xi[1];
      const double r = g - obs.eta[j][k];
      product *= std::exp(-r * r / (2 * s.variances[j])) /
                 std::sqrt(2 * std::numbers::pi * s.variances[j]);
    }
  }
  EXPECT_NEAR(log_likelihood(s, obs, f.exp, f.bounds), std::log(product), 1e-12);
  const PosteriorModel model(f.exp, obs, f.bounds);
  EXPECT_NEAR(model.log_likelihood(s), std::log(product), 1e-12);
  EXPECT_NEAR(model.log_posterior(s), log_posterior(s, obs, f.exp, f.bounds), 1e-12);
  EXPECT_NEAR(model.log_posterior(s), model.log_prior(s) + model.log_likelihood(s), 1e-12);
}

TEST(LogPosterior, MonotoneInResidual) {
  Fixture f;
  const std::vector<double> truth = {12.0, 4.0};
  const auto obs = f.observations(truth, 0.0, 1);
  const PosteriorModel model(f.exp, obs, f.bounds);
  double prev = model.log_posterior({truth, {0.01, 0.01}});
  for (double off : {0.5, 1.0, 2.0, 4.0}) {
    const double lp = model.log_posterior({{truth[0] + off, truth[1]}, {0.01, 0.01}});
    EXPECT_LT(lp, prev);
    prev = lp;
  }
  EXPECT_EQ(model.log_posterior({{-1.0, 4.0}, {0.01, 0.01}}), kNegInf);
}

TEST(LogLikelihood, VarianceStationaryAtMeanSquaredResidual) {
  Fixture f;
  const auto obs = f.observations({12.0, 4.0}, 0.1, 5);
  const PosteriorModel model(f.exp, obs, f.bounds);
  const std::vector<double> slips = {14.0, 3.0};
  const auto msr = model.mean_squared_residual(slips);
  auto ll = [&](double v0) { return model.log_likelihood({slips, {v0, msr[1]}}); };
  const double h = 1e-6 * msr[0];
  const double deriv = (ll(msr[0] + h) - ll(msr[0] - h)) / (2 * h);
  EXPECT_NEAR(deriv * msr[0], 0.0, 1e-6);
  EXPECT_GT(ll(0.9 * msr[0] + h) - ll(0.9 * msr[0] - h), 0.0);
  EXPECT_LT(ll(1.1 * msr[0] + h) - ll(1.1 * msr[0] - h), 0.0);
}

TEST(PosteriorModel, SamplerCoordinates) {
  Fixture f;
  const PosteriorModel model(f.exp, f.observations({12.0, 4.0}, 0.1, 1), f.bounds);
  const PosteriorState s{{3.0, 9.0}, {0.5, 2.0}};
  const Eigen::VectorXd u = PosteriorModel::to_sampler(s);
  EXPECT_NEAR(u[2], std::log(0.5), 1e-15);
  const auto back = model.from_sampler(u);
  EXPECT_EQ(back.slips, s.slips);
  EXPECT_NEAR(back.variances[1], 2.0, 1e-14);
  // Jacobian of v = exp(u) cancels the Jeffreys factor.
  EXPECT_NEAR(model.log_target(u), model.log_posterior(s) + u[2] + u[3], 1e-12);
  Eigen::VectorXd out = u;
  out[0] = 31.0;
  EXPECT_EQ(model.log_target(out), kNegInf);
  EXPECT_THROW(model.log_prior({{1.0}, {1.0, 1.0}}), DimensionMismatch);
}

TEST(AlignObservations, SnapsAndDrops) {
  Fixture f;
  std::vector<GaugeRecord> recs = {
      {"B", {1.0, 29.0, 31.0, 59.0, 61.0, 200.0}, {1, 2, 3, 4, 5, 6}}};
  const auto obs = align_observations(recs, f.gauges, f.times, f.exp.labels());
  ASSERT_EQ(obs.num_gauges(), 1u);
  EXPECT_EQ(obs.gauge_ids[0], "B");
  // Closest sample wins per time: 1 s for t0, 59 s for t60 (61 s ties and
  // loses). 200 s is beyond the half-cadence tolerance.
  EXPECT_EQ(obs.columns[0], (std::vector<std::size_t>{3, 4}));
  EXPECT_EQ(obs.eta[0], (std::vector<double>{1.0, 4.0}));
  EXPECT_EQ(obs.dropped, 4u);
  recs.push_back({"Z", {0.0}, {0.0}});
  EXPECT_THROW(align_observations(recs, f.gauges, f.times, f.exp.labels()), IntegrityError);
}

TEST(AdaptiveMetropolis, TwoDimensionalNormal) {
  // Correlated target: unit variances, correlation 0.6.
  Eigen::Matrix2d cov;
  cov << 1.0, 0.6, 0.6, 1.0;
  const Eigen::Matrix2d prec = cov.inverse();
  const LogDensity target = [&](const Eigen::VectorXd& x) { return -0.5 * x.dot(prec * x); };
  AdaptiveMetropolisOptions opts;
  opts.iterations = 100000;
  const auto chain = discard_burn_in(adaptive_metropolis(target, Eigen::Vector2d(1.0, -1.0), 7, opts), 0.1);
  const Eigen::RowVector2d mean = chain.samples.colwise().mean();
  const Eigen::MatrixXd centred = chain.samples.rowwise() - mean;
  const Eigen::Matrix2d emp = centred.transpose() * centred / static_cast<double>(chain.size() - 1);
  EXPECT_NEAR(mean[0], 0.0, 0.05);
  EXPECT_NEAR(mean[1], 0.0, 0.05);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) EXPECT_NEAR(emp(i, j), cov(i, j), 0.1 * std::abs(cov(i, j)));
  }
  const double rate = chain.acceptance_rate();
  EXPECT_GT(rate, 0.2);
  EXPECT_LT(rate, 0.8);
}

TEST(AdaptiveMetropolis, SeededDeterminism) {
  const LogDensity target = [](const Eigen::VectorXd& x) { return -0.5 * x.squaredNorm(); };
  AdaptiveMetropolisOptions opts;
  opts.iterations = 5000;
  const auto a = adaptive_metropolis(target, Eigen::Vector3d::Zero(), 99, opts);
  const auto b = adaptive_metropolis(target, Eigen::Vector3d::Zero(), 99, opts);
  const auto c = adaptive_metropolis(target, Eigen::Vector3d::Zero(), 100, opts);
  EXPECT_EQ(a.samples, b.samples);
  EXPECT_EQ(a.log_target, b.log_target);
  EXPECT_EQ(a.accepted, b.accepted);
  EXPECT_NE(a.samples, c.samples);
  EXPECT_EQ(a.covariance_checkpoints.size(), 0u);
  opts.checkpoint_every = 1000;
  EXPECT_EQ(adaptive_metropolis(target, Eigen::Vector3d::Zero(), 99, opts).covariance_checkpoints.size(), 5u);
}

TEST(AdaptiveMetropolis, AbortsWithoutAcceptance) {
  const Eigen::VectorXd init = Eigen::VectorXd::Zero(2);
  const LogDensity spike = [&](const Eigen::VectorXd& x) { return x == init ? 0.0 : kNegInf; };
  AdaptiveMetropolisOptions opts;
  opts.iterations = 2000;
  EXPECT_THROW(adaptive_metropolis(spike, init, 1, opts), NumericError);
  const LogDensity outside = [](const Eigen::VectorXd&) { return kNegInf; };
  EXPECT_THROW(adaptive_metropolis(outside, init, 1, opts), ConfigError);
}

TEST(AdaptiveMetropolisProperty, FixedProposalStationaryKs) {
  // Mixture target; thinned chain compared against exact draws.
  const LogDensity target = [](const Eigen::VectorXd& x) {
    const double a = std::exp(-0.5 * (x[0] + 1.0) * (x[0] + 1.0));
    const double b = std::exp(-0.5 * (x[0] - 2.0) * (x[0] - 2.0) / 0.25) / 0.5;
    return std::log(a + b);
  };
  AdaptiveMetropolisOptions opts;
  opts.iterations = 100000;
  opts.adapt = false;
  opts.initial_step = Eigen::VectorXd::Constant(1, 2.0);
  const auto chain = adaptive_metropolis(target, Eigen::VectorXd::Zero(1), 11, opts);
  std::vector<double> thinned;
  for (long t = 1000; t < chain.size(); t += 20) thinned.push_back(chain.samples(t, 0));
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> exact(thinned.size());
  for (double& x : exact) x = u(rng) < 0.5 ? -1.0 + n(rng) : 2.0 + 0.5 * n(rng);
  const double d = ks_statistic(thinned, exact);
  EXPECT_GT(ks_p_value(d, thinned.size(), exact.size()), 0.01) << "D = " << d;
}

TEST(AdaptiveMetropolisProperty, ConjugateVarianceConcentration) {
  // Slips held at the truth: sigma^2 | data is inverse gamma(n/2, S/2) under
  // the Jeffreys prior, with mean S / (n - 2).
  const PCBasis basis(1, 0);
  const int n = 200;
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(1, n);
  std::vector<OutputLabel> labels;
  std::vector<double> times;
  for (int t = 0; t < n; ++t) {
    labels.push_back({0, t});
    times.push_back(60.0 * t);
  }
  const PCExpansion exp(basis, c, labels);
  GaugeRecord rec{"A", times, normal_samples(n, 4, 0.0, 0.3)};
  const auto obs = align_observations({rec}, {"A"}, times, labels);
  const PosteriorModel model(exp, obs, SlipBounds{0.0, 30.0});
  const double s = model.mean_squared_residual(std::vector<double>{15.0})[0] * n;
  const LogDensity target = [&](const Eigen::VectorXd& u) {
    Eigen::VectorXd full(2);
    full << 15.0, u[0];
    return model.log_target(full);
  };
  AdaptiveMetropolisOptions opts;
  opts.iterations = 60000;
  opts.initial_step = Eigen::VectorXd::Constant(1, 0.1);
  const auto chain = discard_burn_in(
      adaptive_metropolis(target, Eigen::VectorXd::Constant(1, std::log(s / n)), 5, opts), 0.2);
  double mean = 0.0;
  for (long t = 0; t < chain.size(); ++t) mean += std::exp(chain.samples(t, 0));
  mean /= static_cast<double>(chain.size());
  const double expected = s / (n - 2);
  const double sd = expected * std::sqrt(2.0 / (n - 4));
  EXPECT_NEAR(mean, expected, 0.25 * sd);
}

TEST(RunningMean, Oracles) {
  PosteriorChain c;
  c.samples.resize(6, 2);
  c.samples.col(0).setConstant(3.0);
  c.samples.col(1) << 1, -1, 1, -1, 1, -1;
  for (double v : running_mean(c, 0)) EXPECT_EQ(v, 3.0);
  const auto alt = running_mean(c, 1);
  EXPECT_DOUBLE_EQ(alt[5], 0.0);
  EXPECT_DOUBLE_EQ(alt[4], 0.2);
  const auto x = normal_samples(1000, 8);
  PosteriorChain r;
  r.samples = Eigen::Map<const Eigen::VectorXd>(x.data(), 1000);
  const auto rm = running_mean(r, 0);
  double prefix = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    prefix += x[i];
    EXPECT_NEAR(rm[i], prefix / static_cast<double>(i + 1), 1e-12);
  }
  EXPECT_THROW(running_mean(c, 2), std::out_of_range);
}

TEST(BurnIn, DropsLeadingFraction) {
  PosteriorChain c;
  c.samples = Eigen::VectorXd::LinSpaced(10, 0, 9);
  c.log_target.assign(10, 0.0);
  c.accepted = {1, 0, 1, 1, 0, 0, 1, 0, 1, 1};
  c.acceptance_count = 6;
  const auto b = discard_burn_in(c, 0.2);
  ASSERT_EQ(b.size(), 8);
  EXPECT_EQ(b.samples(0, 0), 2.0);
  EXPECT_EQ(b.acceptance_count, 5);
  EXPECT_THROW(discard_burn_in(c, 1.0), std::invalid_argument);
}

TEST(BurnInProperty, MapStableOnConvergedChain) {
  const LogDensity target = [](const Eigen::VectorXd& x) { return -0.5 * x.squaredNorm(); };
  AdaptiveMetropolisOptions opts;
  opts.iterations = 200000;
  const auto chain = adaptive_metropolis(target, Eigen::VectorXd::Zero(1), 21, opts);
  const auto full = kde(column(chain, 0));
  const auto burned = kde(column(discard_burn_in(chain, 0.2), 0));
  const double spacing = burned.x[1] - burned.x[0];
  EXPECT_LT(std::abs(map_estimate(full).value - map_estimate(burned).value), spacing + (full.x[1] - full.x[0]));
}

TEST(Kde, IntegralAndMode) {
  const auto x = normal_samples(20000, 1, 2.0, 0.5);
  const auto d = kde(x);
  EXPECT_EQ(d.x.size(), 512u);
  EXPECT_NEAR(d.integral(), 1.0, 1e-3);
  EXPECT_NEAR(map_estimate(d).value, 2.0, 0.05);
  EXPECT_NEAR(d.bandwidth, silverman_bandwidth(x), 1e-12);
}

TEST(Kde, SymmetricSamplesGiveSymmetricDensity) {
  auto x = normal_samples(500, 2);
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i) x.push_back(-x[i]);
  const auto d = kde(x);
  for (std::size_t i = 0; i < d.x.size(); ++i) {
    EXPECT_NEAR(d.x[i], -d.x[d.x.size() - 1 - i], 1e-12);
    EXPECT_NEAR(d.density[i], d.density[d.x.size() - 1 - i], 1e-12);
  }
}

TEST(Kde, DegenerateAndErrors) {
  const std::vector<double> same(10, 4.2);
  const auto d = kde(same);
  EXPECT_TRUE(d.degenerate);
  EXPECT_EQ(map_estimate(d).value, 4.2);
  EXPECT_EQ(d.integral(), 1.0);
  EXPECT_THROW(kde(std::vector<double>{1.0}), std::invalid_argument);
}

TEST(Kde, SilvermanFormula) {
  const std::vector<double> x = {1, 2, 3, 4, 5, 6, 7, 8};
  const double sd = std::sqrt(42.0 / 7.0);
  const double iqr = 6.25 - 2.75;
  EXPECT_NEAR(silverman_bandwidth(x), 0.9 * std::min(sd, iqr / 1.34) * std::pow(8.0, -0.2), 1e-14);
}

TEST(MapEstimate, TiesResolveLowAndRescalingInvariant) {
  DensityGrid g;
  g.x = {0.0, 1.0, 2.0, 3.0};
  g.density = {0.1, 0.4, 0.2, 0.4};
  const auto m = map_estimate(g);
  EXPECT_EQ(m.value, 1.0);
  EXPECT_TRUE(m.tied);
  for (double k : {1e-8, 3.0, 1e6}) {
    DensityGrid s = g;
    for (double& v : s.density) v *= k;
    EXPECT_EQ(map_estimate(s).value, m.value);
  }
  g.density = {0.1, 0.5, 0.2, 0.4};
  EXPECT_FALSE(map_estimate(g).tied);
}

TEST(Hpd, NormalSamples) {
  const auto x = normal_samples(200000, 3);
  const auto [lo, hi] = hpd_interval(x, 0.95);
  // The width is stationary at the optimum, so it is far less noisy than
  // the endpoints.
  EXPECT_NEAR(hi - lo, 2 * 1.959964, 0.02);
  EXPECT_NEAR(lo, -1.96, 0.08);
  EXPECT_NEAR(hi, 1.96, 0.08);
}

TEST(Hpd, ScanOracleAndSkewedShorterThanEqualTail) {
  std::mt19937_64 rng(4);
  std::exponential_distribution<double> e(1.0);
  std::vector<double> x(400);
  for (double& v : x) v = e(rng);
  const auto [lo, hi] = hpd_interval(x, 0.9);
  std::vector<double> s = x;
  std::sort(s.begin(), s.end());
  const std::size_t k = 360;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + k <= s.size(); ++i) best = std::min(best, s[i + k - 1] - s[i]);
  EXPECT_DOUBLE_EQ(hi - lo, best);
  const auto count = std::count_if(x.begin(), x.end(), [&](double v) { return v >= lo && v <= hi; });
  EXPECT_GE(count, 360);
  EXPECT_LT(hi - lo, s[379] - s[20]);  // 5% .. 95% equal-tail interval
}

TEST(Hpd, ConstantAndErrors) {
  const std::vector<double> c(5, 2.0);
  EXPECT_EQ(hpd_interval(c), (std::pair<double, double>{2.0, 2.0}));
  EXPECT_THROW(hpd_interval(std::vector<double>{}), std::invalid_argument);
  EXPECT_THROW(hpd_interval(c, 0.0), std::invalid_argument);
}

TEST(SeismicMoment, PublishedMagnitudes) {
  EXPECT_NEAR(moment_magnitude(3.43900e22), 8.99095, 1e-4);
  EXPECT_NEAR(moment_magnitude(3.63595e22), 9.00708, 1e-4);
  EXPECT_NEAR(moment_magnitude(std::pow(10.0, 9.05)), 0.0, 1e-12);
  EXPECT_THROW(moment_magnitude(0.0), NumericError);
}

TEST(SeismicMoment, SumOverSubfaults) {
  const std::vector<double> s = {1.0, 2.0}, a = {1e10, 2e10};
  const auto m = seismic_moment(s, 4e10, a);
  EXPECT_DOUBLE_EQ(m.moment, 4e10 * (1e10 + 4e10));
  EXPECT_DOUBLE_EQ(m.magnitude, moment_magnitude(m.moment));
  EXPECT_THROW(seismic_moment(s, 0.0, a), std::invalid_argument);
  EXPECT_THROW(seismic_moment(s, 4e10, std::vector<double>{1e10}), DimensionMismatch);
  EXPECT_THROW(seismic_moment(std::vector<double>{0.0, 0.0}, 4e10, a), NumericError);
}

TEST(Summarize, NamesAndVarianceUnits) {
  Fixture f;
  const PosteriorModel model(f.exp, f.observations({12.0, 4.0}, 0.05, 2), f.bounds);
  Eigen::VectorXd init(4);
  init << 15.0, 15.0, std::log(0.01), std::log(0.01);
  AdaptiveMetropolisOptions opts;
  opts.iterations = 20000;
  opts.initial_step = Eigen::Vector4d(3.0, 3.0, 1.0, 1.0);
  const auto chain = discard_burn_in(
      adaptive_metropolis([&](const Eigen::VectorXd& u) { return model.log_target(u); }, init, 3, opts), 0.2);
  const auto sum = summarize(chain, model);
  ASSERT_EQ(sum.size(), 4u);
  EXPECT_EQ(sum[0].name, "s1");
  EXPECT_EQ(sum[1].name, "s2");
  EXPECT_EQ(sum[2].name, "sigma2_A");
  EXPECT_EQ(sum[3].name, "sigma2_B");
  for (const auto& p : sum) EXPECT_LE(p.hpd_lo, p.hpd_hi);
  EXPECT_GT(sum[2].mean, 0.0);
  double mean_var = 0.0;
  for (long t = 0; t < chain.size(); ++t) mean_var += std::exp(chain.samples(t, 2));
  EXPECT_NEAR(sum[2].mean, mean_var / static_cast<double>(chain.size()), 1e-12 * mean_var);
}
