#include "slipuq/forward_swe.hpp"

#include "slipuq/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace slipuq {

namespace {

constexpr double kDryDepth = 1e-6;

bool inside(const ModelConfig& cfg, double x, double y) {
  return x >= 0.0 && x <= cfg.length_x_km && y >= 0.0 && y <= cfg.length_y_km;
}

// Cosine taper: 1 inside [a, b], falls to 0 over `w` outside.
double taper_1d(double x, double a, double b, double w) {
  double d = 0.0;
  if (x < a) d = a - x;
  else if (x > b) d = x - b;
  if (d <= 0.0) return 1.0;
  if (w <= 0.0 || d >= w) return 0.0;
  return 0.5 * (1.0 + std::cos(std::numbers::pi * d / w));
}

}  // namespace

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("model config: " + msg); };
  if (nx < 8 || ny < 8) fail("nx and ny must be >= 8");
  if (!(length_x_km > 0.0 && length_y_km > 0.0)) fail("domain extents must be positive");
  if (!(depth_m > 0.0)) fail("depth_m must be positive");
  if (shelf) {
    if (!(shelf->shelf_depth_m > 0.0)) fail("shelf depth must be positive");
    if (shelf->slope_width_km < 0.0) fail("shelf slope width must be >= 0");
  }
  if (!(gravity > 0.0)) fail("gravity must be positive");
  if (friction < 0.0) fail("friction must be >= 0");
  if (!(cfl > 0.0 && cfl <= 0.9)) fail("cfl must lie in (0, 0.9]");
  if (!(end_time_s > 0.0)) fail("end_time_s must be positive");
  if (!(output_interval_s > 0.0)) fail("output_interval_s must be positive");
  if (gauges.empty()) fail("at least one gauge is required");
  for (const auto& g : gauges) {
    if (!inside(*this, g.x_km, g.y_km)) fail("gauge '" + g.id + "' lies outside the domain");
  }
  if (subfaults.empty()) fail("at least one subfault is required");
  for (const auto& r : subfaults) {
    if (!(r.x0 < r.x1 && r.y0 < r.y1)) fail("subfault rectangle is empty");
    if (!inside(*this, r.x0, r.y0) || !inside(*this, r.x1, r.y1)) {
      fail("subfault footprint lies outside the domain");
    }
  }
  if (taper_km < 0.0) fail("taper_km must be >= 0");
}

ModelConfig default_model_config() {
  ModelConfig cfg;
  // Two down-dip columns by three along-strike rows; s1..s3 landward column
  // north to south, s4..s6 trenchward column north to south.
  const double xs[2][2] = {{250.0, 350.0}, {350.0, 450.0}};
  const double ys[3][2] = {{850.0, 1050.0}, {650.0, 850.0}, {450.0, 650.0}};
  for (const auto& xc : xs) {
    for (const auto& yr : ys) {
      cfg.subfaults.push_back(Rect{xc[0], xc[1], yr[0], yr[1]});
    }
  }
  cfg.gauges = {
      GaugeSite{"G1", 600.0, 900.0},
      GaugeSite{"G2", 900.0, 1150.0},
      GaugeSite{"G3", 1100.0, 400.0},
      GaugeSite{"G4", 1400.0, 1200.0},
  };
  cfg.end_time_s = 9000.0;
  cfg.output_interval_s = 90.0;
  return cfg;
}

double StateField::total_volume(double cell_area) const {
  double v = 0.0;
  for (double x : h.data()) v += x;
  return v * cell_area;
}

Field2D StateField::surface() const {
  Field2D eta(h.nx(), h.ny());
  auto out = eta.data();
  auto hd = h.data();
  auto bd = b.data();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = hd[k] + bd[k];
  return eta;
}

Field2D bathymetry(const ModelConfig& cfg) {
  Field2D b(cfg.nx, cfg.ny);
  const double dx_km = cfg.length_x_km / cfg.nx;
  for (int i = 0; i < cfg.nx; ++i) {
    const double x = (i + 0.5) * dx_km;
    double depth = cfg.depth_m;
    if (cfg.shelf) {
      const auto& s = *cfg.shelf;
      if (x <= s.shelf_edge_km) {
        depth = s.shelf_depth_m;
      } else if (x < s.shelf_edge_km + s.slope_width_km) {
        const double t = (x - s.shelf_edge_km) / s.slope_width_km;
        depth = s.shelf_depth_m + t * (cfg.depth_m - s.shelf_depth_m);
      }
    }
    for (int j = 0; j < cfg.ny; ++j) b(i, j) = -depth;
  }
  return b;
}

Field2D unit_displacement(const ModelConfig& cfg, std::size_t k) {
  if (k >= cfg.subfaults.size()) throw std::out_of_range("subfault index");
  const Rect& r = cfg.subfaults[k];
  Field2D u(cfg.nx, cfg.ny);
  const double dx_km = cfg.length_x_km / cfg.nx;
  const double dy_km = cfg.length_y_km / cfg.ny;
  for (int j = 0; j < cfg.ny; ++j) {
    const double ty = taper_1d((j + 0.5) * dy_km, r.y0, r.y1, cfg.taper_km);
    if (ty == 0.0) continue;
    for (int i = 0; i < cfg.nx; ++i) {
      u(i, j) = ty * taper_1d((i + 0.5) * dx_km, r.x0, r.x1, cfg.taper_km);
    }
  }
  return u;
}

Field2D slip_to_initial_surface(std::span<const double> slip,
                                const ModelConfig& cfg) {
  if (slip.size() != cfg.subfaults.size()) {
    throw DimensionMismatch("slip_to_initial_surface: expected " +
                            std::to_string(cfg.subfaults.size()) +
                            " slips, got " + std::to_string(slip.size()));
  }
  Field2D eta(cfg.nx, cfg.ny);
  auto out = eta.data();
  for (std::size_t k = 0; k < slip.size(); ++k) {
    if (slip[k] == 0.0) continue;
    const Field2D u = unit_displacement(cfg, k);
    const auto ud = u.data();
    const double a = cfg.uplift_per_slip * slip[k];
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += a * ud[c];
  }
  return eta;
}

StateField initial_state(std::span<const double> slip, const ModelConfig& cfg) {
  StateField s;
  s.b = bathymetry(cfg);
  const Field2D eta0 = slip_to_initial_surface(slip, cfg);
  s.h = Field2D(cfg.nx, cfg.ny);
  s.hu = Field2D(cfg.nx, cfg.ny);
  s.hv = Field2D(cfg.nx, cfg.ny);
  auto h = s.h.data();
  const auto b = s.b.data();
  const auto e = eta0.data();
  for (std::size_t c = 0; c < h.size(); ++c) h[c] = std::max(0.0, e[c] - b[c]);
  return s;
}

ShallowWaterSolver::ShallowWaterSolver(ModelConfig cfg, StateField state)
    : cfg_(std::move(cfg)), state_(std::move(state)) {
  cfg_.validate();
  const std::size_t np = static_cast<std::size_t>(cfg_.nx + 2) *
                         static_cast<std::size_t>(cfg_.ny + 2);
  ph_.assign(np, 0.0);
  phu_.assign(np, 0.0);
  phv_.assign(np, 0.0);
  pb_.assign(np, 0.0);
  for (auto& f : fx_) f.assign(np, 0.0);
  for (auto& f : fy_) f.assign(np, 0.0);
  fnr_x_.assign(np, 0.0);
  fnr_y_.assign(np, 0.0);
}

double ShallowWaterSolver::stable_dt() const {
  const auto h = state_.h.data();
  const auto hu = state_.hu.data();
  const auto hv = state_.hv.data();
  double smax = 0.0;
  for (std::size_t c = 0; c < h.size(); ++c) {
    if (h[c] <= kDryDepth) continue;
    const double u = hu[c] / h[c];
    const double v = hv[c] / h[c];
    smax = std::max(smax, std::sqrt(u * u + v * v) + std::sqrt(cfg_.gravity * h[c]));
  }
  if (smax <= 0.0) return cfg_.end_time_s;
  return cfg_.cfl * std::min(cfg_.dx_m(), cfg_.dy_m()) / smax;
}

void ShallowWaterSolver::step(double dt) {
  const int nx = cfg_.nx;
  const int ny = cfg_.ny;
  const int px = nx + 2;
  const double g = cfg_.gravity;
  auto P = [g](double h) { return 0.5 * g * h * h; };
  auto at = [px](int i, int j) {
    return static_cast<std::size_t>(j) * static_cast<std::size_t>(px) +
           static_cast<std::size_t>(i);
  };

  // Load interior into the padded arrays.
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const std::size_t p = at(i + 1, j + 1);
      ph_[p] = state_.h(i, j);
      phu_[p] = state_.hu(i, j);
      phv_[p] = state_.hv(i, j);
      pb_[p] = state_.b(i, j);
    }
  }
  // Ghost cells.
  const double sign = cfg_.boundary == Boundary::reflective ? -1.0 : 1.0;
  for (int j = 1; j <= ny; ++j) {
    for (int side = 0; side < 2; ++side) {
      const std::size_t gc = at(side == 0 ? 0 : nx + 1, j);
      const std::size_t src = at(side == 0 ? 1 : nx, j);
      ph_[gc] = ph_[src];
      phu_[gc] = sign * phu_[src];
      phv_[gc] = phv_[src];
      pb_[gc] = pb_[src];
    }
  }
  for (int i = 1; i <= nx; ++i) {
    for (int side = 0; side < 2; ++side) {
      const std::size_t gc = at(i, side == 0 ? 0 : ny + 1);
      const std::size_t src = at(i, side == 0 ? 1 : ny);
      ph_[gc] = ph_[src];
      phu_[gc] = phu_[src];
      phv_[gc] = sign * phv_[src];
      pb_[gc] = pb_[src];
    }
  }

  // Interface flux between cells L and R along normal direction n, with
  // tangential momentum t. Writes mass flux, normal-momentum flux as seen by
  // L and by R (hydrostatic pressure of the own cell removed), tangential flux.
  auto interface = [&](std::size_t l, std::size_t r, const std::vector<double>& qn,
                       const std::vector<double>& qt, double& f_mass,
                       double& f_norm_l, double& f_norm_r, double& f_tan) {
    const double bstar = std::max(pb_[l], pb_[r]);
    const double hl = ph_[l];
    const double hr = ph_[r];
    const double hls = std::max(0.0, hl + pb_[l] - bstar);
    const double hrs = std::max(0.0, hr + pb_[r] - bstar);
    const double ul = hl > kDryDepth ? qn[l] / hl : 0.0;
    const double ur = hr > kDryDepth ? qn[r] / hr : 0.0;
    const double vl = hl > kDryDepth ? qt[l] / hl : 0.0;
    const double vr = hr > kDryDepth ? qt[r] / hr : 0.0;
    const double ql = hls * ul;
    const double qr = hrs * ur;
    const double a = std::max(std::abs(ul) + std::sqrt(g * hls),
                              std::abs(ur) + std::sqrt(g * hrs));
    const double pl = P(hls);
    const double pr = P(hrs);
    f_mass = 0.5 * (ql + qr) - 0.5 * a * (hrs - hls);
    const double f_norm = 0.5 * ((ql * ul + pl) + (qr * ur + pr)) - 0.5 * a * (qr - ql);
    f_norm_l = f_norm - pl;
    f_norm_r = f_norm - pr;
    f_tan = 0.5 * (ql * vl + qr * vr) - 0.5 * a * (hrs * vr - hls * vl);
  };

  // fx_[k] at index at(i, j) holds the flux through the interface between
  // padded cells (i, j) and (i + 1, j); same for fy_ in y. fx_[1] is the
  // normal-momentum flux seen from the left cell, fnr_x_ from the right one.
  for (int j = 1; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      const std::size_t l = at(i, j);
      interface(l, at(i + 1, j), phu_, phv_, fx_[0][l], fx_[1][l], fnr_x_[l],
                fx_[2][l]);
    }
  }
  for (int j = 0; j <= ny; ++j) {
    for (int i = 1; i <= nx; ++i) {
      const std::size_t l = at(i, j);
      interface(l, at(i, j + 1), phv_, phu_, fy_[0][l], fy_[1][l], fnr_y_[l],
                fy_[2][l]);
    }
  }

  const double rx = dt / cfg_.dx_m();
  const double ry = dt / cfg_.dy_m();
  const double rot_c = std::cos(cfg_.coriolis * dt);
  const double rot_s = std::sin(cfg_.coriolis * dt);
  bool finite = true;
  for (int j = 1; j <= ny; ++j) {
    for (int i = 1; i <= nx; ++i) {
      const std::size_t c = at(i, j);
      const std::size_t w = at(i - 1, j);
      const std::size_t s = at(i, j - 1);
      double h = ph_[c] - rx * (fx_[0][c] - fx_[0][w]) - ry * (fy_[0][c] - fy_[0][s]);
      double hu = phu_[c] - rx * (fx_[1][c] - fnr_x_[w]) - ry * (fy_[2][c] - fy_[2][s]);
      double hv = phv_[c] - rx * (fx_[2][c] - fx_[2][w]) - ry * (fy_[1][c] - fnr_y_[s]);
      if (h < 0.0) h = 0.0;
      if (h <= kDryDepth) {
        hu = 0.0;
        hv = 0.0;
      } else {
        if (cfg_.coriolis != 0.0) {
          const double a = rot_c * hu + rot_s * hv;
          const double b = -rot_s * hu + rot_c * hv;
          hu = a;
          hv = b;
        }
        if (cfg_.friction > 0.0) {
          const double speed = std::sqrt(hu * hu + hv * hv) / h;
          const double damp = 1.0 / (1.0 + dt * cfg_.friction * speed / h);
          hu *= damp;
          hv *= damp;
        }
      }
      finite = finite && std::isfinite(h) && std::isfinite(hu) && std::isfinite(hv);
      state_.h(i - 1, j - 1) = h;
      state_.hu(i - 1, j - 1) = hu;
      state_.hv(i - 1, j - 1) = hv;
    }
  }
  time_ += dt;
  ++steps_;
  if (!finite) {
    std::ostringstream msg;
    msg << "shallow-water solver: non-finite state at step " << steps_
        << ", t = " << time_ << " s, dt = " << dt << " s";
    throw NumericError(msg.str());
  }
}

double ShallowWaterSolver::sample_surface(double x_km, double y_km) const {
  const int nx = cfg_.nx;
  const int ny = cfg_.ny;
  const double fx = x_km / (cfg_.length_x_km / nx) - 0.5;
  const double fy = y_km / (cfg_.length_y_km / ny) - 0.5;
  const int i0 = std::clamp(static_cast<int>(std::floor(fx)), 0, nx - 2);
  const int j0 = std::clamp(static_cast<int>(std::floor(fy)), 0, ny - 2);
  const double tx = std::clamp(fx - i0, 0.0, 1.0);
  const double ty = std::clamp(fy - j0, 0.0, 1.0);
  auto eta = [&](int i, int j) { return state_.h(i, j) + state_.b(i, j); };
  const double e0 = (1.0 - tx) * eta(i0, j0) + tx * eta(i0 + 1, j0);
  const double e1 = (1.0 - tx) * eta(i0, j0 + 1) + tx * eta(i0 + 1, j0 + 1);
  return (1.0 - ty) * e0 + ty * e1;
}

std::vector<GaugeRecord> simulate(const ModelConfig& cfg,
                                  std::span<const double> slip) {
  cfg.validate();
  ShallowWaterSolver solver(cfg, initial_state(slip, cfg));
  const int n_out =
      static_cast<int>(std::floor(cfg.end_time_s / cfg.output_interval_s + 1e-9)) + 1;
  std::vector<GaugeRecord> recs(cfg.gauges.size());
  for (std::size_t g = 0; g < recs.size(); ++g) {
    recs[g].id = cfg.gauges[g].id;
    recs[g].times.reserve(static_cast<std::size_t>(n_out));
    recs[g].eta.reserve(static_cast<std::size_t>(n_out));
  }
  auto record = [&](double t) {
    for (std::size_t g = 0; g < recs.size(); ++g) {
      recs[g].times.push_back(t);
      recs[g].eta.push_back(
          solver.sample_surface(cfg.gauges[g].x_km, cfg.gauges[g].y_km));
    }
  };
  record(0.0);
  double t = 0.0;
  for (int k = 1; k < n_out; ++k) {
    const double target = k * cfg.output_interval_s;
    while (t < target) {
      const double remaining = target - t;
      double dt = solver.stable_dt();
      // Avoid a sliver step just before the output time.
      if (dt >= remaining) dt = remaining;
      else if (dt > 0.5 * remaining) dt = 0.5 * remaining;
      solver.step(dt);
      t = (dt == remaining) ? target : t + dt;
    }
    record(target);
  }
  return recs;
}

std::optional<double> arrival_time(const GaugeRecord& rec, double threshold) {
  if (rec.eta.empty()) throw std::invalid_argument("arrival_time: empty record");
  if (!(threshold > 0.0)) throw std::invalid_argument("arrival_time: threshold must be > 0");
  for (std::size_t k = 0; k < rec.eta.size(); ++k) {
    if (std::abs(rec.eta[k]) >= threshold) return rec.times[k];
  }
  return std::nullopt;
}

double max_wave_amplitude(const GaugeRecord& rec) {
  if (rec.eta.empty()) throw std::invalid_argument("max_wave_amplitude: empty record");
  return *std::max_element(rec.eta.begin(), rec.eta.end());
}

bool EnsembleMatrix::complete() const {
  return std::all_of(rows.begin(), rows.end(), [](const Realization& r) { return r.ok; });
}

Eigen::MatrixXd EnsembleMatrix::output_matrix() const {
  const auto n_t = static_cast<Eigen::Index>(times.size());
  const auto n_g = static_cast<Eigen::Index>(gauge_ids.size());
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), n_g * n_t);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (!rows[r].ok) {
      throw IntegrityError("ensemble realization " + std::to_string(r) +
                           " failed: " + rows[r].error);
    }
    for (Eigen::Index g = 0; g < n_g; ++g) {
      for (Eigen::Index k = 0; k < n_t; ++k) {
        out(static_cast<Eigen::Index>(r), g * n_t + k) = rows[r].eta(g, k);
      }
    }
  }
  return out;
}

std::vector<GaugeRecord> EnsembleMatrix::records(std::size_t row) const {
  const Realization& r = rows.at(row);
  std::vector<GaugeRecord> out(gauge_ids.size());
  for (std::size_t g = 0; g < gauge_ids.size(); ++g) {
    out[g].id = gauge_ids[g];
    out[g].times = times;
    out[g].eta.resize(times.size());
    if (!r.ok) continue;
    for (std::size_t k = 0; k < times.size(); ++k) {
      out[g].eta[k] = r.eta(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(k));
    }
  }
  return out;
}

EnsembleMatrix run_ensemble(const DesignMatrix& design, const ModelConfig& cfg,
                            const SlipBounds& bounds, int workers) {
  cfg.validate();
  if (design.dim() != static_cast<int>(cfg.num_subfaults())) {
    throw DimensionMismatch("run_ensemble: design dimension " +
                            std::to_string(design.dim()) + " != subfault count " +
                            std::to_string(cfg.num_subfaults()));
  }
  EnsembleMatrix ens;
  for (const auto& g : cfg.gauges) ens.gauge_ids.push_back(g.id);
  const int n_out =
      static_cast<int>(std::floor(cfg.end_time_s / cfg.output_interval_s + 1e-9)) + 1;
  for (int k = 0; k < n_out; ++k) ens.times.push_back(k * cfg.output_interval_s);
  ens.rows.resize(design.size());

  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    std::vector<double> xi(static_cast<std::size_t>(design.dim()));
    for (std::size_t r = next++; r < design.size(); r = next++) {
      Realization& out = ens.rows[r];
      try {
        for (int i = 0; i < design.dim(); ++i) {
          xi[static_cast<std::size_t>(i)] = design.points(static_cast<Eigen::Index>(r), i);
        }
        const auto slip = canonical_to_slip(xi, bounds);
        const auto recs = simulate(cfg, slip);
        out.eta.resize(static_cast<Eigen::Index>(recs.size()), n_out);
        for (std::size_t g = 0; g < recs.size(); ++g) {
          for (int k = 0; k < n_out; ++k) {
            out.eta(static_cast<Eigen::Index>(g), k) = recs[g].eta[static_cast<std::size_t>(k)];
          }
        }
        out.ok = true;
      } catch (const std::exception& e) {
        out.ok = false;
        out.error = e.what();
      }
    }
  };
  const int n_workers = std::max(1, std::min<int>(workers, static_cast<int>(design.size())));
  if (n_workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  return ens;
}

}  // namespace slipuq
