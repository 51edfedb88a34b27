#pragma once

#include "slipuq/design.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace slipuq {

// Axis-aligned rectangle in km.
struct Rect {
  double x0 = 0.0;
  double x1 = 0.0;
  double y0 = 0.0;
  double y1 = 0.0;
};

struct GaugeSite {
  std::string id;
  double x_km = 0.0;
  double y_km = 0.0;
};

// Linear continental slope: depth is `shelf_depth_m` for x <= shelf_edge_km,
// ramps linearly to the basin depth over `slope_width_km`, then stays flat.
struct ShelfSpec {
  double shelf_depth_m = 200.0;
  double shelf_edge_km = 100.0;
  double slope_width_km = 100.0;
};

enum class Boundary { outflow, reflective };

struct ModelConfig {
  int nx = 200;
  int ny = 150;
  double length_x_km = 2000.0;
  double length_y_km = 1500.0;
  double depth_m = 4000.0;
  std::optional<ShelfSpec> shelf;
  double gravity = 9.81;
  double coriolis = 0.0;   // f, 1/s
  double friction = 0.0;   // dimensionless quadratic drag C_f
  double end_time_s = 7200.0;
  double output_interval_s = 60.0;
  double cfl = 0.45;
  Boundary boundary = Boundary::outflow;
  std::vector<GaugeSite> gauges;
  std::vector<Rect> subfaults;
  double taper_km = 30.0;
  // Plateau uplift per meter of slip.
  double uplift_per_slip = 1.0;

  double dx_m() const { return 1000.0 * length_x_km / nx; }
  double dy_m() const { return 1000.0 * length_y_km / ny; }
  std::size_t num_subfaults() const { return subfaults.size(); }

  // Throws ConfigError on violated invariants.
  void validate() const;
};

// Desk-scale default: 2000 x 1500 km basin of 4000 m depth, 200 x 150 cells,
// six subfaults in a 2 x 3 layout and four gauges at staggered ranges.
ModelConfig default_model_config();

// Cell-centred fields, row-major with x fastest: index = j * nx + i.
class Field2D {
 public:
  Field2D() = default;
  Field2D(int nx, int ny, double value = 0.0)
      : nx_(nx), ny_(ny), data_(static_cast<std::size_t>(nx) * ny, value) {}

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double& operator()(int i, int j) { return data_[idx(i, j)]; }
  double operator()(int i, int j) const { return data_[idx(i, j)]; }
  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

 private:
  std::size_t idx(int i, int j) const {
    return static_cast<std::size_t>(j) * static_cast<std::size_t>(nx_) +
           static_cast<std::size_t>(i);
  }
  int nx_ = 0;
  int ny_ = 0;
  std::vector<double> data_;
};

struct StateField {
  Field2D h;
  Field2D hu;
  Field2D hv;
  Field2D b;  // bed elevation relative to datum (negative below sea level)

  double total_volume(double cell_area) const;
  Field2D surface() const;  // eta = h + b
};

struct GaugeRecord {
  std::string id;
  std::vector<double> times;  // s, strictly increasing
  std::vector<double> eta;    // m
};

Field2D bathymetry(const ModelConfig& cfg);

// Unit uplift shape of subfault `k`: plateau of height 1 over the footprint
// with a cosine taper of width cfg.taper_km outside it.
Field2D unit_displacement(const ModelConfig& cfg, std::size_t k);

// eta0 = uplift_per_slip * sum_k slip_k * U_k. Linear in slip.
Field2D slip_to_initial_surface(std::span<const double> slip,
                                const ModelConfig& cfg);

StateField initial_state(std::span<const double> slip, const ModelConfig& cfg);

// First-order finite-volume solver: Rusanov fluxes with hydrostatic
// reconstruction of the bed, operator-split Coriolis rotation and implicit
// quadratic friction.
class ShallowWaterSolver {
 public:
  ShallowWaterSolver(ModelConfig cfg, StateField state);

  // Stable step size for the current state.
  double stable_dt() const;
  // Advances by dt (must not exceed stable_dt()). Throws NumericError if the
  // state becomes non-finite.
  void step(double dt);

  // Bilinear interpolation of eta at (x, y) in km.
  double sample_surface(double x_km, double y_km) const;

  const StateField& state() const { return state_; }
  double time() const { return time_; }
  long steps() const { return steps_; }

 private:
  ModelConfig cfg_;
  StateField state_;
  double time_ = 0.0;
  long steps_ = 0;
  // Padded working arrays (nx + 2) x (ny + 2).
  std::vector<double> ph_, phu_, phv_, pb_;
  std::vector<double> fx_[3], fy_[3];
  std::vector<double> fnr_x_, fnr_y_;
};

// Runs the model from the slip-induced initial surface to cfg.end_time_s and
// samples every gauge at multiples of cfg.output_interval_s (t = 0 included).
std::vector<GaugeRecord> simulate(const ModelConfig& cfg,
                                  std::span<const double> slip);

// First time with |eta| >= threshold; nullopt if never reached.
// Throws std::invalid_argument on an empty record or threshold <= 0.
std::optional<double> arrival_time(const GaugeRecord& rec,
                                   double threshold = 0.05);

// Signed crest: max over t of eta(t).
double max_wave_amplitude(const GaugeRecord& rec);

struct Realization {
  bool ok = false;
  std::string error;
  Eigen::MatrixXd eta;  // gauges x times
};

struct EnsembleMatrix {
  std::string design_hash;
  std::vector<std::string> gauge_ids;
  std::vector<double> times;
  std::vector<Realization> rows;

  std::size_t size() const { return rows.size(); }
  bool complete() const;
  std::size_t num_outputs() const { return gauge_ids.size() * times.size(); }

  // Realization x output matrix, output index = gauge * n_times + time.
  // Throws IntegrityError if any realization failed.
  Eigen::MatrixXd output_matrix() const;
  std::vector<GaugeRecord> records(std::size_t row) const;
};

// One simulate() per design row, slips from canonical_to_slip. Output is
// independent of `workers` and of scheduling order.
EnsembleMatrix run_ensemble(const DesignMatrix& design, const ModelConfig& cfg,
                            const SlipBounds& bounds, int workers = 1);

}  // namespace slipuq
