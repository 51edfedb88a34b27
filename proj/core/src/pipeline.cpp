#include "slipuq/pipeline.hpp"

#include "slipuq/diagnostics.hpp"
#include "slipuq/error.hpp"
#include "slipuq/io.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

namespace slipuq {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& item : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(),
                     [&](const char* k) { return item.key() == k; })) {
      throw ConfigError(where + ": unknown key '" + item.key() + "'");
    }
  }
}

template <class T>
void read(const json& obj, const char* key, T& dst, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    dst = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

const json& section(const json& root, const char* key) {
  static const json empty = json::object();
  return root.contains(key) ? root.at(key) : empty;
}

Boundary boundary_from_string(const std::string& s) {
  if (s == "outflow") return Boundary::outflow;
  if (s == "reflective") return Boundary::reflective;
  throw ConfigError("model.boundary: expected 'outflow' or 'reflective', got '" + s + "'");
}

Solver solver_from_string(const std::string& s) {
  if (s == "nisp") return Solver::nisp;
  if (s == "bpdn") return Solver::bpdn;
  throw ConfigError("fit.solver: expected 'nisp' or 'bpdn', got '" + s + "'");
}

json model_json(const ModelConfig& m) {
  json j;
  j["nx"] = m.nx;
  j["ny"] = m.ny;
  j["length_x_km"] = m.length_x_km;
  j["length_y_km"] = m.length_y_km;
  j["depth_m"] = m.depth_m;
  if (m.shelf) {
    j["shelf"] = {{"shelf_depth_m", m.shelf->shelf_depth_m},
                  {"shelf_edge_km", m.shelf->shelf_edge_km},
                  {"slope_width_km", m.shelf->slope_width_km}};
  } else {
    j["shelf"] = nullptr;
  }
  j["gravity"] = m.gravity;
  j["coriolis"] = m.coriolis;
  j["friction"] = m.friction;
  j["end_time_s"] = m.end_time_s;
  j["output_interval_s"] = m.output_interval_s;
  j["cfl"] = m.cfl;
  j["boundary"] = m.boundary == Boundary::outflow ? "outflow" : "reflective";
  j["taper_km"] = m.taper_km;
  j["uplift_per_slip"] = m.uplift_per_slip;
  j["gauges"] = json::array();
  for (const auto& g : m.gauges) j["gauges"].push_back({{"id", g.id}, {"x_km", g.x_km}, {"y_km", g.y_km}});
  j["subfaults"] = json::array();
  for (const auto& r : m.subfaults) {
    j["subfaults"].push_back({{"x0", r.x0}, {"x1", r.x1}, {"y0", r.y0}, {"y1", r.y1}});
  }
  return j;
}

ModelConfig parse_model(const json& j) {
  const std::string w = "model";
  check_keys(j, {"nx", "ny", "length_x_km", "length_y_km", "depth_m", "shelf", "gravity",
                 "coriolis", "friction", "end_time_s", "output_interval_s", "cfl",
                 "boundary", "taper_km", "uplift_per_slip", "gauges", "subfaults"},
             w);
  ModelConfig m = default_model_config();
  read(j, "nx", m.nx, w);
  read(j, "ny", m.ny, w);
  read(j, "length_x_km", m.length_x_km, w);
  read(j, "length_y_km", m.length_y_km, w);
  read(j, "depth_m", m.depth_m, w);
  if (j.contains("shelf")) {
    if (j.at("shelf").is_null()) {
      m.shelf.reset();
    } else {
      const json& s = j.at("shelf");
      check_keys(s, {"shelf_depth_m", "shelf_edge_km", "slope_width_km"}, "model.shelf");
      ShelfSpec spec;
      read(s, "shelf_depth_m", spec.shelf_depth_m, "model.shelf");
      read(s, "shelf_edge_km", spec.shelf_edge_km, "model.shelf");
      read(s, "slope_width_km", spec.slope_width_km, "model.shelf");
      m.shelf = spec;
    }
  }
  read(j, "gravity", m.gravity, w);
  read(j, "coriolis", m.coriolis, w);
  read(j, "friction", m.friction, w);
  read(j, "end_time_s", m.end_time_s, w);
  read(j, "output_interval_s", m.output_interval_s, w);
  read(j, "cfl", m.cfl, w);
  if (j.contains("boundary")) {
    std::string b;
    read(j, "boundary", b, w);
    m.boundary = boundary_from_string(b);
  }
  read(j, "taper_km", m.taper_km, w);
  read(j, "uplift_per_slip", m.uplift_per_slip, w);
  if (j.contains("gauges")) {
    if (!j.at("gauges").is_array()) throw ConfigError("model.gauges: expected an array");
    m.gauges.clear();
    for (const auto& g : j.at("gauges")) {
      check_keys(g, {"id", "x_km", "y_km"}, "model.gauges[]");
      GaugeSite site;
      read(g, "id", site.id, "model.gauges[]");
      read(g, "x_km", site.x_km, "model.gauges[]");
      read(g, "y_km", site.y_km, "model.gauges[]");
      m.gauges.push_back(site);
    }
  }
  if (j.contains("subfaults")) {
    if (!j.at("subfaults").is_array()) throw ConfigError("model.subfaults: expected an array");
    m.subfaults.clear();
    for (const auto& s : j.at("subfaults")) {
      check_keys(s, {"x0", "x1", "y0", "y1"}, "model.subfaults[]");
      Rect r;
      read(s, "x0", r.x0, "model.subfaults[]");
      read(s, "x1", r.x1, "model.subfaults[]");
      read(s, "y0", r.y0, "model.subfaults[]");
      read(s, "y1", r.y1, "model.subfaults[]");
      m.subfaults.push_back(r);
    }
  }
  return m;
}

json config_json(const PipelineConfig& c) {
  json j;
  j["model"] = model_json(c.model);
  j["bounds"] = {{"min", c.bounds.min}, {"max", c.bounds.max}};
  j["design"] = {{"smolyak_level", c.design.smolyak_level},
                 {"lhs_n", c.design.lhs_n},
                 {"lhs_seed", c.design.lhs_seed}};
  const auto& b = c.fit.bpdn;
  j["fit"] = {{"solver", to_string(c.fit.solver)},
              {"order", c.fit.order},
              {"folds", b.folds},
              {"candidates", b.candidate_count},
              {"cv_max_iterations", b.cv_max_iterations},
              {"opt_tol", b.solver.opt_tol},
              {"bp_tol", b.solver.bp_tol},
              {"max_iterations", b.solver.max_iterations}};
  j["mcmc"] = {{"iterations", c.mcmc.iterations}, {"burn_in", c.mcmc.burn_in},
               {"seed", c.mcmc.seed},             {"adapt_start", c.mcmc.adapt_start},
               {"hpd_mass", c.mcmc.hpd_mass},     {"kde_grid", c.mcmc.kde_grid}};
  j["twin"] = {{"slips", c.twin.slips},
               {"noise_sigma", c.twin.noise_sigma},
               {"noise_seed", c.twin.noise_seed}};
  j["validation"] = {{"cdf_samples", c.validation.cdf_samples}, {"seed", c.validation.seed}};
  j["moment"] = {{"rigidity_pa", c.moment.rigidity_pa}, {"areas_m2", c.moment.areas_m2}};
  j["arrival_threshold_m"] = c.arrival_threshold_m;
  return j;
}

std::string times_text(const std::vector<double>& times) {
  std::vector<std::string> parts;
  for (double t : times) parts.push_back(format_double(t));
  return join(parts, ',');
}

std::vector<double> parse_times(const std::string& text) {
  std::vector<double> out;
  if (text.empty()) return out;
  for (const auto& p : split(text, ',')) {
    try {
      out.push_back(parse_double(p));
    } catch (const ConfigError&) {
      throw IntegrityError("malformed time list in manifest");
    }
  }
  return out;
}

std::vector<std::string> output_names(const std::vector<std::string>& gauges,
                                      std::size_t n_times) {
  std::vector<std::string> names;
  for (const auto& g : gauges) {
    for (std::size_t t = 0; t < n_times; ++t) names.push_back(output_name(g, static_cast<int>(t)));
  }
  return names;
}

void require_file(const fs::path& p, const std::string& stage_hint) {
  if (!fs::exists(p)) {
    throw ConfigError("missing " + p.string() + " (run '" + stage_hint + "' first)");
  }
}

DesignKind training_kind(Solver s) {
  return s == Solver::nisp ? DesignKind::smolyak : DesignKind::lhs;
}

std::string summary_csv(const std::vector<ParameterSummary>& summary) {
  std::string out = "parameter,map,mean,hpd_lo,hpd_hi,map_tied\n";
  for (const auto& s : summary) {
    out += fmt::format("{},{},{},{},{},{}\n", s.name, format_double(s.map),
                       format_double(s.mean), format_double(s.hpd_lo),
                       format_double(s.hpd_hi), s.map_tied ? 1 : 0);
  }
  return out;
}

}  // namespace

std::string to_string(Solver s) { return s == Solver::nisp ? "nisp" : "bpdn"; }

std::string PipelineConfig::canonical_json() const { return config_json(*this).dump(); }

std::string PipelineConfig::hash() const { return sha256_hex(canonical_json()); }

std::string PipelineConfig::model_hash() const {
  const json j = {{"model", model_json(model)}, {"bounds", {{"min", bounds.min}, {"max", bounds.max}}}};
  return sha256_hex(j.dump());
}

std::vector<double> PipelineConfig::subfault_areas() const {
  if (!moment.areas_m2.empty()) return moment.areas_m2;
  std::vector<double> a;
  for (const auto& r : model.subfaults) a.push_back((r.x1 - r.x0) * (r.y1 - r.y0) * 1e6);
  return a;
}

void PipelineConfig::validate() const {
  model.validate();
  if (!(bounds.max > bounds.min)) throw ConfigError("bounds: max must exceed min");
  if (design.smolyak_level < 0 || design.smolyak_level > kMaxPattersonLevel) {
    throw ConfigError("design.smolyak_level must be in [0, " +
                      std::to_string(kMaxPattersonLevel) + "]");
  }
  if (design.lhs_n < 1) throw ConfigError("design.lhs_n must be positive");
  if (fit.order < 0) throw ConfigError("fit.order must be >= 0");
  if (fit.bpdn.folds < 2) throw ConfigError("fit.folds must be >= 2");
  if (fit.bpdn.candidate_count < 1) throw ConfigError("fit.candidates must be >= 1");
  if (mcmc.iterations < 2) throw ConfigError("mcmc.iterations must be >= 2");
  if (!(mcmc.burn_in >= 0.0 && mcmc.burn_in < 1.0)) throw ConfigError("mcmc.burn_in must be in [0, 1)");
  if (mcmc.adapt_start < 1) throw ConfigError("mcmc.adapt_start must be >= 1");
  if (!(mcmc.hpd_mass > 0.0 && mcmc.hpd_mass <= 1.0)) throw ConfigError("mcmc.hpd_mass must be in (0, 1]");
  if (mcmc.kde_grid < 2) throw ConfigError("mcmc.kde_grid must be >= 2");
  if (twin.slips.size() != model.num_subfaults()) {
    throw ConfigError("twin.slips: " + std::to_string(twin.slips.size()) + " values for " +
                      std::to_string(model.num_subfaults()) + " subfaults");
  }
  for (double s : twin.slips) {
    if (!(s >= bounds.min && s <= bounds.max)) throw ConfigError("twin.slips outside bounds");
  }
  if (!(twin.noise_sigma >= 0.0)) throw ConfigError("twin.noise_sigma must be >= 0");
  if (validation.cdf_samples < 1) throw ConfigError("validation.cdf_samples must be positive");
  if (!(moment.rigidity_pa > 0.0)) throw ConfigError("moment.rigidity_pa must be positive");
  if (!moment.areas_m2.empty() && moment.areas_m2.size() != model.num_subfaults()) {
    throw ConfigError("moment.areas_m2 needs one entry per subfault");
  }
  if (!(arrival_threshold_m > 0.0)) throw ConfigError("arrival_threshold_m must be positive");
  if (workers < 1) throw ConfigError("workers must be >= 1");
}

PipelineConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(root, {"model", "bounds", "design", "fit", "mcmc", "twin", "validation", "moment",
                    "arrival_threshold_m", "workers"},
             "config");
  PipelineConfig c;
  c.model = parse_model(section(root, "model"));

  const json& b = section(root, "bounds");
  check_keys(b, {"min", "max"}, "bounds");
  read(b, "min", c.bounds.min, "bounds");
  read(b, "max", c.bounds.max, "bounds");

  const json& d = section(root, "design");
  check_keys(d, {"smolyak_level", "lhs_n", "lhs_seed"}, "design");
  read(d, "smolyak_level", c.design.smolyak_level, "design");
  read(d, "lhs_n", c.design.lhs_n, "design");
  read(d, "lhs_seed", c.design.lhs_seed, "design");

  const json& f = section(root, "fit");
  check_keys(f, {"solver", "order", "folds", "candidates", "cv_max_iterations", "opt_tol",
                 "bp_tol", "max_iterations"},
             "fit");
  if (f.contains("solver")) {
    std::string s;
    read(f, "solver", s, "fit");
    c.fit.solver = solver_from_string(s);
  }
  read(f, "order", c.fit.order, "fit");
  read(f, "folds", c.fit.bpdn.folds, "fit");
  read(f, "candidates", c.fit.bpdn.candidate_count, "fit");
  read(f, "cv_max_iterations", c.fit.bpdn.cv_max_iterations, "fit");
  read(f, "opt_tol", c.fit.bpdn.solver.opt_tol, "fit");
  read(f, "bp_tol", c.fit.bpdn.solver.bp_tol, "fit");
  read(f, "max_iterations", c.fit.bpdn.solver.max_iterations, "fit");

  const json& m = section(root, "mcmc");
  check_keys(m, {"iterations", "burn_in", "seed", "adapt_start", "hpd_mass", "kde_grid"}, "mcmc");
  read(m, "iterations", c.mcmc.iterations, "mcmc");
  read(m, "burn_in", c.mcmc.burn_in, "mcmc");
  read(m, "seed", c.mcmc.seed, "mcmc");
  read(m, "adapt_start", c.mcmc.adapt_start, "mcmc");
  read(m, "hpd_mass", c.mcmc.hpd_mass, "mcmc");
  read(m, "kde_grid", c.mcmc.kde_grid, "mcmc");

  const json& t = section(root, "twin");
  check_keys(t, {"slips", "noise_sigma", "noise_seed"}, "twin");
  read(t, "slips", c.twin.slips, "twin");
  read(t, "noise_sigma", c.twin.noise_sigma, "twin");
  read(t, "noise_seed", c.twin.noise_seed, "twin");

  const json& v = section(root, "validation");
  check_keys(v, {"cdf_samples", "seed"}, "validation");
  read(v, "cdf_samples", c.validation.cdf_samples, "validation");
  read(v, "seed", c.validation.seed, "validation");

  const json& mo = section(root, "moment");
  check_keys(mo, {"rigidity_pa", "areas_m2"}, "moment");
  read(mo, "rigidity_pa", c.moment.rigidity_pa, "moment");
  read(mo, "areas_m2", c.moment.areas_m2, "moment");

  read(root, "arrival_threshold_m", c.arrival_threshold_m, "config");
  read(root, "workers", c.workers, "config");
  c.validate();
  return c;
}

PipelineConfig load_config(const fs::path& path) { return parse_config(read_text(path)); }

std::string output_name(const std::string& gauge, int time_index) {
  return gauge + ":" + std::to_string(time_index);
}

std::vector<OutputLabel> StoredEnsemble::labels() const {
  std::vector<OutputLabel> out;
  for (std::size_t g = 0; g < gauge_ids.size(); ++g) {
    for (std::size_t t = 0; t < times.size(); ++t) {
      out.push_back({static_cast<int>(g), static_cast<int>(t)});
    }
  }
  return out;
}

fs::path Layout::design_dir(DesignKind k) const { return root / "design" / to_string(k); }
fs::path Layout::ensemble_dir(DesignKind k) const { return root / "ensemble" / to_string(k); }

void save_design(const fs::path& dir, const DesignMatrix& design, const PipelineConfig& cfg) {
  std::vector<std::string> header;
  for (int i = 0; i < design.dim(); ++i) header.push_back("xi_" + std::to_string(i + 1));
  Eigen::MatrixXd table = design.points;
  if (design.kind == DesignKind::smolyak) {
    header.push_back("weight");
    table.conservativeResize(Eigen::NoChange, table.cols() + 1);
    table.col(table.cols() - 1) = design.weights;
  }
  const std::string text = csv_to_string(header, table);
  write_text_atomic(dir / "points.csv", text);
  Manifest m;
  m.set("artifact", std::string("design"));
  m.set("kind", to_string(design.kind));
  m.set("dim", design.dim());
  m.set("size", design.size());
  m.set("level", design.level);
  m.set("seed", std::to_string(design.seed));
  m.set("bounds_min", cfg.bounds.min);
  m.set("bounds_max", cfg.bounds.max);
  m.set("config_hash", cfg.hash());
  m.set("points_sha256", sha256_hex(text));
  m.write(dir / "manifest.txt");
}

std::pair<DesignMatrix, std::string> load_design(const fs::path& dir) {
  require_file(dir / "manifest.txt", "design");
  const Manifest m = Manifest::read(dir / "manifest.txt");
  const std::string text = read_text(dir / "points.csv");
  const std::string hash = sha256_hex(text);
  if (hash != m.require("points_sha256")) {
    throw IntegrityError((dir / "points.csv").string() + " does not match its manifest hash");
  }
  const CsvTable t = parse_csv(text, (dir / "points.csv").string());
  DesignMatrix d;
  d.kind = design_kind_from_string(m.require("kind"));
  d.level = static_cast<int>(m.require_int("level"));
  d.seed = std::stoull(m.require("seed"));
  const auto dim = static_cast<Eigen::Index>(m.require_int("dim"));
  const Eigen::Index expected = dim + (d.kind == DesignKind::smolyak ? 1 : 0);
  if (t.values.cols() != expected || t.values.rows() != m.require_int("size")) {
    throw IntegrityError((dir / "points.csv").string() + " shape disagrees with manifest");
  }
  d.points = t.values.leftCols(dim);
  if (d.kind == DesignKind::smolyak) d.weights = t.values.col(dim);
  return {std::move(d), hash};
}

void save_ensemble(const fs::path& dir, const EnsembleMatrix& ens, const PipelineConfig& cfg) {
  const std::size_t n_out = ens.num_outputs();
  const std::size_t n_t = ens.times.size();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(ens.size()), static_cast<Eigen::Index>(n_out));
  std::vector<std::string> failed;
  std::string failures;
  for (std::size_t r = 0; r < ens.size(); ++r) {
    const auto& row = ens.rows[r];
    const auto ri = static_cast<Eigen::Index>(r);
    if (!row.ok) {
      out.row(ri).setConstant(std::numeric_limits<double>::quiet_NaN());
      failed.push_back(std::to_string(r));
      failures += std::to_string(r) + ": " + row.error + "\n";
      continue;
    }
    for (std::size_t g = 0; g < ens.gauge_ids.size(); ++g) {
      for (std::size_t t = 0; t < n_t; ++t) {
        out(ri, static_cast<Eigen::Index>(g * n_t + t)) =
            row.eta(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(t));
      }
    }
  }
  const std::string text = csv_to_string(output_names(ens.gauge_ids, n_t), out);
  write_text_atomic(dir / "outputs.csv", text);
  if (!failures.empty()) {
    write_text_atomic(dir / "failures.txt", failures);
  } else if (fs::exists(dir / "failures.txt")) {
    fs::remove(dir / "failures.txt");
  }
  Manifest m;
  m.set("artifact", std::string("ensemble"));
  m.set("design_hash", ens.design_hash);
  m.set("model_hash", cfg.model_hash());
  m.set("config_hash", cfg.hash());
  m.set("realizations", ens.size());
  m.set("gauges", join(ens.gauge_ids, ','));
  m.set("times", times_text(ens.times));
  m.set("failed_rows", join(failed, ','));
  m.set("status", std::string(failed.empty() ? "complete" : "incomplete"));
  m.set("outputs_sha256", sha256_hex(text));
  m.write(dir / "manifest.txt");
}

StoredEnsemble load_ensemble(const fs::path& dir) {
  require_file(dir / "manifest.txt", "ensemble");
  const Manifest m = Manifest::read(dir / "manifest.txt");
  const std::string text = read_text(dir / "outputs.csv");
  if (sha256_hex(text) != m.require("outputs_sha256")) {
    throw IntegrityError((dir / "outputs.csv").string() + " does not match its manifest hash");
  }
  StoredEnsemble e;
  e.gauge_ids = split(m.require("gauges"), ',');
  e.times = parse_times(m.require("times"));
  e.design_hash = m.require("design_hash");
  for (const auto& f : split(m.require("failed_rows"), ',')) {
    if (!f.empty()) e.failed.push_back(std::stoul(f));
  }
  const CsvTable t = parse_csv(text, (dir / "outputs.csv").string());
  if (t.header != output_names(e.gauge_ids, e.times.size()) ||
      t.values.rows() != m.require_int("realizations")) {
    throw IntegrityError((dir / "outputs.csv").string() + " layout disagrees with manifest");
  }
  e.outputs = t.values;
  return e;
}

void save_expansion(const fs::path& dir, const PCExpansion& exp,
                    const std::vector<std::string>& gauge_ids, const std::vector<double>& times,
                    const PipelineConfig& cfg, const std::string& training_hash) {
  std::vector<std::string> names;
  for (const auto& l : exp.labels()) names.push_back(output_name(gauge_ids.at(static_cast<std::size_t>(l.gauge)), l.time_index));
  const std::string text = csv_to_string(names, exp.coefficients());
  write_text_atomic(dir / "coefficients.csv", text);
  Manifest m;
  m.set("artifact", std::string("expansion"));
  m.set("polynomials", std::string("legendre"));
  m.set("dim", exp.basis().dim());
  m.set("order", exp.basis().order());
  m.set("terms", exp.basis().size());
  m.set("outputs", exp.num_outputs());
  m.set("solver", to_string(cfg.fit.solver));
  m.set("training_design", to_string(training_kind(cfg.fit.solver)));
  m.set("training_hash", training_hash);
  m.set("config_hash", cfg.hash());
  m.set("gauges", join(gauge_ids, ','));
  m.set("times", times_text(times));
  m.set("coefficients_sha256", sha256_hex(text));
  for (std::size_t k = 0; k < exp.basis().size(); ++k) {
    std::vector<std::string> d;
    for (int v : exp.basis()[k].degrees) d.push_back(std::to_string(v));
    m.set("index." + std::to_string(k), join(d, ','));
  }
  m.write(dir / "manifest.txt");
}

StoredExpansion load_expansion(const fs::path& dir) {
  require_file(dir / "manifest.txt", "fit");
  const Manifest m = Manifest::read(dir / "manifest.txt");
  const std::string text = read_text(dir / "coefficients.csv");
  if (sha256_hex(text) != m.require("coefficients_sha256")) {
    throw IntegrityError((dir / "coefficients.csv").string() + " does not match its manifest hash");
  }
  const int dim = static_cast<int>(m.require_int("dim"));
  const int order = static_cast<int>(m.require_int("order"));
  const auto terms = static_cast<std::size_t>(m.require_int("terms"));
  std::vector<MultiIndex> indices;
  for (std::size_t k = 0; k < terms; ++k) {
    MultiIndex idx;
    for (const auto& v : split(m.require("index." + std::to_string(k)), ',')) {
      idx.degrees.push_back(std::stoi(v));
    }
    indices.push_back(std::move(idx));
  }
  PCBasis basis;
  try {
    basis = PCBasis::from_indices(dim, order, std::move(indices));
  } catch (const ConfigError& e) {
    throw IntegrityError(std::string("expansion manifest: ") + e.what());
  }
  StoredExpansion s;
  s.gauge_ids = split(m.require("gauges"), ',');
  s.times = parse_times(m.require("times"));
  const CsvTable t = parse_csv(text, (dir / "coefficients.csv").string());
  if (static_cast<std::size_t>(t.values.rows()) != terms ||
      t.values.cols() != m.require_int("outputs")) {
    throw IntegrityError((dir / "coefficients.csv").string() + " shape disagrees with manifest");
  }
  std::vector<OutputLabel> labels;
  for (const auto& name : t.header) {
    const auto colon = name.rfind(':');
    const auto it = std::find(s.gauge_ids.begin(), s.gauge_ids.end(), name.substr(0, colon));
    if (colon == std::string::npos || it == s.gauge_ids.end()) {
      throw IntegrityError("coefficients.csv: unknown output column '" + name + "'");
    }
    labels.push_back({static_cast<int>(it - s.gauge_ids.begin()), std::stoi(name.substr(colon + 1))});
  }
  s.expansion = PCExpansion(std::move(basis), t.values, std::move(labels));
  return s;
}

std::vector<GaugeRecord> load_observations(const fs::path& dir,
                                           const std::vector<std::string>& gauge_ids) {
  if (!fs::is_directory(dir)) throw ConfigError("observation directory " + dir.string() + " not found");
  std::vector<GaugeRecord> out;
  for (const auto& id : gauge_ids) {
    const fs::path p = dir / (id + ".csv");
    if (fs::exists(p)) out.push_back(read_gauge_csv(p, id));
  }
  if (out.empty()) throw ConfigError("no observation file matches a surrogate gauge in " + dir.string());
  return out;
}

std::vector<std::optional<std::pair<int, int>>> arrival_windows(
    const Eigen::MatrixXd& outputs, std::size_t gauges, std::size_t times, double threshold) {
  if (static_cast<std::size_t>(outputs.cols()) != gauges * times) {
    throw DimensionMismatch("arrival_windows: output count != gauges * times");
  }
  std::vector<std::optional<std::pair<int, int>>> out(gauges);
  for (Eigen::Index r = 0; r < outputs.rows(); ++r) {
    for (std::size_t g = 0; g < gauges; ++g) {
      for (std::size_t t = 0; t < times; ++t) {
        if (std::abs(outputs(r, static_cast<Eigen::Index>(g * times + t))) >= threshold) {
          const int ti = static_cast<int>(t);
          auto& w = out[g];
          w = w ? std::pair{std::min(w->first, ti), std::max(w->second, ti)} : std::pair{ti, ti};
          break;
        }
      }
    }
  }
  return out;
}

void cmd_design(const PipelineConfig& cfg, const fs::path& out) {
  const Layout lay{out};
  const int m = static_cast<int>(cfg.model.num_subfaults());
  save_design(lay.design_dir(DesignKind::smolyak),
              design_from_quadrature(smolyak_grid(m, cfg.design.smolyak_level)), cfg);
  save_design(lay.design_dir(DesignKind::lhs),
              lhs_sample(m, cfg.design.lhs_n, cfg.design.lhs_seed), cfg);
}

bool cmd_ensemble(const PipelineConfig& cfg, const fs::path& out, DesignKind kind) {
  const Layout lay{out};
  auto [design, hash] = load_design(lay.design_dir(kind));
  if (design.dim() != static_cast<int>(cfg.model.num_subfaults())) {
    throw IntegrityError("design dimension " + std::to_string(design.dim()) + " != " +
                         std::to_string(cfg.model.num_subfaults()) + " subfaults");
  }
  EnsembleMatrix ens = run_ensemble(design, cfg.model, cfg.bounds, cfg.workers);
  ens.design_hash = hash;
  save_ensemble(lay.ensemble_dir(kind), ens, cfg);
  return ens.complete();
}

namespace {

// Loads an ensemble and checks it against its design and the current model.
std::pair<StoredEnsemble, DesignMatrix> load_checked(const PipelineConfig& cfg,
                                                     const Layout& lay, DesignKind kind) {
  StoredEnsemble ens = load_ensemble(lay.ensemble_dir(kind));
  auto [design, hash] = load_design(lay.design_dir(kind));
  if (ens.design_hash != hash) {
    throw IntegrityError("ensemble '" + to_string(kind) + "' was built from design " +
                         ens.design_hash.substr(0, 12) + " but the design on disk is " +
                         hash.substr(0, 12) + "; rerun 'ensemble'");
  }
  const Manifest m = Manifest::read(lay.ensemble_dir(kind) / "manifest.txt");
  if (m.require("model_hash") != cfg.model_hash()) {
    throw IntegrityError("ensemble '" + to_string(kind) +
                         "' was computed with a different model configuration; rerun 'ensemble'");
  }
  if (!ens.failed.empty()) {
    throw IntegrityError("ensemble '" + to_string(kind) + "' is incomplete: " +
                         std::to_string(ens.failed.size()) + " failed realizations");
  }
  if (static_cast<std::size_t>(ens.outputs.rows()) != design.size()) {
    throw IntegrityError("ensemble and design sizes differ");
  }
  return {std::move(ens), std::move(design)};
}

}  // namespace

void cmd_fit(const PipelineConfig& cfg, const fs::path& out) {
  const Layout lay{out};
  const DesignKind kind = training_kind(cfg.fit.solver);
  auto [ens, design] = load_checked(cfg, lay, kind);
  const PCBasis basis(design.dim(), cfg.fit.order);
  PCExpansion exp;
  Eigen::MatrixXd report;
  if (cfg.fit.solver == Solver::nisp) {
    SparseQuadrature quad;
    quad.nodes = design.points;
    quad.weights = design.weights;
    quad.level = design.level;
    exp = nisp_project(ens.outputs, quad, basis, ens.labels());
  } else {
    BpdnFitOptions opts = cfg.fit.bpdn;
    opts.workers = cfg.workers;
    BpdnFit fit = fit_bpdn(design.points, ens.outputs, basis, opts, ens.labels());
    report.resize(static_cast<Eigen::Index>(fit.report.size()), 7);
    for (std::size_t j = 0; j < fit.report.size(); ++j) {
      const auto& r = fit.report[j];
      report.row(static_cast<Eigen::Index>(j)) << r.label.gauge, ens.times[static_cast<std::size_t>(r.label.time_index)],
          r.delta, r.residual_norm, r.iterations, r.nonzeros, r.converged ? 1.0 : 0.0;
    }
    exp = std::move(fit.expansion);
  }
  const std::string training_hash =
      Manifest::read(lay.ensemble_dir(kind) / "manifest.txt").require("outputs_sha256");
  save_expansion(lay.expansion_dir(), exp, ens.gauge_ids, ens.times, cfg, training_hash);
  if (report.size() > 0) {
    write_csv(lay.expansion_dir() / "fit_report.csv",
              {"gauge_index", "time_s", "delta", "residual_norm", "iterations", "nonzeros", "converged"},
              report);
  } else if (fs::exists(lay.expansion_dir() / "fit_report.csv")) {
    fs::remove(lay.expansion_dir() / "fit_report.csv");
  }
}

void cmd_validate(const PipelineConfig& cfg, const fs::path& out) {
  const Layout lay{out};
  const StoredExpansion se = load_expansion(lay.expansion_dir());
  const Manifest em = Manifest::read(lay.expansion_dir() / "manifest.txt");
  const DesignKind train = design_kind_from_string(em.require("training_design"));
  const DesignKind hold = train == DesignKind::lhs ? DesignKind::smolyak : DesignKind::lhs;
  auto [ens, design] = load_checked(cfg, lay, hold);
  if (ens.gauge_ids != se.gauge_ids || ens.times != se.times) {
    throw IntegrityError("holdout ensemble outputs do not match the expansion outputs");
  }
  const std::size_t n_g = ens.gauge_ids.size();
  const std::size_t n_t = ens.times.size();
  const auto errs = nre(se.expansion, design.points, ens.outputs);
  const auto windows = arrival_windows(ens.outputs, n_g, n_t, cfg.arrival_threshold_m);

  Eigen::MatrixXd table(static_cast<Eigen::Index>(errs.size()), 4);
  double sum = 0.0;
  int count = 0;
  double peak_arrival = 0.0;
  Manifest summary;
  for (std::size_t g = 0; g < n_g; ++g) {
    double peak_g = 0.0;
    for (std::size_t t = 0; t < n_t; ++t) {
      const std::size_t c = g * n_t + t;
      const auto& e = errs[c];
      const bool in_window = windows[g] && static_cast<int>(t) >= windows[g]->first &&
                             static_cast<int>(t) <= windows[g]->second;
      table.row(static_cast<Eigen::Index>(c)) << static_cast<double>(g), ens.times[t],
          e ? *e : std::numeric_limits<double>::quiet_NaN(), in_window ? 1.0 : 0.0;
      if (!e) continue;
      sum += *e;
      ++count;
      if (in_window) peak_g = std::max(peak_g, *e);
    }
    summary.set("peak_nre_arrival." + ens.gauge_ids[g], peak_g);
    peak_arrival = std::max(peak_arrival, peak_g);
  }
  write_csv(lay.validation_dir() / "nre.csv", {"gauge_index", "time_s", "nre", "arrival_window"}, table);

  // CDF comparison at each gauge's time of largest ensemble spread.
  const Eigen::MatrixXd draws = sample_surrogate(
      se.expansion, static_cast<std::size_t>(cfg.validation.cdf_samples), cfg.validation.seed);
  for (std::size_t g = 0; g < n_g; ++g) {
    Eigen::Index best = static_cast<Eigen::Index>(g * n_t);
    double best_var = -1.0;
    for (std::size_t t = 0; t < n_t; ++t) {
      const auto c = static_cast<Eigen::Index>(g * n_t + t);
      const double var = (ens.outputs.col(c).array() - ens.outputs.col(c).mean()).square().mean();
      if (var > best_var) {
        best_var = var;
        best = c;
      }
    }
    const Eigen::VectorXd a = ens.outputs.col(best);
    const Eigen::VectorXd b = draws.col(best);
    const std::span<const double> sa(a.data(), static_cast<std::size_t>(a.size()));
    const std::span<const double> sb(b.data(), static_cast<std::size_t>(b.size()));
    const EmpiricalCdf fa(sa), fb(sb);
    std::vector<double> xs(fa.support());
    xs.insert(xs.end(), fb.support().begin(), fb.support().end());
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    Eigen::MatrixXd cdf(static_cast<Eigen::Index>(xs.size()), 3);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      cdf.row(static_cast<Eigen::Index>(i)) << xs[i], fa(xs[i]), fb(xs[i]);
    }
    write_csv(lay.validation_dir() / ("cdf_" + ens.gauge_ids[g] + ".csv"),
              {"eta_m", "cdf_ensemble", "cdf_surrogate"}, cdf);
    const double time = ens.times[static_cast<std::size_t>(best) - g * n_t];
    summary.set("cdf_time_s." + ens.gauge_ids[g], time);
    summary.set("ks_statistic." + ens.gauge_ids[g], ks_statistic(sa, sb));
  }
  summary.set("holdout_design", to_string(hold));
  summary.set("mean_nre", count ? sum / count : std::numeric_limits<double>::quiet_NaN());
  summary.set("peak_nre_arrival", peak_arrival);
  summary.set("defined_columns", count);
  summary.set("config_hash", cfg.hash());
  summary.set("expansion_sha256", em.require("coefficients_sha256"));
  summary.write(lay.validation_dir() / "summary.txt");
}

void cmd_moments(const PipelineConfig& cfg, const fs::path& out) {
  const Layout lay{out};
  const StoredExpansion se = load_expansion(lay.expansion_dir());
  const auto bands = moment_bands(se.expansion, se.times);
  for (const auto& b : bands) {
    Eigen::MatrixXd t(static_cast<Eigen::Index>(b.times.size()), 4);
    for (std::size_t i = 0; i < b.times.size(); ++i) {
      t.row(static_cast<Eigen::Index>(i)) << b.times[i], b.mean[i], b.lower[i], b.upper[i];
    }
    write_csv(lay.moments_dir() / ("band_" + se.gauge_ids.at(static_cast<std::size_t>(b.gauge)) + ".csv"),
              {"time_s", "mean_m", "lower_m", "upper_m"}, t);
  }
  const int m = se.expansion.basis().dim();
  std::vector<std::vector<SobolIndex>> sobol;
  for (int d = 0; d < m; ++d) sobol.push_back(sobol_indices(se.expansion, d));
  std::map<int, std::vector<std::size_t>> by_gauge;
  for (std::size_t c = 0; c < se.expansion.num_outputs(); ++c) {
    by_gauge[se.expansion.labels()[c].gauge].push_back(c);
  }
  std::vector<std::string> header = {"time_s"};
  for (int d = 0; d < m; ++d) header.push_back("main_s" + std::to_string(d + 1));
  for (int d = 0; d < m; ++d) header.push_back("total_s" + std::to_string(d + 1));
  for (const auto& [g, cols] : by_gauge) {
    Eigen::MatrixXd t(static_cast<Eigen::Index>(cols.size()), 1 + 2 * m);
    for (std::size_t i = 0; i < cols.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      t(r, 0) = se.times.at(static_cast<std::size_t>(se.expansion.labels()[cols[i]].time_index));
      for (int d = 0; d < m; ++d) {
        t(r, 1 + d) = sobol[static_cast<std::size_t>(d)][cols[i]].main;
        t(r, 1 + m + d) = sobol[static_cast<std::size_t>(d)][cols[i]].total;
      }
    }
    write_csv(lay.moments_dir() / ("sobol_" + se.gauge_ids.at(static_cast<std::size_t>(g)) + ".csv"),
              header, t);
  }
  Manifest mf;
  mf.set("artifact", std::string("moments"));
  mf.set("config_hash", cfg.hash());
  mf.set("expansion_sha256", Manifest::read(lay.expansion_dir() / "manifest.txt").require("coefficients_sha256"));
  mf.write(lay.moments_dir() / "manifest.txt");
}

std::vector<ParameterSummary> cmd_infer(const PipelineConfig& cfg, const fs::path& out,
                                        const fs::path& observations, const fs::path& dest_in) {
  const Layout lay{out};
  const fs::path dest = dest_in.empty() ? lay.inference_dir() : dest_in;
  const StoredExpansion se = load_expansion(lay.expansion_dir());
  const auto records = load_observations(observations, se.gauge_ids);
  ObservationSet obs = align_observations(records, se.gauge_ids, se.times, se.expansion.labels());
  if (obs.num_points() == 0) throw ConfigError("no observation falls on the surrogate time base");
  if (obs.dropped > 0) {
    fmt::print(stderr, "warning: {} observations outside the snapping tolerance were dropped\n",
               obs.dropped);
  }
  const PosteriorModel model(se.expansion, obs, cfg.bounds);

  PosteriorState init;
  init.slips.assign(model.num_slips(), 0.5 * (cfg.bounds.min + cfg.bounds.max));
  init.variances = model.mean_squared_residual(init.slips);
  for (double& v : init.variances) v = std::max(v, 1e-8);

  AdaptiveMetropolisOptions opts;
  opts.iterations = cfg.mcmc.iterations;
  opts.adapt_start = cfg.mcmc.adapt_start;
  opts.initial_step = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(model.num_params()));
  opts.initial_step.head(static_cast<Eigen::Index>(model.num_slips()))
      .setConstant(0.1 * (cfg.bounds.max - cfg.bounds.min));
  const PosteriorChain chain = adaptive_metropolis(
      [&](const Eigen::VectorXd& u) { return model.log_target(u); },
      PosteriorModel::to_sampler(init), cfg.mcmc.seed, opts);

  const auto m = static_cast<Eigen::Index>(model.num_slips());
  const auto p = static_cast<Eigen::Index>(model.num_params());
  std::vector<std::string> names;
  for (Eigen::Index i = 0; i < m; ++i) names.push_back("s" + std::to_string(i + 1));
  for (const auto& g : obs.gauge_ids) names.push_back("sigma2_" + g);

  std::vector<std::string> header = {"iteration"};
  header.insert(header.end(), names.begin(), names.end());
  header.push_back("log_posterior");
  header.push_back("accepted");
  Eigen::MatrixXd table(chain.size(), p + 3);
  for (long t = 0; t < chain.size(); ++t) {
    const Eigen::VectorXd u = chain.samples.row(t).transpose();
    table(t, 0) = static_cast<double>(t);
    table.row(t).segment(1, m) = u.head(m).transpose();
    table.row(t).segment(1 + m, p - m) = u.tail(p - m).array().exp().matrix().transpose();
    table(t, p + 1) = chain.log_target[static_cast<std::size_t>(t)] - u.tail(p - m).sum();
    table(t, p + 2) = chain.accepted[static_cast<std::size_t>(t)];
  }
  write_csv(dest / "chain.csv", header, table);

  const long stride = std::max<long>(1, chain.size() / 2000);
  // Running means in physical units (variances in m^2), as in chain.csv.
  PosteriorChain physical;
  physical.samples = table.middleCols(1, p);
  std::vector<std::vector<double>> rm;
  for (Eigen::Index i = 0; i < p; ++i) rm.push_back(running_mean(physical, static_cast<std::size_t>(i)));
  Eigen::MatrixXd rmt((chain.size() + stride - 1) / stride, p + 1);
  for (long t = 0, r = 0; t < chain.size(); t += stride, ++r) {
    rmt(r, 0) = static_cast<double>(t);
    for (Eigen::Index i = 0; i < p; ++i) rmt(r, 1 + i) = rm[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)];
  }
  std::vector<std::string> rm_header = {"iteration"};
  rm_header.insert(rm_header.end(), names.begin(), names.end());
  write_csv(dest / "running_mean.csv", rm_header, rmt);

  const PosteriorChain post = discard_burn_in(chain, cfg.mcmc.burn_in);
  KdeOptions kopt;
  kopt.grid_points = cfg.mcmc.kde_grid;
  std::vector<ParameterSummary> summary;
  for (Eigen::Index i = 0; i < p; ++i) {
    std::vector<double> v(static_cast<std::size_t>(post.size()));
    for (long t = 0; t < post.size(); ++t) {
      const double u = post.samples(t, i);
      v[static_cast<std::size_t>(t)] = i < m ? u : std::exp(u);
    }
    const DensityGrid d = kde(v, kopt);
    Eigen::MatrixXd grid(static_cast<Eigen::Index>(d.x.size()), 2);
    for (std::size_t k = 0; k < d.x.size(); ++k) grid.row(static_cast<Eigen::Index>(k)) << d.x[k], d.density[k];
    write_csv(dest / ("kde_" + names[static_cast<std::size_t>(i)] + ".csv"), {"value", "density"}, grid);
    ParameterSummary s;
    s.name = names[static_cast<std::size_t>(i)];
    const MapEstimate me = map_estimate(d);
    s.map = me.value;
    s.map_tied = me.tied;
    double sum = 0.0;
    for (double x : v) sum += x;
    s.mean = sum / static_cast<double>(v.size());
    std::tie(s.hpd_lo, s.hpd_hi) = hpd_interval(v, cfg.mcmc.hpd_mass);
    summary.push_back(s);
  }
  write_text_atomic(dest / "summary.csv", summary_csv(summary));

  Manifest mf;
  mf.set("artifact", std::string("inference"));
  mf.set("config_hash", cfg.hash());
  mf.set("expansion_sha256", Manifest::read(lay.expansion_dir() / "manifest.txt").require("coefficients_sha256"));
  for (const auto& r : records) mf.set("observations_sha256." + r.id, sha256_file(observations / (r.id + ".csv")));
  mf.set("seed", std::to_string(cfg.mcmc.seed));
  mf.set("iterations", static_cast<long long>(chain.size()));
  mf.set("burn_in", cfg.mcmc.burn_in);
  mf.set("acceptance_rate", chain.acceptance_rate());
  mf.set("observations_used", obs.num_points());
  mf.set("observations_dropped", obs.dropped);
  const auto areas = cfg.subfault_areas();
  std::vector<double> map_slips, mean_slips;
  for (Eigen::Index i = 0; i < m; ++i) {
    map_slips.push_back(summary[static_cast<std::size_t>(i)].map);
    mean_slips.push_back(summary[static_cast<std::size_t>(i)].mean);
  }
  for (const auto& [tag, slips] : {std::pair{"map", map_slips}, std::pair{"mean", mean_slips}}) {
    try {
      const SeismicMoment sm = seismic_moment(slips, cfg.moment.rigidity_pa, areas);
      mf.set(std::string("moment_nm.") + tag, sm.moment);
      mf.set(std::string("magnitude_mw.") + tag, sm.magnitude);
    } catch (const NumericError&) {
      mf.set(std::string("moment_nm.") + tag, 0.0);
    }
  }
  mf.write(dest / "manifest.txt");
  return summary;
}

TwinReport cmd_twin(const PipelineConfig& cfg, const fs::path& out) {
  const Layout lay{out};
  if (!fs::exists(lay.expansion_dir() / "manifest.txt")) {
    const DesignKind kind = training_kind(cfg.fit.solver);
    if (!fs::exists(lay.design_dir(kind) / "manifest.txt")) cmd_design(cfg, out);
    if (!fs::exists(lay.ensemble_dir(kind) / "manifest.txt") && !cmd_ensemble(cfg, out, kind)) {
      throw NumericError("training ensemble has failed realizations");
    }
    cmd_fit(cfg, out);
  }
  auto records = simulate(cfg.model, cfg.twin.slips);
  std::mt19937_64 rng(cfg.twin.noise_seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  const fs::path obs_dir = lay.twin_dir() / "observations";
  for (auto& r : records) {
    for (double& e : r.eta) e += cfg.twin.noise_sigma * noise(rng);
    write_gauge_csv(obs_dir / (r.id + ".csv"), r);
  }
  TwinReport rep;
  rep.summary = cmd_infer(cfg, out, obs_dir, lay.twin_dir() / "inference");
  rep.acceptance_rate = Manifest::read(lay.twin_dir() / "inference" / "manifest.txt")
                            .require_double("acceptance_rate");
  const std::size_t m = cfg.twin.slips.size();
  Manifest report;
  report.set("artifact", std::string("twin_report"));
  report.set("config_hash", cfg.hash());
  report.set("noise_sigma_m", cfg.twin.noise_sigma);
  report.set("noise_seed", std::to_string(cfg.twin.noise_seed));
  for (std::size_t i = 0; i < m; ++i) {
    const auto& s = rep.summary[i];
    const double truth = cfg.twin.slips[i];
    const bool in = truth >= s.hpd_lo && truth <= s.hpd_hi;
    rep.slip_covered.push_back(in);
    rep.slips_covered += in ? 1 : 0;
    report.set(s.name + ".planted", truth);
    report.set(s.name + ".map", s.map);
    report.set(s.name + ".mean", s.mean);
    report.set(s.name + ".hpd", format_double(s.hpd_lo) + "," + format_double(s.hpd_hi));
    report.set(s.name + ".covered", std::string(in ? "yes" : "no"));
  }
  rep.sigma_within_factor_2 = true;
  for (std::size_t j = m; j < rep.summary.size(); ++j) {
    const double sh = std::sqrt(std::max(rep.summary[j].map, 0.0));
    rep.sigma_hat.push_back(sh);
    const bool ok = sh >= 0.5 * cfg.twin.noise_sigma && sh <= 2.0 * cfg.twin.noise_sigma;
    rep.sigma_within_factor_2 = rep.sigma_within_factor_2 && ok;
    report.set("sigma_hat." + rep.summary[j].name.substr(7), sh);
  }
  rep.recovered = rep.slips_covered + 1 >= static_cast<int>(m) && rep.sigma_within_factor_2;
  report.set("slips_covered", rep.slips_covered);
  report.set("sigma_within_factor_2", std::string(rep.sigma_within_factor_2 ? "yes" : "no"));
  report.set("acceptance_rate", rep.acceptance_rate);
  report.set("verdict", std::string(rep.recovered ? "recovered" : "not recovered"));
  report.write(lay.twin_dir() / "report.txt");
  return rep;
}

void cmd_sweep(const PipelineConfig& cfg, const fs::path& out) {
  const Layout lay{out};
  auto [stored, design] = load_checked(cfg, lay, DesignKind::smolyak);
  EnsembleMatrix ens;
  ens.gauge_ids = stored.gauge_ids;
  ens.times = stored.times;
  const std::size_t n_t = stored.times.size();
  for (Eigen::Index r = 0; r < stored.outputs.rows(); ++r) {
    Realization real;
    real.ok = true;
    real.eta.resize(static_cast<Eigen::Index>(stored.gauge_ids.size()), static_cast<Eigen::Index>(n_t));
    for (std::size_t g = 0; g < stored.gauge_ids.size(); ++g) {
      for (std::size_t t = 0; t < n_t; ++t) {
        real.eta(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(t)) =
            stored.outputs(r, static_cast<Eigen::Index>(g * n_t + t));
      }
    }
    ens.rows.push_back(std::move(real));
  }
  const SweepResult res = ensemble_sweep(ens, design, cfg.bounds, cfg.arrival_threshold_m);
  for (const auto& tab : res.tables) {
    Eigen::MatrixXd t(static_cast<Eigen::Index>(tab.rows.size()), 3);
    for (std::size_t i = 0; i < tab.rows.size(); ++i) {
      const auto& r = tab.rows[i];
      t.row(static_cast<Eigen::Index>(i)) << r.slip,
          r.arrival ? *r.arrival : std::numeric_limits<double>::quiet_NaN(), r.mwa;
    }
    write_csv(lay.sweep_dir() / (tab.gauge + "_s" + std::to_string(tab.slip_index + 1) + ".csv"),
              {"slip_m", "arrival_s", "mwa_m"}, t);
  }
  Manifest mf;
  mf.set("artifact", std::string("sweep"));
  mf.set("config_hash", cfg.hash());
  mf.set("tables", res.tables.size());
  mf.set("note", res.note);
  mf.write(lay.sweep_dir() / "manifest.txt");
}

}  // namespace slipuq
