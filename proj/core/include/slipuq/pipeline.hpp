#pragma once

#include "slipuq/coeff_solvers.hpp"
#include "slipuq/design.hpp"
#include "slipuq/forward_swe.hpp"
#include "slipuq/inference.hpp"
#include "slipuq/pc_basis.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace slipuq {

enum class Solver { nisp, bpdn };

struct DesignSpec {
  int smolyak_level = 3;
  int lhs_n = 300;
  std::uint64_t lhs_seed = 11;
};

struct FitSpec {
  Solver solver = Solver::bpdn;
  int order = 3;
  BpdnFitOptions bpdn;
};

struct McmcSpec {
  long iterations = 200000;
  double burn_in = 0.2;
  std::uint64_t seed = 42;
  long adapt_start = 1000;
  double hpd_mass = 0.95;
  int kde_grid = 512;
};

struct TwinSpec {
  std::vector<double> slips = {2.7, 23.0, 0.3, 6.5, 21.5, 0.3};
  double noise_sigma = 0.05;
  std::uint64_t noise_seed = 7;
};

struct ValidationSpec {
  int cdf_samples = 10000;  // surrogate draws for the CDF comparison
  std::uint64_t seed = 3;
};

struct MomentSpec {
  double rigidity_pa = 4.0e10;
  std::vector<double> areas_m2;  // empty: subfault footprint areas
};

struct PipelineConfig {
  ModelConfig model;
  SlipBounds bounds;
  DesignSpec design;
  FitSpec fit;
  McmcSpec mcmc;
  TwinSpec twin;
  ValidationSpec validation;
  MomentSpec moment;
  double arrival_threshold_m = 0.05;
  int workers = 1;  // not part of the hash: outputs do not depend on it

  // Resolved configuration (defaults filled in) as canonical JSON.
  std::string canonical_json() const;
  std::string hash() const;
  // sha256 of the model and bounds sections only.
  std::string model_hash() const;
  std::vector<double> subfault_areas() const;
  void validate() const;
};

std::string to_string(Solver s);

// Parses the JSON configuration. Unknown keys and type errors throw
// ConfigError; missing keys take the defaults above and default_model_config().
PipelineConfig parse_config(const std::string& json_text);
PipelineConfig load_config(const std::filesystem::path& path);

// Output-column name "<gauge id>:<time index>".
std::string output_name(const std::string& gauge, int time_index);

struct StoredEnsemble {
  std::vector<std::string> gauge_ids;
  std::vector<double> times;
  Eigen::MatrixXd outputs;  // realizations x outputs
  std::vector<std::size_t> failed;
  std::string design_hash;

  std::vector<OutputLabel> labels() const;
};

struct StoredExpansion {
  PCExpansion expansion;
  std::vector<std::string> gauge_ids;
  std::vector<double> times;
};

// Artifact layout below the output directory.
struct Layout {
  std::filesystem::path root;

  std::filesystem::path design_dir(DesignKind k) const;
  std::filesystem::path ensemble_dir(DesignKind k) const;
  std::filesystem::path expansion_dir() const { return root / "expansion"; }
  std::filesystem::path validation_dir() const { return root / "validation"; }
  std::filesystem::path moments_dir() const { return root / "moments"; }
  std::filesystem::path inference_dir() const { return root / "inference"; }
  std::filesystem::path twin_dir() const { return root / "twin"; }
  std::filesystem::path sweep_dir() const { return root / "sweep"; }
};

void save_design(const std::filesystem::path& dir, const DesignMatrix& design,
                 const PipelineConfig& cfg);
// Returns the design and the sha256 of its points file.
std::pair<DesignMatrix, std::string> load_design(const std::filesystem::path& dir);

void save_ensemble(const std::filesystem::path& dir, const EnsembleMatrix& ens,
                   const PipelineConfig& cfg);
StoredEnsemble load_ensemble(const std::filesystem::path& dir);

void save_expansion(const std::filesystem::path& dir, const PCExpansion& exp,
                    const std::vector<std::string>& gauge_ids,
                    const std::vector<double>& times, const PipelineConfig& cfg,
                    const std::string& training_hash);
StoredExpansion load_expansion(const std::filesystem::path& dir);

// Observation directory: one "<gauge id>.csv" per gauge (time_s, eta_m).
std::vector<GaugeRecord> load_observations(const std::filesystem::path& dir,
                                           const std::vector<std::string>& gauge_ids);

struct TwinReport {
  std::vector<ParameterSummary> summary;
  std::vector<bool> slip_covered;
  int slips_covered = 0;
  std::vector<double> sigma_hat;  // sqrt of the MAP variance per gauge
  bool sigma_within_factor_2 = false;
  bool recovered = false;
  double acceptance_rate = 0.0;
};

// Each stage reads its inputs from and writes its outputs below `out`.
void cmd_design(const PipelineConfig& cfg, const std::filesystem::path& out);
// Returns false when some realization failed; the ensemble is still written
// and marked incomplete.
bool cmd_ensemble(const PipelineConfig& cfg, const std::filesystem::path& out,
                  DesignKind kind);
void cmd_fit(const PipelineConfig& cfg, const std::filesystem::path& out);
void cmd_validate(const PipelineConfig& cfg, const std::filesystem::path& out);
void cmd_moments(const PipelineConfig& cfg, const std::filesystem::path& out);
std::vector<ParameterSummary> cmd_infer(const PipelineConfig& cfg,
                                        const std::filesystem::path& out,
                                        const std::filesystem::path& observations,
                                        const std::filesystem::path& dest = {});
TwinReport cmd_twin(const PipelineConfig& cfg, const std::filesystem::path& out);
void cmd_sweep(const PipelineConfig& cfg, const std::filesystem::path& out);

// Arrival windows per gauge: [first, last] time index at which any
// realization first reaches |eta| >= threshold; nullopt if none does.
std::vector<std::optional<std::pair<int, int>>> arrival_windows(
    const Eigen::MatrixXd& outputs, std::size_t gauges, std::size_t times,
    double threshold);

}  // namespace slipuq
