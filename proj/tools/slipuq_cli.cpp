#include "slipuq/error.hpp"
#include "slipuq/io.hpp"
#include "slipuq/pipeline.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace slipuq;

namespace {

struct CommonArgs {
  std::string config;
  std::string out = "run";
  std::optional<int> workers;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> lhs_seed;
  std::optional<std::uint64_t> noise_seed;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("-c,--config", args.config, "JSON configuration file")->required();
  cmd->add_option("-o,--out", args.out, "output directory")->capture_default_str();
  cmd->add_option("-j,--workers", args.workers, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", args.seed, "override mcmc.seed");
  cmd->add_option("--lhs-seed", args.lhs_seed, "override design.lhs_seed");
  cmd->add_option("--noise-seed", args.noise_seed, "override twin.noise_seed");
}

PipelineConfig resolve(const CommonArgs& args) {
  PipelineConfig cfg = load_config(args.config);
  if (args.workers) cfg.workers = *args.workers;
  if (args.seed) cfg.mcmc.seed = *args.seed;
  if (args.lhs_seed) cfg.design.lhs_seed = *args.lhs_seed;
  if (args.noise_seed) cfg.twin.noise_seed = *args.noise_seed;
  cfg.validate();
  return cfg;
}

int run(int argc, char** argv) {
  CLI::App app{"Fault-slip inversion with polynomial-chaos surrogates"};
  app.require_subcommand(1);
  CommonArgs args;
  std::string design_kind = "all";
  std::string observations;

  auto* design = app.add_subcommand("design", "write the Smolyak and LHS designs");
  auto* ensemble = app.add_subcommand("ensemble", "run the forward model over a design");
  ensemble->add_option("--design", design_kind, "smolyak, lhs or all")
      ->check(CLI::IsMember({"smolyak", "lhs", "all"}))
      ->capture_default_str();
  auto* fit = app.add_subcommand("fit", "compute PC coefficients");
  auto* validate = app.add_subcommand("validate", "NRE and CDF checks on the holdout ensemble");
  auto* moments = app.add_subcommand("moments", "mean and +-2 sigma bands, Sobol indices");
  auto* infer = app.add_subcommand("infer", "sample the slip posterior given observations");
  infer->add_option("--observations", observations, "directory of <gauge>.csv files")->required();
  auto* twin = app.add_subcommand("twin", "synthetic recovery of planted slips");
  auto* sweep = app.add_subcommand("sweep", "arrival time and MWA along design axis slices");
  for (auto* c : {design, ensemble, fit, validate, moments, infer, twin, sweep}) add_common(c, args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : static_cast<int>(ExitCode::config_error);
  }

  const PipelineConfig cfg = resolve(args);
  const fs::path out = args.out;

  if (design->parsed()) {
    cmd_design(cfg, out);
    fmt::print("designs written to {}\n", (out / "design").string());
  } else if (ensemble->parsed()) {
    bool ok = true;
    for (DesignKind k : {DesignKind::smolyak, DesignKind::lhs}) {
      if (design_kind != "all" && design_kind != to_string(k)) continue;
      const bool complete = cmd_ensemble(cfg, out, k);
      fmt::print("ensemble {}: {}\n", to_string(k), complete ? "complete" : "incomplete");
      ok = ok && complete;
    }
    if (!ok) {
      fmt::print(stderr, "error: failed realizations; see failures.txt in the ensemble directory\n");
      return static_cast<int>(ExitCode::numeric_failure);
    }
  } else if (fit->parsed()) {
    cmd_fit(cfg, out);
    fmt::print("expansion written to {}\n", (out / "expansion").string());
  } else if (validate->parsed()) {
    cmd_validate(cfg, out);
    const Manifest s = Manifest::read(out / "validation" / "summary.txt");
    fmt::print("mean NRE {}  peak NRE at arrival {}\n", s.require("mean_nre"),
               s.require("peak_nre_arrival"));
  } else if (moments->parsed()) {
    cmd_moments(cfg, out);
    fmt::print("bands written to {}\n", (out / "moments").string());
  } else if (infer->parsed()) {
    for (const auto& s : cmd_infer(cfg, out, observations)) {
      fmt::print("{:<12} MAP {:>10.5g}  mean {:>10.5g}  HPD [{:.5g}, {:.5g}]\n", s.name, s.map,
                 s.mean, s.hpd_lo, s.hpd_hi);
    }
  } else if (twin->parsed()) {
    const TwinReport r = cmd_twin(cfg, out);
    for (std::size_t i = 0; i < r.summary.size(); ++i) {
      const auto& s = r.summary[i];
      fmt::print("{:<12} MAP {:>10.5g}  mean {:>10.5g}  HPD [{:.5g}, {:.5g}]{}\n", s.name, s.map,
                 s.mean, s.hpd_lo, s.hpd_hi,
                 i < r.slip_covered.size() ? (r.slip_covered[i] ? "  covered" : "  MISSED") : "");
    }
    fmt::print("verdict: {} ({} slips covered, sigma within factor 2: {})\n",
               r.recovered ? "recovered" : "not recovered", r.slips_covered,
               r.sigma_within_factor_2 ? "yes" : "no");
  } else if (sweep->parsed()) {
    cmd_sweep(cfg, out);
    fmt::print("sweep tables written to {}\n", (out / "sweep").string());
  }
  return static_cast<int>(ExitCode::ok);
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return static_cast<int>(ExitCode::config_error);
  } catch (const DimensionMismatch& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return static_cast<int>(ExitCode::config_error);
  } catch (const IntegrityError& e) {
    fmt::print(stderr, "integrity failure: {}\n", e.what());
    return static_cast<int>(ExitCode::integrity_failure);
  } catch (const NumericError& e) {
    fmt::print(stderr, "numeric failure: {}\n", e.what());
    return static_cast<int>(ExitCode::numeric_failure);
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return static_cast<int>(ExitCode::numeric_failure);
  }
}
