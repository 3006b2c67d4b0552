#pragma once

#include <complex>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "aqis/metrics.hpp"
#include "aqis/model.hpp"
#include "aqis/propagation.hpp"

namespace aqis {

using json = nlohmann::json;

enum class StateKind { none, microcanonical, thermal, coherent };

struct StateRecipe {
  StateKind kind = StateKind::none;
  std::size_t count = 0;            ///< microcanonical N_mc
  double beta = 0.0;                ///< thermal
  double max_discarded = 1e-3;      ///< thermal
  std::complex<double> alpha = 0.0; ///< coherent
  SpinDressing dressing = SpinDressing::bare;
};

struct EchoOptions {
  EchoForm form = EchoForm::phase_rate;
  double dt_min = 1e-3;
  double dt_max = 1e2;
  std::size_t count = 241;
  bool log_spacing = true;
};

struct RunOptions {
  bool exact_evolution = false;  ///< final states from RK4 instead of the adiabatic cycle
  double tau_from = 1e3;
  double tau_to = 1e4;
  std::size_t tau_count = 256;
  QuadratureControls quadrature;
  bool auto_tracked = true;      ///< tracked levels from the populated band
  IntegratorControls integrator;
  CycleSum cycle_sum = CycleSum::full;
  EchoOptions echo;
  std::size_t k_begin = 0;
  std::size_t k_end = 200;
  std::size_t bins = 20;
  std::vector<double> g1_values;
};

enum class SweepAxis { tau, n_mc, g1, spins, beta, alpha };

struct SweepGrid {
  SweepAxis axis = SweepAxis::tau;
  std::vector<double> values;
};

const char* sweep_axis_name(SweepAxis axis);

struct RunConfig {
  std::string name;
  ModelSpec model;
  RampProtocol protocol;
  StateRecipe state;
  std::vector<std::string> metrics;
  RunOptions options;
  std::optional<SweepGrid> sweep;
  json source;  ///< normalised input, the basis of the run id
};

/// Metric names understood by the pipeline, in execution order.
const std::vector<std::string>& known_metrics();

/// Throws ConfigError naming the offending key.
RunConfig parse_config(const json& j);
RunConfig load_config(const std::filesystem::path& path);

/// 16 hex digits of FNV-1a over the canonical JSON of the config.
std::string run_id(const RunConfig& config);

/// Bundled figure presets, "fig2" ... "fig7".
std::vector<std::string> preset_names();
json preset(const std::string& name);

struct Artifact {
  std::string metric;
  std::string file;
};

struct RunManifest {
  std::string id;
  RunConfig config;
  std::size_t workers = 1;
  std::filesystem::path output;
  std::vector<Artifact> artifacts;
  std::vector<std::string> scripts;
  json summary = json::object();

  json to_json() const;
};

/// Runs model -> state -> protocol -> metrics, writing CSVs, manifest.json and
/// plot scripts into `out`.
RunManifest run_pipeline(const RunConfig& config, const std::filesystem::path& out, std::size_t workers = 0);

/// Writes one plotting script per plottable artifact; none for an empty list.
/// Throws IoError when a listed CSV is missing.
std::vector<std::string> emit_plot_scripts(const std::filesystem::path& dir, const std::vector<Artifact>& artifacts);

struct SweepRow {
  double value = 0.0;
  std::string id;
  json summary = json::object();
  std::string error;
};

struct SweepResult {
  SweepGrid grid;
  std::vector<SweepRow> rows;  ///< grid order
  json summary = json::object();
};

/// Runs the pipeline for each grid value into out/points/. Completed rows are
/// journalled and skipped when the same sweep is resumed; per-point failures
/// land in the error column.
SweepResult run_sweep(const RunConfig& config, const SweepGrid& grid, const std::filesystem::path& out,
                      std::size_t workers = 0);

/// Config for one grid value, with the sweep section removed.
RunConfig sweep_point(const RunConfig& config, SweepAxis axis, double value);

/// 2 config, 3 numeric, 4 I/O, 1 anything else.
int exit_code_for(const std::exception& e);

std::string format_number(double x);

}  // namespace aqis
