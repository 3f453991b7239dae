#pragma once

// Monte Carlo experiment orchestration, CSV/manifest emission and the runtime
// benchmark.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lrhp/channel.hpp"
#include "lrhp/hybrid.hpp"

namespace lrhp {

enum class Scheme {
  SdHybrid,
  EpHybrid,
  Altmin1,
  Altmin1Quantized,
  Altmin2Quantized,
  FullyDigital,
  NpAnalogEpDigital,
  EpAnalogNpDigital,
  DynamicSd,
  DynamicEp,
};

enum class Metric { SumRateAvg, SumRateTotal, Mse, Runtime, Trace };

std::string to_string(Scheme s);
std::string to_string(Metric m);
Scheme scheme_from_string(const std::string& name);  // ParameterError on unknown names
Metric metric_from_string(const std::string& name);

struct Sweep {
  std::string parameter = "total_power_dbm";
  std::vector<double> values{35.0};
};

struct ExperimentSpec {
  std::string name = "experiment";
  SystemConfig base;
  Sweep sweep;
  std::vector<Scheme> schemes;
  int n_trials = 1;
  std::uint64_t seed = 1;
  std::vector<Metric> outputs{Metric::SumRateAvg};
  DeltaSchedule delta_schedule = DeltaSchedule::PerOuterIteration;

  void validate() const;
};

/// Sets the named SystemConfig field; throws ParameterError for unknown names.
void apply_sweep_value(SystemConfig& config, const std::string& parameter, double value);

struct ResultRow {
  std::string experiment;
  std::string scheme;
  double sweep_value = 0.0;
  int trial = 0;
  std::uint64_t seed = 0;
  std::string metric;
  double value = 0.0;
  double wall_time_ms = 0.0;
};

/// Rows whose value depends on wall-clock time (kept out of the main CSV).
bool is_timing_metric(const std::string& metric);

/// Canonical order: experiment, scheme, sweep value, trial, metric (trace
/// entries by index).
void sort_rows(std::vector<ResultRow>& rows);

struct SchemeOutcome {
  CMatrix f_rf;  // empty for the fully-digital scheme
  CMatrix f_bb;  // the fully-digital precoder itself for that scheme
  std::vector<double> trace;
  double wall_time_ms = 0.0;

  CMatrix effective() const { return f_rf.size() == 0 ? f_bb : CMatrix(f_rf * f_bb); }
};

/// Runs one hybrid or baseline scheme against a fully-digital target. For
/// Scheme::FullyDigital the target itself is returned.
SchemeOutcome run_scheme(Scheme scheme, const CMatrix& f_fd, const SystemConfig& config,
                         DeltaSchedule schedule = DeltaSchedule::PerOuterIteration);

std::vector<ResultRow> run_experiment(const ExperimentSpec& spec, int parallelism);

/// Deterministic columns only; timing rows are skipped. Header-only for no rows.
void emit_csv(std::vector<ResultRow> rows, const std::filesystem::path& path);
/// Wall-clock columns and runtime rows.
void emit_timing_csv(std::vector<ResultRow> rows, const std::filesystem::path& path);
std::string csv_string(std::vector<ResultRow> rows);
std::vector<ResultRow> parse_csv(const std::string& text);

struct RunManifest {
  std::string experiment;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string git_describe;
  std::string preset;
  int n_trials = 0;
  std::size_t n_rows = 0;
  std::size_t n_errors = 0;
  double wall_clock_s = 0.0;
};
void emit_manifest(const RunManifest& manifest, const std::filesystem::path& path);
std::string git_describe();

struct RuntimeRow {
  std::string scheme;
  int m_rf = 0;
  int n_trials = 0;
  double mean_ms = 0.0;
  double analog_ms = 0.0;
  double digital_ms = 0.0;
};

/// Mean wall time of a full SD- and EP-based design per number of RF chains.
std::vector<RuntimeRow> runtime_benchmark(const std::vector<int>& m_rf_list, const SystemConfig& config, int n_trials,
                                          const std::vector<Scheme>& schemes = {Scheme::SdHybrid, Scheme::EpHybrid});

// -- configuration files -----------------------------------------------------

inline constexpr int kSpecSchemaVersion = 1;

/// JSON experiment file. Unknown keys are rejected. A "presets" object may
/// hold named overrides of "base" fields and "n_trials".
ExperimentSpec load_spec(const std::filesystem::path& path, const std::optional<std::string>& preset = std::nullopt);
ExperimentSpec parse_spec(const std::string& json_text, const std::optional<std::string>& preset = std::nullopt);
std::string spec_to_json(const ExperimentSpec& spec);
/// FNV-1a (64 bit) over the canonical JSON form, as 16 hex digits.
std::string config_hash(const ExperimentSpec& spec);

}  // namespace lrhp
