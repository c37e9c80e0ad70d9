#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "eitgate/analysis.hpp"

namespace eitgate {

inline constexpr const char* kToolVersion = "0.3.0";

/// Protocols the runner knows.
inline const std::vector<std::string> kProtocols{"raman_scan", "eit_spectrum", "cnot_table",
                                                 "bell",       "parity",       "ghz",
                                                 "darkstate",  "shifts"};

struct ScanAxis {
  std::string name;  // e.g. raman_detuning_mhz, coupling_detuning_mhz, phi_rad
  double start = 0.0;
  double stop = 0.0;
  int points = 0;

  std::vector<double> values() const;
  bool operator==(const ScanAxis&) const = default;
};

/// One experiment. Every physical field carries its unit in the key name;
/// unset optionals fall back to the preset's operating point.
struct ExperimentConfig {
  std::string protocol;
  std::uint64_t seed = 1;

  // [scheme]
  std::string preset = "6p32";
  double raman_power_scale = 1.0;     // 6p32: intensity ratio to the calibrated point
  double coupling_power_scale = 1.0;  // 6p32
  double probe_power_uw = 200.0;      // 7p12
  double coupling_power_mw = 50.0;    // 7p12
  double waist_um = 3.0;              // 7p12, probe and coupling
  std::optional<double> intermediate_detuning_ghz;  // 7p12
  std::optional<double> raman_detuning_mhz;
  std::optional<double> coupling_detuning_mhz;

  // [control]
  std::optional<double> rydberg_rabi_mhz;
  bool full_ladder = false;
  bool scatter_to_leakage = false;
  bool coupling_on_control = false;
  double rydberg_dephasing_khz = 0.0;

  // [geometry] / [interaction]
  std::optional<double> spacing_um;
  std::string geometry = "line";  // line | right_angle
  std::optional<double> interaction_mhz;  // V at reference distance
  std::optional<double> interaction_distance_um;

  // [pulse]
  std::optional<double> tau_us;

  // [scan]
  std::optional<ScanAxis> scan;

  // [ghz]
  std::vector<int> ghz_k{1};
  bool suppress_target_pairs = false;

  // [truth_table]
  int shots = 200;

  // [darkstate]
  double probe_rabi_mhz = 10.0;
  double coupling_rabi_mhz = 40.0;
  double detuning_ghz = 1.0;

  // [crosstalk]
  double beam_waist_um = 3.0;
  double site_separation_um = 6.0;

  // [integrator]
  std::string method = "adaptive_rk";
  double tolerance = 1e-8;
  double max_step_ns = 5.0;
  double fixed_step_ps = 2.0;
  int trajectories = 2000;
  int threads = 0;  // 0: environment default

  // [output]
  std::string out_dir = ".";
  std::string name;  // file stem, default = protocol

  bool operator==(const ExperimentConfig&) const = default;
};

struct Diagnostic {
  enum class Severity { Warning, Error };
  std::string path;  // "section.key" or "line:column"
  std::string message;
  Severity severity = Severity::Error;
};
std::string to_string(const Diagnostic& d);

struct ParseResult {
  std::optional<ExperimentConfig> config;
  std::vector<Diagnostic> diagnostics;
};

/// Parses TOML text. Syntax errors and type mismatches become diagnostics.
ParseResult parse_config(const std::string& text, const std::string& source = "config");
/// TOML text that parses back to the same config.
std::string serialize_config(const ExperimentConfig& config);

/// Errors block a run; warnings do not. Builds the model to check derived
/// quantities such as the pi-area condition.
std::vector<Diagnostic> validate_config(const ExperimentConfig& config);
bool has_errors(const std::vector<Diagnostic>& diagnostics);

/// Builds the gate model described by the config (throws ModelError).
GateModel model_from_config(const ExperimentConfig& config);

/// Git blob hash (SHA-1 of "blob <size>\0" + text), lowercase hex.
std::string content_hash(const std::string& text);

/// Default worker count: $EITGATE_THREADS if set and positive, else 1.
unsigned default_threads();

struct RunOutput {
  std::vector<std::string> files;  // written paths
  Report report;
};

/// Executes the protocol and writes CSV/JSON into config.out_dir. Throws
/// ModelError on bad inputs and IntegratorError on integration failure.
RunOutput run_experiment(const ExperimentConfig& config);

/// Writes `text` to a temporary file next to `path`, then renames it over `path`.
void write_atomic(const std::string& path, const std::string& text);

}  // namespace eitgate
