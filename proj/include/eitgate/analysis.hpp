#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "eitgate/atom_model.hpp"
#include "eitgate/dynamics.hpp"
#include "eitgate/pulse.hpp"
#include "eitgate/system.hpp"

namespace eitgate {

// ---------------------------------------------------------------------------
// Single-atom closed forms

/// Dark states of the three-level {|0>, |1>, |r>} system left after
/// eliminating |e>, as vectors in that basis.
struct DarkStates {
  Eigen::Vector3cd d1;
  Eigen::Vector3cd d2;
  double x = 0.0;  // sqrt(2) Omega_p / Omega_c
};
DarkStates dark_states(double probe_rabi, double coupling_rabi);

/// H_t in the basis {|0>, |1>, |e>, |r>} (rad/s): equal probe legs, coupling
/// e<->r, |e> at -Delta.
Eigen::Matrix4cd eit_hamiltonian(double probe_rabi, double coupling_rabi, double detuning);
/// Second-order effective Hamiltonian on {|0>, |1>, |r>} after eliminating |e>.
Eigen::Matrix3cd eliminated_hamiltonian(double probe_rabi, double coupling_rabi, double detuning);

/// Omega_R = sum_fe Omega_1 Omega_0 / 2 Delta_fe over intermediates that both
/// Raman legs reach (rad/s).
double effective_rabi(const LevelScheme& scheme);

/// Differential Raman light shift at peak envelope (rad/s):
/// sum_fe (O1^2 - O0^2) / 4 D + O1^2 / 4 (D + w_q) - O0^2 / 4 (D - w_q).
double ac_stark_shift(const LevelScheme& scheme);

/// Gaussian-beam intensity at `separation` relative to the beam centre.
double crosstalk_bound(double waist, double separation);

/// sqrt(P (1 - P) / n).
double binomial_error(double p, std::size_t n);

// ---------------------------------------------------------------------------
// Two-atom measurement algebra. Each site is partitioned into {0, 1, x}
// where x collects every level outside the qubit. The reduced state is a 9x9
// matrix indexed 3 a + b (a: site 0, b: site 1, 0/1/2 = 0/1/x). An element
// survives only if each site is a qubit level on both sides or the same x
// level on both sides; x levels are then summed.

using TwoSiteMatrix = Eigen::Matrix<cd, 9, 9>;

inline constexpr int kLost = 2;
inline constexpr int pair_index(int a, int b) { return 3 * a + b; }

TwoSiteMatrix reduce_two_site(const CompositeSystem& system, const QuantumState& state);

/// Outcomes ordered {both present, site 0 present only, site 1 present only,
/// both absent}. "Present" is the qubit |0>: |1> is blown away in A, and
/// every x level counts as absent in both.
struct OutcomeDistribution {
  std::array<double, 4> a{};  // with blow-away
  std::array<double, 4> b{};  // without
};
OutcomeDistribution apply_measurement(const TwoSiteMatrix& rho);

/// A_00 / B_00; throws ModelError when B_00 = 0.
double loss_correct(double a_both, double b_both);

/// Moves population of every qubit level of site 0 (site 1) to x with
/// probability loss0 (loss1). Coherences with the lost part are discarded.
TwoSiteMatrix inject_loss(const TwoSiteMatrix& rho, double loss0, double loss1);

/// Blow-away parity A_00 + A_11 - A_01 - A_10 after Z(phi) and X(pi/2) on
/// both sites, by rotating the matrix and summing projectors.
double parity_by_rotation(const TwoSiteMatrix& rho, double phi);

/// The same parity in closed form:
/// 2 Re d - 2 |c| cos(2 phi + phi_c) + rho_xx + 2 Im(e e^{-i phi}),
/// with c = <11|rho|00>, d = <01|rho|10> and e the single-atom coherence
/// <0x|rho|1x> + <x0|rho|x1> of the surviving atom.
double parity_closed_form(const TwoSiteMatrix& rho, double phi);

/// Populations and coherences that enter the Bell fidelity, read directly
/// from the reduced state.
struct BellReport {
  double rho00 = 0.0;
  double rho11 = 0.0;
  double rho01 = 0.0;
  double rho10 = 0.0;
  cd c = 0.0;  // <11|rho|00>
  cd d = 0.0;  // <01|rho|10>
  double rho_xx = 0.0;
  double leakage = 0.0;  // any site in the leakage level d (full state only)
  double fidelity = 0.0;

  double coherence() const { return std::abs(c); }
  double coherence_phase() const { return std::arg(c); }
};
BellReport bell_report(const TwoSiteMatrix& rho);
BellReport bell_report(const CompositeSystem& system, const QuantumState& state);

/// Experimental estimator: populations measured directly, |c| taken as half
/// the parity amplitude, coherence rescaled by the two-atom survival. This is
/// what a lab reports; simulations use bell_report instead.
struct BellEstimate {
  double coherence = 0.0;
  double fidelity = 0.0;
};
BellEstimate experimental_bell_estimate(double rho00, double rho11, double parity_amplitude,
                                        double survival = 1.0);

// ---------------------------------------------------------------------------
// Scans and fits

struct ScanResult {
  std::string axis;
  std::string axis_units;
  std::string observable;
  std::vector<double> grid;
  std::vector<double> values;
  std::vector<double> errors;  // same length as values, zero when exact

  /// Throws ModelError unless the grid is strictly monotone and the columns agree.
  void validate() const;
};

struct Extremum {
  std::size_t index = 0;
  double position = 0.0;  // parabolic refinement through the neighbours
  double value = 0.0;
};
Extremum locate_minimum(const ScanResult& scan);
Extremum locate_maximum(const ScanResult& scan);

/// Least squares for amplitude cos(2 phi + phase) + offset.
struct ParityFit {
  bool ok = false;
  std::string failure;
  double amplitude = 0.0;
  double phase = 0.0;
  double offset = 0.0;
  double rms_residual = 0.0;
};
ParityFit fit_parity(const std::vector<double>& phi, const std::vector<double>& parity);

// ---------------------------------------------------------------------------
// Protocol models

/// Everything needed to run the gate protocols on one control + targets.
struct GateModel {
  std::string preset;
  LevelScheme target;
  LevelScheme control;
  InteractionSpec interaction;
  double spacing = 6.0;  // um
  double tau = 0.0;      // target pulse length, s
  double rydberg_rabi = 0.0;
  CnotOptions cnot;
  PhaseOptions phase;
  IntegratorConfig integrator;
  /// Pure dephasing rate of |r> on every atom (collapse operator sqrt(rate) |r><r|).
  double rydberg_dephasing = 0.0;
};

struct GateModelOptions {
  bool coupling_on_control = false;
  ControlOptions control;
};
/// Model at the operating point of protocol_defaults(preset_id).
GateModel make_gate_model(const std::string& preset_id, const GateModelOptions& options = {});

/// Control + `num_targets` targets; the geometry defaults to a line/star at model.spacing.
CompositeSystem build_system(const GateModel& model, std::size_t num_targets,
                             std::optional<Geometry> geometry = std::nullopt,
                             bool suppress_target_pairs = false);

/// Single Raman pulse of length tau on one isolated target starting in |1>;
/// returns P(|0>) per detuning. The coupling laser is off.
ScanResult raman_transfer_scan(const GateModel& model, const std::vector<double>& raman_detunings);

/// Raman + coupling pulse of length tau on an isolated target starting in
/// |1>; returns P(|0>) per coupling detuning. The EIT resonance is the minimum.
/// The probe power is rescaled from model.tau so the Raman area stays pi.
ScanResult eit_spectrum(const GateModel& model, const std::vector<double>& coupling_detunings,
                        double tau);

struct TruthTable {
  std::array<std::array<double, 4>, 4> raw{};        // [input][output], A_00
  std::array<std::array<double, 4>, 4> corrected{};  // A_00 / B_00
  std::array<std::array<double, 4>, 4> counts{};     // raw * shots, rounded
  std::array<std::array<double, 4>, 4> errors{};     // binomial errors of raw
  std::size_t shots = 0;
  double fidelity = 0.0;
  double corrected_fidelity = 0.0;
};

/// Labels of the computational basis, control first.
inline const std::array<std::string, 4> kBasisLabels{"00", "01", "10", "11"};
/// CNOT with control on site 0: identity with the last two rows swapped.
std::array<std::array<double, 4>, 4> ideal_cnot_table();
/// 1/4 Tr(U_meas^T U_ideal) on probability matrices.
double table_fidelity(const std::array<std::array<double, 4>, 4>& measured,
                      const std::array<std::array<double, 4>, 4>& ideal);

/// Prepares each basis state with ideal rotations, applies the CNOT, rotates
/// every candidate output back to |00> and records A_00 and A_00 / B_00.
TruthTable cnot_truth_table(const GateModel& model, std::size_t shots = 200);

struct BellRun {
  BellReport report;
  QuantumState state;  // final two-site state
  EvolutionDiagnostics diagnostics;
};
/// Bell preparation (rotations + CNOT) from |00>.
BellRun simulate_bell(const GateModel& model);

struct ParityRun {
  ScanResult curve;
  ParityFit fit;
  BellReport bell;  // of the prepared state, before analysis rotations
};
/// Prepares the Bell state once, then applies Z(phi) and X(pi/2) for every
/// phi and evaluates the blow-away parity.
ParityRun parity_curve(const GateModel& model, const std::vector<double>& phis);

enum class GhzGeometry { Line, RightAngle };
std::string to_string(GhzGeometry g);
GhzGeometry ghz_geometry_from_string(const std::string& s);

struct GhzResult {
  std::size_t k = 0;
  double fidelity = 0.0;        // (P_a + P_b) / 2 + |<a|rho|b>|
  double standard_error = 0.0;  // 0 for dense runs
  double branch_phase = 0.0;    // arg <b|rho|a>, b = |1 1...1>
  /// Overlap with (|0 0..0> - (-1)^k |1 1..1>) / sqrt(2) in the simulation frame.
  double signed_fidelity = 0.0;
  IntegratorMethod method = IntegratorMethod::AdaptiveRk;
  std::size_t dimension = 0;
  EvolutionDiagnostics diagnostics;
};
/// CNOT^k from (|0>_c + |1>_c)/sqrt(2) |0...0>_t with every target driven at
/// once. Uses model.integrator.method (trajectories or dense).
GhzResult ghz_scaling(const GateModel& model, std::size_t k,
                      GhzGeometry geometry = GhzGeometry::Line,
                      bool suppress_target_pairs = false);

// ---------------------------------------------------------------------------
// Export

/// `#` comment lines, a header row, then one row per grid point.
std::string scan_csv(const ScanResult& scan, const std::vector<std::string>& comments = {});
std::string truth_table_csv(const TruthTable& table,
                            const std::vector<std::string>& comments = {});

/// Structured report with top-level keys protocol, parameters, fidelity,
/// populations, coherence, loss (plus any extra sections).
struct Report {
  std::string protocol;
  std::map<std::string, double> parameters;
  std::map<std::string, double> fidelity;
  std::map<std::string, double> populations;
  std::map<std::string, double> coherence;
  std::map<std::string, double> loss;
  std::map<std::string, std::string> info;
};
Report bell_json_sections(const BellReport& bell, std::string protocol);
std::string report_json(const Report& report, int indent = 2);

}  // namespace eitgate
