#pragma once

#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace eitgate {

/// Raised for inputs that violate an operation's preconditions.
class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class LevelCategory { Computational, Intermediate, Rydberg, Leakage };

std::string to_string(LevelCategory c);

struct Level {
  std::string label;
  double energy_offset = 0.0;  // rad/s in the rotating frame
  LevelCategory category = LevelCategory::Computational;
  int two_f = -1;  // doubled hyperfine F for intermediate levels, -1 if unused
};

struct DecayChannel {
  std::string from;
  std::string to;
  double rate = 0.0;  // rad/s
};

/// One laser (or microwave) coupling between two levels of a single atom.
/// `envelope_id` names the beam; a pulse segment switches on every coupling
/// that shares the beam name. `detuning` is derived from the level energies
/// (E_lower - E_upper in the rotating frame) and kept for reporting.
struct DriveCoupling {
  std::string lower;
  std::string upper;
  double peak_rabi = 0.0;
  double detuning = 0.0;
  std::string envelope_id;
  double phase = 0.0;
};

/// Light shift from a far-detuned component of a beam (for example the
/// opposite Raman sideband). The level moves by `peak_shift` times the square
/// of the beam's instantaneous envelope.
struct SidebandShift {
  std::string envelope_id;
  std::string level;
  double peak_shift = 0.0;
};

/// Angular-momentum data for the optical line the intermediate levels belong
/// to (doubled quantum numbers). q0 and q1 are the mF = 0 clock states of the
/// lower and upper ground hyperfine levels; intermediates are reached with
/// sigma+ light and carry mF' = +1.
struct HyperfineLine {
  int two_i = 7;
  int two_j = 1;
  int two_jp = 3;
  int two_f_q0 = 6;
  int two_f_q1 = 8;
};

using BranchingTable = std::map<std::string, std::map<std::string, double>>;

/// Labeled level structure of one atom with its decay channels and drive
/// couplings. Immutable after construction; the `with_*` members return
/// modified copies.
class LevelScheme {
 public:
  LevelScheme(std::string name, std::vector<Level> levels, std::vector<DecayChannel> decays,
              std::vector<DriveCoupling> couplings, double reference_detuning,
              double qubit_splitting, std::vector<SidebandShift> sideband_shifts = {},
              std::optional<HyperfineLine> line = std::nullopt);

  const std::string& name() const { return name_; }
  std::span<const Level> levels() const { return levels_; }
  std::span<const DecayChannel> decays() const { return decays_; }
  std::span<const DriveCoupling> couplings() const { return couplings_; }
  std::span<const SidebandShift> sideband_shifts() const { return sideband_shifts_; }
  double reference_detuning() const { return reference_detuning_; }
  double qubit_splitting() const { return qubit_splitting_; }
  const std::optional<HyperfineLine>& line() const { return line_; }

  std::size_t dimension() const { return levels_.size(); }
  std::size_t index_of(const std::string& label) const;
  bool has_level(const std::string& label) const;
  const Level& level(const std::string& label) const { return levels_[index_of(label)]; }
  std::vector<std::string> labels_in(LevelCategory c) const;

  /// Peak Rabi frequency of the coupling lower<->upper, 0 if absent.
  double rabi(const std::string& lower, const std::string& upper) const;
  /// Total decay rate out of a level.
  double total_decay(const std::string& label) const;
  /// Intermediate-state natural linewidth (total decay of the first intermediate level).
  double intermediate_linewidth() const;

  /// Two-photon Raman detuning: q0 sits at +delta in the rotating frame.
  double raman_detuning() const { return level("q0").energy_offset; }
  /// Coupling-laser two-photon detuning: r sits at +delta_c in the rotating frame.
  double coupling_detuning() const { return level("r").energy_offset; }

  LevelScheme with_level_energy(const std::string& label, double energy) const;
  LevelScheme with_raman_detuning(double delta) const { return with_level_energy("q0", delta); }
  LevelScheme with_coupling_detuning(double delta_c) const {
    return with_level_energy("r", delta_c);
  }
  /// Scales every coupling on the named beam by `factor` (sideband shifts by factor^2).
  LevelScheme with_beam_scaled(const std::string& envelope_id, double factor) const;
  /// Replaces intermediate-state decay channels using `table` and total rate `gamma_e`.
  LevelScheme with_branching(const BranchingTable& table, double gamma_e) const;
  /// Adds (or increases) a decay channel.
  LevelScheme with_extra_decay(const std::string& from, const std::string& to, double rate) const;
  LevelScheme with_name(std::string name) const;

 private:
  void validate() const;
  void refresh_detunings();

  std::string name_;
  std::vector<Level> levels_;
  std::vector<DecayChannel> decays_;
  std::vector<DriveCoupling> couplings_;
  std::vector<SidebandShift> sideband_shifts_;
  double reference_detuning_ = 0.0;
  double qubit_splitting_ = 0.0;
  std::optional<HyperfineLine> line_;
};

/// Power-law Rydberg pair interaction V(R) = V_ref (R_ref / R)^exponent.
struct InteractionSpec {
  double reference_strength = 0.0;  // rad/s
  double reference_distance = 6.0;  // um
  double exponent = 6.0;

  void validate() const;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Site positions in um; index 0 is the control atom.
class Geometry {
 public:
  explicit Geometry(std::vector<Point2> positions);

  std::span<const Point2> positions() const { return positions_; }
  std::size_t size() const { return positions_.size(); }
  double distance(std::size_t i, std::size_t j) const;

  /// Control and target separated by `spacing` along x.
  static Geometry pair(double spacing);
  /// Control at the origin with `k` targets at distance `spacing` arranged
  /// on a line through the control (k <= 2) or on the compass points.
  static Geometry star(int k, double spacing);
  /// k = 2 with both targets at right angles around the control.
  static Geometry right_angle(double spacing);

 private:
  std::vector<Point2> positions_;
};

double interaction_strength(const InteractionSpec& spec, double distance_um);

/// Cs 81D5/2 pair interaction, V / 2pi = 34.9 MHz at 6 um.
InteractionSpec cs_rydberg_interaction();

/// V / (Omega_c^2 / 4 Delta) for a single aggregate coupling.
double eit_break_margin(double interaction, double coupling_rabi, double detuning);
/// V divided by the coupling-laser light shift of |r>, sum_fe Omega_c^2 / 4 Delta_fe.
/// Returns +inf when the scheme has no coupling-laser drive.
double eit_break_margin(const LevelScheme& scheme, double interaction);

/// Decay fractions from every intermediate level into q0, q1 and the leakage
/// level d (the remainder of the lower manifold).
BranchingTable branching_fractions(const LevelScheme& scheme);

// ---------------------------------------------------------------------------
// Presets

inline constexpr const char* kProbeBeam = "raman";
inline constexpr const char* kCouplingBeam = "coupling";
inline constexpr const char* kRydbergBeam = "rydberg";
inline constexpr const char* kMicrowaveBeam = "microwave";

/// Cs target scheme via 6P3/2 with the calibrated peak Rabi frequencies for
/// 110 nW Raman / 170 mW coupling. Scale factors are intensity ratios.
LevelScheme preset_6p32(double raman_power_scale = 1.0, double coupling_power_scale = 1.0);

/// Calibration constants of the 7P1/2 preset.
struct Preset7p12Calibration {
  double probe_power_ref = 200e-6;    // W, both Raman components
  double coupling_power_ref = 50e-3;  // W
  double waist_ref = 3.0;             // um
  double detuning_ref = 0.0;          // rad/s, set in the .cpp
  double probe_scale = 0.0;           // rad/s per unit dipole amplitude at reference
  double coupling_scale = 0.0;        // rad/s per unit Clebsch-Gordan weight at reference
  double rydberg_linewidth = 0.0;     // rad/s
  InteractionSpec interaction;        // pair interaction of the Rydberg level used
};
const Preset7p12Calibration& preset_7p12_calibration();

/// Cs target scheme via 7P1/2 (F' = 3, 4 only). Powers in W, waist in um,
/// detuning in rad/s from the 7P1/2 centroid.
LevelScheme preset_7p12(double probe_power = 200e-6, double coupling_power = 50e-3,
                        double waist = 3.0, double detuning = 0.0);

struct ControlOptions {
  /// Include the intermediate levels and the coupling-laser couplings of the
  /// target so the coupling beam can scatter from r.
  bool full_ladder = false;
  /// Count every photon scattered from the control's intermediate levels as
  /// leakage instead of using the hyperfine branching.
  bool scatter_to_leakage = false;
  /// Additional r -> d rate (rad/s).
  double extra_rydberg_loss = 0.0;
};

/// Control-atom scheme. The default effective model has {q0, q1, r, d} with a
/// direct q1<->r drive at `rydberg_rabi` on the "rydberg" beam.
LevelScheme control_scheme(const LevelScheme& target, double rydberg_rabi,
                           const ControlOptions& options = {});

/// Adds a resonant q0<->q1 microwave coupling (beam "microwave").
LevelScheme with_microwave(const LevelScheme& scheme, double rabi);

/// Two-level {q0, q1} scheme for microwave addressing studies.
LevelScheme qubit_scheme(double microwave_rabi);

/// Operating point used with a preset: pulse length, detunings, control
/// Rydberg drive and register spacing.
struct ProtocolDefaults {
  double pulse_duration = 0.0;     // s
  double raman_detuning = 0.0;     // rad/s
  double coupling_detuning = 0.0;  // rad/s
  double rydberg_rabi = 0.0;       // rad/s, control q1 <-> r
  double spacing = 0.0;            // um, control-target
  InteractionSpec interaction;
};
/// Defaults for "6p32" or "7p12"; throws ModelError for other ids.
ProtocolDefaults protocol_defaults(const std::string& preset_id);

struct PresetInfo {
  std::string id;
  std::string description;
};
std::vector<PresetInfo> preset_catalog();

/// CSV with columns from,to,fraction.
std::string branching_csv(const BranchingTable& table);

}  // namespace eitgate
