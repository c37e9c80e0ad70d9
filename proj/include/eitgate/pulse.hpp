#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace eitgate {

enum class EnvelopeKind { Constant, RaisedCosine };

/// Time profile of a beam inside one segment, evaluated on local time
/// t in [0, duration]. Outside that window the field is off.
struct Envelope {
  EnvelopeKind kind = EnvelopeKind::Constant;
  double duration = 0.0;
  double peak = 1.0;

  double value(double t_local) const;
  /// Integral of value(t)^2 over the window.
  double squared_area() const;
};

std::string to_string(EnvelopeKind k);
EnvelopeKind envelope_kind_from_string(const std::string& s);

/// peak * (1 - cos(2 pi t / tau)) / 2 on [0, tau], zero elsewhere.
double raised_cosine(double t, double tau, double peak);

/// Pulse duration that gives a raised-cosine Raman pulse area of pi,
/// tau = 8 pi / (3 Omega_R).
double duration_for_pi_area(double raman_rabi);

/// Two-photon area 3 tau Omega_R / 8 of a raised-cosine Raman pulse.
double raised_cosine_area(double raman_rabi, double tau);

/// AC Stark shift that turns a resonant microwave rotation of area `theta`
/// into a 4 pi rotation on the shifted atom: |Delta'| = Omega sqrt(16 pi^2 / theta^2 - 1).
double local_microwave_shift(double theta, double rabi);

/// A beam switched on at one site for the length of a segment.
struct BeamDrive {
  std::size_t site = 0;
  std::string beam;
  Envelope envelope;
  double scale = 1.0;
};

/// Static energy shift of one level at one site for the length of a segment.
struct LevelShift {
  std::size_t site = 0;
  std::string level;
  double shift = 0.0;  // rad/s
};

enum class SegmentKind { Drive, Gate };
/// X(theta) rotates {q0, q1} by exp(-i theta sigma_x / 2); Z(phi) multiplies q1 by e^{i phi}.
enum class GateKind { X, Z };

struct Segment {
  SegmentKind kind = SegmentKind::Drive;
  std::string label;
  double start = 0.0;
  double duration = 0.0;
  std::vector<std::size_t> sites;  // addressed sites (atom mask)
  std::vector<BeamDrive> drives;
  std::vector<LevelShift> shifts;
  GateKind gate = GateKind::X;
  double angle = 0.0;

  double end() const { return start + duration; }
  bool addresses(std::size_t site) const;
};

/// Ordered timeline of drive segments and instantaneous gates.
class PulseSequence {
 public:
  PulseSequence() = default;
  explicit PulseSequence(std::string name) : name_(std::move(name)) {}

  const std::string& name() const { return name_; }
  const std::vector<Segment>& segments() const { return segments_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  double total_duration() const;

  /// Appends a segment starting `gap` seconds after the current end.
  PulseSequence& append(Segment s, double gap = 0.0);
  PulseSequence& append(const PulseSequence& other, double gap = 0.0);
  void warn(std::string message) { warnings_.push_back(std::move(message)); }
  void set_name(std::string name) { name_ = std::move(name); }

  /// Throws ModelError on overlapping segments, non-positive drive durations,
  /// or sites >= num_sites.
  void validate(std::size_t num_sites) const;

  /// Timeline CSV (start_us, duration_us, site, coupling, envelope,
  /// peak_scale, detuning_MHz, phase_rad); each segment is introduced by a
  /// `# segment` comment line.
  std::string to_csv() const;
  static PulseSequence from_csv(const std::string& text);

  bool operator==(const PulseSequence&) const = default;

 private:
  std::string name_;
  std::vector<Segment> segments_;
  std::vector<std::string> warnings_;
};

bool operator==(const Envelope& a, const Envelope& b);
bool operator==(const BeamDrive& a, const BeamDrive& b);
bool operator==(const LevelShift& a, const LevelShift& b);
bool operator==(const Segment& a, const Segment& b);

// ---------------------------------------------------------------------------
// Protocol builders. Site 0 is the control, sites 1..n-1 are targets.

struct CnotOptions {
  bool coupling_on_control = false;
  double gap = 0.0;         // dead time between segments
  double raman_rabi = 0.0;  // Omega_R; when > 0, tau is checked against the pi-area condition
};

/// Control pi (q1 -> r), simultaneous Raman + coupling block of length tau on
/// every target, control pi (r -> q1).
PulseSequence cnot_sequence(std::size_t num_sites, double tau, double rydberg_rabi,
                            const CnotOptions& options = {});

enum class PhaseMode { Exact, DetunedIdle };

struct PhaseOptions {
  PhaseMode mode = PhaseMode::Exact;
  double idle_detuning = 0.0;  // rad/s, used by DetunedIdle
};

/// Z(phi) on the listed sites, either as an exact phase gate or as an idle
/// during which q1 is shifted by -idle_detuning.
Segment phase_segment(std::vector<std::size_t> sites, double phi, const PhaseOptions& options);
Segment rotation_gate(std::vector<std::size_t> sites, double theta, std::string label = "");

/// Local X(pi/2) on the target, Z(pi) on the target, global X(pi/2), then CNOT.
PulseSequence bell_prep_sequence(double tau, double rydberg_rabi, const CnotOptions& options = {},
                                 const PhaseOptions& phase = {});

/// Bell preparation followed by global Z(phi) and global X(pi/2).
PulseSequence parity_sequence(const PulseSequence& bell_prep, double phi,
                              const PhaseOptions& phase = {});

/// Global microwave rotation segment (all listed sites); `shifted` sites see
/// an AC Stark shift that makes their rotation 4 pi.
Segment microwave_segment(std::vector<std::size_t> sites, double theta, double rabi,
                          std::vector<std::size_t> shifted = {});

/// Microwave preparation of a two-qubit basis state from |00> and the reverse
/// readout sequence. `basis` is one of "00", "01", "10", "11" (control first).
std::pair<PulseSequence, PulseSequence> prep_and_readout_circuits(const std::string& basis,
                                                                  double microwave_rabi);
/// Same circuits with every microwave step replaced by an instantaneous X(pi)
/// on the sites that actually rotate.
std::pair<PulseSequence, PulseSequence> ideal_prep_and_readout(const std::string& basis);

}  // namespace eitgate
