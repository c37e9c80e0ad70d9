#include "eitgate/atom_model.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

#include "eitgate/angular.hpp"
#include "eitgate/units.hpp"

namespace eitgate {

std::string to_string(LevelCategory c) {
  switch (c) {
    case LevelCategory::Computational: return "computational";
    case LevelCategory::Intermediate: return "intermediate";
    case LevelCategory::Rydberg: return "rydberg";
    case LevelCategory::Leakage: return "leakage";
  }
  return "unknown";
}

LevelScheme::LevelScheme(std::string name, std::vector<Level> levels,
                         std::vector<DecayChannel> decays, std::vector<DriveCoupling> couplings,
                         double reference_detuning, double qubit_splitting,
                         std::vector<SidebandShift> sideband_shifts,
                         std::optional<HyperfineLine> line)
    : name_(std::move(name)),
      levels_(std::move(levels)),
      decays_(std::move(decays)),
      couplings_(std::move(couplings)),
      sideband_shifts_(std::move(sideband_shifts)),
      reference_detuning_(reference_detuning),
      qubit_splitting_(qubit_splitting),
      line_(line) {
  validate();
  refresh_detunings();
}

void LevelScheme::validate() const {
  std::set<std::string> seen;
  int leakage = 0;
  std::set<std::string> computational;
  for (const auto& l : levels_) {
    if (!seen.insert(l.label).second) throw ModelError("duplicate level label '" + l.label + "'");
    if (l.category == LevelCategory::Leakage) ++leakage;
    if (l.category == LevelCategory::Computational) computational.insert(l.label);
  }
  if (leakage != 1) throw ModelError("scheme '" + name_ + "' needs exactly one leakage level");
  if (computational != std::set<std::string>{"q0", "q1"}) {
    throw ModelError("scheme '" + name_ + "' computational levels must be exactly {q0, q1}");
  }
  for (const auto& d : decays_) {
    if (!seen.count(d.from) || !seen.count(d.to)) {
      throw ModelError("decay channel references unknown level " + d.from + "->" + d.to);
    }
    if (!(d.rate >= 0.0)) throw ModelError("negative decay rate on " + d.from + "->" + d.to);
  }
  for (const auto& c : couplings_) {
    if (!seen.count(c.lower) || !seen.count(c.upper)) {
      throw ModelError("coupling references unknown level " + c.lower + "<->" + c.upper);
    }
    if (c.lower == c.upper) throw ModelError("coupling must join two distinct levels");
    if (!(c.peak_rabi >= 0.0)) throw ModelError("negative Rabi frequency on " + c.lower);
  }
  for (const auto& s : sideband_shifts_) {
    if (!seen.count(s.level)) throw ModelError("sideband shift on unknown level " + s.level);
  }
}

void LevelScheme::refresh_detunings() {
  for (auto& c : couplings_) {
    c.detuning = level(c.lower).energy_offset - level(c.upper).energy_offset;
  }
}

std::size_t LevelScheme::index_of(const std::string& label) const {
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    if (levels_[i].label == label) return i;
  }
  throw ModelError("unknown level '" + label + "' in scheme '" + name_ + "'");
}

bool LevelScheme::has_level(const std::string& label) const {
  return std::any_of(levels_.begin(), levels_.end(),
                     [&](const Level& l) { return l.label == label; });
}

std::vector<std::string> LevelScheme::labels_in(LevelCategory c) const {
  std::vector<std::string> out;
  for (const auto& l : levels_) {
    if (l.category == c) out.push_back(l.label);
  }
  return out;
}

double LevelScheme::rabi(const std::string& lower, const std::string& upper) const {
  for (const auto& c : couplings_) {
    if ((c.lower == lower && c.upper == upper) || (c.lower == upper && c.upper == lower)) {
      return c.peak_rabi;
    }
  }
  return 0.0;
}

double LevelScheme::total_decay(const std::string& label) const {
  double sum = 0.0;
  for (const auto& d : decays_) {
    if (d.from == label) sum += d.rate;
  }
  return sum;
}

double LevelScheme::intermediate_linewidth() const {
  const auto fe = labels_in(LevelCategory::Intermediate);
  return fe.empty() ? 0.0 : total_decay(fe.front());
}

LevelScheme LevelScheme::with_level_energy(const std::string& label, double energy) const {
  LevelScheme copy = *this;
  copy.levels_[index_of(label)].energy_offset = energy;
  copy.refresh_detunings();
  return copy;
}

LevelScheme LevelScheme::with_beam_scaled(const std::string& envelope_id, double factor) const {
  if (!(factor >= 0.0)) throw ModelError("beam scale factor must be non-negative");
  LevelScheme copy = *this;
  for (auto& c : copy.couplings_) {
    if (c.envelope_id == envelope_id) c.peak_rabi *= factor;
  }
  for (auto& s : copy.sideband_shifts_) {
    if (s.envelope_id == envelope_id) s.peak_shift *= factor * factor;
  }
  return copy;
}

LevelScheme LevelScheme::with_branching(const BranchingTable& table, double gamma_e) const {
  LevelScheme copy = *this;
  std::erase_if(copy.decays_, [&](const DecayChannel& d) {
    return level(d.from).category == LevelCategory::Intermediate;
  });
  for (const auto& [from, dests] : table) {
    double total = 0.0;
    for (const auto& [to, fraction] : dests) {
      total += fraction;
      if (fraction > 0.0) copy.decays_.push_back({from, to, fraction * gamma_e});
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw ModelError("branching fractions from " + from + " do not sum to 1");
    }
  }
  copy.validate();
  return copy;
}

LevelScheme LevelScheme::with_extra_decay(const std::string& from, const std::string& to,
                                          double rate) const {
  LevelScheme copy = *this;
  for (auto& d : copy.decays_) {
    if (d.from == from && d.to == to) {
      d.rate += rate;
      return copy;
    }
  }
  copy.decays_.push_back({from, to, rate});
  copy.validate();
  return copy;
}

LevelScheme LevelScheme::with_name(std::string name) const {
  LevelScheme copy = *this;
  copy.name_ = std::move(name);
  return copy;
}

// ---------------------------------------------------------------------------

void InteractionSpec::validate() const {
  if (!(reference_strength >= 0.0)) throw ModelError("interaction reference strength must be >= 0");
  if (!(reference_distance > 0.0)) throw ModelError("interaction reference distance must be > 0");
}

Geometry::Geometry(std::vector<Point2> positions) : positions_(std::move(positions)) {
  for (std::size_t i = 0; i < positions_.size(); ++i) {
    for (std::size_t j = i + 1; j < positions_.size(); ++j) {
      if (!(distance(i, j) > 0.0)) throw ModelError("geometry has coincident sites");
    }
  }
}

double Geometry::distance(std::size_t i, std::size_t j) const {
  return std::hypot(positions_.at(i).x - positions_.at(j).x,
                    positions_.at(i).y - positions_.at(j).y);
}

Geometry Geometry::pair(double spacing) { return Geometry({{0.0, 0.0}, {spacing, 0.0}}); }

Geometry Geometry::star(int k, double spacing) {
  if (k < 1 || k > 4) throw ModelError("star geometry supports 1..4 targets");
  // +x, -x, +y, -y: k = 2 is the line through the control.
  const Point2 dirs[4] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  std::vector<Point2> pts{{0.0, 0.0}};
  for (int i = 0; i < k; ++i) pts.push_back({spacing * dirs[i].x, spacing * dirs[i].y});
  return Geometry(std::move(pts));
}

Geometry Geometry::right_angle(double spacing) {
  return Geometry({{0.0, 0.0}, {spacing, 0.0}, {0.0, spacing}});
}

double interaction_strength(const InteractionSpec& spec, double distance_um) {
  spec.validate();
  if (!(distance_um > 0.0)) throw ModelError("interaction distance must be > 0");
  return spec.reference_strength * std::pow(spec.reference_distance / distance_um, spec.exponent);
}

InteractionSpec cs_rydberg_interaction() { return {mhz(34.9), 6.0, 6.0}; }

double eit_break_margin(double interaction, double coupling_rabi, double detuning) {
  if (detuning == 0.0) throw ModelError("EIT margin needs a nonzero intermediate detuning");
  if (coupling_rabi == 0.0) return std::numeric_limits<double>::infinity();
  return interaction / (coupling_rabi * coupling_rabi / (4.0 * std::abs(detuning)));
}

double eit_break_margin(const LevelScheme& scheme, double interaction) {
  double shift = 0.0;
  for (const auto& c : scheme.couplings()) {
    if (c.envelope_id != kCouplingBeam) continue;
    const double delta_fe = -scheme.level(c.lower).energy_offset;
    if (delta_fe == 0.0) throw ModelError("EIT margin needs a nonzero intermediate detuning");
    shift += c.peak_rabi * c.peak_rabi / (4.0 * std::abs(delta_fe));
  }
  if (shift == 0.0) return std::numeric_limits<double>::infinity();
  return interaction / shift;
}

BranchingTable branching_fractions(const LevelScheme& scheme) {
  if (!scheme.line()) throw ModelError("scheme '" + scheme.name() + "' has no hyperfine data");
  const HyperfineLine& hf = *scheme.line();
  BranchingTable table;
  for (const auto& l : scheme.levels()) {
    if (l.category != LevelCategory::Intermediate) continue;
    if (l.two_f < 0) throw ModelError("intermediate level " + l.label + " lacks F");
    const double to_q0 =
        angular::decay_fraction(hf.two_i, hf.two_j, hf.two_jp, l.two_f, 2, hf.two_f_q0, 0);
    const double to_q1 =
        angular::decay_fraction(hf.two_i, hf.two_j, hf.two_jp, l.two_f, 2, hf.two_f_q1, 0);
    table[l.label] = {{"q0", to_q0}, {"q1", to_q1}, {"d", 1.0 - to_q0 - to_q1}};
  }
  return table;
}

std::string branching_csv(const BranchingTable& table) {
  std::ostringstream os;
  os << "from,to,fraction\n" << std::setprecision(17);
  for (const auto& [from, dests] : table) {
    for (const auto& [to, fraction] : dests) os << from << ',' << to << ',' << fraction << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Presets

namespace {

constexpr double kOmegaQubit = ghz(9.2);

struct IntermediateRow {
  int two_f;
  double omega0_mhz;  // q0 <-> fe
  double omega1_mhz;  // q1 <-> fe
  double omegac_mhz;  // fe <-> r
  double delta_ghz;   // Delta_fe
};

// Peak Rabi frequencies for tau = 2 us (110 nW Raman, 170 mW coupling).
constexpr IntermediateRow kTable6p32[] = {
    {4, 26.1, 0.0, 17.8, 1.474},
    {6, 42.3, 14.1, 38.4, 1.322},
    {8, 26.6, 37.3, 43.6, 1.121},
    {10, 0.0, 39.9, 27.1, 0.870},
};

struct Rows {
  std::vector<Level> levels;
  std::vector<DriveCoupling> couplings;
  std::vector<SidebandShift> shifts;
};

// Builds {q0, q1, fe.., r, d} with probe legs on the Raman beam, the coupling
// laser on fe<->r and the opposite-sideband light shifts of the Raman beam.
Rows ladder_rows(std::span<const IntermediateRow> rows, double probe_amp, double coupling_amp) {
  Rows out;
  out.levels.push_back({"q0", 0.0, LevelCategory::Computational, -1});
  out.levels.push_back({"q1", 0.0, LevelCategory::Computational, -1});
  for (const auto& row : rows) {
    const std::string fe = "fe" + std::to_string(row.two_f / 2);
    const double delta_fe = ghz(row.delta_ghz);
    out.levels.push_back({fe, -delta_fe, LevelCategory::Intermediate, row.two_f});
    const double o0 = mhz(row.omega0_mhz) * probe_amp;
    const double o1 = mhz(row.omega1_mhz) * probe_amp;
    const double oc = mhz(row.omegac_mhz) * coupling_amp;
    out.couplings.push_back({"q0", fe, o0, 0.0, kProbeBeam, 0.0});
    out.couplings.push_back({"q1", fe, o1, 0.0, kProbeBeam, 0.0});
    out.couplings.push_back({fe, "r", oc, 0.0, kCouplingBeam, 0.0});
    // The q1 leg's partner sideband is omega_q further from resonance for q1,
    // the q0 leg's partner is omega_q closer (and red) for q0.
    out.shifts.push_back({kProbeBeam, "q1", o1 * o1 / (4.0 * (delta_fe + kOmegaQubit))});
    out.shifts.push_back({kProbeBeam, "q0", o0 * o0 / (4.0 * (delta_fe - kOmegaQubit))});
  }
  out.levels.push_back({"r", 0.0, LevelCategory::Rydberg, -1});
  out.levels.push_back({"d", 0.0, LevelCategory::Leakage, -1});
  std::erase_if(out.couplings, [](const DriveCoupling& c) { return c.peak_rabi == 0.0; });
  std::erase_if(out.shifts, [](const SidebandShift& s) { return s.peak_shift == 0.0; });
  return out;
}

LevelScheme assemble(std::string name, Rows rows, double gamma_e, double gamma_r,
                     double reference_detuning, const HyperfineLine& line) {
  LevelScheme bare(std::move(name), std::move(rows.levels), {{"r", "d", gamma_r}},
                   std::move(rows.couplings), reference_detuning, kOmegaQubit,
                   std::move(rows.shifts), line);
  return bare.with_branching(branching_fractions(bare), gamma_e);
}

double checked_scale(double s, const char* what) {
  if (!(s >= 0.0)) throw ModelError(std::string(what) + " must be >= 0");
  return s;
}

// 7P1/2 hyperfine constant A (MHz) and the resulting F' = 3, 4 energies.
constexpr double k7p12HyperfineA = 94.35;
constexpr double k7p12E3 = -2.25 * k7p12HyperfineA;  // MHz
constexpr double k7p12E4 = 1.75 * k7p12HyperfineA;   // MHz
constexpr double k7p12Tau = 500e-9;

Preset7p12Calibration make_7p12_calibration() {
  Preset7p12Calibration cal;
  cal.detuning_ref = ghz(5.0);
  // Fix the probe scale so the Raman pulse area is pi at 500 ns:
  // Omega_R = sum_fe kappa^2 a0 a1 / (2 Delta_fe) = 8 pi / (3 tau).
  const HyperfineLine line{7, 1, 1, 6, 8};
  double weight = 0.0;
  for (auto [two_f, e_mhz] : {std::pair{6, k7p12E3}, std::pair{8, k7p12E4}}) {
    const double a0 = std::abs(angular::dipole_amplitude(line.two_i, line.two_j, line.two_jp,
                                                         line.two_f_q0, 0, two_f, 2));
    const double a1 = std::abs(angular::dipole_amplitude(line.two_i, line.two_j, line.two_jp,
                                                         line.two_f_q1, 0, two_f, 2));
    weight += a0 * a1 / (2.0 * (cal.detuning_ref - mhz(e_mhz)));
  }
  const double omega_r = 8.0 * std::numbers::pi / (3.0 * k7p12Tau);
  cal.probe_scale = std::sqrt(omega_r / weight);
  // Coupling: 50 mW at 3 um on 7P1/2 -> 90D3/2 gives a total Omega_c / 2pi of
  // 490 MHz, shared between F' = 3, 4 with Clebsch-Gordan weights 3/8 and 5/8.
  cal.coupling_scale = mhz(490.0);
  // 90D3/2: 1 kHz (81D) scaled by n*^3, and C6 scaled by n*^11 with
  // n* = 87.52 vs 78.53.
  cal.rydberg_linewidth = khz(0.7);
  cal.interaction = {mhz(115.0), 6.0, 6.0};
  return cal;
}

}  // namespace

LevelScheme preset_6p32(double raman_power_scale, double coupling_power_scale) {
  const double pa = std::sqrt(checked_scale(raman_power_scale, "Raman power scale"));
  const double ca = std::sqrt(checked_scale(coupling_power_scale, "coupling power scale"));
  return assemble("6p32", ladder_rows(kTable6p32, pa, ca), mhz(5.2), khz(1.0), ghz(1.34),
                  HyperfineLine{7, 1, 3, 6, 8});
}

const Preset7p12Calibration& preset_7p12_calibration() {
  static const Preset7p12Calibration cal = make_7p12_calibration();
  return cal;
}

LevelScheme preset_7p12(double probe_power, double coupling_power, double waist,
                        double detuning) {
  if (!(waist > 0.0)) throw ModelError("7P1/2 preset: waist must be > 0");
  if (!(probe_power >= 0.0) || !(coupling_power >= 0.0)) {
    throw ModelError("7P1/2 preset: powers must be >= 0");
  }
  const auto& cal = preset_7p12_calibration();
  if (detuning == 0.0) detuning = cal.detuning_ref;
  const HyperfineLine line{7, 1, 1, 6, 8};
  const double probe_amp = std::sqrt(probe_power / cal.probe_power_ref) * cal.waist_ref / waist;
  const double coupling_amp =
      std::sqrt(coupling_power / cal.coupling_power_ref) * cal.waist_ref / waist;

  std::vector<IntermediateRow> rows;
  for (auto [two_f, e_mhz] : {std::pair{6, k7p12E3}, std::pair{8, k7p12E4}}) {
    const double a0 = std::abs(angular::dipole_amplitude(line.two_i, line.two_j, line.two_jp,
                                                         line.two_f_q0, 0, two_f, 2));
    const double a1 = std::abs(angular::dipole_amplitude(line.two_i, line.two_j, line.two_jp,
                                                         line.two_f_q1, 0, two_f, 2));
    // |F', mF' = 1> contains |mJ' = 1/2, mI = 1/2> with weight (F'=4: 5/8, F'=3: 3/8).
    const double cg = std::sqrt(two_f == 8 ? 5.0 / 8.0 : 3.0 / 8.0);
    rows.push_back({two_f, to_mhz(cal.probe_scale * a0), to_mhz(cal.probe_scale * a1),
                    to_mhz(cal.coupling_scale * cg), to_ghz(detuning - mhz(e_mhz))});
  }
  return assemble("7p12", ladder_rows(rows, probe_amp, coupling_amp), mhz(1.03), cal.rydberg_linewidth,
                  detuning, line);
}

LevelScheme control_scheme(const LevelScheme& target, double rydberg_rabi,
                           const ControlOptions& options) {
  const bool full_ladder = options.full_ladder;
  if (!(rydberg_rabi > 0.0)) throw ModelError("control Rydberg Rabi frequency must be > 0");
  std::vector<Level> levels;
  std::vector<DecayChannel> decays;
  std::vector<DriveCoupling> couplings;
  for (const auto& l : target.levels()) {
    if (l.category == LevelCategory::Intermediate && !full_ladder) continue;
    Level copy = l;
    // The control's own Rydberg drive is resonant.
    if (l.category != LevelCategory::Intermediate) copy.energy_offset = 0.0;
    levels.push_back(copy);
  }
  for (const auto& d : target.decays()) {
    if (!full_ladder && target.level(d.from).category == LevelCategory::Intermediate) continue;
    decays.push_back(d);
  }
  if (full_ladder) {
    for (const auto& c : target.couplings()) {
      if (c.envelope_id == kCouplingBeam) couplings.push_back(c);
    }
  }
  couplings.push_back({"q1", "r", rydberg_rabi, 0.0, kRydbergBeam, 0.0});
  LevelScheme scheme("control_" + target.name(), std::move(levels), std::move(decays),
                     std::move(couplings), target.reference_detuning(), target.qubit_splitting(),
                     {}, target.line());
  if (full_ladder && options.scatter_to_leakage) {
    BranchingTable lossy;
    for (const auto& fe : scheme.labels_in(LevelCategory::Intermediate)) lossy[fe]["d"] = 1.0;
    scheme = scheme.with_branching(lossy, target.intermediate_linewidth());
  }
  if (options.extra_rydberg_loss > 0.0) {
    scheme = scheme.with_extra_decay("r", "d", options.extra_rydberg_loss);
  }
  return scheme;
}

LevelScheme with_microwave(const LevelScheme& scheme, double rabi) {
  std::vector<Level> levels(scheme.levels().begin(), scheme.levels().end());
  std::vector<DecayChannel> decays(scheme.decays().begin(), scheme.decays().end());
  std::vector<DriveCoupling> couplings(scheme.couplings().begin(), scheme.couplings().end());
  std::vector<SidebandShift> shifts(scheme.sideband_shifts().begin(),
                                    scheme.sideband_shifts().end());
  couplings.push_back({"q0", "q1", rabi, 0.0, kMicrowaveBeam, 0.0});
  return LevelScheme(scheme.name(), std::move(levels), std::move(decays), std::move(couplings),
                     scheme.reference_detuning(), scheme.qubit_splitting(), std::move(shifts),
                     scheme.line());
}

LevelScheme qubit_scheme(double microwave_rabi) {
  return LevelScheme("qubit",
                     {{"q0", 0.0, LevelCategory::Computational, -1},
                      {"q1", 0.0, LevelCategory::Computational, -1},
                      {"d", 0.0, LevelCategory::Leakage, -1}},
                     {}, {{"q0", "q1", microwave_rabi, 0.0, kMicrowaveBeam, 0.0}}, 0.0,
                     kOmegaQubit);
}

ProtocolDefaults protocol_defaults(const std::string& preset_id) {
  if (preset_id == "6p32") {
    return {2e-6, mhz(0.29), mhz(1.0), mhz(1.77), 6.0, cs_rydberg_interaction()};
  }
  if (preset_id == "7p12") {
    return {k7p12Tau, mhz(1.62), mhz(0.5), mhz(10.0), 4.0, preset_7p12_calibration().interaction};
  }
  throw ModelError("no protocol defaults for preset '" + preset_id + "'");
}

std::vector<PresetInfo> preset_catalog() {
  return {
      {"6p32",
       "Cs via 6P3/2 -> 81D5/2, calibrated Rabi frequencies for a 2 us pulse "
       "(Raman optimisation, EIT spectra, Bell fidelity)"},
      {"7p12",
       "Cs via 7P1/2 -> 90D3/2, 200 uW / 50 mW at 3 um, Delta = 5 GHz, 500 ns pulse "
       "(high-fidelity Bell state, CNOT^k GHZ scaling)"},
      {"qubit", "Bare {q0, q1} clock qubit with a microwave drive (local addressing)"},
  };
}

}  // namespace eitgate
