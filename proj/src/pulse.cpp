#include "eitgate/pulse.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <sstream>

#include "eitgate/atom_model.hpp"
#include "eitgate/units.hpp"

namespace eitgate {

using std::numbers::pi;

double Envelope::value(double t_local) const {
  if (t_local < 0.0 || t_local > duration) return 0.0;
  switch (kind) {
    case EnvelopeKind::Constant: return peak;
    case EnvelopeKind::RaisedCosine: return raised_cosine(t_local, duration, peak);
  }
  return 0.0;
}

double Envelope::squared_area() const {
  switch (kind) {
    case EnvelopeKind::Constant: return peak * peak * duration;
    case EnvelopeKind::RaisedCosine: return 3.0 * duration * peak * peak / 8.0;
  }
  return 0.0;
}

std::string to_string(EnvelopeKind k) {
  return k == EnvelopeKind::Constant ? "constant" : "raised_cosine";
}

EnvelopeKind envelope_kind_from_string(const std::string& s) {
  if (s == "constant") return EnvelopeKind::Constant;
  if (s == "raised_cosine") return EnvelopeKind::RaisedCosine;
  throw ModelError("unknown envelope kind '" + s + "'");
}

double raised_cosine(double t, double tau, double peak) {
  if (t < 0.0 || t > tau) return 0.0;
  return peak * (1.0 - std::cos(kTwoPi * t / tau)) / 2.0;
}

double duration_for_pi_area(double raman_rabi) {
  if (!(raman_rabi > 0.0)) throw ModelError("Raman Rabi frequency must be > 0");
  return 8.0 * pi / (3.0 * raman_rabi);
}

double raised_cosine_area(double raman_rabi, double tau) { return 3.0 * tau * raman_rabi / 8.0; }

double local_microwave_shift(double theta, double rabi) {
  if (!(theta > 0.0)) throw ModelError("microwave rotation area must be > 0");
  if (theta > 4.0 * pi * (1.0 + 1e-12)) {
    throw ModelError("microwave rotation area above 4 pi is not supported");
  }
  const double ratio = 16.0 * pi * pi / (theta * theta) - 1.0;
  return rabi * std::sqrt(std::max(0.0, ratio));
}

bool Segment::addresses(std::size_t site) const {
  return std::find(sites.begin(), sites.end(), site) != sites.end();
}

double PulseSequence::total_duration() const {
  double end = 0.0;
  for (const auto& s : segments_) end = std::max(end, s.end());
  return end;
}

PulseSequence& PulseSequence::append(Segment s, double gap) {
  s.start = (segments_.empty() ? 0.0 : total_duration() + gap);
  segments_.push_back(std::move(s));
  return *this;
}

PulseSequence& PulseSequence::append(const PulseSequence& other, double gap) {
  const double offset = segments_.empty() ? 0.0 : total_duration() + gap;
  for (Segment s : other.segments_) {
    s.start += offset;
    segments_.push_back(std::move(s));
  }
  for (const auto& w : other.warnings_) warnings_.push_back(w);
  return *this;
}

void PulseSequence::validate(std::size_t num_sites) const {
  double last_end = 0.0;
  for (const auto& s : segments_) {
    for (auto site : s.sites) {
      if (site >= num_sites) {
        throw ModelError("segment '" + s.label + "' addresses site " + std::to_string(site) +
                         " of a " + std::to_string(num_sites) + "-site register");
      }
    }
    if (s.kind == SegmentKind::Drive && !(s.duration > 0.0)) {
      throw ModelError("drive segment '" + s.label + "' needs a positive duration");
    }
    if (s.kind == SegmentKind::Gate && s.duration != 0.0) {
      throw ModelError("gate segment '" + s.label + "' must be instantaneous");
    }
    if (s.start < last_end - 1e-15) {
      throw ModelError("segment '" + s.label + "' overlaps its predecessor");
    }
    last_end = s.end();
    for (const auto& d : s.drives) {
      if (d.site >= num_sites) throw ModelError("drive on nonexistent site");
    }
  }
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string join_sites(const std::vector<std::size_t>& sites) {
  std::string out;
  for (std::size_t i = 0; i < sites.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(sites[i]);
  }
  return out;
}

}  // namespace

std::string PulseSequence::to_csv() const {
  std::ostringstream os;
  os << "# sequence " << name_ << '\n';
  os << "start_us,duration_us,site,coupling,envelope,peak_scale,detuning_MHz,phase_rad\n";
  for (const auto& s : segments_) {
    os << "# segment " << (s.kind == SegmentKind::Drive ? "drive" : "gate") << ' '
       << fmt_double(to_us(s.start)) << ' ' << fmt_double(to_us(s.duration)) << " ["
       << join_sites(s.sites) << "] " << s.label << '\n';
    const std::string st = fmt_double(to_us(s.start));
    const std::string du = fmt_double(to_us(s.duration));
    if (s.kind == SegmentKind::Gate) {
      const char* g = s.gate == GateKind::X ? "gate_x" : "gate_z";
      for (auto site : s.sites) {
        os << st << ',' << du << ',' << site << ',' << g << ",instant,1,0," << fmt_double(s.angle)
           << '\n';
      }
      continue;
    }
    for (const auto& d : s.drives) {
      os << st << ',' << du << ',' << d.site << ',' << d.beam << ','
         << to_string(d.envelope.kind) << ',' << fmt_double(d.scale * d.envelope.peak) << ",0,0\n";
    }
    for (const auto& sh : s.shifts) {
      os << st << ',' << du << ',' << sh.site << ",shift:" << sh.level << ",constant,0,"
         << fmt_double(to_mhz(sh.shift)) << ",0\n";
    }
  }
  return os.str();
}

PulseSequence PulseSequence::from_csv(const std::string& text) {
  PulseSequence seq;
  std::istringstream is(text);
  std::string line;
  Segment* current = nullptr;
  bool header_seen = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line.rfind("# sequence ", 0) == 0) {
      seq.name_ = line.substr(11);
      continue;
    }
    if (line.rfind("# segment ", 0) == 0) {
      std::istringstream ls(line.substr(10));
      std::string kind, start, dur;
      ls >> kind >> start >> dur;
      Segment s;
      s.kind = kind == "gate" ? SegmentKind::Gate : SegmentKind::Drive;
      s.start = std::stod(start) * 1e-6;
      s.duration = std::stod(dur) * 1e-6;
      std::string rest;
      std::getline(ls, rest);
      const auto lb = rest.find('['), rb = rest.find(']');
      if (lb == std::string::npos || rb == std::string::npos) {
        throw ModelError("malformed segment line: " + line);
      }
      std::istringstream sites(rest.substr(lb + 1, rb - lb - 1));
      std::size_t site;
      while (sites >> site) s.sites.push_back(site);
      s.label = rb + 2 <= rest.size() ? rest.substr(rb + 2) : "";
      seq.segments_.push_back(std::move(s));
      current = &seq.segments_.back();
      continue;
    }
    if (line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    if (!current) throw ModelError("timeline row before any segment header");
    const auto f = split(line, ',');
    if (f.size() != 8) throw ModelError("timeline row needs 8 columns: " + line);
    const std::size_t site = std::stoul(f[2]);
    const std::string& coupling = f[3];
    if (coupling == "gate_x" || coupling == "gate_z") {
      current->gate = coupling == "gate_x" ? GateKind::X : GateKind::Z;
      current->angle = std::stod(f[7]);
    } else if (coupling.rfind("shift:", 0) == 0) {
      current->shifts.push_back({site, coupling.substr(6), std::stod(f[6]) * kTwoPi * 1e6});
    } else {
      BeamDrive d;
      d.site = site;
      d.beam = coupling;
      d.envelope = {envelope_kind_from_string(f[4]), current->duration, 1.0};
      d.scale = std::stod(f[5]);
      current->drives.push_back(std::move(d));
    }
  }
  return seq;
}

bool operator==(const Envelope& a, const Envelope& b) {
  return a.kind == b.kind && a.duration == b.duration && a.peak == b.peak;
}
bool operator==(const BeamDrive& a, const BeamDrive& b) {
  return a.site == b.site && a.beam == b.beam && a.envelope == b.envelope && a.scale == b.scale;
}
bool operator==(const LevelShift& a, const LevelShift& b) {
  return a.site == b.site && a.level == b.level && a.shift == b.shift;
}
bool operator==(const Segment& a, const Segment& b) {
  return a.kind == b.kind && a.label == b.label && a.start == b.start &&
         a.duration == b.duration && a.sites == b.sites && a.drives == b.drives &&
         a.shifts == b.shifts && (a.kind == SegmentKind::Drive ||
                                  (a.gate == b.gate && a.angle == b.angle));
}

// ---------------------------------------------------------------------------

namespace {

Segment drive_segment(std::string label, double duration, std::vector<std::size_t> sites) {
  Segment s;
  s.kind = SegmentKind::Drive;
  s.label = std::move(label);
  s.duration = duration;
  s.sites = std::move(sites);
  return s;
}

BeamDrive beam(std::size_t site, const char* name, EnvelopeKind kind, double duration) {
  return {site, name, Envelope{kind, duration, 1.0}, 1.0};
}

}  // namespace

PulseSequence cnot_sequence(std::size_t num_sites, double tau, double rydberg_rabi,
                            const CnotOptions& options) {
  if (num_sites < 2) throw ModelError("CNOT needs a control and at least one target");
  if (!(tau > 0.0)) throw ModelError("CNOT target pulse duration must be > 0");
  if (!(rydberg_rabi > 0.0)) throw ModelError("control Rydberg Rabi frequency must be > 0");
  const double t_pi = pi / rydberg_rabi;

  PulseSequence seq("cnot");
  if (options.raman_rabi > 0.0) {
    const double ideal = duration_for_pi_area(options.raman_rabi);
    if (std::abs(tau - ideal) > 0.01 * ideal) {
      seq.warn("target pulse duration " + fmt_double(to_us(tau)) + " us differs from the pi-area "
               "duration " + fmt_double(to_us(ideal)) + " us by more than 1%");
    }
  }

  Segment up = drive_segment("control_pi_up", t_pi, {0});
  up.drives.push_back(beam(0, kRydbergBeam, EnvelopeKind::Constant, t_pi));
  seq.append(std::move(up));

  std::vector<std::size_t> mid_sites;
  if (options.coupling_on_control) mid_sites.push_back(0);
  for (std::size_t t = 1; t < num_sites; ++t) mid_sites.push_back(t);
  Segment mid = drive_segment("target_eit", tau, mid_sites);
  if (options.coupling_on_control) {
    mid.drives.push_back(beam(0, kCouplingBeam, EnvelopeKind::Constant, tau));
  }
  for (std::size_t t = 1; t < num_sites; ++t) {
    mid.drives.push_back(beam(t, kProbeBeam, EnvelopeKind::RaisedCosine, tau));
    mid.drives.push_back(beam(t, kCouplingBeam, EnvelopeKind::Constant, tau));
  }
  seq.append(std::move(mid), options.gap);

  Segment down = drive_segment("control_pi_down", t_pi, {0});
  down.drives.push_back(beam(0, kRydbergBeam, EnvelopeKind::Constant, t_pi));
  seq.append(std::move(down), options.gap);
  return seq;
}

Segment rotation_gate(std::vector<std::size_t> sites, double theta, std::string label) {
  Segment s;
  s.kind = SegmentKind::Gate;
  s.gate = GateKind::X;
  s.angle = theta;
  s.sites = std::move(sites);
  s.label = label.empty() ? "x" : std::move(label);
  return s;
}

Segment phase_segment(std::vector<std::size_t> sites, double phi, const PhaseOptions& options) {
  if (options.mode == PhaseMode::Exact || phi == 0.0) {
    Segment s;
    s.kind = SegmentKind::Gate;
    s.gate = GateKind::Z;
    s.angle = phi;
    s.sites = std::move(sites);
    s.label = "z";
    return s;
  }
  if (!(options.idle_detuning > 0.0)) {
    throw ModelError("detuned-idle phase needs a positive idle detuning");
  }
  Segment s = drive_segment("z_idle", phi / options.idle_detuning, sites);
  for (auto site : sites) s.shifts.push_back({site, "q1", -options.idle_detuning});
  return s;
}

PulseSequence bell_prep_sequence(double tau, double rydberg_rabi, const CnotOptions& options,
                                 const PhaseOptions& phase) {
  PulseSequence seq("bell_prep");
  seq.append(rotation_gate({1}, pi / 2.0, "target_x_half"));
  seq.append(phase_segment({1}, pi, phase));
  seq.append(rotation_gate({0, 1}, pi / 2.0, "global_x_half"));
  seq.append(cnot_sequence(2, tau, rydberg_rabi, options));
  return seq;
}

PulseSequence parity_sequence(const PulseSequence& bell_prep, double phi,
                              const PhaseOptions& phase) {
  if (phi < 0.0 || phi > 2.0 * pi) throw ModelError("parity phase must lie in [0, 2 pi]");
  PulseSequence seq = bell_prep;
  seq.set_name("parity");
  seq.append(phase_segment({0, 1}, phi, phase));
  seq.append(rotation_gate({0, 1}, pi / 2.0, "analysis_x_half"));
  return seq;
}

Segment microwave_segment(std::vector<std::size_t> sites, double theta, double rabi,
                          std::vector<std::size_t> shifted) {
  if (!(rabi > 0.0)) throw ModelError("microwave Rabi frequency must be > 0");
  const double duration = theta / rabi;
  Segment s = drive_segment(shifted.empty() ? "mw_global" : "mw_local", duration, sites);
  for (auto site : sites) {
    s.drives.push_back(beam(site, kMicrowaveBeam, EnvelopeKind::Constant, duration));
  }
  const double shift = local_microwave_shift(theta, rabi);
  for (auto site : shifted) s.shifts.push_back({site, "q1", shift});
  return s;
}

std::pair<PulseSequence, PulseSequence> prep_and_readout_circuits(const std::string& basis,
                                                                  double microwave_rabi) {
  static const std::map<std::string, int> kBasis{{"00", 0}, {"01", 1}, {"10", 2}, {"11", 3}};
  const auto it = kBasis.find(basis);
  if (it == kBasis.end()) throw ModelError("basis state must be one of 00, 01, 10, 11");

  std::vector<Segment> steps;
  switch (it->second) {
    case 0: break;
    case 1: steps.push_back(microwave_segment({0, 1}, pi, microwave_rabi, {0})); break;
    case 2:
      steps.push_back(microwave_segment({0, 1}, pi, microwave_rabi));
      steps.push_back(microwave_segment({0, 1}, pi, microwave_rabi, {0}));
      break;
    case 3: steps.push_back(microwave_segment({0, 1}, pi, microwave_rabi)); break;
  }
  PulseSequence prep("prep_" + basis);
  PulseSequence readout("readout_" + basis);
  for (const auto& s : steps) prep.append(s);
  for (auto s = steps.rbegin(); s != steps.rend(); ++s) readout.append(*s);
  return {prep, readout};
}

std::pair<PulseSequence, PulseSequence> ideal_prep_and_readout(const std::string& basis) {
  std::vector<std::vector<std::size_t>> steps;
  if (basis == "00") {
  } else if (basis == "01") {
    steps = {{1}};
  } else if (basis == "10") {
    steps = {{0, 1}, {1}};
  } else if (basis == "11") {
    steps = {{0, 1}};
  } else {
    throw ModelError("basis state must be one of 00, 01, 10, 11");
  }
  PulseSequence prep("prep_" + basis);
  PulseSequence readout("readout_" + basis);
  for (const auto& s : steps) prep.append(rotation_gate(s, pi, "x_pi"));
  for (auto s = steps.rbegin(); s != steps.rend(); ++s) readout.append(rotation_gate(*s, pi, "x_pi"));
  return {prep, readout};
}

}  // namespace eitgate
