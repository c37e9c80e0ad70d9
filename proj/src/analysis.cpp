#include "eitgate/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numbers>
#include <thread>

#include <Eigen/QR>

#include "eitgate/units.hpp"

namespace eitgate {

namespace {

constexpr double pi = std::numbers::pi;

// Runs f(i) for i in [0, n) on up to `threads` workers. Results are written
// by index, so the merge order never depends on scheduling.
template <class F>
void parallel_for(std::size_t n, unsigned threads, F&& f) {
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// 0 / 1 for the qubit levels, 2 otherwise.
std::vector<int> qubit_classes(const LevelScheme& s) {
  std::vector<int> out(s.dimension(), kLost);
  out[s.index_of("q0")] = 0;
  out[s.index_of("q1")] = 1;
  return out;
}

struct Evolved {
  QuantumState state;
  EvolutionDiagnostics diagnostics;
};

// Dense master equation or trajectory average, depending on the config.
Evolved evolve(const QuantumState& initial, const CompositeSystem& system,
               const PulseSequence& seq, const IntegratorConfig& config) {
  if (config.method == IntegratorMethod::Trajectories) {
    TrajectoryOptions opts;
    opts.accumulate_density = true;
    opts.observable = [](const Eigen::VectorXcd&) { return std::vector<double>{}; };
    QuantumState start = initial;
    if (!start.is_pure()) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(start.matrix());
      const Eigen::Index top = es.eigenvalues().size() - 1;
      if (std::abs(es.eigenvalues()[top] - 1.0) > 1e-9) {
        throw ModelError("trajectory runs need a pure initial state");
      }
      start = QuantumState::pure(es.eigenvectors().col(top));
    }
    auto r = evolve_trajectories(start, system, seq, config, opts);
    return {*r.averaged, r.diagnostics};
  }
  auto r = evolve_dense(initial.to_density(), system, seq, config);
  return {std::move(r.final_state), r.diagnostics};
}

CompositeSystem single_atom(const LevelScheme& scheme) {
  return CompositeSystem({scheme}, Geometry({Point2{}}), InteractionSpec{0.0, 6.0, 6.0});
}

Segment target_pulse(double tau, bool coupling) {
  Segment s;
  s.kind = SegmentKind::Drive;
  s.label = coupling ? "target_eit" : "raman";
  s.duration = tau;
  s.sites = {0};
  s.drives.push_back({0, kProbeBeam, Envelope{EnvelopeKind::RaisedCosine, tau, 1.0}, 1.0});
  if (coupling) {
    s.drives.push_back({0, kCouplingBeam, Envelope{EnvelopeKind::Constant, tau, 1.0}, 1.0});
  }
  return s;
}

// P(|0>) at the end of one pulse on an isolated target starting in |1>.
double single_atom_transfer(const LevelScheme& target, double tau, bool coupling,
                            const IntegratorConfig& config) {
  const auto sys = single_atom(target);
  PulseSequence seq("single_target");
  seq.append(target_pulse(tau, coupling));
  IntegratorConfig cfg = config;
  if (cfg.method == IntegratorMethod::Trajectories) cfg.method = IntegratorMethod::AdaptiveRk;
  auto r = evolve_dense(QuantumState::basis(sys, {"q1"}), sys, seq, cfg);
  return r.final_state.populations()[static_cast<Eigen::Index>(target.index_of("q0"))];
}

Eigen::Matrix3cd site_rotation(double phi) {
  Eigen::Matrix3cd u = Eigen::Matrix3cd::Zero();
  u.topLeftCorner<2, 2>() = gate_matrix(GateKind::X, pi / 2.0) * gate_matrix(GateKind::Z, phi);
  u(2, 2) = 1.0;
  return u;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------

DarkStates dark_states(double probe_rabi, double coupling_rabi) {
  if (!(coupling_rabi > 0.0)) throw ModelError("dark states need a coupling Rabi frequency > 0");
  DarkStates out;
  out.x = std::sqrt(2.0) * probe_rabi / coupling_rabi;
  out.d1 << -std::numbers::sqrt2 / 2.0, std::numbers::sqrt2 / 2.0, 0.0;
  const double norm = 1.0 / std::sqrt(1.0 + out.x * out.x);
  out.d2 << norm * std::numbers::sqrt2 / 2.0, norm * std::numbers::sqrt2 / 2.0, -norm * out.x;
  return out;
}

Eigen::Matrix4cd eit_hamiltonian(double probe_rabi, double coupling_rabi, double detuning) {
  Eigen::Matrix4cd h = Eigen::Matrix4cd::Zero();
  h(0, 2) = h(2, 0) = probe_rabi / 2.0;
  h(1, 2) = h(2, 1) = probe_rabi / 2.0;
  h(2, 3) = h(3, 2) = coupling_rabi / 2.0;
  h(2, 2) = -detuning;
  return h;
}

Eigen::Matrix3cd eliminated_hamiltonian(double probe_rabi, double coupling_rabi, double detuning) {
  if (detuning == 0.0) throw ModelError("adiabatic elimination needs a nonzero detuning");
  // |e> couples to |B> = (Op/2)(|0> + |1>) + (Oc/2)|r>; second order gives |B><B| / Delta.
  Eigen::Vector3cd bright(probe_rabi / 2.0, probe_rabi / 2.0, coupling_rabi / 2.0);
  return bright * bright.adjoint() / detuning;
}

double effective_rabi(const LevelScheme& scheme) {
  double sum = 0.0;
  for (const auto& fe : scheme.labels_in(LevelCategory::Intermediate)) {
    double o0 = 0.0, o1 = 0.0;
    for (const auto& c : scheme.couplings()) {
      if (c.envelope_id != kProbeBeam || c.upper != fe) continue;
      if (c.lower == "q0") o0 = c.peak_rabi;
      if (c.lower == "q1") o1 = c.peak_rabi;
    }
    if (o0 == 0.0 || o1 == 0.0) continue;
    const double delta = -scheme.level(fe).energy_offset;
    sum += o1 * o0 / (2.0 * delta);
  }
  return sum;
}

double ac_stark_shift(const LevelScheme& scheme) {
  const double wq = scheme.qubit_splitting();
  double sum = 0.0;
  for (const auto& fe : scheme.labels_in(LevelCategory::Intermediate)) {
    const double delta = -scheme.level(fe).energy_offset;
    double o0 = 0.0, o1 = 0.0;
    for (const auto& c : scheme.couplings()) {
      if (c.envelope_id != kProbeBeam || c.upper != fe) continue;
      if (c.lower == "q0") o0 = c.peak_rabi;
      if (c.lower == "q1") o1 = c.peak_rabi;
    }
    sum += (o1 * o1 - o0 * o0) / (4.0 * delta) + o1 * o1 / (4.0 * (delta + wq)) -
           o0 * o0 / (4.0 * (delta - wq));
  }
  return sum;
}

double crosstalk_bound(double waist, double separation) {
  if (!(waist > 0.0) || !(separation >= 0.0)) {
    throw ModelError("crosstalk bound needs waist > 0 and separation >= 0");
  }
  const double r = separation / waist;
  return std::exp(-2.0 * r * r);
}

double binomial_error(double p, std::size_t n) {
  if (!(p >= 0.0 && p <= 1.0)) throw ModelError("probability must lie in [0, 1]");
  if (n == 0) throw ModelError("binomial error needs n >= 1");
  return std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

// ---------------------------------------------------------------------------

TwoSiteMatrix reduce_two_site(const CompositeSystem& system, const QuantumState& state) {
  if (system.num_sites() != 2) throw ModelError("two-site reduction needs exactly two sites");
  if (state.dimension() != system.dimension()) throw ModelError("state/system dimension mismatch");
  const auto cls0 = qubit_classes(system.site(0));
  const auto cls1 = qubit_classes(system.site(1));
  const auto n = static_cast<Eigen::Index>(system.dimension());

  // Keep an element only when every site is a qubit level on both sides or
  // the same x level on both sides.
  auto compatible = [](const std::vector<int>& cls, std::size_t i, std::size_t j) {
    if (cls[i] != kLost && cls[j] != kLost) return true;
    return i == j;
  };
  TwoSiteMatrix out = TwoSiteMatrix::Zero();
  auto element = [&](Eigen::Index m, Eigen::Index k) {
    if (state.is_pure()) return state.vector()[m] * std::conj(state.vector()[k]);
    return state.matrix()(m, k);
  };
  for (Eigen::Index m = 0; m < n; ++m) {
    const auto am = system.local_index(static_cast<std::size_t>(m), 0);
    const auto bm = system.local_index(static_cast<std::size_t>(m), 1);
    for (Eigen::Index k = 0; k < n; ++k) {
      const auto ak = system.local_index(static_cast<std::size_t>(k), 0);
      const auto bk = system.local_index(static_cast<std::size_t>(k), 1);
      if (!compatible(cls0, am, ak) || !compatible(cls1, bm, bk)) continue;
      const cd v = element(m, k);
      if (v == cd(0.0)) continue;
      out(pair_index(cls0[am], cls1[bm]), pair_index(cls0[ak], cls1[bk])) += v;
    }
  }
  return out;
}

OutcomeDistribution apply_measurement(const TwoSiteMatrix& rho) {
  auto p = [&](int a, int b) { return rho(pair_index(a, b), pair_index(a, b)).real(); };
  const int x = kLost;
  OutcomeDistribution o;
  o.a = {p(0, 0), p(0, 1) + p(0, x), p(1, 0) + p(x, 0),
         p(1, 1) + p(1, x) + p(x, 1) + p(x, x)};
  o.b = {p(0, 0) + p(0, 1) + p(1, 0) + p(1, 1), p(0, x) + p(1, x), p(x, 0) + p(x, 1), p(x, x)};
  return o;
}

double loss_correct(double a_both, double b_both) {
  if (!(b_both > 0.0)) throw ModelError("loss correction undefined: B_00 = 0");
  return a_both / b_both;
}

TwoSiteMatrix inject_loss(const TwoSiteMatrix& rho, double loss0, double loss1) {
  for (double l : {loss0, loss1}) {
    if (!(l >= 0.0 && l <= 1.0)) throw ModelError("loss probability must lie in [0, 1]");
  }
  auto site_of = [](int idx, int site) { return site == 0 ? idx / 3 : idx % 3; };
  auto with_site = [](int idx, int site, int level) {
    return site == 0 ? pair_index(level, idx % 3) : pair_index(idx / 3, level);
  };
  TwoSiteMatrix cur = rho;
  for (int site = 0; site < 2; ++site) {
    const double l = site == 0 ? loss0 : loss1;
    TwoSiteMatrix next = TwoSiteMatrix::Zero();
    for (int i = 0; i < 9; ++i) {
      for (int j = 0; j < 9; ++j) {
        const bool qi = site_of(i, site) != kLost, qj = site_of(j, site) != kLost;
        double keep = 1.0;
        if (qi) keep *= std::sqrt(1.0 - l);
        if (qj) keep *= std::sqrt(1.0 - l);
        next(i, j) += keep * cur(i, j);
        // The lost part forgets which qubit level it came from.
        if (qi && qj && site_of(i, site) == site_of(j, site)) {
          next(with_site(i, site, kLost), with_site(j, site, kLost)) += l * cur(i, j);
        }
      }
    }
    cur = next;
  }
  return cur;
}

double parity_by_rotation(const TwoSiteMatrix& rho, double phi) {
  const Eigen::Matrix3cd u1 = site_rotation(phi);
  TwoSiteMatrix u;
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      for (int c = 0; c < 3; ++c) {
        for (int d = 0; d < 3; ++d) u(pair_index(a, b), pair_index(c, d)) = u1(a, c) * u1(b, d);
      }
    }
  }
  const TwoSiteMatrix rotated = u * rho * u.adjoint();
  const auto o = apply_measurement(rotated);
  return o.a[0] + o.a[3] - o.a[1] - o.a[2];
}

double parity_closed_form(const TwoSiteMatrix& rho, double phi) {
  const cd c = rho(pair_index(1, 1), pair_index(0, 0));
  const cd d = rho(pair_index(0, 1), pair_index(1, 0));
  const cd e = rho(pair_index(0, kLost), pair_index(1, kLost)) +
               rho(pair_index(kLost, 0), pair_index(kLost, 1));
  const double rho_xx = rho(pair_index(kLost, kLost), pair_index(kLost, kLost)).real();
  return 2.0 * d.real() - 2.0 * std::abs(c) * std::cos(2.0 * phi + std::arg(c)) + rho_xx +
         2.0 * (e * std::polar(1.0, -phi)).imag();
}

BellReport bell_report(const TwoSiteMatrix& rho) {
  auto p = [&](int a, int b) { return rho(pair_index(a, b), pair_index(a, b)).real(); };
  BellReport r;
  r.rho00 = p(0, 0);
  r.rho11 = p(1, 1);
  r.rho01 = p(0, 1);
  r.rho10 = p(1, 0);
  r.c = rho(pair_index(1, 1), pair_index(0, 0));
  r.d = rho(pair_index(0, 1), pair_index(1, 0));
  r.rho_xx = p(kLost, kLost);
  r.fidelity = 0.5 * (r.rho00 + r.rho11) + std::abs(r.c);
  return r;
}

BellReport bell_report(const CompositeSystem& system, const QuantumState& state) {
  BellReport r = bell_report(reduce_two_site(system, state));
  const auto pops = state.populations();
  for (Eigen::Index m = 0; m < pops.size(); ++m) {
    for (std::size_t s = 0; s < system.num_sites(); ++s) {
      const auto& scheme = system.site(s);
      if (!scheme.has_level("d")) continue;
      if (system.local_index(static_cast<std::size_t>(m), s) == scheme.index_of("d")) {
        r.leakage += pops[m];
        break;
      }
    }
  }
  return r;
}

BellEstimate experimental_bell_estimate(double rho00, double rho11, double parity_amplitude,
                                        double survival) {
  if (!(survival > 0.0)) throw ModelError("survival probability must be > 0");
  BellEstimate e;
  e.coherence = 0.5 * std::abs(parity_amplitude) / survival;
  e.fidelity = 0.5 * (rho00 + rho11) + e.coherence;
  return e;
}

// ---------------------------------------------------------------------------

void ScanResult::validate() const {
  if (grid.empty()) throw ModelError("scan grid is empty");
  if (values.size() != grid.size() || errors.size() != grid.size()) {
    throw ModelError("scan columns have different lengths");
  }
  const bool up = grid.size() < 2 || grid[1] > grid[0];
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (up ? !(grid[i] > grid[i - 1]) : !(grid[i] < grid[i - 1])) {
      throw ModelError("scan grid must be strictly monotone");
    }
  }
}

namespace {

Extremum locate(const ScanResult& scan, bool minimum) {
  scan.validate();
  const auto& y = scan.values;
  const auto it = minimum ? std::min_element(y.begin(), y.end())
                          : std::max_element(y.begin(), y.end());
  Extremum e;
  e.index = static_cast<std::size_t>(it - y.begin());
  e.position = scan.grid[e.index];
  e.value = *it;
  if (e.index == 0 || e.index + 1 == y.size()) return e;
  const double x0 = scan.grid[e.index - 1], x1 = scan.grid[e.index], x2 = scan.grid[e.index + 1];
  const double y0 = y[e.index - 1], y1 = y[e.index], y2 = y[e.index + 1];
  const double denom = (x0 - x1) * (x0 - x2) * (x1 - x2);
  const double a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom;
  const double b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom;
  const double c = (x1 * x2 * (x1 - x2) * y0 + x2 * x0 * (x2 - x0) * y1 +
                    x0 * x1 * (x0 - x1) * y2) / denom;
  if (minimum ? !(a > 0.0) : !(a < 0.0)) return e;
  const double xv = -b / (2.0 * a);
  if (xv < std::min(x0, x2) || xv > std::max(x0, x2)) return e;
  e.position = xv;
  e.value = c - b * b / (4.0 * a);
  return e;
}

}  // namespace

Extremum locate_minimum(const ScanResult& scan) { return locate(scan, true); }
Extremum locate_maximum(const ScanResult& scan) { return locate(scan, false); }

ParityFit fit_parity(const std::vector<double>& phi, const std::vector<double>& parity) {
  ParityFit fit;
  if (phi.size() != parity.size()) throw ModelError("parity fit: column lengths differ");
  if (phi.size() < 3) {
    fit.failure = "need at least 3 points";
    return fit;
  }
  const auto n = static_cast<Eigen::Index>(phi.size());
  Eigen::MatrixXd m(n, 3);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double p = phi[static_cast<std::size_t>(i)];
    m(i, 0) = std::cos(2.0 * p);
    m(i, 1) = std::sin(2.0 * p);
    m(i, 2) = 1.0;
    y[i] = parity[static_cast<std::size_t>(i)];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(m);
  if (qr.rank() < 3) {
    fit.failure = "phase grid does not resolve cos(2 phi), sin(2 phi) and offset";
    return fit;
  }
  const Eigen::Vector3d coef = qr.solve(y);
  fit.offset = coef[2];
  fit.amplitude = std::hypot(coef[0], coef[1]);
  fit.rms_residual = std::sqrt((m * coef - y).squaredNorm() / static_cast<double>(n));
  if (fit.amplitude <= 1e-9 * std::max(1.0, std::abs(fit.offset))) {
    fit.phase = std::nan("");
    fit.failure = "flat curve: no oscillation to fit";
    return fit;
  }
  // a cos + b sin = A cos(2 phi + psi) with a = A cos psi, b = -A sin psi.
  fit.phase = std::atan2(-coef[1], coef[0]);
  fit.ok = true;
  return fit;
}

// ---------------------------------------------------------------------------

GateModel make_gate_model(const std::string& preset_id, const GateModelOptions& options) {
  const auto pd = protocol_defaults(preset_id);
  LevelScheme base = preset_id == "6p32" ? preset_6p32() : preset_7p12();
  LevelScheme target =
      base.with_raman_detuning(pd.raman_detuning).with_coupling_detuning(pd.coupling_detuning);
  ControlOptions co = options.control;
  // The coupling beam can only act on the control if its ladder is modelled.
  if (options.coupling_on_control) co.full_ladder = true;
  LevelScheme control = control_scheme(target, pd.rydberg_rabi, co);
  CnotOptions cnot;
  cnot.coupling_on_control = options.coupling_on_control;
  return GateModel{preset_id, target,   control,        pd.interaction, pd.spacing,
                   pd.pulse_duration,   pd.rydberg_rabi, cnot,          PhaseOptions{},
                   IntegratorConfig{},  0.0};
}

CompositeSystem build_system(const GateModel& model, std::size_t num_targets,
                             std::optional<Geometry> geometry, bool suppress_target_pairs) {
  if (num_targets < 1) throw ModelError("need at least one target");
  LevelScheme control = model.control;
  LevelScheme target = model.target;
  if (model.rydberg_dephasing < 0.0) throw ModelError("Rydberg dephasing rate must be >= 0");
  if (model.rydberg_dephasing > 0.0) {
    control = control.with_extra_decay("r", "r", model.rydberg_dephasing);
    target = target.with_extra_decay("r", "r", model.rydberg_dephasing);
  }
  std::vector<LevelScheme> sites{control};
  for (std::size_t i = 0; i < num_targets; ++i) sites.push_back(target);
  Geometry g = geometry ? *geometry
                        : (num_targets == 1 ? Geometry::pair(model.spacing)
                                            : Geometry::star(static_cast<int>(num_targets),
                                                             model.spacing));
  return CompositeSystem(std::move(sites), std::move(g), model.interaction,
                         suppress_target_pairs);
}

ScanResult raman_transfer_scan(const GateModel& model, const std::vector<double>& raman_detunings) {
  ScanResult scan{"raman_detuning", "MHz", "P0", {}, {}, {}};
  if (raman_detunings.empty()) throw ModelError("Raman scan grid is empty");
  for (double d : raman_detunings) scan.grid.push_back(to_mhz(d));
  scan.values.assign(raman_detunings.size(), 0.0);
  scan.errors.assign(raman_detunings.size(), 0.0);
  scan.validate();
  parallel_for(raman_detunings.size(), model.integrator.threads, [&](std::size_t i) {
    scan.values[i] = single_atom_transfer(model.target.with_raman_detuning(raman_detunings[i]),
                                          model.tau, false, model.integrator);
  });
  return scan;
}

ScanResult eit_spectrum(const GateModel& model, const std::vector<double>& coupling_detunings,
                        double tau) {
  ScanResult scan{"coupling_detuning", "MHz", "P0", {}, {}, {}};
  if (coupling_detunings.empty()) throw ModelError("EIT scan grid is empty");
  if (!(tau > 0.0)) throw ModelError("pulse duration must be > 0");
  for (double d : coupling_detunings) scan.grid.push_back(to_mhz(d));
  scan.values.assign(coupling_detunings.size(), 0.0);
  scan.errors.assign(coupling_detunings.size(), 0.0);
  scan.validate();
  // Keep the Raman area at pi: Omega_R scales with probe power, so the
  // amplitude goes as sqrt(tau_model / tau).
  const LevelScheme target = model.target.with_beam_scaled(kProbeBeam, std::sqrt(model.tau / tau));
  parallel_for(coupling_detunings.size(), model.integrator.threads, [&](std::size_t i) {
    scan.values[i] = single_atom_transfer(target.with_coupling_detuning(coupling_detunings[i]),
                                          tau, true, model.integrator);
  });
  return scan;
}

std::array<std::array<double, 4>, 4> ideal_cnot_table() {
  std::array<std::array<double, 4>, 4> t{};
  t[0][0] = t[1][1] = t[2][3] = t[3][2] = 1.0;
  return t;
}

double table_fidelity(const std::array<std::array<double, 4>, 4>& measured,
                      const std::array<std::array<double, 4>, 4>& ideal) {
  double tr = 0.0;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) tr += measured[i][j] * ideal[i][j];
  }
  return tr / 4.0;
}

TruthTable cnot_truth_table(const GateModel& model, std::size_t shots) {
  if (shots == 0) throw ModelError("truth table needs shots >= 1");
  const auto sys = build_system(model, 1);
  const auto cnot = cnot_sequence(2, model.tau, model.rydberg_rabi, model.cnot);
  TruthTable table;
  table.shots = shots;
  std::array<QuantumState, 4> outputs;
  parallel_for(4, model.integrator.threads, [&](std::size_t i) {
    PulseSequence seq = ideal_prep_and_readout(kBasisLabels[i]).first;
    seq.append(cnot);
    outputs[i] = evolve(QuantumState::basis(sys, {"q0", "q0"}), sys, seq, model.integrator).state;
  });
  IntegratorConfig gate_only = model.integrator;
  gate_only.method = IntegratorMethod::AdaptiveRk;
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      const auto readout = ideal_prep_and_readout(kBasisLabels[j]).second;
      QuantumState s = outputs[i].to_density();
      if (!readout.segments().empty()) s = evolve_dense(s, sys, readout, gate_only).final_state;
      const auto o = apply_measurement(reduce_two_site(sys, s));
      const double a = std::clamp(o.a[0], 0.0, 1.0);
      table.raw[i][j] = a;
      table.corrected[i][j] = o.b[0] > 0.0 ? std::clamp(loss_correct(a, o.b[0]), 0.0, 1.0) : 0.0;
      table.counts[i][j] = std::round(a * static_cast<double>(shots));
      table.errors[i][j] = binomial_error(a, shots);
    }
  }
  const auto ideal = ideal_cnot_table();
  table.fidelity = table_fidelity(table.raw, ideal);
  table.corrected_fidelity = table_fidelity(table.corrected, ideal);
  return table;
}

BellRun simulate_bell(const GateModel& model) {
  const auto sys = build_system(model, 1);
  const auto seq = bell_prep_sequence(model.tau, model.rydberg_rabi, model.cnot, model.phase);
  auto r = evolve(QuantumState::basis(sys, {"q0", "q0"}), sys, seq, model.integrator);
  BellRun run{bell_report(sys, r.state), r.state, r.diagnostics};
  return run;
}

ParityRun parity_curve(const GateModel& model, const std::vector<double>& phis) {
  if (phis.empty()) throw ModelError("parity scan grid is empty");
  const auto sys = build_system(model, 1);
  const BellRun bell = simulate_bell(model);
  ParityRun run;
  run.bell = bell.report;
  run.curve = ScanResult{"phi", "rad", "parity", phis, std::vector<double>(phis.size(), 0.0),
                         std::vector<double>(phis.size(), 0.0)};
  run.curve.validate();
  IntegratorConfig cfg = model.integrator;
  if (cfg.method == IntegratorMethod::Trajectories) cfg.method = IntegratorMethod::AdaptiveRk;
  const QuantumState start = QuantumState::density(bell.state.to_density().matrix());
  parallel_for(phis.size(), cfg.threads, [&](std::size_t i) {
    if (phis[i] < 0.0 || phis[i] > 2.0 * pi) throw ModelError("parity phase must lie in [0, 2 pi]");
    PulseSequence tail("parity_analysis");
    tail.append(phase_segment({0, 1}, phis[i], model.phase));
    tail.append(rotation_gate({0, 1}, pi / 2.0, "analysis_x_half"));
    const auto s = evolve_dense(start, sys, tail, cfg).final_state;
    const auto o = apply_measurement(reduce_two_site(sys, s));
    run.curve.values[i] = o.a[0] + o.a[3] - o.a[1] - o.a[2];
  });
  run.fit = fit_parity(run.curve.grid, run.curve.values);
  return run;
}

std::string to_string(GhzGeometry g) { return g == GhzGeometry::Line ? "line" : "right_angle"; }

GhzGeometry ghz_geometry_from_string(const std::string& s) {
  if (s == "line") return GhzGeometry::Line;
  if (s == "right_angle") return GhzGeometry::RightAngle;
  throw ModelError("unknown GHZ geometry '" + s + "' (line, right_angle)");
}

GhzResult ghz_scaling(const GateModel& model, std::size_t k, GhzGeometry geometry,
                      bool suppress_target_pairs) {
  if (k < 1 || k > 4) throw ModelError("GHZ scaling supports 1 <= k <= 4");
  if (geometry == GhzGeometry::RightAngle && k != 2) {
    throw ModelError("right-angle geometry is defined for k = 2 only");
  }
  const Geometry g = geometry == GhzGeometry::RightAngle ? Geometry::right_angle(model.spacing)
                     : k == 1                            ? Geometry::pair(model.spacing)
                                 : Geometry::star(static_cast<int>(k), model.spacing);
  const auto sys = build_system(model, k, g, suppress_target_pairs);
  const auto seq = cnot_sequence(k + 1, model.tau, model.rydberg_rabi, model.cnot);

  std::vector<std::string> zeros(k + 1, "q0"), ones(k + 1, "q1"), start = zeros;
  start[0] = "q1";
  const auto a = static_cast<Eigen::Index>(sys.index_of(zeros));
  const auto b = static_cast<Eigen::Index>(sys.index_of(ones));
  Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(sys.dimension()));
  psi[a] = std::numbers::sqrt2 / 2.0;
  psi[static_cast<Eigen::Index>(sys.index_of(start))] = std::numbers::sqrt2 / 2.0;
  // Target (|0..0> + s |1..1>) / sqrt 2 with s = -(-1)^k.
  const double sign = k % 2 == 1 ? 1.0 : -1.0;

  GhzResult out;
  out.k = k;
  out.method = model.integrator.method;
  out.dimension = sys.dimension();
  double pa = 0.0, pb = 0.0;
  cd z = 0.0;  // <b|rho|a>
  if (model.integrator.method == IntegratorMethod::Trajectories) {
    TrajectoryOptions opts;
    opts.observable = [&](const Eigen::VectorXcd& v) {
      const cd zz = v[b] * std::conj(v[a]);
      const double fa = std::norm(v[a]), fb = std::norm(v[b]);
      return std::vector<double>{fa, fb, zz.real(), zz.imag(), 0.5 * (fa + fb) + sign * zz.real()};
    };
    auto r = evolve_trajectories(QuantumState::pure(psi), sys, seq, model.integrator, opts);
    pa = r.mean[0];
    pb = r.mean[1];
    z = cd(r.mean[2], r.mean[3]);
    out.standard_error = r.standard_error[4];
    out.diagnostics = r.diagnostics;
  } else {
    auto r = evolve_dense(QuantumState::pure(psi).to_density(), sys, seq, model.integrator);
    const auto& rho = r.final_state.matrix();
    pa = rho(a, a).real();
    pb = rho(b, b).real();
    z = rho(b, a);
    out.diagnostics = r.diagnostics;
  }
  out.fidelity = 0.5 * (pa + pb) + std::abs(z);
  out.signed_fidelity = 0.5 * (pa + pb) + sign * z.real();
  out.branch_phase = std::arg(z);
  return out;
}

// ---------------------------------------------------------------------------

std::string scan_csv(const ScanResult& scan, const std::vector<std::string>& comments) {
  scan.validate();
  std::string out;
  for (const auto& c : comments) out += "# " + c + "\n";
  out += scan.axis + "_" + scan.axis_units + "," + scan.observable + ",error\n";
  for (std::size_t i = 0; i < scan.grid.size(); ++i) {
    out += fmt(scan.grid[i]) + "," + fmt(scan.values[i]) + "," + fmt(scan.errors[i]) + "\n";
  }
  return out;
}

std::string truth_table_csv(const TruthTable& table, const std::vector<std::string>& comments) {
  std::string out;
  for (const auto& c : comments) out += "# " + c + "\n";
  out += "input,output,raw,raw_error,counts,corrected\n";
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      out += kBasisLabels[i] + "," + kBasisLabels[j] + "," + fmt(table.raw[i][j]) + "," +
             fmt(table.errors[i][j]) + "," + fmt(table.counts[i][j]) + "," +
             fmt(table.corrected[i][j]) + "\n";
    }
  }
  return out;
}

Report bell_json_sections(const BellReport& bell, std::string protocol) {
  Report r;
  r.protocol = std::move(protocol);
  r.fidelity["bell"] = bell.fidelity;
  r.populations = {{"rho00", bell.rho00}, {"rho01", bell.rho01}, {"rho10", bell.rho10},
                   {"rho11", bell.rho11}};
  r.coherence = {{"c_abs", std::abs(bell.c)}, {"c_phase_rad", std::arg(bell.c)},
                 {"d_re", bell.d.real()}, {"d_im", bell.d.imag()}};
  r.loss = {{"rho_xx", bell.rho_xx}, {"leakage_d", bell.leakage}};
  return r;
}

}  // namespace eitgate
