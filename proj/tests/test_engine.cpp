#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "eitgate/analysis.hpp"
#include "eitgate/dynamics.hpp"
#include "eitgate/units.hpp"

using namespace eitgate;
using std::numbers::pi;

namespace {

// Two qubit levels driven by a microwave, q1 decaying to q0 and to d.
LevelScheme decay_toy(double rabi, double gamma_back, double gamma_loss) {
  return qubit_scheme(rabi).with_extra_decay("q1", "q0", gamma_back).with_extra_decay("q1", "d",
                                                                                    gamma_loss);
}

CompositeSystem single(const LevelScheme& s) {
  return CompositeSystem({s}, Geometry({{0.0, 0.0}}), InteractionSpec{});
}

PulseSequence mw(double duration) {
  PulseSequence seq("mw");
  Segment s;
  s.label = "mw";
  s.duration = duration;
  s.sites = {0};
  s.drives.push_back({0, kMicrowaveBeam, Envelope{EnvelopeKind::Constant, duration, 1.0}, 1.0});
  seq.append(s);
  return seq;
}

IntegratorConfig tight() {
  IntegratorConfig c;
  c.tolerance = 1e-11;
  c.max_step = 1e-8;
  return c;
}

}  // namespace

TEST_SUITE("engine") {

TEST_CASE("Hamiltonian is Hermitian and carries pair terms") {
  const auto model = make_gate_model("6p32");
  const auto sys = build_system(model, 2);
  CHECK(sys.pair_terms().size() == 3);
  const auto seq = cnot_sequence(3, model.tau, model.rydberg_rabi);
  for (double t : {0.1e-6, 0.5e-6, 1.3e-6}) {
    const SparseOp h = build_hamiltonian(sys, seq, t);
    const SparseOp hd = SparseOp(h.adjoint());
    CHECK((h - hd).norm() < 1e-6 * h.norm());
  }
  const auto suppressed = build_system(model, 2, std::nullopt, true);
  CHECK(suppressed.pair_terms().size() == 2);
  // Control-target terms use the line distance.
  CHECK(sys.pair_terms()[0].strength == doctest::Approx(mhz(34.9)));
}

TEST_CASE("resonant Rabi oscillation") {
  const double rabi = mhz(1.0);
  const auto sys = single(qubit_scheme(rabi));
  const double t = 0.37e-6;
  const auto r = evolve_dense(QuantumState::basis(sys, {"q0"}), sys, mw(t), tight());
  CHECK(r.final_state.populations()(1) ==
        doctest::Approx(std::pow(std::sin(rabi * t / 2), 2)).epsilon(1e-8));
}

TEST_CASE("exponential decay") {
  const double gamma = mhz(0.5);
  const auto sys = single(qubit_scheme(mhz(1.0)).with_extra_decay("q1", "d", gamma));
  PulseSequence idle("idle");
  Segment s;
  s.label = "wait";
  s.duration = 1e-6;
  s.sites = {0};
  idle.append(s);
  const auto r = evolve_dense(QuantumState::basis(sys, {"q1"}), sys, idle, tight());
  CHECK(r.final_state.populations()(1) == doctest::Approx(std::exp(-gamma * 1e-6)).epsilon(1e-8));
  CHECK(r.final_state.populations()(2) ==
        doctest::Approx(1.0 - std::exp(-gamma * 1e-6)).epsilon(1e-8));
}

TEST_CASE("Lindblad generator is trace-free and Hermiticity-preserving") {
  const auto model = make_gate_model("6p32");
  const auto sys = build_system(model, 1);
  const auto seq = cnot_sequence(2, model.tau, model.rydberg_rabi);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  Eigen::MatrixXcd a(sys.dimension(), sys.dimension());
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = cd(g(rng), g(rng));
  Eigen::MatrixXcd rho = a * a.adjoint();
  rho /= rho.trace().real();
  const auto l = lindblad_rhs(sys, seq, 1.0e-6, rho);
  const double scale = l.norm();
  CHECK(std::abs(l.trace()) < 1e-9 * scale);
  CHECK((l - l.adjoint()).norm() < 1e-9 * scale);
}

TEST_CASE("dense evolution keeps a physical state") {
  const auto model = make_gate_model("6p32");
  const auto run = simulate_bell(model);
  CHECK(run.diagnostics.max_trace_error < 1e-6);
  CHECK(run.diagnostics.max_hermiticity_error < 1e-9);
  CHECK(run.diagnostics.min_eigenvalue > -1e-8);
}

TEST_CASE("local gates") {
  const auto x = gate_matrix(GateKind::X, pi);
  CHECK(std::abs(x(1, 0) - cd(0, -1)) < 1e-14);
  const auto z = gate_matrix(GateKind::Z, pi / 2);
  CHECK(std::abs(z(1, 1) - cd(0, 1)) < 1e-14);
  CHECK((x * x.adjoint() - Eigen::Matrix2cd::Identity()).norm() < 1e-14);
}

TEST_CASE("trajectories agree with the master equation") {
  const auto sys = single(decay_toy(mhz(1.0), mhz(0.2), mhz(0.3)));
  const auto seq = mw(1.2e-6);
  const auto start = QuantumState::basis(sys, {"q0"});
  const auto dense = evolve_dense(start, sys, seq, tight()).final_state.populations();
  IntegratorConfig c = tight();
  c.method = IntegratorMethod::Trajectories;
  c.trajectories = 3000;
  c.seed = 11;
  const auto traj = evolve_trajectories(QuantumState::basis(sys, {"q0"},
                                                            QuantumState::Representation::PureVector),
                                        sys, seq, c);
  CHECK(traj.jumped > 0);
  for (int i = 0; i < 3; ++i) {
    CAPTURE(i);
    CHECK(std::abs(traj.mean[i] - dense(i)) < 4.0 * traj.standard_error[i] + 1e-12);
  }
}

TEST_CASE("trajectory results do not depend on the thread count") {
  const auto sys = single(decay_toy(mhz(1.0), mhz(0.2), mhz(0.3)));
  const auto seq = mw(1.0e-6);
  const auto start = QuantumState::basis(sys, {"q0"}, QuantumState::Representation::PureVector);
  IntegratorConfig c = tight();
  c.method = IntegratorMethod::Trajectories;
  c.trajectories = 200;
  c.threads = 1;
  const auto one = evolve_trajectories(start, sys, seq, c);
  c.threads = 3;
  const auto three = evolve_trajectories(start, sys, seq, c);
  CHECK(one.mean == three.mean);
  c.seed = 2;
  CHECK(evolve_trajectories(start, sys, seq, c).mean != one.mean);
}

TEST_CASE("fixed-step RK4 matches the adaptive solver") {
  const auto sys = single(decay_toy(mhz(1.0), mhz(0.2), mhz(0.3)));
  const auto seq = mw(0.8e-6);
  const auto start = QuantumState::basis(sys, {"q0"});
  IntegratorConfig c = tight();
  const auto a = evolve_dense(start, sys, seq, c).final_state.populations();
  c.method = IntegratorMethod::FixedRk4;
  c.fixed_step = 1e-9;
  const auto b = evolve_dense(start, sys, seq, c).final_state.populations();
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("bad inputs") {
  const auto sys = single(qubit_scheme(mhz(1.0)));
  CHECK_THROWS_AS(
      evolve_dense(QuantumState::basis(sys, {"q0"}, QuantumState::Representation::PureVector), sys,
                   mw(1e-7), tight()),
      ModelError);
  IntegratorConfig c;
  c.tolerance = -1.0;
  CHECK_THROWS_AS(c.validate(), ModelError);
  CHECK_THROWS_AS(integrator_method_from_string("euler"), ModelError);
}

}
