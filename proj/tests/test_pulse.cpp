#include <cmath>
#include <numbers>

#include "doctest.h"
#include "eitgate/atom_model.hpp"
#include "eitgate/pulse.hpp"
#include "eitgate/units.hpp"

using namespace eitgate;
using std::numbers::pi;

TEST_SUITE("pulse") {

TEST_CASE("raised-cosine area") {
  // Numerical quadrature of (1 - cos)^2 / 4 gives 3 tau / 8.
  const double tau = 2e-6;
  const int n = 20000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double t = (i + 0.5) * tau / n;
    const double v = raised_cosine(t, tau, 1.0);
    sum += v * v * tau / n;
  }
  CHECK(sum == doctest::Approx(3.0 * tau / 8.0).epsilon(1e-8));
  const Envelope e{EnvelopeKind::RaisedCosine, tau, 1.0};
  CHECK(e.squared_area() == doctest::Approx(sum).epsilon(1e-8));
  CHECK(raised_cosine(-1e-9, tau, 1.0) == 0.0);
  CHECK(raised_cosine(tau / 2, tau, 2.0) == doctest::Approx(2.0));
}

TEST_CASE("pi-area duration") {
  const double omega_r = mhz(0.668);
  const double tau = duration_for_pi_area(omega_r);
  CHECK(to_us(tau) == doctest::Approx(1.996).epsilon(1e-3));
  CHECK(raised_cosine_area(omega_r, tau) == doctest::Approx(pi));
  CHECK_THROWS_AS(duration_for_pi_area(0.0), ModelError);
}

TEST_CASE("microwave shift makes a 4 pi rotation") {
  const double rabi = mhz(0.1);
  const double shift = local_microwave_shift(pi, rabi);
  CHECK(shift == doctest::Approx(std::sqrt(15.0) * rabi));
  // Generalised Rabi frequency times the pi duration is 4 pi.
  CHECK(std::hypot(rabi, shift) * pi / rabi == doctest::Approx(4.0 * pi));
  CHECK(local_microwave_shift(4.0 * pi, rabi) == doctest::Approx(0.0));
  CHECK_THROWS_AS(local_microwave_shift(5.0 * pi, rabi), ModelError);
}

TEST_CASE("CNOT layout") {
  const auto seq = cnot_sequence(3, 2e-6, mhz(1.77));
  REQUIRE(seq.segments().size() == 3);
  const double t_pi = pi / mhz(1.77);
  CHECK(seq.segments()[0].duration == doctest::Approx(t_pi));
  CHECK(seq.segments()[1].start == doctest::Approx(t_pi));
  CHECK(seq.segments()[1].drives.size() == 4);
  CHECK(seq.total_duration() == doctest::Approx(2e-6 + 2 * t_pi));
  CHECK_NOTHROW(seq.validate(3));
  CHECK_THROWS_AS(seq.validate(2), ModelError);
  CHECK(seq.warnings().empty());

  CnotOptions o;
  o.raman_rabi = mhz(0.668);
  CHECK(cnot_sequence(2, 1.5e-6, mhz(1.77), o).warnings().size() == 1);
  CHECK(cnot_sequence(2, 1.996e-6, mhz(1.77), o).warnings().empty());
  CHECK_THROWS_AS(cnot_sequence(1, 2e-6, mhz(1.77)), ModelError);
}

TEST_CASE("overlap and duration errors") {
  PulseSequence s;
  Segment a;
  a.label = "a";
  a.duration = 1e-6;
  a.sites = {0};
  s.append(a);
  Segment b = a;
  b.label = "b";
  s.append(b, -0.5e-6);
  CHECK_THROWS_AS(s.validate(1), ModelError);

  PulseSequence z;
  Segment c = a;
  c.duration = 0.0;
  z.append(c);
  CHECK_THROWS_AS(z.validate(1), ModelError);
}

TEST_CASE("timeline CSV round trip") {
  auto seq = bell_prep_sequence(2e-6, mhz(1.77));
  seq.append(microwave_segment({0, 1}, pi, mhz(0.1), {0}));
  const auto text = seq.to_csv();
  CHECK(text.find("# segment") != std::string::npos);
  const auto back = PulseSequence::from_csv(text);
  REQUIRE(back.segments().size() == seq.segments().size());
  for (std::size_t i = 0; i < seq.segments().size(); ++i) {
    const auto& a = seq.segments()[i];
    const auto& b = back.segments()[i];
    CHECK(a.label == b.label);
    CHECK(a.kind == b.kind);
    CHECK(a.sites == b.sites);
    REQUIRE(a.drives.size() == b.drives.size());
    for (std::size_t j = 0; j < a.drives.size(); ++j) {
      CHECK(a.drives[j].beam == b.drives[j].beam);
      CHECK(a.drives[j].site == b.drives[j].site);
      CHECK(a.drives[j].envelope.kind == b.drives[j].envelope.kind);
      CHECK(a.drives[j].envelope.duration ==
            doctest::Approx(b.drives[j].envelope.duration).epsilon(1e-15));
    }
    CHECK(a.start == doctest::Approx(b.start).epsilon(1e-15));
    REQUIRE(a.shifts.size() == b.shifts.size());
    for (std::size_t j = 0; j < a.shifts.size(); ++j) {
      CHECK(a.shifts[j].shift == doctest::Approx(b.shifts[j].shift).epsilon(1e-15));
    }
  }
  // Shifts are stored in MHz; after one pass the text is a fixed point.
  CHECK(PulseSequence::from_csv(back.to_csv()) == back);
  const std::string header = "start_us,duration_us,site,coupling,envelope,peak_scale,detuning_MHz,phase_rad\n";
  CHECK_THROWS_AS(PulseSequence::from_csv(header + "0,1,0,raman,constant,1,0,0\n"), ModelError);
  CHECK_THROWS_AS(PulseSequence::from_csv(header + "# segment drive 0 1 [0] a\n0,1,0\n"),
                  ModelError);
}

TEST_CASE("basis preparation circuits") {
  for (const auto& basis : {"00", "01", "10", "11"}) {
    const auto [prep, readout] = ideal_prep_and_readout(basis);
    CHECK(prep.segments().size() == readout.segments().size());
    const auto [mp, mr] = prep_and_readout_circuits(basis, mhz(0.1));
    CHECK(mp.segments().size() == prep.segments().size());
  }
  CHECK_THROWS_AS(ideal_prep_and_readout("2"), ModelError);
  CHECK_THROWS_AS(parity_sequence(bell_prep_sequence(2e-6, mhz(1.77)), 7.0), ModelError);
}

TEST_CASE("detuned idle phase") {
  PhaseOptions idle{PhaseMode::DetunedIdle, mhz(1.0)};
  const auto s = phase_segment({0, 1}, pi / 2, idle);
  CHECK(s.kind == SegmentKind::Drive);
  CHECK(s.duration * mhz(1.0) == doctest::Approx(pi / 2));
  CHECK(s.shifts.size() == 2);
  CHECK_THROWS_AS(phase_segment({0}, 1.0, PhaseOptions{PhaseMode::DetunedIdle, 0.0}), ModelError);
}

}
