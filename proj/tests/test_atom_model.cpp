#include <cmath>
#include <numbers>

#include "doctest.h"
#include "eitgate/angular.hpp"
#include "eitgate/atom_model.hpp"
#include "eitgate/units.hpp"

using namespace eitgate;

TEST_SUITE("atom_model") {

// Exact values from sympy.physics.wigner for Cs (I = 7/2, J = 1/2), decay from
// |J', F', mF' = 1> into the mF = 0 clock states.
struct Frozen {
  int two_jp, two_fp;
  double to_f3, to_f4;
};
constexpr Frozen kFrozen[] = {
    {3, 4, 1.0 / 7.0, 0.0},        {3, 6, 3.0 / 8.0, 1.0 / 24.0}, {3, 8, 25.0 / 168.0, 7.0 / 24.0},
    {3, 10, 0.0, 1.0 / 3.0},       {1, 6, 1.0 / 8.0, 1.0 / 8.0},  {1, 8, 5.0 / 24.0, 5.0 / 24.0},
};

TEST_CASE("decay fractions match frozen sympy values") {
  for (const auto& f : kFrozen) {
    CAPTURE(f.two_fp);
    CHECK(angular::decay_fraction(7, 1, f.two_jp, f.two_fp, 2, 6, 0) ==
          doctest::Approx(f.to_f3).epsilon(1e-12));
    CHECK(angular::decay_fraction(7, 1, f.two_jp, f.two_fp, 2, 8, 0) ==
          doctest::Approx(f.to_f4).epsilon(1e-12));
  }
}

TEST_CASE("wigner symbols against sympy") {
  CHECK(angular::wigner_3j(2, 2, 2, 2, -2, 0) == doctest::Approx(std::sqrt(6.0) / 6.0));
  CHECK(angular::wigner_3j(7, 2, 5, 1, -2, 1) == doctest::Approx(0.18898223650461363));
  CHECK(angular::wigner_6j(2, 2, 2, 2, 2, 2) == doctest::Approx(1.0 / 6.0));
  CHECK(angular::wigner_6j(1, 3, 2, 6, 8, 7) == doctest::Approx(1.0 / 12.0));
}

TEST_CASE("decay from any sublevel sums to one over the ground manifold") {
  for (int two_fp : {4, 6, 8, 10}) {
    for (int two_mfp = -two_fp; two_mfp <= two_fp; two_mfp += 2) {
      double sum = 0.0;
      for (int two_f : {6, 8}) {
        for (int two_mf = -two_f; two_mf <= two_f; two_mf += 2) {
          sum += angular::decay_fraction(7, 1, 3, two_fp, two_mfp, two_f, two_mf);
        }
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("6P3/2 preset reproduces the calibration table") {
  const auto s = preset_6p32();
  CHECK(s.dimension() == 8);
  CHECK(to_mhz(s.rabi("q0", "fe3")) == doctest::Approx(42.3));
  CHECK(to_mhz(s.rabi("q1", "fe4")) == doctest::Approx(37.3));
  CHECK(to_mhz(s.rabi("fe5", "r")) == doctest::Approx(27.1));
  CHECK(s.rabi("q1", "fe2") == 0.0);
  CHECK(s.rabi("q0", "fe5") == 0.0);
  CHECK(to_ghz(-s.level("fe4").energy_offset) == doctest::Approx(1.121));
  CHECK(to_mhz(s.total_decay("fe3")) == doctest::Approx(5.2));
  CHECK(to_khz(s.total_decay("r")) == doctest::Approx(1.0));
}

TEST_CASE("branching table is normalised and leaks for fe2/fe5") {
  const auto table = branching_fractions(preset_6p32());
  for (const auto& [fe, row] : table) {
    double sum = 0.0;
    for (const auto& [to, frac] : row) {
      CHECK(frac >= 0.0);
      sum += frac;
    }
    CHECK(sum == doctest::Approx(1.0));
  }
  CHECK(table.at("fe2").at("q1") == 0.0);
  CHECK(table.at("fe5").at("q0") == 0.0);
  CHECK(table.at("fe5").at("d") == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("power scaling is linear in intensity") {
  const auto a = preset_6p32(4.0, 1.0);
  CHECK(a.rabi("q0", "fe3") == doctest::Approx(2.0 * preset_6p32().rabi("q0", "fe3")));
  CHECK_THROWS_AS(preset_6p32(-1.0), ModelError);
  CHECK_THROWS_AS(preset_7p12(200e-6, 50e-3, -3.0), ModelError);
}

TEST_CASE("interaction and geometry") {
  const auto v = cs_rydberg_interaction();
  CHECK(to_mhz(interaction_strength(v, 6.0)) == doctest::Approx(34.9));
  CHECK(to_mhz(interaction_strength(v, 3.0)) == doctest::Approx(34.9 * 64.0));
  const auto line = Geometry::star(2, 4.0);
  CHECK(line.distance(0, 1) == doctest::Approx(4.0));
  CHECK(line.distance(1, 2) == doctest::Approx(8.0));
  const auto corner = Geometry::right_angle(4.0);
  CHECK(corner.distance(1, 2) == doctest::Approx(4.0 * std::numbers::sqrt2));
  const auto star4 = Geometry::star(4, 4.0);
  for (std::size_t t = 1; t <= 4; ++t) CHECK(star4.distance(0, t) == doctest::Approx(4.0));
}

TEST_CASE("EIT break margin at the operating point exceeds one") {
  const auto s = preset_6p32();
  CHECK(eit_break_margin(s, mhz(34.9)) > 1.0);
  CHECK(std::isinf(eit_break_margin(s.with_beam_scaled(kCouplingBeam, 0.0), mhz(34.9))));
}

TEST_CASE("control scheme variants") {
  const auto t = preset_6p32();
  const auto c = control_scheme(t, mhz(1.77));
  CHECK(c.dimension() == 4);
  CHECK(c.rabi("q1", "r") == doctest::Approx(mhz(1.77)));
  ControlOptions full;
  full.full_ladder = true;
  full.scatter_to_leakage = true;
  const auto f = control_scheme(t, mhz(1.77), full);
  CHECK(f.dimension() == 8);
  for (const auto& fe : f.labels_in(LevelCategory::Intermediate)) {
    CHECK(f.total_decay(fe) == doctest::Approx(mhz(5.2)));
  }
  CHECK_THROWS_AS(control_scheme(t, 0.0), ModelError);
}

TEST_CASE("preset catalog") {
  const auto cat = preset_catalog();
  CHECK(cat.size() >= 3);
  bool has6 = false, has7 = false;
  for (const auto& p : cat) {
    has6 |= p.id == "6p32";
    has7 |= p.id == "7p12";
  }
  CHECK(has6);
  CHECK(has7);
  CHECK_THROWS_AS(protocol_defaults("qubit"), ModelError);
}

}
