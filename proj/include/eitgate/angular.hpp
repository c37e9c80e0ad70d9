#pragma once

// Angular-momentum algebra for hyperfine transition strengths. Arguments are
// passed as doubled integers (2j) so half-integer momenta stay exact.

namespace eitgate::angular {

/// Wigner 3-j symbol (j1 j2 j3; m1 m2 m3), all arguments doubled.
double wigner_3j(int tj1, int tj2, int tj3, int tm1, int tm2, int tm3);

/// Wigner 6-j symbol {j1 j2 j3; j4 j5 j6}, all arguments doubled.
double wigner_6j(int tj1, int tj2, int tj3, int tj4, int tj5, int tj6);

/// Fraction of spontaneous decay from |J' F' mF'> into |J F mF> for a single
/// fine-structure line with nuclear spin I. Summed over all (F, mF) of the
/// lower manifold the fractions add to one.
double decay_fraction(int tI, int tJ, int tJp, int tFp, int tmFp, int tF, int tmF);

/// Relative dipole amplitude <J' F' mF'| d_q |J F mF> in units of the reduced
/// fine-structure element <J'||d||J>, with q = mF' - mF.
double dipole_amplitude(int tI, int tJ, int tJp, int tF, int tmF, int tFp, int tmFp);

}  // namespace eitgate::angular
