#include "eitgate/angular.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

namespace eitgate::angular {
namespace {

double log_factorial(int n) { return std::lgamma(static_cast<double>(n) + 1.0); }

bool triangle_ok(int ta, int tb, int tc) {
  if ((ta + tb + tc) % 2 != 0) return false;
  return tc >= std::abs(ta - tb) && tc <= ta + tb;
}

// log of the triangle coefficient Delta(abc) with doubled arguments.
double log_delta(int ta, int tb, int tc) {
  return log_factorial((ta + tb - tc) / 2) + log_factorial((ta - tb + tc) / 2) +
         log_factorial((-ta + tb + tc) / 2) - log_factorial((ta + tb + tc) / 2 + 1);
}

double parity(int n) { return (n % 2 == 0) ? 1.0 : -1.0; }

}  // namespace

double wigner_3j(int tj1, int tj2, int tj3, int tm1, int tm2, int tm3) {
  if (tm1 + tm2 + tm3 != 0) return 0.0;
  if (!triangle_ok(tj1, tj2, tj3)) return 0.0;
  if (std::abs(tm1) > tj1 || std::abs(tm2) > tj2 || std::abs(tm3) > tj3) return 0.0;
  if ((tj1 + tm1) % 2 || (tj2 + tm2) % 2 || (tj3 + tm3) % 2) return 0.0;

  // Racah formula.
  const int a = (tj1 + tj2 - tj3) / 2;
  const int b = (tj1 - tm1) / 2;
  const int c = (tj2 + tm2) / 2;
  const int d = (tj3 - tj2 + tm1) / 2;
  const int e = (tj3 - tj1 - tm2) / 2;
  const int kmin = std::max({0, -d, -e});
  const int kmax = std::min({a, b, c});

  const double log_pref =
      0.5 * (log_delta(tj1, tj2, tj3) + log_factorial((tj1 + tm1) / 2) +
             log_factorial((tj1 - tm1) / 2) + log_factorial((tj2 + tm2) / 2) +
             log_factorial((tj2 - tm2) / 2) + log_factorial((tj3 + tm3) / 2) +
             log_factorial((tj3 - tm3) / 2));

  double sum = 0.0;
  for (int k = kmin; k <= kmax; ++k) {
    const double log_den = log_factorial(k) + log_factorial(a - k) + log_factorial(b - k) +
                           log_factorial(c - k) + log_factorial(d + k) + log_factorial(e + k);
    sum += parity(k) * std::exp(log_pref - log_den);
  }
  return parity((tj1 - tj2 - tm3) / 2) * sum;
}

double wigner_6j(int tj1, int tj2, int tj3, int tj4, int tj5, int tj6) {
  if (!triangle_ok(tj1, tj2, tj3) || !triangle_ok(tj1, tj5, tj6) ||
      !triangle_ok(tj4, tj2, tj6) || !triangle_ok(tj4, tj5, tj3)) {
    return 0.0;
  }
  const int a1 = (tj1 + tj2 + tj3) / 2;
  const int a2 = (tj1 + tj5 + tj6) / 2;
  const int a3 = (tj4 + tj2 + tj6) / 2;
  const int a4 = (tj4 + tj5 + tj3) / 2;
  const int b1 = (tj1 + tj2 + tj4 + tj5) / 2;
  const int b2 = (tj2 + tj3 + tj5 + tj6) / 2;
  const int b3 = (tj3 + tj1 + tj6 + tj4) / 2;
  const int kmin = std::max({a1, a2, a3, a4});
  const int kmax = std::min({b1, b2, b3});

  const double log_pref = log_delta(tj1, tj2, tj3) + log_delta(tj1, tj5, tj6) +
                          log_delta(tj4, tj2, tj6) + log_delta(tj4, tj5, tj3);
  double sum = 0.0;
  for (int k = kmin; k <= kmax; ++k) {
    const double log_term = log_factorial(k + 1) - log_factorial(k - a1) - log_factorial(k - a2) -
                            log_factorial(k - a3) - log_factorial(k - a4) - log_factorial(b1 - k) -
                            log_factorial(b2 - k) - log_factorial(b3 - k);
    sum += parity(k) * std::exp(0.5 * log_pref + log_term);
  }
  return sum;
}

double decay_fraction(int tI, int tJ, int tJp, int tFp, int tmFp, int tF, int tmF) {
  const int tq = tmF - tmFp;
  if (std::abs(tq) > 2) return 0.0;
  const double six = wigner_6j(tJ, tJp, 2, tFp, tF, tI);
  const double three = wigner_3j(tF, 2, tFp, -tmF, tq, tmFp);
  return (tJp + 1) * (tF + 1) * (tFp + 1) * six * six * three * three;
}

double dipole_amplitude(int tI, int tJ, int tJp, int tF, int tmF, int tFp, int tmFp) {
  const int tq = tmFp - tmF;
  // Wigner-Eckart in F, then decouple the nuclear spin from the reduced element.
  const double three = wigner_3j(tFp, 2, tF, -tmFp, tq, tmF);
  const double six = wigner_6j(tJp, tJ, 2, tF, tFp, tI);
  const double phase_we = parity((tFp - tmFp) / 2);
  const double phase_red = parity((tF + tJp + 2 + tI) / 2);
  return phase_we * three * phase_red * std::sqrt((tF + 1.0) * (tFp + 1.0)) * six;
}

}  // namespace eitgate::angular
