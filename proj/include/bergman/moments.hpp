#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "bergman/quadrature.hpp"
#include "bergman/weight.hpp"

namespace bergman {

/// Log-scale monomial norms for a radial weight,
///   m_n = ||z^n||^2 = 2 pi integral_0^1 r^(2n+1) e^(-2 phi(r)) dr,
/// with per-entry absolute quadrature error estimates. Immutable once built
/// and shareable across threads.
struct MomentTable {
  std::vector<double> log_m;
  std::vector<double> quad_err;  // absolute error estimate on m_n
  std::string spec_hash;
  int N = -1;
};

/// Builds log m_0 .. log m_N by adaptive quadrature in log space (the
/// integrand is handled as exp((2n+1) log r - 2 phi(r)) with max-exponent
/// rescaling per panel). Throws AccuracyError, carrying the achieved bound,
/// if some entry cannot reach relative error tol.
inline MomentTable compute_moments(const WeightSpec& spec, int N, double tol) {
  spec.validate();
  if (!spec.radial())
    throw MethodMismatchError("compute_moments: weight is not radial; use the Gram route");
  if (N < 0) throw ConfigError("compute_moments: N must be >= 0");
  if (!(tol > 0.0)) throw ConfigError("compute_moments: tol must be positive");

  MomentTable table;
  table.N = N;
  table.spec_hash = spec_hash(spec);
  table.log_m.resize(N + 1);
  table.quad_err.resize(N + 1);
  const double log_2pi = std::log(2.0 * kPi);
  for (int n = 0; n <= N; ++n) {
    auto g = [&spec, n](double r) -> double {
      if (!(r > 0.0) || !(r < 1.0)) return quad::kNegInf;
      return (2.0 * n + 1.0) * std::log(r) - 2.0 * eval_phi(spec, cplx(r, 0.0));
    };
    const auto I = quad::integrate_log(g, 0.0, 1.0, tol);
    if (!(I.log_value > quad::kNegInf))
      throw AccuracyError("compute_moments: integrand underflowed to zero at n=" +
                          std::to_string(n));
    if (I.rel_err > tol)
      throw AccuracyError("compute_moments: quadrature reached relative error " +
                          std::to_string(I.rel_err) + " > tol at n=" + std::to_string(n));
    table.log_m[n] = log_2pi + I.log_value;
    table.quad_err[n] = I.rel_err * std::exp(table.log_m[n]);
  }
  return table;
}

inline double moment(const MomentTable& table, int n) {
  return std::exp(table.log_m.at(n));
}

}  // namespace bergman
