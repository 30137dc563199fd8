#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bergman/errors.hpp"

namespace bergman {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;

/// Parametrized weight on the unit disc:
///
///   phi(z) = (1/2) * ( -A log(1 - |z|^2) + B (1 - |z|^2)^(-alpha) ) + Re g(z),
///   g(z)   = sum_k c_k z^k.
///
/// B = 0 gives the pure power weight, B > 0 the exponential-type weight, and
/// a nonconstant g adds a harmonic perturbation h = Re g. Immutable in use;
/// all evaluation functions are pure.
struct WeightSpec {
  double A = 0.0;
  double B = 0.0;
  double alpha = 1.0;
  std::vector<cplx> harmonic_coeffs;  // coefficients of g, degree = size() - 1

  /// Throws SpecError unless A >= 0, B >= 0, alpha > 0 and at least one of
  /// A, B is positive (otherwise the Laplacian vanishes and tau is undefined).
  void validate() const {
    if (!(std::isfinite(A) && std::isfinite(B) && std::isfinite(alpha)))
      throw SpecError("WeightSpec: non-finite parameter");
    if (A < 0.0 || B < 0.0)
      throw SpecError("WeightSpec: A and B must be nonnegative");
    if (!(alpha > 0.0))
      throw SpecError("WeightSpec: alpha must be positive");
    if (A == 0.0 && B == 0.0)
      throw SpecError("WeightSpec: A = B = 0 gives a vanishing Laplacian; tau undefined");
    for (cplx c : harmonic_coeffs)
      if (!(std::isfinite(c.real()) && std::isfinite(c.imag())))
        throw SpecError("WeightSpec: non-finite harmonic coefficient");
  }

  /// Radial iff the harmonic part is a real constant.
  bool radial() const {
    for (std::size_t k = 0; k < harmonic_coeffs.size(); ++k) {
      if (k == 0) {
        if (harmonic_coeffs[0].imag() != 0.0) return false;
      } else if (harmonic_coeffs[k] != cplx(0.0, 0.0)) {
        return false;
      }
    }
    return true;
  }

  cplx g(cplx z) const {
    cplx acc(0.0, 0.0);
    for (auto it = harmonic_coeffs.rbegin(); it != harmonic_coeffs.rend(); ++it)
      acc = acc * z + *it;
    return acc;
  }
};

namespace detail {

inline double check_disc(cplx z) {
  const double t = std::norm(z);
  if (!(t < 1.0)) throw DomainError("evaluation point outside the open unit disc");
  return t;
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace detail

/// Stable identifier of a spec: FNV-1a of the canonical parameter string.
/// Trailing zero coefficients of g do not change the hash.
inline std::string spec_hash(const WeightSpec& spec) {
  char buf[64];
  std::string s;
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g;", v);
    s += buf;
  };
  put(spec.A);
  put(spec.B);
  put(spec.alpha);
  std::size_t d = spec.harmonic_coeffs.size();
  while (d > 0 && spec.harmonic_coeffs[d - 1] == cplx(0.0, 0.0)) --d;
  for (std::size_t k = 0; k < d; ++k) {
    put(spec.harmonic_coeffs[k].real());
    put(spec.harmonic_coeffs[k].imag());
  }
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(detail::fnv1a(s)));
  return buf;
}

/// phi(z); requires |z| < 1.
inline double eval_phi(const WeightSpec& spec, cplx z) {
  spec.validate();
  const double t = detail::check_disc(z);
  const double u = 1.0 - t;
  double value = 0.0;
  if (spec.A != 0.0) value -= 0.5 * spec.A * std::log(u);
  if (spec.B != 0.0) value += 0.5 * spec.B * std::pow(u, -spec.alpha);
  return value + spec.g(z).real();
}

/// Laplacian of phi through the closed form
///   2A/(1-t)^2 + 2 B alpha (1 + alpha t) / (1-t)^(alpha+2),   t = |z|^2;
/// the harmonic part contributes zero.
inline double eval_laplacian(const WeightSpec& spec, cplx z) {
  spec.validate();
  const double t = detail::check_disc(z);
  const double u = 1.0 - t;
  double lap = 2.0 * spec.A / (u * u);
  if (spec.B != 0.0)
    lap += 2.0 * spec.B * spec.alpha * (1.0 + spec.alpha * t) *
           std::pow(u, -(spec.alpha + 2.0));
  return lap;
}

/// tau(z) = (Laplacian phi)^(-1/2). For B = 0 this is (1-|z|^2)/sqrt(2A).
inline double eval_tau(const WeightSpec& spec, cplx z) {
  return 1.0 / std::sqrt(eval_laplacian(spec, z));
}

namespace detail {

inline double inv_tau(const WeightSpec& spec, cplx z) {
  return std::sqrt(eval_laplacian(spec, z));
}

}  // namespace detail

/// Empirical certificate data for the tau regularity conditions: Lipschitz
/// slope of tau, boundary domination tau/(1-|z|), and a far-field slope
/// witness (C3, a) with C3 < 1 when the grid search succeeds.
struct OPReport {
  double C1_est = 0.0;  // max over sampled pairs of |tau(z)-tau(w)| / |z-w|
  double C2_est = 0.0;  // max over samples of tau(z) / (1-|z|)
  std::optional<std::pair<double, double>> C3_found;  // (C3, a)
  long sample_count = 0;
  double r_max = 0.0;
  std::string note;
};

/// Samples a polar grid in |z| <= r_max, stratified in |z| and arg z with
/// radii at stratum midpoints and no ring rotation, so collinear pairs (which
/// maximize the radial slopes) are present. Pair statistics run over ordered
/// pairs; the C3 numerator tau(w) - tau(z) is clipped at zero and the first
/// a in a_grid with C3(a) < 1 - margin wins.
inline OPReport check_op_conditions(const WeightSpec& spec, double r_max, int n_samples,
                                    const std::vector<double>& a_grid = {0.5, 1.0, 2.0, 4.0, 8.0},
                                    double margin = 0.01) {
  spec.validate();
  if (!(r_max > 0.0 && r_max < 1.0))
    throw ConfigError("check_op_conditions: r_max must lie in (0,1)");
  if (n_samples < 1) throw ConfigError("check_op_conditions: empty sample set");
  for (double a : a_grid)
    if (!(a > 0.0)) throw ConfigError("check_op_conditions: a_grid entries must be positive");

  const int n_r = std::max(1, std::min<int>(n_samples, (int)std::lround(std::sqrt(8.0 * n_samples))));
  const int n_th = std::max(1, (n_samples + n_r - 1) / n_r);

  std::vector<cplx> pts;
  pts.reserve(static_cast<std::size_t>(n_r) * n_th);
  for (int i = 0; i < n_r; ++i) {
    const double r = r_max * (i + 0.5) / n_r;
    for (int j = 0; j < n_th; ++j) {
      const double th = 2.0 * kPi * j / n_th;
      pts.push_back(std::polar(r, th));
    }
  }

  std::vector<double> tau(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) tau[i] = eval_tau(spec, pts[i]);

  OPReport rep;
  rep.sample_count = static_cast<long>(pts.size());
  rep.r_max = r_max;
  for (std::size_t i = 0; i < pts.size(); ++i)
    rep.C2_est = std::max(rep.C2_est, tau[i] / (1.0 - std::abs(pts[i])));

  if (pts.size() < 2) {
    rep.note = "single sample: no admissible pair, C1 and C3 statistics unavailable";
    return rep;
  }

  std::vector<double> c3max(a_grid.size(), 0.0);
  std::vector<long> c3count(a_grid.size(), 0);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      const double dist = std::abs(pts[i] - pts[j]);
      if (dist == 0.0) continue;
      const double diff = tau[j] - tau[i];  // ordered pair (z=pts[i], w=pts[j])
      rep.C1_est = std::max(rep.C1_est, std::abs(diff) / dist);
      const double fwd = std::max(0.0, diff) / dist;
      const double bwd = std::max(0.0, -diff) / dist;
      for (std::size_t k = 0; k < a_grid.size(); ++k) {
        if (dist > a_grid[k] * tau[i]) {
          ++c3count[k];
          c3max[k] = std::max(c3max[k], fwd);
        }
        if (dist > a_grid[k] * tau[j]) {
          ++c3count[k];
          c3max[k] = std::max(c3max[k], bwd);
        }
      }
    }
  }
  for (std::size_t k = 0; k < a_grid.size(); ++k) {
    if (c3count[k] > 0 && c3max[k] < 1.0 - margin) {
      rep.C3_found = std::make_pair(c3max[k], a_grid[k]);
      break;
    }
  }
  if (!rep.C3_found)
    rep.note = "condition (3) search: no a in the grid certified C3 < 1 - margin";
  return rep;
}

}  // namespace bergman
