#pragma once

// Adaptive Gauss-Kronrod (G7, K15) quadrature for integrands supplied in log
// form: computes log of  integral exp(g(x)) dx  with per-panel max-exponent
// rescaling, so integrands spanning thousands of orders of magnitude never
// overflow or underflow the accumulation.

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "bergman/errors.hpp"

namespace bergman::quad {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

namespace detail {

// K15 abscissae (positive half, descending) and weights; the embedded G7
// rule shares the odd-index nodes.
inline constexpr double kXgk[8] = {
    0.9914553711208126, 0.9491079123427585, 0.8648644233597691,
    0.7415311855993944, 0.5860872354676911, 0.4058451513773972,
    0.2077849550078985, 0.0};
inline constexpr double kWgk[8] = {
    0.02293532201052922, 0.06309209262997855, 0.10479001032225018,
    0.14065325971552592, 0.16900472663926790, 0.19035057806478541,
    0.20443294007529889, 0.20948214108472782};
inline constexpr double kWg[4] = {
    0.12948496616886969, 0.27970539148927664, 0.38183005050511894,
    0.41795918367346939};

struct LogPanel {
  double a = 0.0, b = 0.0;
  double log_val = kNegInf;  // log of the K15 estimate on [a, b]
  double log_err = kNegInf;  // log of |K15 - G7|
};

template <typename F>
LogPanel make_panel(F& g, double a, double b) {
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  double v[15];
  double vmax = kNegInf;
  for (int i = 0; i < 8; ++i) {
    v[i] = g(mid - half * kXgk[i]);
    if (v[i] > vmax) vmax = v[i];
    if (i < 7) {
      v[14 - i] = g(mid + half * kXgk[i]);
      if (v[14 - i] > vmax) vmax = v[14 - i];
    }
  }
  LogPanel p{a, b, kNegInf, kNegInf};
  if (!(vmax > kNegInf)) return p;  // integrand vanishes on this panel
  double sk = 0.0, sg = 0.0;
  for (int i = 0; i < 15; ++i) {
    const int j = i < 8 ? i : 14 - i;
    const double e = std::isfinite(v[i]) ? std::exp(v[i] - vmax) : 0.0;
    sk += kWgk[j] * e;
    if (j % 2 == 1) sg += kWg[(j - 1) / 2] * e;  // G7 nodes sit at odd j
  }
  p.log_val = sk > 0.0 ? vmax + std::log(half * sk) : kNegInf;
  const double diff = half * std::abs(sk - sg);
  p.log_err = diff > 0.0 ? vmax + std::log(diff) : kNegInf;
  return p;
}

}  // namespace detail

struct LogIntegral {
  double log_value = kNegInf;
  double rel_err = 0.0;
  int panels = 0;
};

/// log of  integral_a^b exp(g(x)) dx.  Bisects the panel with the largest
/// K15/G7 discrepancy until the summed discrepancy is below rel_tol times the
/// integral. g may return -inf where the integrand vanishes. The achieved
/// bound is always reported; the caller decides whether it suffices.
template <typename F>
LogIntegral integrate_log(F&& g, double a, double b, double rel_tol, int max_panels = 4000) {
  if (!(rel_tol > 0.0)) throw ConfigError("integrate_log: rel_tol must be positive");
  if (!(b >= a)) throw DomainError("integrate_log: inverted interval");
  LogIntegral out;
  if (a == b) return out;

  const double width = b - a;
  std::vector<detail::LogPanel> ps;
  ps.reserve(64);
  // Dyadic seed refined toward b; our integrands peak near the right endpoint.
  double prev = a;
  for (int k = 1; k <= 7; ++k) {
    const double cut = b - width * std::ldexp(1.0, -k);
    ps.push_back(detail::make_panel(g, prev, cut));
    prev = cut;
  }
  ps.push_back(detail::make_panel(g, prev, b));

  auto totals = [&ps]() {
    double mv = kNegInf, me = kNegInf;
    for (const auto& p : ps) {
      mv = std::max(mv, p.log_val);
      me = std::max(me, p.log_err);
    }
    double lv = kNegInf, le = kNegInf;
    if (mv > kNegInf) {
      double sv = 0.0;
      for (const auto& p : ps)
        if (p.log_val > kNegInf) sv += std::exp(p.log_val - mv);
      lv = mv + std::log(sv);
    }
    if (me > kNegInf) {
      double se = 0.0;
      for (const auto& p : ps)
        if (p.log_err > kNegInf) se += std::exp(p.log_err - me);
      le = me + std::log(se);
    }
    return std::pair<double, double>(lv, le);
  };

  const double log_tol = std::log(rel_tol);
  while (static_cast<int>(ps.size()) < max_panels) {
    const auto [lv, le] = totals();
    if (!(lv > kNegInf)) break;  // integral is numerically zero
    if (le == kNegInf || le <= lv + log_tol) break;
    std::size_t worst = 0;
    for (std::size_t i = 1; i < ps.size(); ++i)
      if (ps[i].log_err > ps[worst].log_err) worst = i;
    const detail::LogPanel p = ps[worst];
    if (!(p.b - p.a > 1e-15 * width)) break;  // cannot refine further
    const double m = 0.5 * (p.a + p.b);
    ps[worst] = detail::make_panel(g, p.a, m);
    ps.push_back(detail::make_panel(g, m, p.b));
  }

  const auto [lv, le] = totals();
  out.log_value = lv;
  out.rel_err = (lv > kNegInf && le > kNegInf) ? std::exp(le - lv) : 0.0;
  out.panels = static_cast<int>(ps.size());
  return out;
}

}  // namespace bergman::quad
