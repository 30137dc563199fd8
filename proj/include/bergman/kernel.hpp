#pragma once

#include <cmath>
#include <complex>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bergman/moments.hpp"
#include "bergman/weight.hpp"

namespace bergman {

enum class KernelMethod { series, closed_form, gram };

inline const char* to_string(KernelMethod m) {
  switch (m) {
    case KernelMethod::series: return "series";
    case KernelMethod::closed_form: return "closed_form";
    case KernelMethod::gram: return "gram";
  }
  return "unknown";
}

/// One kernel evaluation in log-magnitude / phase form. Diagonal values grow
/// like e^(2 phi)/tau^2 near the boundary for exponential-type weights, which
/// overflows doubles, so consumers should stay in log scale.
struct KernelValue {
  double log_mag = 0.0;
  double phase = 0.0;  // in (-pi, pi]
  KernelMethod method = KernelMethod::series;
  double err_rel = 0.0;  // truncation + quadrature, or conditioning, bound

  cplx value() const { return std::polar(std::exp(log_mag), phase); }
};

/// K(z,w) = sum_n (z conj(w))^n / m_n, summed on rescaled terms
/// exp(n log(z conj(w)) - log m_n - s) under a running max-exponent shift s.
/// Truncates once the geometric tail bound (last term times q/(1-q), with q
/// from the most recent moment ratios, which decrease by log-convexity) drops
/// below tol times the partial sum. Throws AccuracyError when the table is
/// exhausted first (enlarge N) or the divergence guard q >= 1 - 1e-3 is still
/// active at exhaustion.
inline KernelValue kernel_series(const MomentTable& table, cplx z, cplx w, double tol) {
  if (table.N < 0 || table.log_m.empty())
    throw ConfigError("kernel_series: empty moment table");
  if (!(tol > 0.0)) throw ConfigError("kernel_series: tol must be positive");
  detail::check_disc(z);
  detail::check_disc(w);

  auto moment_rel = [&table](int n) { return table.quad_err[n] * std::exp(-table.log_m[n]); };

  const cplx x = z * std::conj(w);
  const double ax = std::abs(x);
  if (ax == 0.0)
    return {-table.log_m[0], 0.0, KernelMethod::series, moment_rel(0)};

  const double lax = std::log(ax);
  const double theta = std::arg(x);
  const int N = table.N;

  double s = -table.log_m[0];  // running max exponent
  cplx S(1.0, 0.0);            // partial sum scaled by exp(-s)
  double L = 1.0;              // sum of term magnitudes, same scale
  double merr = moment_rel(0);
  constexpr int kWindow = 5;
  constexpr double kDivergenceGuard = 1.0 - 1e-3;
  double q = std::numeric_limits<double>::infinity();
  double last_tail_rel = std::numeric_limits<double>::infinity();

  for (int n = 1; n <= N; ++n) {
    const double e = n * lax - table.log_m[n];
    double term;
    if (e > s) {
      const double c = std::exp(s - e);
      S *= c;
      L *= c;
      s = e;
      term = 1.0;
    } else {
      term = std::exp(e - s);
    }
    S += term * std::polar(1.0, n * theta);
    L += term;
    merr = std::max(merr, moment_rel(n));
    if (n < kWindow) continue;

    double rmax = 0.0;
    for (int k = n - kWindow; k < n; ++k)
      rmax = std::max(rmax, std::exp(table.log_m[k] - table.log_m[k + 1]));
    q = ax * rmax;
    if (q >= kDivergenceGuard) continue;  // cannot certify the tail yet

    const double tail = term * q / (1.0 - q);
    const double mag = std::abs(S);
    if (mag > 0.0) last_tail_rel = tail / mag;
    if (mag > 0.0 && tail <= tol * mag) {
      KernelValue kv;
      kv.log_mag = s + std::log(mag);
      kv.phase = std::arg(S);
      kv.method = KernelMethod::series;
      kv.err_rel = tail / mag + merr * (L / mag);
      if (!std::isfinite(kv.log_mag))
        throw AccuracyError("kernel_series: partial sum vanished");
      return kv;
    }
  }

  char msg[160];
  if (std::isfinite(q) && q >= kDivergenceGuard) {
    std::snprintf(msg, sizeof msg,
                  "kernel_series: divergence guard: |z conj(w)| * moment ratio = %.6g "
                  ">= 1 - 1e-3 at table exhaustion", q);
  } else {
    std::snprintf(msg, sizeof msg,
                  "kernel_series: truncation: N=%d exhausted at relative tail bound %.3g "
                  "> tol=%.3g (enlarge N)", N, last_tail_rel, tol);
  }
  throw AccuracyError(msg);
}

/// Kernel of the pure power weight phi = -(A/2) log(1-|z|^2):
///   K(z,w) = (A+1)/pi * (1 - z conj(w))^-(A+2),
/// principal branch; Re(1 - z conj(w)) > 0 on the bidisc, which makes the
/// branch choice safe. Re-derivable from the beta-integral moments
/// m_n = pi B(n+1, A+1) via the binomial series, and cross-checked against
/// kernel_series in the tests.
inline KernelValue kernel_closed_form(double A, cplx z, cplx w) {
  if (!(A > -1.0)) throw SpecError("kernel_closed_form: requires A > -1");
  detail::check_disc(z);
  detail::check_disc(w);
  const cplx one_minus = cplx(1.0, 0.0) - z * std::conj(w);
  if (!(one_minus.real() > 0.0))
    throw DomainError("kernel_closed_form: branch precondition Re(1 - z conj(w)) > 0 violated");
  const cplx lg = std::log(one_minus);
  KernelValue kv;
  kv.log_mag = std::log((A + 1.0) / kPi) - (A + 2.0) * lg.real();
  kv.phase = std::remainder(-(A + 2.0) * lg.imag(), 2.0 * kPi);
  kv.method = KernelMethod::closed_form;
  kv.err_rel = 1e-14;
  return kv;
}

/// Truncated-basis kernel through the monomial Gram matrix
///   G[m][n] = integral_D z^m conj(z)^n e^(-2 phi) dlambda,
/// assembled by tensor quadrature: composite Kronrod panels (dyadically
/// refined toward the boundary) in r, trapezoid in theta with >= 4N nodes
/// (exact for the angular trigonometric degree). The kernel is
///   K(z,w) = v(z)^T conj(G^-1 v(w)),  v(z) = (1, z, ..., z^N),
/// solved through a Hermitian positive-definite factorization; it increases
/// to the true kernel as N grows. err_rel carries kappa(G) * eps_machine plus
/// the embedded-rule quadrature estimate.
class GramKernel {
 public:
  GramKernel(const WeightSpec& spec, int N, double r_quad)
      : spec_(spec), N_(N), r_quad_(r_quad) {
    spec_.validate();
    if (N_ < 0) throw ConfigError("GramKernel: N must be >= 0");
    if (!(r_quad_ > 0.0 && r_quad_ < 1.0))
      throw ConfigError("GramKernel: r_quad must lie in (0,1)");
    build();
  }

  KernelValue eval(cplx z, cplx w) const {
    if (std::abs(z) > r_quad_ + 1e-12 || std::abs(w) > r_quad_ + 1e-12)
      throw DomainError("GramKernel::eval: point beyond r_quad");
    Eigen::VectorXcd vz(N_ + 1), vw(N_ + 1);
    cplx pz(1.0, 0.0), pw(1.0, 0.0);
    for (int n = 0; n <= N_; ++n, pz *= z, pw *= w) {
      vz[n] = pz;
      vw[n] = pw;
    }
    const Eigen::VectorXcd u = llt_.solve(vw);
    // dot() conjugates its first argument, so this is sum_m vz_m conj(u_m).
    const cplx Kval = std::conj(vz.dot(u));
    const double mag = std::abs(Kval);
    if (!(mag > 0.0) || !std::isfinite(mag))
      throw AccuracyError("GramKernel::eval: kernel value vanished or overflowed");
    KernelValue kv;
    kv.log_mag = std::log(mag);
    kv.phase = std::arg(Kval);
    kv.method = KernelMethod::gram;
    kv.err_rel = err_rel_;
    return kv;
  }

  double cond() const { return cond_; }
  double quad_rel_err() const { return quad_rel_; }
  const Eigen::MatrixXcd& gram() const { return G_; }
  int basis_size() const { return N_ + 1; }

 private:
  void build() {
    const int n1 = N_ + 1;
    const int n_ang = std::max(16, 4 * N_ + 4);
    // Radial K15 panels, dyadically refined toward r = 1.
    std::vector<double> cuts{0.0, 0.5};
    for (int k = 2; k <= 26; ++k) cuts.push_back(1.0 - std::ldexp(1.0, -k));
    cuts.push_back(1.0);
    std::vector<double> rx, wk, wg;
    for (std::size_t p = 0; p + 1 < cuts.size(); ++p) {
      const double half = 0.5 * (cuts[p + 1] - cuts[p]);
      const double mid = 0.5 * (cuts[p + 1] + cuts[p]);
      for (int i = 0; i < 15; ++i) {
        const int j = i < 8 ? i : 14 - i;
        const double x = i < 8 ? mid - half * quad::detail::kXgk[j]
                               : mid + half * quad::detail::kXgk[j];
        rx.push_back(x);
        wk.push_back(half * quad::detail::kWgk[j]);
        wg.push_back(j % 2 == 1 ? half * quad::detail::kWg[(j - 1) / 2] : 0.0);
      }
    }
    const std::size_t n_rad = rx.size();

    // Angular transform of the weight at every radius:
    //   ang[j][d] = (2 pi / n_ang) sum_k exp(i d theta_k) e^(-2 phi(r_j e^(i theta_k)))
    std::vector<cplx> ang(n_rad * n1);
    std::vector<double> wvals(n_ang);
    for (std::size_t jr = 0; jr < n_rad; ++jr) {
      if (!(rx[jr] < 1.0)) {
        for (int d = 0; d < n1; ++d) ang[jr * n1 + d] = cplx(0.0, 0.0);
        continue;
      }
      for (int k = 0; k < n_ang; ++k) {
        const double th = 2.0 * kPi * k / n_ang;
        wvals[k] = std::exp(-2.0 * eval_phi(spec_, std::polar(rx[jr], th)));
      }
      for (int d = 0; d < n1; ++d) {
        cplx acc(0.0, 0.0);
        for (int k = 0; k < n_ang; ++k) {
          const double th = 2.0 * kPi * k / n_ang;
          acc += wvals[k] * std::polar(1.0, d * th);
        }
        ang[jr * n1 + d] = acc * (2.0 * kPi / n_ang);
      }
    }

    // Radial power table r^(m+n+1) up to 2N+1.
    std::vector<double> pow_table(n_rad * (2 * N_ + 2));
    for (std::size_t jr = 0; jr < n_rad; ++jr) {
      double p = rx[jr];  // r^1
      for (int e = 0; e <= 2 * N_; ++e, p *= rx[jr]) pow_table[jr * (2 * N_ + 2) + e] = p;
    }

    G_ = Eigen::MatrixXcd(n1, n1);
    Eigen::MatrixXcd Gg(n1, n1);
    for (int m = 0; m < n1; ++m) {
      for (int n = 0; n <= m; ++n) {
        cplx acc_k(0.0, 0.0), acc_g(0.0, 0.0);
        const int d = m - n;
        const int e = m + n;  // power r^(e+1)
        for (std::size_t jr = 0; jr < n_rad; ++jr) {
          const cplx a = ang[jr * n1 + d] * pow_table[jr * (2 * N_ + 2) + e];
          acc_k += wk[jr] * a;
          if (wg[jr] != 0.0) acc_g += wg[jr] * a;
        }
        G_(m, n) = acc_k;
        G_(n, m) = std::conj(acc_k);
        Gg(m, n) = acc_g;
        Gg(n, m) = std::conj(acc_g);
      }
    }

    quad_rel_ = 0.0;
    for (int m = 0; m < n1; ++m)
      for (int n = 0; n < n1; ++n) {
        const double scale = std::sqrt(G_(m, m).real() * G_(n, n).real());
        if (scale > 0.0)
          quad_rel_ = std::max(quad_rel_, std::abs(G_(m, n) - Gg(m, n)) / scale);
      }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(G_, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
      throw AccuracyError("GramKernel: eigenvalue computation failed");
    const double lmin = es.eigenvalues().minCoeff();
    const double lmax = es.eigenvalues().maxCoeff();
    if (!(lmin > 0.0))
      throw AccuracyError("GramKernel: Gram matrix numerically non-positive-definite "
                          "(N too large for this precision)");
    cond_ = lmax / lmin;
    if (cond_ > 1e12)
      throw AccuracyError("GramKernel: condition number " + std::to_string(cond_) +
                          " exceeds the 1e12 guard");
    llt_.compute(G_);
    if (llt_.info() != Eigen::Success)
      throw AccuracyError("GramKernel: Cholesky factorization failed");
    err_rel_ = cond_ * (1e-16 + quad_rel_);
  }

  WeightSpec spec_;
  int N_;
  double r_quad_;
  Eigen::MatrixXcd G_;
  Eigen::LLT<Eigen::MatrixXcd> llt_;
  double cond_ = 0.0;
  double quad_rel_ = 0.0;
  double err_rel_ = 0.0;
};

/// One-shot Gram evaluation; prefer constructing GramKernel once for batches.
inline KernelValue kernel_gram(const WeightSpec& spec, int N, cplx z, cplx w, double r_quad) {
  return GramKernel(spec, N, r_quad).eval(z, w);
}

}  // namespace bergman
