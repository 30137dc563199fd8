#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <thread>
#include <utility>
#include <vector>

#include "bergman/kernel.hpp"
#include "bergman/metric.hpp"
#include "bergman/moments.hpp"

namespace bergman {

/// One evaluated pair for the decay study.
struct SamplePair {
  cplx z, w;
  double log_norm_kernel = 0.0;  // log(|K(z,w)| e^(-phi(z)-phi(w)) tau(z) tau(w))
  double d_phi = 0.0;
  double d_tau = 0.0;
  double kernel_err = 0.0;  // relative error bound of the kernel evaluation
  double d_phi_err = 0.0;   // snap + discretization error bar on d_phi
};

/// log of the normalized kernel N(z,w) = |K(z,w)| e^(-phi(z)-phi(w)) tau(z) tau(w).
/// The decay bound reads N(z,w) <= C exp(-sigma d_phi(z,w)).
inline double normalized_kernel(const WeightSpec& spec, const KernelValue& kv, cplx z, cplx w) {
  return kv.log_mag - eval_phi(spec, z) - eval_phi(spec, w) +
         std::log(eval_tau(spec, z)) + std::log(eval_tau(spec, w));
}

using KernelFn = std::function<KernelValue(cplx, cplx)>;

inline KernelFn make_series_kernel(MomentTable table, double tol) {
  auto shared = std::make_shared<MomentTable>(std::move(table));
  return [shared, tol](cplx z, cplx w) { return kernel_series(*shared, z, w, tol); };
}

inline KernelFn make_closed_form_kernel(double A) {
  return [A](cplx z, cplx w) { return kernel_closed_form(A, z, w); };
}

inline KernelFn make_gram_kernel_fn(const WeightSpec& spec, int N, double r_quad) {
  auto shared = std::make_shared<GramKernel>(spec, N, r_quad);
  return [shared](cplx z, cplx w) { return shared->eval(z, w); };
}

enum class SampleStrategy { rays, random_pairs };

struct SampleRun {
  std::vector<SamplePair> pairs;
  long excluded = 0;  // kernel evaluations that failed their accuracy contract
};

namespace detail {

template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const int t = std::clamp(threads, 1, static_cast<int>(hw));
  if (t == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::size_t chunk = (n + t - 1) / t;
  for (int k = 0; k < t; ++k) {
    const std::size_t lo = k * chunk, hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace detail

/// Generates pairs spanning d_phi from near zero to the largest value
/// reachable in the graph and fills every SamplePair field. The rays strategy
/// places z on {0, 0.3, 0.6, 0.8} x {4 angles} and marches w along 8 ray
/// directions with quadratic clustering near z (so near-diagonal samples
/// exist); it uses no randomness. The random strategy draws sources and
/// targets from the seeded generator. Output is deterministic for a fixed
/// seed and independent of the thread count. Kernel failures are excluded
/// and counted, not fatal.
inline SampleRun sample_pairs(const WeightSpec& spec, const MetricGraph& graph,
                              const MomentTable& table, SampleStrategy strategy,
                              int count, std::uint64_t seed, int threads = 1,
                              double kernel_tol = 1e-10) {
  spec.validate();
  if (count < 1) throw ConfigError("sample_pairs: count must be >= 1");

  const double r_cap = 0.995 * graph.r_max;
  std::vector<std::pair<cplx, cplx>> zw;
  zw.reserve(count);

  if (strategy == SampleStrategy::rays) {
    std::vector<cplx> sources{cplx(0.0, 0.0)};
    for (double r : {0.3, 0.6, 0.8})
      for (int q = 0; q < 4; ++q)
        if (r < r_cap) sources.push_back(std::polar(r, 0.5 * kPi * q));
    struct Ray { cplx z; double dir; double t_max; };
    std::vector<Ray> rays;
    for (cplx z : sources) {
      for (int m = 0; m < 8; ++m) {
        const double psi = 0.25 * kPi * m;
        const cplx d = std::polar(1.0, psi);
        const double b = (std::conj(z) * d).real();
        const double disc = b * b + r_cap * r_cap - std::norm(z);
        const double t_max = -b + std::sqrt(std::max(0.0, disc));
        if (t_max > 1e-6) rays.push_back({z, psi, t_max});
      }
    }
    const int n_rays = static_cast<int>(rays.size());
    const int base = count / n_rays;
    const int extra = count % n_rays;
    for (int ri = 0; ri < n_rays; ++ri) {
      const int nj = base + (ri < extra ? 1 : 0);
      for (int j = 1; j <= nj; ++j) {
        const double f = static_cast<double>(j) / nj;
        const double t = rays[ri].t_max * f * f;  // cluster near z
        zw.emplace_back(rays[ri].z, rays[ri].z + t * std::polar(1.0, rays[ri].dir));
      }
    }
  } else {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    auto draw = [&]() {
      const double r = r_cap * std::sqrt(unif(rng));
      return std::polar(r, 2.0 * kPi * unif(rng));
    };
    const int n_src = std::max(1, static_cast<int>(std::lround(std::sqrt(count / 4.0))));
    const int per_src = (count + n_src - 1) / n_src;
    for (int i = 0; i < n_src && static_cast<int>(zw.size()) < count; ++i) {
      const cplx z = draw();
      for (int j = 0; j < per_src && static_cast<int>(zw.size()) < count; ++j)
        zw.emplace_back(z, draw());
    }
  }

  // One Dijkstra per distinct source.
  std::map<std::pair<double, double>, std::pair<SnapInfo, std::vector<double>>> per_source;
  for (const auto& [z, w] : zw) {
    const auto key = std::make_pair(z.real(), z.imag());
    if (!per_source.count(key)) {
      const SnapInfo s = snap_point(graph, spec, z);
      per_source.emplace(key, std::make_pair(s, shortest_paths(graph, s.node)));
    }
  }

  std::vector<SamplePair> out(zw.size());
  std::vector<char> ok(zw.size(), 0);
  detail::parallel_for(zw.size(), threads, [&](std::size_t i) {
    const auto [z, w] = zw[i];
    const auto& [sz, dist] = per_source.at(std::make_pair(z.real(), z.imag()));
    const SnapInfo sw = snap_point(graph, spec, w);
    const double graph_d = (sw.node == sz.node) ? 0.0 : dist[sw.node];
    SamplePair p;
    p.z = z;
    p.w = w;
    p.d_phi = graph_d + sz.tau_len + sw.tau_len;
    p.d_phi_err = sz.tau_len + sw.tau_len + 1e-3 * graph_d + 1e-12;
    p.d_tau = dtau(spec, z, w);
    try {
      const KernelValue kv = kernel_series(table, z, w, kernel_tol);
      p.log_norm_kernel = normalized_kernel(spec, kv, z, w);
      p.kernel_err = kv.err_rel;
    } catch (const AccuracyError&) {
      return;  // excluded, counted below
    }
    out[i] = p;
    ok[i] = 1;
  });

  SampleRun run;
  run.pairs.reserve(zw.size());
  for (std::size_t i = 0; i < zw.size(); ++i) {
    if (ok[i]) run.pairs.push_back(out[i]);
    else ++run.excluded;
  }
  return run;
}

/// Fitted decay data: per-annulus envelope maxima, envelope regression, and
/// violation counts for the bound N <= C exp(-sigma d_phi).
struct DecayReport {
  double sigma_fit = 0.0;  // -slope of the envelope regression
  double logC_fit = 0.0;   // intercept, lifted so no sample violates at slack 0
  double r2 = 0.0;         // regression quality on the envelope points
  long violations = 0;
  std::vector<std::pair<double, double>> annulus_max;  // (bin center, max log N)
  std::pair<double, double> near_diag_ratio{
      std::numeric_limits<double>::quiet_NaN(),
      std::numeric_limits<double>::quiet_NaN()};  // (min, max) of N where d_tau <= 1/2
  long sample_count = 0;
  long excluded = 0;
  double bin_width = 0.0;
  double slack = 0.0;
};

/// Bins samples by d_phi, takes per-bin maxima of log N (the upper envelope),
/// fits a least-squares line through the envelope points with bin center
/// >= 1 (the near-diagonal regime is excluded), then lifts the intercept so
/// zero samples violate at slack 0. Violations are counted at the given
/// slack: a sample violates when log N > logC - sigma d_phi + slack.
inline DecayReport fit_decay(const std::vector<SamplePair>& samples, double bin_width,
                             double slack) {
  if (!(bin_width > 0.0)) throw ConfigError("fit_decay: bin_width must be positive");
  long far = 0;
  for (const auto& s : samples)
    if (s.d_phi > 1.0) ++far;
  if (far < 10)
    throw DomainError("fit_decay: insufficient range: need >= 10 samples with d_phi > 1");

  // per bin: the maximum of log N and the d_phi where it is attained, so an
  // exactly linear sample set fits exactly
  std::map<long, std::pair<double, double>> bins;  // idx -> (d_at_max, max)
  for (const auto& s : samples) {
    const long idx = static_cast<long>(std::floor(s.d_phi / bin_width));
    auto [it, fresh] = bins.emplace(idx, std::make_pair(s.d_phi, s.log_norm_kernel));
    if (!fresh && s.log_norm_kernel > it->second.second)
      it->second = {s.d_phi, s.log_norm_kernel};
  }

  DecayReport rep;
  rep.bin_width = bin_width;
  rep.slack = slack;
  rep.sample_count = static_cast<long>(samples.size());
  for (const auto& [idx, dv] : bins)
    rep.annulus_max.emplace_back((idx + 0.5) * bin_width, dv.second);

  std::vector<std::pair<double, double>> fit_pts;
  for (const auto& [idx, dv] : bins)
    if (dv.first >= 1.0) fit_pts.push_back(dv);
  if (fit_pts.size() < 2)
    throw DomainError("fit_decay: insufficient range: need >= 2 envelope bins with d_phi >= 1");

  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [x, y] : fit_pts) {
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = static_cast<double>(fit_pts.size());
  const double denom = n * sxx - sx * sx;
  const double slope = (n * sxy - sx * sy) / denom;
  const double intercept = (sy - slope * sx) / n;
  rep.sigma_fit = -slope;

  double ss_res = 0, ss_tot = 0;
  const double mean_y = sy / n;
  for (const auto& [x, y] : fit_pts) {
    const double fy = intercept + slope * x;
    ss_res += (y - fy) * (y - fy);
    ss_tot += (y - mean_y) * (y - mean_y);
  }
  rep.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res < 1e-24 ? 1.0 : 0.0);

  double lift = -std::numeric_limits<double>::infinity();
  for (const auto& s : samples)
    lift = std::max(lift, s.log_norm_kernel + rep.sigma_fit * s.d_phi);
  rep.logC_fit = lift;

  for (const auto& s : samples)
    if (s.log_norm_kernel > rep.logC_fit - rep.sigma_fit * s.d_phi + slack)
      ++rep.violations;

  double nd_min = std::numeric_limits<double>::infinity();
  double nd_max = -std::numeric_limits<double>::infinity();
  bool any_nd = false;
  for (const auto& s : samples) {
    if (s.d_tau <= 0.5) {
      any_nd = true;
      const double v = std::exp(s.log_norm_kernel);
      nd_min = std::min(nd_min, v);
      nd_max = std::max(nd_max, v);
    }
  }
  if (any_nd) rep.near_diag_ratio = {nd_min, nd_max};
  return rep;
}

struct NearDiagResult {
  double n_min = 0.0, n_max = 0.0;    // extremes of N(z,w)
  double cs_min = 0.0, cs_max = 0.0;  // extremes of |K(z,w)| / sqrt(K(z,z) K(w,w))
  long pair_count = 0;
};

/// Evaluates N and the Cauchy-Schwarz ratio over deterministic near-diagonal
/// pairs |z - w| <= alpha min(tau(z), tau(w)) with |z| <= 0.9. The offsets
/// list scales the separation within the allowed disc; offset 0 keeps the
/// exact diagonal pair.
inline NearDiagResult near_diagonal_check(const WeightSpec& spec, const KernelFn& kernel,
                                          double alpha, int n_samples,
                                          const std::vector<double>& offsets = {0.0, 0.3, 0.7, 1.0}) {
  spec.validate();
  if (!(alpha > 0.0 && alpha <= 0.5))
    throw ConfigError("near_diagonal_check: alpha must lie in (0, 0.5]");
  if (n_samples < 1) throw ConfigError("near_diagonal_check: n_samples must be >= 1");

  NearDiagResult res;
  res.n_min = res.cs_min = std::numeric_limits<double>::infinity();
  res.n_max = res.cs_max = -std::numeric_limits<double>::infinity();

  const int n_r = std::max(1, static_cast<int>(std::ceil(std::sqrt(n_samples / 8.0))));
  const int n_th = 8;
  for (int i = 0; i < n_r && res.pair_count < n_samples; ++i) {
    const double r = 0.9 * (i + 0.5) / n_r;
    for (int j = 0; j < n_th && res.pair_count < n_samples; ++j) {
      const cplx z = std::polar(r, 2.0 * kPi * j / n_th + 0.1);
      const double tz = eval_tau(spec, z);
      for (double f : offsets) {
        if (res.pair_count >= n_samples) break;
        for (int m = 0; m < (f == 0.0 ? 1 : 3); ++m) {
          const cplx w = f == 0.0
                             ? z
                             : z + std::polar(0.95 * alpha * tz * f, 2.0 * kPi * m / 3.0);
          if (std::abs(w) > 0.95) continue;
          const double tw = eval_tau(spec, w);
          if (std::abs(z - w) > alpha * std::min(tz, tw)) continue;
          const KernelValue kzw = kernel(z, w);
          const KernelValue kzz = kernel(z, z);
          const KernelValue kww = kernel(w, w);
          const double nv = std::exp(normalized_kernel(spec, kzw, z, w));
          const double cs = std::exp(kzw.log_mag - 0.5 * (kzz.log_mag + kww.log_mag));
          res.n_min = std::min(res.n_min, nv);
          res.n_max = std::max(res.n_max, nv);
          res.cs_min = std::min(res.cs_min, cs);
          res.cs_max = std::max(res.cs_max, cs);
          ++res.pair_count;
          if (f == 0.0) break;
        }
      }
    }
  }
  if (res.pair_count == 0)
    throw DomainError("near_diagonal_check: no admissible near-diagonal pair");
  return res;
}

/// Empirical constant of the mean inequality: returns
///   |K(w,z)|^2 e^(-2 phi(w))  /  [ tau(w)^-2 integral_{D(w, (beta/2) tau(w))}
///                                  |K(zeta,z)|^2 e^(-2 phi(zeta)) dlambda ]
/// on a polar grid of quad_n^2 nodes centered at w (composite Simpson in the
/// radius, trapezoid in the angle), everything accumulated in log scale.
/// As beta -> 0 the ratio approaches 4/(pi beta^2).
inline double mean_value_check(const WeightSpec& spec, const KernelFn& kernel, cplx z, cplx w,
                               double beta, int quad_n) {
  spec.validate();
  if (!(beta > 0.0)) throw ConfigError("mean_value_check: beta must be positive");
  if (quad_n < 4) throw ConfigError("mean_value_check: quad_n must be >= 4");
  const double tw = eval_tau(spec, w);
  if (std::abs(w) + beta * tw > 0.99)
    throw DomainError("mean_value_check: disc D(w, beta tau(w)) escapes |zeta| <= 0.99");

  const double R = 0.5 * beta * tw;
  const int m = quad_n + (quad_n % 2);  // Simpson needs an even interval count
  const double hr = R / m;
  std::vector<double> log_terms;
  log_terms.reserve(static_cast<std::size_t>(m + 1) * quad_n);
  for (int i = 0; i <= m; ++i) {
    const double rho = i * hr;
    if (rho == 0.0) continue;  // integrand has a factor rho
    const double simpson_w = (i == 0 || i == m) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    for (int k = 0; k < quad_n; ++k) {
      const double th = 2.0 * kPi * k / quad_n;
      const cplx zeta = w + std::polar(rho, th);
      const KernelValue kv = kernel(zeta, z);
      const double logf = 2.0 * kv.log_mag - 2.0 * eval_phi(spec, zeta);
      const double logw = std::log(simpson_w * (hr / 3.0) * (2.0 * kPi / quad_n) * rho);
      log_terms.push_back(logf + logw);
    }
  }
  double mx = -std::numeric_limits<double>::infinity();
  for (double t : log_terms) mx = std::max(mx, t);
  double acc = 0.0;
  for (double t : log_terms) acc += std::exp(t - mx);
  const double log_integral = mx + std::log(acc);

  const KernelValue kwz = kernel(w, z);
  const double log_num = 2.0 * kwz.log_mag - 2.0 * eval_phi(spec, w);
  const double log_den = log_integral + 2.0 * std::log(1.0 / tw);
  return std::exp(log_num - log_den);
}

/// One row of the polynomial-vs-exponential envelope comparison.
struct BoundComparisonRow {
  int k = 0;
  double c_k = 0.0;             // lifted intercept of the polynomial model
  double mean_resid_poly = 0.0; // mean envelope looseness of C_k d_tau^-k
  double mean_resid_exp = 0.0;  // mean envelope looseness of C exp(-sigma d_phi)
  double frac_exp_tighter = 0.0;
  long n_far = 0;
};

/// For each k fits the envelope of log N against -k log d_tau on d_tau >= 2
/// and reports per-sample residuals of both one-sided models. The exponential
/// model eventually beats every polynomial order.
inline std::vector<BoundComparisonRow> compare_bounds(const DecayReport& report,
                                                      const std::vector<SamplePair>& samples,
                                                      const std::vector<int>& k_list) {
  std::vector<BoundComparisonRow> table;
  if (k_list.empty()) return table;
  std::vector<const SamplePair*> far;
  for (const auto& s : samples)
    if (s.d_tau >= 2.0) far.push_back(&s);
  if (far.size() < 5)
    throw DomainError("compare_bounds: insufficient far samples (need >= 5 with d_tau >= 2)");

  for (int k : k_list) {
    if (k <= 0) throw ConfigError("compare_bounds: k_list entries must be positive");
    BoundComparisonRow row;
    row.k = k;
    row.n_far = static_cast<long>(far.size());
    double ck = -std::numeric_limits<double>::infinity();
    for (const auto* s : far)
      ck = std::max(ck, s->log_norm_kernel + k * std::log(s->d_tau));
    row.c_k = ck;
    double sum_poly = 0.0, sum_exp = 0.0;
    long tighter = 0;
    for (const auto* s : far) {
      const double rp = ck - k * std::log(s->d_tau) - s->log_norm_kernel;
      const double re = report.logC_fit - report.sigma_fit * s->d_phi - s->log_norm_kernel;
      sum_poly += rp;
      sum_exp += re;
      if (re < rp) ++tighter;
    }
    row.mean_resid_poly = sum_poly / far.size();
    row.mean_resid_exp = sum_exp / far.size();
    row.frac_exp_tighter = static_cast<double>(tighter) / far.size();
    table.push_back(row);
  }
  return table;
}

}  // namespace bergman
