#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "bergman/decay.hpp"

using namespace bergman;
using Catch::Approx;

namespace {

const WeightSpec kPower1{1.0, 0.0, 1.0, {}};
const WeightSpec kMixed{1.0, 1.0, 0.5, {}};

std::vector<SamplePair> synthetic_line(double sigma, double intercept, int n) {
  std::vector<SamplePair> s(n);
  for (int i = 0; i < n; ++i) {
    const double d = 0.1 + 8.0 * i / (n - 1.0);
    s[i].z = cplx(0, 0);
    s[i].w = cplx(0.1, 0);
    s[i].d_phi = d;
    s[i].d_tau = d;
    s[i].log_norm_kernel = intercept - sigma * d;
  }
  return s;
}

}  // namespace

TEST_CASE("normalized kernel collapses to 1/pi on the diagonal for A=1") {
  for (int i = 0; i < 20; ++i) {
    const cplx z = std::polar(0.9 * (i + 0.5) / 20.0, 0.37 * i);
    const KernelValue kv = kernel_closed_form(1.0, z, z);
    CHECK(normalized_kernel(kPower1, kv, z, z) ==
          Approx(std::log(1.0 / kPi)).margin(1e-10));
  }
}

TEST_CASE("normalized kernel at the origin composes the definitions") {
  const MomentTable t = compute_moments(kMixed, 50, 1e-12);
  const KernelValue kv = kernel_series(t, cplx(0, 0), cplx(0, 0), 1e-12);
  const double expected = -t.log_m[0] - 2.0 * eval_phi(kMixed, cplx(0, 0)) +
                          2.0 * std::log(eval_tau(kMixed, cplx(0, 0)));
  CHECK(normalized_kernel(kMixed, kv, cplx(0, 0), cplx(0, 0)) ==
        Approx(expected).margin(1e-12));
}

TEST_CASE("normalized kernel is symmetric in its arguments") {
  const MomentTable t = compute_moments(kMixed, 300, 1e-11);
  const cplx z(0.5, 0.1), w(-0.3, 0.2);
  const KernelValue kzw = kernel_series(t, z, w, 1e-11);
  const KernelValue kwz = kernel_series(t, w, z, 1e-11);
  CHECK(normalized_kernel(kMixed, kzw, z, w) ==
        Approx(normalized_kernel(kMixed, kwz, w, z)).margin(1e-10));
}

TEST_CASE("fit_decay on an exact synthetic line") {
  const auto samples = synthetic_line(2.0, 0.0, 60);
  const DecayReport rep = fit_decay(samples, 0.25, 0.0);
  CHECK(rep.sigma_fit == Approx(2.0).epsilon(1e-9));
  CHECK(rep.logC_fit == Approx(0.0).margin(1e-9));
  CHECK(rep.r2 == Approx(1.0).epsilon(1e-12));
  CHECK(rep.violations == 0);
  CHECK(rep.sample_count == 60);
}

TEST_CASE("fit_decay on flat samples gives sigma 0") {
  const auto samples = synthetic_line(0.0, -1.5, 40);
  const DecayReport rep = fit_decay(samples, 0.5, 0.0);
  CHECK(rep.sigma_fit == Approx(0.0).margin(1e-12));
  CHECK(rep.logC_fit == Approx(-1.5).margin(1e-12));
}

TEST_CASE("fit_decay violation count is monotone in slack") {
  auto samples = synthetic_line(2.0, 0.0, 60);
  // jitter a few samples downward so negative slack exposes them gradually
  for (int i = 0; i < 60; i += 3) samples[i].log_norm_kernel -= 0.05 * (i % 7);
  const DecayReport r0 = fit_decay(samples, 0.25, 0.0);
  CHECK(r0.violations == 0);
  long prev = r0.violations;
  for (double slack : {-0.05, -0.1, -0.2, -0.4}) {
    const DecayReport r = fit_decay(samples, 0.25, slack);
    CHECK(r.violations >= prev);
    prev = r.violations;
  }
  CHECK(prev > 0);
}

TEST_CASE("fit_decay error paths") {
  auto near_only = synthetic_line(2.0, 0.0, 30);
  for (auto& s : near_only) s.d_phi *= 0.1;  // everything near-diagonal
  CHECK_THROWS_AS(fit_decay(near_only, 0.25, 0.0), DomainError);
  const auto samples = synthetic_line(2.0, 0.0, 30);
  CHECK_THROWS_AS(fit_decay(samples, 0.0, 0.0), ConfigError);
}

TEST_CASE("sample_pairs smoke and invariants") {
  const MomentTable t = compute_moments(kMixed, 600, 1e-10);
  const MetricGraph g = build_graph(kMixed, 0.8, 0.05);
  const SampleRun run1 = sample_pairs(kMixed, g, t, SampleStrategy::rays, 1, 7);
  REQUIRE(run1.pairs.size() + run1.excluded == 1);
  const SampleRun run = sample_pairs(kMixed, g, t, SampleStrategy::rays, 120, 7);
  CHECK(run.pairs.size() >= 100);
  for (const auto& p : run.pairs) {
    CHECK(p.d_phi >= 0.0);
    CHECK(p.d_tau >= 0.0);
    CHECK(std::isfinite(p.log_norm_kernel));
    CHECK(p.kernel_err >= 0.0);
    CHECK(p.d_phi_err >= 0.0);
  }
  // spans from near-diagonal to far field
  double dmin = 1e9, dmax = 0.0;
  for (const auto& p : run.pairs) {
    dmin = std::min(dmin, p.d_phi);
    dmax = std::max(dmax, p.d_phi);
  }
  CHECK(dmin < 0.5);
  CHECK(dmax > 2.0);
}

TEST_CASE("sample_pairs is deterministic and thread-count independent") {
  const MomentTable t = compute_moments(kMixed, 600, 1e-10);
  const MetricGraph g = build_graph(kMixed, 0.8, 0.05);
  for (SampleStrategy strat : {SampleStrategy::rays, SampleStrategy::random_pairs}) {
    const SampleRun a = sample_pairs(kMixed, g, t, strat, 60, 12345, 1);
    const SampleRun b = sample_pairs(kMixed, g, t, strat, 60, 12345, 4);
    REQUIRE(a.pairs.size() == b.pairs.size());
    CHECK(a.excluded == b.excluded);
    for (std::size_t i = 0; i < a.pairs.size(); ++i) {
      CHECK(a.pairs[i].z == b.pairs[i].z);
      CHECK(a.pairs[i].w == b.pairs[i].w);
      CHECK(a.pairs[i].d_phi == b.pairs[i].d_phi);
      CHECK(a.pairs[i].d_tau == b.pairs[i].d_tau);
      CHECK(a.pairs[i].log_norm_kernel == b.pairs[i].log_norm_kernel);
      CHECK(a.pairs[i].kernel_err == b.pairs[i].kernel_err);
    }
  }
  // a different seed moves the random samples
  const SampleRun c = sample_pairs(kMixed, g, t, SampleStrategy::random_pairs, 60, 1);
  const SampleRun d = sample_pairs(kMixed, g, t, SampleStrategy::random_pairs, 60, 2);
  CHECK(c.pairs.at(0).z != d.pairs.at(0).z);
}

TEST_CASE("near-diagonal check on the exact diagonal recovers 1/pi") {
  const KernelFn kfn = make_closed_form_kernel(1.0);
  const NearDiagResult res = near_diagonal_check(kPower1, kfn, 0.5, 50, {0.0});
  CHECK(res.n_min == Approx(1.0 / kPi).epsilon(1e-8));
  CHECK(res.n_max == Approx(1.0 / kPi).epsilon(1e-8));
  CHECK(res.cs_min == Approx(1.0).epsilon(1e-10));
  CHECK(res.cs_max == Approx(1.0).epsilon(1e-10));
}

TEST_CASE("near-diagonal comparability for the exponential-type weight") {
  const MomentTable t = compute_moments(kMixed, 800, 1e-10);
  const KernelFn kfn = make_series_kernel(t, 1e-10);
  const NearDiagResult res = near_diagonal_check(kMixed, kfn, 0.25, 120);
  CHECK(res.pair_count >= 100);
  CHECK(res.n_min > 0.0);
  CHECK(res.n_max / res.n_min <= 10.0);
  // regression baseline from the first verified run
  CHECK(res.n_max / res.n_min == Approx(1.049966862).epsilon(0.02));
  CHECK(res.cs_max <= 1.0 + 1e-9);  // Cauchy-Schwarz
  CHECK(res.cs_min > 0.5);
}

TEST_CASE("mean value check smoke and small-beta limit") {
  const KernelFn kfn = make_closed_form_kernel(1.0);
  const double smoke = mean_value_check(kPower1, kfn, cplx(0, 0), cplx(0, 0), 0.5, 24);
  CHECK(smoke > 0.0);
  CHECK(std::isfinite(smoke));
  // ratio * pi beta^2 / 4 -> 1 as beta -> 0
  const cplx z(0.2, 0.1), w(0.1, 0.0);
  double prev_dev = 1e9;
  for (double beta : {0.2, 0.1, 0.05}) {
    const double ratio = mean_value_check(kPower1, kfn, z, w, beta, 32);
    const double dev = std::abs(ratio * kPi * beta * beta / 4.0 - 1.0);
    CHECK(dev < prev_dev + 1e-12);
    prev_dev = dev;
  }
  CHECK(prev_dev <= 0.05);
  // disc escaping the evaluation domain
  CHECK_THROWS_AS(mean_value_check(kPower1, kfn, cplx(0, 0), cplx(0.989, 0), 2.0, 16),
                  DomainError);
}

TEST_CASE("mean value ratio stays bounded over a pair sample") {
  const KernelFn kfn = make_closed_form_kernel(1.0);
  std::mt19937_64 rng(2718);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const cplx z = std::polar(0.6 * std::sqrt(unif(rng)), 2.0 * kPi * unif(rng));
    const cplx w = std::polar(0.6 * std::sqrt(unif(rng)), 2.0 * kPi * unif(rng));
    const double r = mean_value_check(kPower1, kfn, z, w, 0.5, 32);
    CHECK(r > 0.0);
    worst = std::max(worst, r);
  }
  // regression baseline from the first verified run
  CHECK(worst <= 5.169630613 * 1.1);
  CHECK(worst > 1.0);
}

TEST_CASE("gauge invariance of the normalized kernel") {
  const cplx c(0.2, 0.0);
  WeightSpec pert = kPower1;
  pert.harmonic_coeffs = {cplx(0, 0), c};
  const GramKernel base(kPower1, 30, 0.6);
  const GramKernel gauged(pert, 30, 0.6);
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int i = 0; i < 8; ++i) {
    const cplx z = std::polar(0.5 * unif(rng), 2.0 * kPi * unif(rng));
    const cplx w = std::polar(0.5 * unif(rng), 2.0 * kPi * unif(rng));
    const double n0 = normalized_kernel(kPower1, base.eval(z, w), z, w);
    const double n1 = normalized_kernel(pert, gauged.eval(z, w), z, w);
    CHECK(n1 == Approx(n0).margin(1e-6));
  }
}

TEST_CASE("compare_bounds prefers the exponential model on exponential data") {
  const auto samples = synthetic_line(2.0, 0.0, 80);
  const DecayReport rep = fit_decay(samples, 0.25, 0.0);
  const auto table = compare_bounds(rep, samples, {2});
  REQUIRE(table.size() == 1);
  CHECK(table[0].k == 2);
  CHECK(table[0].mean_resid_exp < table[0].mean_resid_poly);
  CHECK(table[0].frac_exp_tighter > 0.9);

  CHECK(compare_bounds(rep, samples, {}).empty());

  auto near_only = samples;
  for (auto& s : near_only) s.d_tau = 1.0;
  CHECK_THROWS_AS(compare_bounds(rep, near_only, {2}), DomainError);
  CHECK_THROWS_AS(compare_bounds(rep, samples, {0}), ConfigError);
}

TEST_CASE("Cauchy-Schwarz holds across sampled pairs") {
  const MomentTable t = compute_moments(kMixed, 600, 1e-10);
  const MetricGraph g = build_graph(kMixed, 0.8, 0.05);
  const SampleRun run = sample_pairs(kMixed, g, t, SampleStrategy::rays, 80, 3);
  for (const auto& p : run.pairs) {
    const KernelValue kzw = kernel_series(t, p.z, p.w, 1e-10);
    const KernelValue kzz = kernel_series(t, p.z, p.z, 1e-10);
    const KernelValue kww = kernel_series(t, p.w, p.w, 1e-10);
    const double err = 3.0 * (kzw.err_rel + kzz.err_rel + kww.err_rel) + 1e-12;
    CHECK(2.0 * kzw.log_mag <= kzz.log_mag + kww.log_mag + std::log1p(err));
  }
}
