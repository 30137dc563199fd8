#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <filesystem>
#include <random>

#include "bergman/metric.hpp"
#include "bergman/weight.hpp"

using namespace bergman;
using Catch::Approx;

namespace {

const WeightSpec kPowerHalf{0.5, 0.0, 1.0, {}};  // tau = 1 - |z|^2, d(0,r) = arctanh r
const WeightSpec kMixed{1.0, 1.0, 0.5, {}};

double edge_weight(const MetricGraph& g, std::uint32_t u, std::uint32_t v) {
  for (std::uint32_t i = g.adj_offset[u]; i < g.adj_offset[u + 1]; ++i)
    if (g.adj[i].first == v) return g.adj[i].second;
  FAIL("edge not found");
  return 0.0;
}

}  // namespace

TEST_CASE("build_graph postconditions") {
  const MetricGraph g = build_graph(kMixed, 0.9, 0.05);
  CHECK(g.size() > 100);
  for (const auto& [v, w] : g.adj) {
    CHECK(w > 0.0);
    CHECK(std::isfinite(w));
  }
  for (const cplx& z : g.nodes) CHECK(std::abs(z) <= 0.9 + 1e-12);
  // ring spacing shrinks toward the boundary along with tau
  const auto& R = g.ring_radius;
  REQUIRE(R.size() > 10);
  CHECK(R[R.size() - 1] - R[R.size() - 2] < R[2] - R[1]);
}

TEST_CASE("node count roughly quadruples when h halves") {
  const MetricGraph g1 = build_graph(kPowerHalf, 0.9, 0.04);
  const MetricGraph g2 = build_graph(kPowerHalf, 0.9, 0.02);
  const double ratio = static_cast<double>(g2.size()) / g1.size();
  CHECK(ratio > 2.8);
  CHECK(ratio < 5.2);
}

TEST_CASE("radial specs give rotation-invariant edge weights") {
  const MetricGraph g = build_graph(kMixed, 0.8, 0.1);
  const int M = g.n_theta;
  auto rotate = [&](std::uint32_t u) -> std::uint32_t {
    if (u == 0) return 0;
    const std::uint32_t ring = (u - 1) / M, j = (u - 1) % M;
    return 1 + ring * M + (j + 1) % M;
  };
  for (std::uint32_t u = 0; u < g.size(); u += 7) {
    for (std::uint32_t i = g.adj_offset[u]; i < g.adj_offset[u + 1]; ++i) {
      const auto [v, w] = g.adj[i];
      CHECK(edge_weight(g, rotate(u), rotate(v)) == Approx(w).margin(1e-12));
    }
  }
}

TEST_CASE("distance of identical endpoints is a snap artifact only") {
  const MetricGraph g = build_graph(kPowerHalf, 0.9, 0.02);
  for (const cplx z : {cplx(0.0, 0.0), cplx(0.31, 0.17), cplx(-0.6, 0.2)}) {
    const DistanceResult d = distance(g, kPowerHalf, z, z);
    CHECK(d.value >= 0.0);
    CHECK(d.value <= 0.1);  // bounded by twice the local snap length
    CHECK(d.value <= d.err + 1e-12);
  }
}

TEST_CASE("distance is exactly symmetric") {
  const MetricGraph g = build_graph(kPowerHalf, 0.9, 0.03);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int i = 0; i < 10; ++i) {
    const cplx z = std::polar(0.85 * std::sqrt(unif(rng)), 2.0 * kPi * unif(rng));
    const cplx w = std::polar(0.85 * std::sqrt(unif(rng)), 2.0 * kPi * unif(rng));
    CHECK(distance(g, kPowerHalf, z, w).value == distance(g, kPowerHalf, w, z).value);
  }
}

TEST_CASE("graph distance matches the radial oracle") {
  const MetricGraph g = build_graph(kPowerHalf, 0.9, 0.02);
  for (double r : {0.2, 0.5, 0.8}) {
    const DistanceResult d = distance(g, kPowerHalf, cplx(0, 0), cplx(r, 0));
    CHECK(std::abs(d.value - std::atanh(r)) / std::atanh(r) <= 0.02);
  }
  // off-axis endpoints still approximate the oracle through rotation invariance
  const DistanceResult d = distance(g, kPowerHalf, cplx(0, 0), std::polar(0.5, 1.1));
  CHECK(std::abs(d.value - std::atanh(0.5)) / std::atanh(0.5) <= 0.02);
}

TEST_CASE("radial_distance_oracle") {
  CHECK(radial_distance_oracle(kPowerHalf, 0.0) == 0.0);
  CHECK(radial_distance_oracle(kPowerHalf, 0.5) == Approx(std::atanh(0.5)).epsilon(1e-10));
  // sqrt(2A) scaling for another power weight
  WeightSpec a2{2.0, 0.0, 1.0, {}};
  CHECK(radial_distance_oracle(a2, 0.5) == Approx(2.0 * std::atanh(0.5)).epsilon(1e-10));
  // strictly increasing in r
  CHECK(radial_distance_oracle(kMixed, 0.6) > radial_distance_oracle(kMixed, 0.5));
  CHECK_THROWS_AS(radial_distance_oracle(kPowerHalf, 1.0), DomainError);
  WeightSpec tilted{1.0, 0.0, 1.0, {cplx(0, 0), cplx(0.1, 0)}};
  CHECK_THROWS_AS(radial_distance_oracle(tilted, 0.5), MethodMismatchError);
}

TEST_CASE("hyperbolic_distance") {
  CHECK(hyperbolic_distance(cplx(0.3, 0.2), cplx(0.3, 0.2)) == 0.0);
  CHECK(hyperbolic_distance(cplx(0, 0), cplx(0.5, 0)) == Approx(std::atanh(0.5)).epsilon(1e-14));
  const cplx rot = std::polar(1.0, 0.9);
  CHECK(hyperbolic_distance(rot * cplx(0.1, 0.0), rot * cplx(0.6, 0.0)) ==
        Approx(hyperbolic_distance(cplx(0.1, 0), cplx(0.6, 0))).epsilon(1e-13));
}

TEST_CASE("dtau") {
  WeightSpec a1{1.0, 0.0, 1.0, {}};
  CHECK(dtau(a1, cplx(0.2, 0.1), cplx(0.2, 0.1)) == 0.0);
  CHECK(dtau(a1, cplx(0, 0), cplx(0.5, 0)) == Approx(0.9428090415820634).epsilon(1e-13));
  CHECK(dtau(a1, cplx(0.5, 0), cplx(0, 0)) == dtau(a1, cplx(0, 0), cplx(0.5, 0)));
}

TEST_CASE("triangle inequality on graph nodes") {
  const MetricGraph g = build_graph(kMixed, 0.8, 0.05);
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(g.size() - 1));
  for (int rep = 0; rep < 3; ++rep) {
    const std::uint32_t u = pick(rng), v = pick(rng), w = pick(rng);
    const auto du = shortest_paths(g, u);
    const auto dv = shortest_paths(g, v);
    CHECK(du[w] <= du[v] + dv[w] + 1e-9);
  }
}

TEST_CASE("enlarging r_max never increases distances") {
  const MetricGraph g_small = build_graph(kPowerHalf, 0.7, 0.05);
  const MetricGraph g_big = build_graph(kPowerHalf, 0.9, 0.05);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int i = 0; i < 8; ++i) {
    const cplx z = std::polar(0.65 * std::sqrt(unif(rng)), 2.0 * kPi * unif(rng));
    const cplx w = std::polar(0.65 * std::sqrt(unif(rng)), 2.0 * kPi * unif(rng));
    CHECK(distance(g_big, kPowerHalf, z, w).value <=
          distance(g_small, kPowerHalf, z, w).value + 1e-9);
  }
}

TEST_CASE("distance dominates the hyperbolic lower bound") {
  // each edge tau-length >= (1/C2) integral |dz|/(1-|z|) >= (1/C2) d_h
  const OPReport op = check_op_conditions(kMixed, 0.99, 2048);
  const MetricGraph g = build_graph(kMixed, 0.85, 0.02);
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int i = 0; i < 15; ++i) {
    const cplx z = std::polar(0.8 * std::sqrt(unif(rng)), 2.0 * kPi * unif(rng));
    const cplx w = std::polar(0.8 * std::sqrt(unif(rng)), 2.0 * kPi * unif(rng));
    const DistanceResult d = distance(g, kMixed, z, w);
    CHECK(d.value >= hyperbolic_distance(z, w) / op.C2_est - d.err);
  }
}

TEST_CASE("metric error paths") {
  CHECK_THROWS_AS(build_graph(kPowerHalf, 1.2, 0.05), ConfigError);
  CHECK_THROWS_AS(build_graph(kPowerHalf, 0.9, 0.0), ConfigError);
  CHECK_THROWS_AS(build_graph(kPowerHalf, 0.5, 0.9), ConfigError);  // h too coarse
  CHECK_THROWS_AS(build_graph(kPowerHalf, 0.9, 1e-4), ConfigError); // grid too large
  const MetricGraph g = build_graph(kPowerHalf, 0.7, 0.05);
  CHECK_THROWS_AS(distance(g, kPowerHalf, cplx(0, 0), cplx(0.8, 0)), DomainError);
}

TEST_CASE("graph binary cache round trip") {
  namespace fs = std::filesystem;
  const MetricGraph g = build_graph(kMixed, 0.7, 0.06);
  const std::string key = spec_hash(kMixed);
  const fs::path path = fs::temp_directory_path() / "bergman_test_graph.bin";
  save_graph(g, path.string(), key);
  const MetricGraph loaded = load_graph(path.string(), key, 0.06, 0.7);
  REQUIRE(loaded.size() == g.size());
  CHECK(loaded.n_theta == g.n_theta);
  CHECK(loaded.ring_radius == g.ring_radius);
  CHECK(loaded.adj_offset == g.adj_offset);
  REQUIRE(loaded.adj.size() == g.adj.size());
  for (std::size_t i = 0; i < g.adj.size(); i += 97) {
    CHECK(loaded.adj[i].first == g.adj[i].first);
    CHECK(loaded.adj[i].second == g.adj[i].second);
  }
  // distances computed from the cache agree bit for bit
  CHECK(distance(loaded, kMixed, cplx(0.1, 0.2), cplx(-0.4, 0.1)).value ==
        distance(g, kMixed, cplx(0.1, 0.2), cplx(-0.4, 0.1)).value);
  CHECK_THROWS_AS(load_graph(path.string(), "deadbeefdeadbeef", 0.06, 0.7), ConfigError);
  CHECK_THROWS_AS(load_graph(path.string(), key, 0.05, 0.7), ConfigError);
  fs::remove(path);
}
