#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include "bergman/quadrature.hpp"
#include "bergman/weight.hpp"

namespace bergman {

namespace detail {

// Simpson's rule for the tau-length of the straight segment [p, q].
inline double tau_segment_length(const WeightSpec& spec, cplx p, cplx q) {
  const double len = std::abs(q - p);
  if (len == 0.0) return 0.0;
  const double fp = inv_tau(spec, p);
  const double fm = inv_tau(spec, 0.5 * (p + q));
  const double fq = inv_tau(spec, q);
  return len * (fp + 4.0 * fm + fq) / 6.0;
}

}  // namespace detail

/// Polar-grid discretization of {|z| <= r_max} for the metric |dz|/tau.
/// Ring spacing is proportional to the local tau (the tau-length of a radial
/// step stays near h/tau(0)); the angular count depends only on h, so graphs
/// with larger r_max are strict supersets. Node 0 is the origin; ring k >= 1
/// holds n_theta nodes. Immutable once built.
struct MetricGraph {
  double r_max = 0.0, h = 0.0;
  int n_theta = 0;
  std::vector<double> ring_radius;  // ring_radius[0] == 0 (origin)
  std::vector<cplx> nodes;
  std::vector<std::uint32_t> adj_offset;             // CSR offsets, size nodes+1
  std::vector<std::pair<std::uint32_t, double>> adj; // (neighbor, weight), both directions

  std::uint32_t node_index(int ring, int j) const {
    return ring == 0 ? 0u
                     : 1u + static_cast<std::uint32_t>(ring - 1) * n_theta +
                           static_cast<std::uint32_t>(j);
  }
  std::size_t size() const { return nodes.size(); }
};

/// Builds the polar grid with 8-connectivity in grid indices (ring, angular,
/// and both diagonal neighbors; the origin connects to every angle of ring 1).
/// Edge weights are Simpson approximations of the segment tau-length.
inline MetricGraph build_graph(const WeightSpec& spec, double r_max, double h) {
  spec.validate();
  if (!(r_max > 0.0 && r_max < 1.0))
    throw ConfigError("build_graph: r_max must lie in (0,1)");
  if (!(h > 0.0)) throw ConfigError("build_graph: h must be positive");

  MetricGraph g;
  g.r_max = r_max;
  g.h = h;
  const double tau0 = eval_tau(spec, cplx(0.0, 0.0));
  g.ring_radius.push_back(0.0);
  for (double r = 0.0;;) {
    const double step = h * eval_tau(spec, cplx(r, 0.0)) / tau0;
    if (!(step > 1e-14)) throw ConfigError("build_graph: ring spacing underflow");
    r += step;
    if (r > r_max) break;
    g.ring_radius.push_back(r);
    if (g.ring_radius.size() > 4u << 20)
      throw ConfigError("build_graph: too many rings for this h");
  }
  const int n_rings = static_cast<int>(g.ring_radius.size());
  if (n_rings < 2)
    throw ConfigError("build_graph: h too large to produce a connected grid");
  g.n_theta = std::max(8, static_cast<int>(std::ceil(2.0 * kPi / h)));
  const int M = g.n_theta;
  const std::size_t projected = 1 + static_cast<std::size_t>(n_rings - 1) * M;
  if (projected > 50u * 1000 * 1000)
    throw ConfigError("build_graph: grid would exceed 50M nodes; increase h");

  g.nodes.reserve(1 + static_cast<std::size_t>(n_rings - 1) * M);
  g.nodes.emplace_back(0.0, 0.0);
  for (int k = 1; k < n_rings; ++k)
    for (int j = 0; j < M; ++j)
      g.nodes.push_back(std::polar(g.ring_radius[k], 2.0 * kPi * j / M));

  struct Edge { std::uint32_t u, v; double w; };
  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(n_rings) * M * 4 + M);
  auto add_edge = [&](std::uint32_t u, std::uint32_t v) {
    const double w = detail::tau_segment_length(spec, g.nodes[u], g.nodes[v]);
    if (!(w > 0.0) || !std::isfinite(w))
      throw ConfigError("build_graph: degenerate edge weight");
    edges.push_back({u, v, w});
  };
  for (int j = 0; j < M; ++j) add_edge(0, g.node_index(1, j));
  for (int k = 1; k < n_rings; ++k) {
    for (int j = 0; j < M; ++j) {
      const std::uint32_t u = g.node_index(k, j);
      add_edge(u, g.node_index(k, (j + 1) % M));
      if (k + 1 < n_rings) {
        add_edge(u, g.node_index(k + 1, j));
        add_edge(u, g.node_index(k + 1, (j + 1) % M));
        add_edge(u, g.node_index(k + 1, (j + M - 1) % M));
      }
    }
  }

  const std::size_t n = g.nodes.size();
  std::vector<std::uint32_t> degree(n, 0);
  for (const auto& e : edges) {
    ++degree[e.u];
    ++degree[e.v];
  }
  g.adj_offset.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) g.adj_offset[i + 1] = g.adj_offset[i] + degree[i];
  g.adj.resize(g.adj_offset[n]);
  std::vector<std::uint32_t> cursor(g.adj_offset.begin(), g.adj_offset.end() - 1);
  for (const auto& e : edges) {
    g.adj[cursor[e.u]++] = {e.v, e.w};
    g.adj[cursor[e.v]++] = {e.u, e.w};
  }

  // Connectivity sanity sweep.
  std::vector<char> seen(n, 0);
  std::vector<std::uint32_t> stack{0};
  seen[0] = 1;
  std::size_t visited = 1;
  while (!stack.empty()) {
    const std::uint32_t u = stack.back();
    stack.pop_back();
    for (std::uint32_t i = g.adj_offset[u]; i < g.adj_offset[u + 1]; ++i) {
      const std::uint32_t v = g.adj[i].first;
      if (!seen[v]) {
        seen[v] = 1;
        ++visited;
        stack.push_back(v);
      }
    }
  }
  if (visited != n) throw ConfigError("build_graph: grid is not connected");
  return g;
}

/// Dijkstra from a single source; returns tau-lengths to every node.
inline std::vector<double> shortest_paths(const MetricGraph& g, std::uint32_t source) {
  if (source >= g.size()) throw ConfigError("shortest_paths: source out of range");
  std::vector<double> dist(g.size(), std::numeric_limits<double>::infinity());
  using Item = std::pair<double, std::uint32_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
  dist[source] = 0.0;
  pq.emplace(0.0, source);
  while (!pq.empty()) {
    const auto [d, u] = pq.top();
    pq.pop();
    if (d > dist[u]) continue;
    for (std::uint32_t i = g.adj_offset[u]; i < g.adj_offset[u + 1]; ++i) {
      const auto [v, w] = g.adj[i];
      const double nd = d + w;
      if (nd < dist[v]) {
        dist[v] = nd;
        pq.emplace(nd, v);
      }
    }
  }
  return dist;
}

struct SnapInfo {
  std::uint32_t node = 0;
  double tau_len = 0.0;  // tau-length of the straight segment node -> point
};

/// Snaps to the largest ring radius <= |z| (so the snap segment extends a
/// radial path instead of backtracking), nearest angle.
inline SnapInfo snap_point(const MetricGraph& g, const WeightSpec& spec, cplx z) {
  const double rz = std::abs(z);
  if (rz > g.r_max + 1e-12)
    throw DomainError("snap_point: endpoint outside the graph radius r_max");
  const auto& R = g.ring_radius;
  int k = static_cast<int>(std::upper_bound(R.begin(), R.end(), rz) - R.begin()) - 1;
  if (k <= 0) return {0, detail::tau_segment_length(spec, cplx(0.0, 0.0), z)};
  const double dth = 2.0 * kPi / g.n_theta;
  long j = std::lround(std::atan2(z.imag(), z.real()) / dth);
  j %= g.n_theta;
  if (j < 0) j += g.n_theta;
  const std::uint32_t node = g.node_index(k, static_cast<int>(j));
  return {node, detail::tau_segment_length(spec, g.nodes[node], z)};
}

struct DistanceResult {
  double value = 0.0;
  double err = 0.0;  // snap segments plus a small discretization allowance
};

/// Shortest-path approximation of the geodesic distance d_phi(z, w): graph
/// distance between the snapped endpoints plus the two snap segment lengths.
/// Upper-bound approximation, first order in h. Endpoints are put in
/// canonical order first, so distance(z, w) == distance(w, z) exactly.
inline DistanceResult distance(const MetricGraph& g, const WeightSpec& spec, cplx z, cplx w) {
  cplx a = z, b = w;
  if (b.real() < a.real() || (b.real() == a.real() && b.imag() < a.imag()))
    std::swap(a, b);
  const SnapInfo sa = snap_point(g, spec, a);
  const SnapInfo sb = snap_point(g, spec, b);
  double graph_d = 0.0;
  if (sa.node != sb.node) graph_d = shortest_paths(g, sa.node)[sb.node];
  DistanceResult out;
  out.value = graph_d + sa.tau_len + sb.tau_len;
  out.err = sa.tau_len + sb.tau_len + 1e-3 * graph_d + 1e-12;
  return out;
}

/// d_phi(0, r) for radial weights: integral_0^r sqrt(Laplacian phi(t)) dt by
/// adaptive quadrature. Radial symmetry makes the radial segment the geodesic.
inline double radial_distance_oracle(const WeightSpec& spec, double r, double tol = 1e-10) {
  spec.validate();
  if (!spec.radial())
    throw MethodMismatchError("radial_distance_oracle: weight is not radial");
  if (!(r >= 0.0 && r < 1.0))
    throw DomainError("radial_distance_oracle: r must lie in [0,1)");
  if (r == 0.0) return 0.0;
  auto g = [&spec](double t) -> double {
    return 0.5 * std::log(eval_laplacian(spec, cplx(t, 0.0)));
  };
  const auto I = quad::integrate_log(g, 0.0, r, tol);
  return std::exp(I.log_value);
}

/// Distance of the metric |dz|/(1-|z|^2): arctanh of the pseudo-hyperbolic
/// modulus |(z-w)/(1 - conj(z) w)|.
inline double hyperbolic_distance(cplx z, cplx w) {
  detail::check_disc(z);
  detail::check_disc(w);
  const double rho = std::abs((z - w) / (cplx(1.0, 0.0) - std::conj(z) * w));
  return std::atanh(rho);
}

/// Quasi-distance |z-w| / min(tau(z), tau(w)).
inline double dtau(const WeightSpec& spec, cplx z, cplx w) {
  const double tz = eval_tau(spec, z);
  const double tw = eval_tau(spec, w);
  return std::abs(z - w) / std::min(tz, tw);
}

// --- binary cache -----------------------------------------------------------

namespace detail {

template <typename T>
void put_raw(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get_raw(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw ConfigError("graph cache: truncated file");
  return v;
}

inline constexpr std::uint32_t kGraphMagic = 0x42475246u;  // "BGRF"

}  // namespace detail

/// Persists a graph keyed by (spec hash, h, r_max). Writes through a temp
/// file and renames, so readers never see a partial cache.
inline void save_graph(const MetricGraph& g, const std::string& path,
                       const std::string& spec_hash_key) {
  const std::string tmp = path + ".tmp";
  std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
  if (!os) throw ConfigError("save_graph: cannot open " + tmp);
  detail::put_raw(os, detail::kGraphMagic);
  detail::put_raw<std::uint32_t>(os, 1);  // version
  const std::uint64_t hash = detail::fnv1a(spec_hash_key);
  detail::put_raw(os, hash);
  detail::put_raw(os, g.h);
  detail::put_raw(os, g.r_max);
  detail::put_raw<std::uint64_t>(os, g.ring_radius.size());
  detail::put_raw<std::uint32_t>(os, static_cast<std::uint32_t>(g.n_theta));
  for (double r : g.ring_radius) detail::put_raw(os, r);
  detail::put_raw<std::uint64_t>(os, g.adj_offset.size());
  for (auto v : g.adj_offset) detail::put_raw(os, v);
  detail::put_raw<std::uint64_t>(os, g.adj.size());
  for (const auto& [v, w] : g.adj) {
    detail::put_raw(os, v);
    detail::put_raw(os, w);
  }
  if (!os) throw ConfigError("save_graph: write failed for " + tmp);
  os.close();
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw ConfigError("save_graph: rename failed for " + path + ": " + ec.message());
}

/// Loads a cached graph and validates the key (spec hash, h, r_max).
inline MetricGraph load_graph(const std::string& path, const std::string& spec_hash_key,
                              double h, double r_max) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("load_graph: cannot open " + path);
  if (detail::get_raw<std::uint32_t>(is) != detail::kGraphMagic)
    throw ConfigError("load_graph: bad magic in " + path);
  if (detail::get_raw<std::uint32_t>(is) != 1)
    throw ConfigError("load_graph: unsupported version in " + path);
  const std::uint64_t hash = detail::get_raw<std::uint64_t>(is);
  MetricGraph g;
  g.h = detail::get_raw<double>(is);
  g.r_max = detail::get_raw<double>(is);
  if (hash != detail::fnv1a(spec_hash_key) || g.h != h || g.r_max != r_max)
    throw ConfigError("load_graph: cache key mismatch for " + path);
  const auto n_rings = detail::get_raw<std::uint64_t>(is);
  g.n_theta = static_cast<int>(detail::get_raw<std::uint32_t>(is));
  g.ring_radius.resize(n_rings);
  for (auto& r : g.ring_radius) r = detail::get_raw<double>(is);
  g.adj_offset.resize(detail::get_raw<std::uint64_t>(is));
  for (auto& v : g.adj_offset) v = detail::get_raw<std::uint32_t>(is);
  g.adj.resize(detail::get_raw<std::uint64_t>(is));
  for (auto& [v, w] : g.adj) {
    v = detail::get_raw<std::uint32_t>(is);
    w = detail::get_raw<double>(is);
  }
  g.nodes.reserve(1 + (n_rings - 1) * g.n_theta);
  g.nodes.emplace_back(0.0, 0.0);
  for (std::uint64_t k = 1; k < n_rings; ++k)
    for (int j = 0; j < g.n_theta; ++j)
      g.nodes.push_back(std::polar(g.ring_radius[k], 2.0 * kPi * j / g.n_theta));
  if (g.adj_offset.size() != g.nodes.size() + 1)
    throw ConfigError("load_graph: inconsistent cache " + path);
  return g;
}

}  // namespace bergman
