// Command-line front end: wires weight specs and run parameters to the
// computational modules and emits machine-readable reports. Exit codes:
//   0 success, 2 configuration/parse error, 3 numerical-accuracy failure,
//   4 domain error.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bergman/decay.hpp"
#include "bergman/kernel.hpp"
#include "bergman/metric.hpp"
#include "bergman/moments.hpp"
#include "bergman/serialize.hpp"
#include "bergman/weight.hpp"

namespace fs = std::filesystem;
using namespace bergman;

namespace {

struct RunConfig {
  std::optional<WeightSpec> spec;
  // kernel
  int N = 2000;
  double tol = 1e-10;
  std::string method = "series";
  // metric
  double h = 0.01;
  double r_max = 0.95;
  // decay
  std::string strategy = "rays";
  int count = 500;
  std::uint64_t seed = 1;
  double bin_width = 0.25;
  double slack = -1.0;  // negative: 3x the propagated per-sample error bar
  double alpha = 0.5;
  double beta = 0.5;
  std::vector<int> k_list{1, 2, 3};
  std::string out_dir = ".";
};

void validate_ranges(const RunConfig& c) {
  if (c.N < 0 || c.N > 200000) throw ConfigError("config: kernel.N out of range [0, 200000]");
  if (!(c.tol > 0.0 && c.tol <= 1.0)) throw ConfigError("config: kernel.tol out of range (0, 1]");
  if (c.method != "series" && c.method != "gram" && c.method != "closed")
    throw ConfigError("config: kernel.method must be series|gram|closed");
  if (!(c.h > 0.0 && c.h <= 0.5)) throw ConfigError("config: metric.h out of range (0, 0.5]");
  if (!(c.r_max > 0.0 && c.r_max < 1.0)) throw ConfigError("config: metric.r_max out of range (0,1)");
  if (c.strategy != "rays" && c.strategy != "random")
    throw ConfigError("config: decay.strategy must be rays|random");
  if (c.count < 1) throw ConfigError("config: decay.count must be >= 1");
  if (!(c.bin_width > 0.0)) throw ConfigError("config: decay.bin_width must be positive");
  if (!(c.alpha > 0.0 && c.alpha <= 0.5)) throw ConfigError("config: decay.alpha out of range (0, 0.5]");
  if (!(c.beta > 0.0 && c.beta <= 2.0)) throw ConfigError("config: decay.beta out of range (0, 2]");
  for (int k : c.k_list)
    if (k < 1) throw ConfigError("config: decay.k_list entries must be positive");
}

template <typename T>
T get_num(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: bad value for '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const char* where) {
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known)
      if (key == k) ok = true;
    if (!ok) throw ConfigError(std::string("config: unknown key '") + key + "' in " + where);
  }
}

RunConfig parse_config_file(const fs::path& path) {
  const json j = read_json_file(path);
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
  reject_unknown(j, {"spec", "spec_path", "kernel", "metric", "decay", "out_dir"}, "config");
  RunConfig c;
  if (j.contains("spec") && j.contains("spec_path"))
    throw ConfigError("config: give either spec or spec_path, not both");
  if (j.contains("spec")) c.spec = spec_from_json(j.at("spec"));
  if (j.contains("spec_path"))
    c.spec = spec_from_json(read_json_file(j.at("spec_path").get<std::string>()));
  if (j.contains("kernel")) {
    const json& k = j.at("kernel");
    reject_unknown(k, {"N", "tol", "method"}, "config.kernel");
    c.N = get_num<int>(k, "N", c.N);
    c.tol = get_num<double>(k, "tol", c.tol);
    c.method = k.value("method", c.method);
  }
  if (j.contains("metric")) {
    const json& m = j.at("metric");
    reject_unknown(m, {"h", "r_max"}, "config.metric");
    c.h = get_num<double>(m, "h", c.h);
    c.r_max = get_num<double>(m, "r_max", c.r_max);
  }
  if (j.contains("decay")) {
    const json& d = j.at("decay");
    reject_unknown(d, {"strategy", "count", "seed", "bin_width", "slack", "alpha", "beta", "k_list"},
                   "config.decay");
    c.strategy = d.value("strategy", c.strategy);
    c.count = get_num<int>(d, "count", c.count);
    c.seed = get_num<std::uint64_t>(d, "seed", c.seed);
    c.bin_width = get_num<double>(d, "bin_width", c.bin_width);
    c.slack = get_num<double>(d, "slack", c.slack);
    c.alpha = get_num<double>(d, "alpha", c.alpha);
    c.beta = get_num<double>(d, "beta", c.beta);
    if (d.contains("k_list")) {
      c.k_list.clear();
      for (const auto& e : d.at("k_list")) c.k_list.push_back(e.get<int>());
    }
  }
  c.out_dir = j.value("out_dir", c.out_dir);
  return c;
}

cplx parse_cplx(const std::string& s) {
  double re = 0.0, im = 0.0;
  const auto comma = s.find(',');
  try {
    if (comma == std::string::npos) {
      re = std::stod(s);
    } else {
      re = std::stod(s.substr(0, comma));
      im = std::stod(s.substr(comma + 1));
    }
  } catch (const std::exception&) {
    throw ConfigError("cannot parse complex number '" + s + "' (expected re,im)");
  }
  return {re, im};
}

int env_threads() {
  const char* v = std::getenv("BERGMAN_THREADS");
  if (!v) return 1;
  const int t = std::atoi(v);
  return t >= 1 ? t : 1;
}

void write_output(const RunConfig& c, const std::string& name, const std::string& content) {
  fs::path dir(c.out_dir);
  if (!dir.empty() && !fs::exists(dir)) fs::create_directories(dir);
  atomic_write_file(dir / name, content);
}

const WeightSpec& require_spec(const RunConfig& c) {
  if (!c.spec) throw ConfigError("no weight spec given (use --spec or a config file)");
  return *c.spec;
}

// --- subcommands ---------------------------------------------------------------

int run_check_op(const RunConfig& c, double rmax, int samples, double margin,
                 const std::vector<double>& a_grid) {
  const WeightSpec& spec = require_spec(c);
  const OPReport rep = check_op_conditions(spec, rmax, samples, a_grid, margin);
  write_output(c, "op_report.json", op_report_to_json(rep).dump(2) + "\n");
  std::cout << "C1_est=" << rep.C1_est << " C2_est=" << rep.C2_est;
  if (rep.C3_found)
    std::cout << " C3=" << rep.C3_found->first << " a=" << rep.C3_found->second;
  else
    std::cout << " C3=not-found";
  std::cout << " (samples=" << rep.sample_count << ", r_max=" << rep.r_max << ")\n";
  return 0;
}

int run_kernel(const RunConfig& c, cplx z, cplx w, const std::string& moments_path) {
  const WeightSpec& spec = require_spec(c);
  KernelValue kv;
  if (c.method == "closed") {
    bool zero_g = true;
    for (cplx cc : spec.harmonic_coeffs)
      if (cc != cplx(0.0, 0.0)) zero_g = false;
    if (spec.B != 0.0 || !zero_g)
      throw MethodMismatchError("closed-form kernel requires B = 0 and g = 0");
    kv = kernel_closed_form(spec.A, z, w);
  } else if (c.method == "gram") {
    const int N = std::min(c.N, 60);
    const double r_quad = std::min(0.99, std::max(std::abs(z), std::abs(w)) + 0.01);
    kv = kernel_gram(spec, N, z, w, r_quad);
  } else {
    MomentTable table;
    bool have = false;
    if (!moments_path.empty() && fs::exists(moments_path)) {
      table = moments_from_json(read_json_file(moments_path));
      if (table.spec_hash != spec_hash(spec))
        throw ConfigError("moment table at " + moments_path + " was built for a different spec");
      have = true;
    }
    if (!have) {
      table = compute_moments(spec, c.N, c.tol);
      if (!moments_path.empty()) {
        const fs::path parent = fs::path(moments_path).parent_path();
        if (!parent.empty()) fs::create_directories(parent);
        atomic_write_file(moments_path, moments_to_json(table).dump() + "\n");
      }
    }
    kv = kernel_series(table, z, w, c.tol);
  }
  write_output(c, "kernel.json", kernel_value_to_json(kv).dump(2) + "\n");
  const cplx v = kv.value();
  std::cout << "K(z,w) = " << v.real() << (v.imag() < 0 ? " - " : " + ")
            << std::abs(v.imag()) << "i  (log_mag=" << kv.log_mag
            << ", phase=" << kv.phase << ", method=" << to_string(kv.method)
            << ", err_rel=" << kv.err_rel << ")\n";
  return 0;
}

int run_distance(const RunConfig& c, cplx z, cplx w, const std::string& cache_dir) {
  const WeightSpec& spec = require_spec(c);
  MetricGraph graph;
  if (!cache_dir.empty()) {
    fs::create_directories(cache_dir);
    char name[128];
    std::snprintf(name, sizeof name, "graph_%s_h%.6g_r%.6g.bin", spec_hash(spec).c_str(),
                  c.h, c.r_max);
    const fs::path cache = fs::path(cache_dir) / name;
    if (fs::exists(cache)) {
      graph = load_graph(cache.string(), spec_hash(spec), c.h, c.r_max);
    } else {
      graph = build_graph(spec, c.r_max, c.h);
      save_graph(graph, cache.string(), spec_hash(spec));
    }
  } else {
    graph = build_graph(spec, c.r_max, c.h);
  }
  const DistanceResult d = distance(graph, spec, z, w);
  json j{{"value", d.value}, {"err", d.err}, {"h", c.h}, {"r_max", c.r_max}};
  write_output(c, "distance.json", j.dump(2) + "\n");
  std::cout << "d_phi = " << d.value << " +/- " << d.err << "\n";
  return 0;
}

int run_decay_report(const RunConfig& c) {
  const WeightSpec& spec = require_spec(c);
  const MomentTable table = compute_moments(spec, c.N, c.tol);
  const MetricGraph graph = build_graph(spec, c.r_max, c.h);
  const SampleStrategy strat =
      c.strategy == "rays" ? SampleStrategy::rays : SampleStrategy::random_pairs;
  SampleRun run = sample_pairs(spec, graph, table, strat, c.count, c.seed, env_threads(), c.tol);

  double slack = c.slack;
  DecayReport rep = fit_decay(run.pairs, c.bin_width, std::max(slack, 0.0));
  if (slack < 0.0) {
    double bar = 0.0;
    for (const auto& s : run.pairs)
      bar = std::max(bar, s.kernel_err + rep.sigma_fit * s.d_phi_err);
    slack = 3.0 * bar;
    rep = fit_decay(run.pairs, c.bin_width, slack);
  }
  rep.excluded = run.excluded;

  json j = decay_report_to_json(rep);
  try {
    j["comparison"] = bound_comparison_to_json(compare_bounds(rep, run.pairs, c.k_list));
  } catch (const DomainError& e) {
    j["comparison"] = json{{"error", e.what()}};
  }
  write_output(c, "decay_report.json", j.dump(2) + "\n");
  write_output(c, "samples.csv", samples_to_csv(run.pairs));
  write_output(c, "decay_plot.dat", samples_to_plot(run.pairs));
  std::cout << "sigma_fit=" << rep.sigma_fit << " logC_fit=" << rep.logC_fit
            << " r2=" << rep.r2 << " violations=" << rep.violations
            << " samples=" << rep.sample_count << " excluded=" << rep.excluded << "\n";
  return 0;
}

int run_oracle_test() {
  int failures = 0;
  auto report = [&](const char* name, bool ok, double worst) {
    std::cout << (ok ? "PASS " : "FAIL ") << name << " (worst rel err " << worst << ")\n";
    if (!ok) ++failures;
  };

  {  // beta-integral moments: m_n = pi B(n+1, A+1)
    double worst = 0.0;
    for (double A : {1.0, 3.0}) {
      WeightSpec spec{A, 0.0, 1.0, {}};
      const MomentTable t = compute_moments(spec, 100, 1e-12);
      for (int n = 0; n <= 100; ++n) {
        const double ref = std::log(kPi) + std::lgamma(n + 1.0) + std::lgamma(A + 1.0) -
                           std::lgamma(n + A + 2.0);
        worst = std::max(worst, std::abs(std::expm1(t.log_m[n] - ref)));
      }
    }
    report("moment beta oracle", worst <= 1e-9, worst);
  }
  {  // series kernel vs closed form
    double worst = 0.0;
    WeightSpec spec{1.0, 0.0, 1.0, {}};
    const MomentTable t = compute_moments(spec, 400, 1e-12);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int i = 0; i < 25; ++i) {
      const cplx z = std::polar(0.8 * std::sqrt(unif(rng)), 2.0 * kPi * unif(rng));
      const cplx w = std::polar(0.8 * std::sqrt(unif(rng)), 2.0 * kPi * unif(rng));
      const KernelValue a = kernel_series(t, z, w, 1e-12);
      const KernelValue b = kernel_closed_form(1.0, z, w);
      worst = std::max(worst, std::abs(a.value() / b.value() - cplx(1.0, 0.0)));
    }
    report("series vs closed-form kernel", worst <= 1e-8, worst);
  }
  {  // radial distance oracle vs arctanh
    double worst = 0.0;
    WeightSpec spec{0.5, 0.0, 1.0, {}};
    for (double r : {0.2, 0.5, 0.8}) {
      const double got = radial_distance_oracle(spec, r, 1e-12);
      worst = std::max(worst, std::abs(got / std::atanh(r) - 1.0));
    }
    report("radial distance vs arctanh", worst <= 1e-8, worst);
  }
  {  // holomorphic gauge identity for the Gram kernel
    const cplx cc(0.3, 0.2);
    WeightSpec pert{1.0, 0.0, 1.0, {cplx(0.0, 0.0), cc}};
    const GramKernel gk(pert, 40, 0.6);
    double worst = 0.0;
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int i = 0; i < 5; ++i) {
      const cplx z = std::polar(0.5 * std::sqrt(unif(rng)), 2.0 * kPi * unif(rng));
      const cplx w = std::polar(0.5 * std::sqrt(unif(rng)), 2.0 * kPi * unif(rng));
      const cplx lhs = gk.eval(z, w).value();
      const cplx rhs =
          std::exp(cc * z + std::conj(cc * w)) * kernel_closed_form(1.0, z, w).value();
      worst = std::max(worst, std::abs(lhs / rhs - cplx(1.0, 0.0)));
    }
    report("gauge identity (Gram vs closed form)", worst <= 1e-4, worst);
  }

  if (failures > 0) throw AccuracyError(std::to_string(failures) + " oracle group(s) failed");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weighted Bergman kernels, geodesic distances, and decay reports on the unit disc"};
  app.require_subcommand(1);
  // the distance/decay flag --h needs the short -h slot free
  app.set_help_flag("--help", "Print help");

  std::string config_path, spec_path;
  app.add_option("--config", config_path, "Run configuration (JSON)");
  app.add_option("--spec", spec_path, "Weight spec file (JSON)");

  std::string z_str, w_str, moments_path, cache_dir;
  double opt_h = 0, opt_rmax = 0, opt_tol = 0, opt_bin = 0, opt_slack = 0;
  double op_rmax = 0.99, op_margin = 0.01;
  int opt_n = 0, opt_count = 0, op_samples = 2048;
  std::uint64_t opt_seed = 0;
  std::string opt_method, opt_strategy, opt_out, a_grid_str, k_list_str;

  auto* sc_check = app.add_subcommand("check-op", "Certify the tau regularity conditions empirically");
  sc_check->set_help_flag("--help", "Print help");
  sc_check->fallthrough();
  sc_check->add_option("--rmax", op_rmax, "Sampling cap on |z|");
  sc_check->add_option("--samples", op_samples, "Sample budget");
  sc_check->add_option("--margin", op_margin, "Acceptance margin for C3 < 1");
  sc_check->add_option("--a-grid", a_grid_str, "Comma-separated a grid (default 0.5,1,2,4,8)");

  auto* sc_kernel = app.add_subcommand("kernel", "Evaluate the Bergman kernel at one pair");
  sc_kernel->set_help_flag("--help", "Print help");
  sc_kernel->fallthrough();
  sc_kernel->add_option("--z", z_str, "Evaluation point re,im")->required();
  sc_kernel->add_option("--w", w_str, "Evaluation point re,im")->required();
  auto* o_method = sc_kernel->add_option("--method", opt_method, "series|gram|closed");
  auto* o_n = sc_kernel->add_option("--n", opt_n, "Basis/series size N");
  auto* o_tol = sc_kernel->add_option("--tol", opt_tol, "Series/moment tolerance");
  sc_kernel->add_option("--moments", moments_path, "Moment table cache file (JSON)");

  auto* sc_dist = app.add_subcommand("distance", "Geodesic distance d_phi between two points");
  sc_dist->set_help_flag("--help", "Print help");
  sc_dist->fallthrough();
  sc_dist->add_option("--z", z_str, "Endpoint re,im")->required();
  sc_dist->add_option("--w", w_str, "Endpoint re,im")->required();
  auto* o_h = sc_dist->add_option("--h", opt_h, "Grid resolution");
  auto* o_rmax = sc_dist->add_option("--rmax", opt_rmax, "Grid radius");
  sc_dist->add_option("--cache-dir", cache_dir, "Graph cache directory");

  auto* sc_decay = app.add_subcommand("decay-report", "Sample pairs and fit the decay envelope");
  sc_decay->set_help_flag("--help", "Print help");
  sc_decay->fallthrough();
  auto* o_h2 = sc_decay->add_option("--h", opt_h, "Grid resolution");
  auto* o_rmax2 = sc_decay->add_option("--rmax", opt_rmax, "Grid radius");
  auto* o_count = sc_decay->add_option("--count", opt_count, "Pair budget");
  auto* o_seed = sc_decay->add_option("--seed", opt_seed, "Sampling seed");
  auto* o_strategy = sc_decay->add_option("--strategy", opt_strategy, "rays|random");
  auto* o_bin = sc_decay->add_option("--bin-width", opt_bin, "d_phi bin width");
  auto* o_slack = sc_decay->add_option("--slack", opt_slack, "Violation slack (negative = auto)");
  auto* o_klist = sc_decay->add_option("--k-list", k_list_str, "Comma-separated polynomial orders");
  auto* o_n2 = sc_decay->add_option("--n", opt_n, "Moment table size N");
  auto* o_tol2 = sc_decay->add_option("--tol", opt_tol, "Series/moment tolerance");

  auto* sc_oracle = app.add_subcommand("oracle-test", "Run the independent oracle suite");
  sc_oracle->fallthrough();

  std::string out_dir_flag;
  auto* o_out = app.add_option("--out", out_dir_flag, "Output directory");

  try {
    app.parse(argc, argv);

    RunConfig cfg;
    if (!config_path.empty()) cfg = parse_config_file(config_path);
    if (!spec_path.empty()) cfg.spec = spec_from_json(read_json_file(spec_path));
    if (o_out->count()) cfg.out_dir = out_dir_flag;
    if (o_method->count()) cfg.method = opt_method;
    if (o_n->count() || o_n2->count()) cfg.N = opt_n;
    if (o_tol->count() || o_tol2->count()) cfg.tol = opt_tol;
    if (o_h->count() || o_h2->count()) cfg.h = opt_h;
    if (o_rmax->count() || o_rmax2->count()) cfg.r_max = opt_rmax;
    if (o_count->count()) cfg.count = opt_count;
    if (o_seed->count()) cfg.seed = opt_seed;
    if (o_strategy->count()) cfg.strategy = opt_strategy;
    if (o_bin->count()) cfg.bin_width = opt_bin;
    if (o_slack->count()) cfg.slack = opt_slack;
    if (o_klist->count()) {
      cfg.k_list.clear();
      std::stringstream ss(k_list_str);
      std::string item;
      while (std::getline(ss, item, ',')) cfg.k_list.push_back(std::stoi(item));
    }
    validate_ranges(cfg);

    if (sc_check->parsed()) {
      std::vector<double> a_grid{0.5, 1.0, 2.0, 4.0, 8.0};
      if (!a_grid_str.empty()) {
        a_grid.clear();
        std::stringstream ss(a_grid_str);
        std::string item;
        while (std::getline(ss, item, ',')) a_grid.push_back(std::stod(item));
      }
      return run_check_op(cfg, op_rmax, op_samples, op_margin, a_grid);
    }
    if (sc_kernel->parsed()) return run_kernel(cfg, parse_cplx(z_str), parse_cplx(w_str), moments_path);
    if (sc_dist->parsed()) return run_distance(cfg, parse_cplx(z_str), parse_cplx(w_str), cache_dir);
    if (sc_decay->parsed()) return run_decay_report(cfg);
    if (sc_oracle->parsed()) return run_oracle_test();
    return 2;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const AccuracyError& e) {
    std::cerr << "accuracy error: " << e.what() << "\n";
    return 3;
  } catch (const DomainError& e) {
    std::cerr << "domain error: " << e.what() << "\n";
    return 4;
  } catch (const SpecError& e) {
    std::cerr << "spec error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
