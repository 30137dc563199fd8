#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "bergman/decay.hpp"
#include "bergman/kernel.hpp"
#include "bergman/metric.hpp"
#include "bergman/moments.hpp"
#include "bergman/weight.hpp"

namespace bergman {

using json = nlohmann::json;

// --- weight spec -------------------------------------------------------------

inline json spec_to_json(const WeightSpec& spec) {
  json g = json::array();
  for (cplx c : spec.harmonic_coeffs) g.push_back({c.real(), c.imag()});
  return json{{"A", spec.A}, {"B", spec.B}, {"alpha", spec.alpha}, {"g", g}};
}

inline WeightSpec spec_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("weight spec: expected a JSON object");
  for (const auto& [key, _] : j.items())
    if (key != "A" && key != "B" && key != "alpha" && key != "g")
      throw ConfigError("weight spec: unknown key '" + key + "'");
  WeightSpec spec;
  try {
    spec.A = j.at("A").get<double>();
    spec.B = j.at("B").get<double>();
    spec.alpha = j.value("alpha", 1.0);
    if (j.contains("g")) {
      for (const auto& c : j.at("g")) {
        if (!c.is_array() || c.size() != 2)
          throw ConfigError("weight spec: g entries must be [re, im] pairs");
        spec.harmonic_coeffs.emplace_back(c[0].get<double>(), c[1].get<double>());
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("weight spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

// --- reports -------------------------------------------------------------------

inline json op_report_to_json(const OPReport& rep) {
  json j{{"C1_est", rep.C1_est},
         {"C2_est", rep.C2_est},
         {"C3", nullptr},
         {"a", nullptr},
         {"sample_count", rep.sample_count},
         {"r_max", rep.r_max},
         {"note", rep.note}};
  if (rep.C3_found) {
    j["C3"] = rep.C3_found->first;
    j["a"] = rep.C3_found->second;
  }
  return j;
}

inline json kernel_value_to_json(const KernelValue& kv) {
  const cplx v = kv.value();
  json j{{"log_mag", kv.log_mag},
         {"phase", kv.phase},
         {"method", to_string(kv.method)},
         {"err_rel", kv.err_rel}};
  if (std::isfinite(v.real()) && std::isfinite(v.imag())) {
    j["re"] = v.real();
    j["im"] = v.imag();
  }
  return j;
}

inline json decay_report_to_json(const DecayReport& rep) {
  json annuli = json::array();
  for (const auto& [c, v] : rep.annulus_max) annuli.push_back({c, v});
  json nd = nullptr;
  if (std::isfinite(rep.near_diag_ratio.first))
    nd = {rep.near_diag_ratio.first, rep.near_diag_ratio.second};
  return json{{"sigma_fit", rep.sigma_fit},
              {"logC_fit", rep.logC_fit},
              {"r2", rep.r2},
              {"violations", rep.violations},
              {"annulus_max", annuli},
              {"near_diag_ratio", nd},
              {"sample_count", rep.sample_count},
              {"excluded", rep.excluded},
              {"bin_width", rep.bin_width},
              {"slack", rep.slack}};
}

inline json bound_comparison_to_json(const std::vector<BoundComparisonRow>& table) {
  json rows = json::array();
  for (const auto& r : table)
    rows.push_back({{"k", r.k},
                    {"c_k", r.c_k},
                    {"mean_resid_poly", r.mean_resid_poly},
                    {"mean_resid_exp", r.mean_resid_exp},
                    {"frac_exp_tighter", r.frac_exp_tighter},
                    {"n_far", r.n_far}});
  return rows;
}

// --- moment tables -------------------------------------------------------------

inline json moments_to_json(const MomentTable& t) {
  json entries = json::array();
  for (int n = 0; n <= t.N; ++n) entries.push_back({n, t.log_m[n], t.quad_err[n]});
  return json{{"spec_hash", t.spec_hash}, {"N", t.N}, {"entries", entries}};
}

inline MomentTable moments_from_json(const json& j) {
  MomentTable t;
  try {
    t.spec_hash = j.at("spec_hash").get<std::string>();
    t.N = j.at("N").get<int>();
    t.log_m.resize(t.N + 1);
    t.quad_err.resize(t.N + 1);
    for (const auto& e : j.at("entries")) {
      const int n = e.at(0).get<int>();
      if (n < 0 || n > t.N) throw ConfigError("moment table: index out of range");
      t.log_m[n] = e.at(1).get<double>();
      t.quad_err[n] = e.at(2).get<double>();
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("moment table: ") + e.what());
  }
  return t;
}

// --- CSV / plot data -------------------------------------------------------------

namespace detail {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline std::string samples_to_csv(const std::vector<SamplePair>& samples) {
  std::string out = "z_re,z_im,w_re,w_im,d_phi,d_tau,log_norm_kernel,kernel_err\n";
  for (const auto& s : samples) {
    out += detail::fmt_double(s.z.real()) + "," + detail::fmt_double(s.z.imag()) + "," +
           detail::fmt_double(s.w.real()) + "," + detail::fmt_double(s.w.imag()) + "," +
           detail::fmt_double(s.d_phi) + "," + detail::fmt_double(s.d_tau) + "," +
           detail::fmt_double(s.log_norm_kernel) + "," + detail::fmt_double(s.kernel_err) +
           "\n";
  }
  return out;
}

/// Two-column (d_phi, log_norm_kernel) rows sorted by d_phi, for plotting.
inline std::string samples_to_plot(std::vector<SamplePair> samples) {
  std::sort(samples.begin(), samples.end(),
            [](const SamplePair& a, const SamplePair& b) {
              return a.d_phi < b.d_phi ||
                     (a.d_phi == b.d_phi && a.log_norm_kernel < b.log_norm_kernel);
            });
  std::string out;
  for (const auto& s : samples)
    out += detail::fmt_double(s.d_phi) + " " + detail::fmt_double(s.log_norm_kernel) + "\n";
  return out;
}

// --- files -------------------------------------------------------------------

/// Writes atomically: temp file in the target directory, then rename.
inline void atomic_write_file(const std::filesystem::path& path, std::string_view content) {
  namespace fs = std::filesystem;
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw ConfigError("cannot open for writing: " + tmp.string());
    os.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!os) throw ConfigError("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw ConfigError("rename failed for " + path.string() + ": " + ec.message());
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open " + path.string());
  json j = json::parse(is, nullptr, false);
  if (j.is_discarded()) throw ConfigError("malformed JSON in " + path.string());
  return j;
}

}  // namespace bergman
