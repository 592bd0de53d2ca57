#pragma once

// Artifact formats: profile/graph CSV, OBJ meshes and JSON audit reports.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "phimin/estimates.hpp"
#include "phimin/geometry.hpp"
#include "phimin/potential.hpp"
#include "phimin/stability.hpp"

namespace phimin {

using Json = nlohmann::ordered_json;

/// Shortest round-trip decimal form; "nan", "inf" and "-inf" for non-finite values.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline constexpr const char* profile_csv_header = "s,x,z,theta,k1,k2,H,K,eta,mu";
inline constexpr const char* graph_csv_header = "i,j,x,y,u,H,K,k1,k2,eta";

inline std::string profile_csv(const GeometryField& g) {
  if (!g.is_profile()) throw Error(ErrorKind::UnsupportedCombination, "cli", "profile CSV needs a profile");
  const auto& c = g.profile();
  std::string out = profile_csv_header;
  out += '\n';
  for (std::size_t k = 0; k < g.size(); ++k) {
    const auto& s = c.samples[k];
    for (double v : {s.s, s.x, s.z, s.theta, g.k1[k], g.k2[k], g.H[k], g.K[k], g.eta[k], g.mu[k]}) {
      out += format_number(v);
      out += ',';
    }
    out.back() = '\n';
  }
  return out;
}

inline std::string graph_csv(const GeometryField& g) {
  if (!g.is_graph()) throw Error(ErrorKind::UnsupportedCombination, "cli", "graph CSV needs a graph patch");
  const auto& p = g.graph();
  std::string out = graph_csv_header;
  out += '\n';
  for (int i = 0; i < p.nx(); ++i)
    for (int j = 0; j < p.ny(); ++j) {
      const std::size_t k = p.index(i, j);
      out += std::to_string(i) + ',' + std::to_string(j);
      for (double v : {p.x(i), p.y(j), p.u(i, j), g.H[k], g.K[k], g.k1[k], g.k2[k], g.eta[k]}) {
        out += ',';
        out += format_number(v);
      }
      out += '\n';
    }
  return out;
}

/// Row-major vertices, two triangles (i,j),(i+1,j),(i+1,j+1) and (i,j),(i+1,j+1),(i,j+1) per cell.
inline std::string graph_obj(const GraphPatch& p) {
  std::string out;
  for (int i = 0; i < p.nx(); ++i)
    for (int j = 0; j < p.ny(); ++j)
      out += "v " + format_number(p.x(i)) + ' ' + format_number(p.y(j)) + ' ' + format_number(p.u(i, j)) + '\n';
  auto id = [&](int i, int j) { return std::to_string(p.index(i, j) + 1); };
  for (int i = 0; i + 1 < p.nx(); ++i)
    for (int j = 0; j + 1 < p.ny(); ++j) {
      out += "f " + id(i, j) + ' ' + id(i + 1, j) + ' ' + id(i + 1, j + 1) + '\n';
      out += "f " + id(i, j) + ' ' + id(i + 1, j + 1) + ' ' + id(i, j + 1) + '\n';
    }
  return out;
}

/// CSV with a header and one row per entry of equally long columns.
inline std::string columns_csv(const std::vector<std::string>& names, const std::vector<std::vector<double>>& cols) {
  std::string out;
  for (std::size_t c = 0; c < names.size(); ++c) out += (c ? "," : "") + names[c];
  out += '\n';
  const std::size_t n = cols.empty() ? 0 : cols[0].size();
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) out += (c ? "," : "") + format_number(cols[c][r]);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------------------
// Reports

struct Report {
  std::string name;
  Json hypotheses = Json::object();
  Json values = Json::object();
  Json tolerances = Json::object();
  bool passed = true;
};

/// Non-finite numbers are written as strings.
inline Json number(double v) {
  if (std::isfinite(v)) return v;
  return format_number(v);
}

inline Json numbers(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(number(x));
  return a;
}

inline Json to_json(const Report& r) {
  Json j;
  j["name"] = r.name;
  j["hypotheses"] = r.hypotheses;
  j["values"] = r.values;
  j["tolerances"] = r.tolerances;
  j["passed"] = r.passed;
  return j;
}

inline std::string reports_json(const std::vector<Report>& reports) {
  Json a = Json::array();
  for (const auto& r : reports) a.push_back(to_json(r));
  return a.dump(2) + '\n';
}

inline Report make_report(const ResidualReport& r, double tol = std::numeric_limits<double>::infinity()) {
  Report out;
  out.name = r.identity_name;
  out.values["max_abs_residual"] = number(r.max_abs_residual);
  out.values["l2_residual"] = number(r.l2_residual);
  out.values["grid_h"] = number(r.grid_h);
  out.values["interior_margin"] = r.interior_margin;
  out.values["sample_count"] = r.sample_count;
  out.tolerances["max_abs_residual"] = number(tol);
  out.passed = r.max_abs_residual <= tol;
  return out;
}

inline Report make_report(const ConditionReport& c, const PotentialSpec& spec) {
  Report r;
  r.name = "potential_conditions";
  r.hypotheses["c1"] = c.c1_holds;
  r.hypotheses["c2"] = c.c2_holds;
  r.hypotheses["cc3"] = c.cc3_holds;
  r.hypotheses["d3_nonpositive"] = c.d3_nonpositive;
  r.values["family"] = spec.family_name();
  r.values["gamma"] = number(c.gamma);
  r.values["gamma_sampled"] = number(c.gamma_sampled);
  r.values["gamma_approximate"] = c.gamma_approximate;
  r.values["lambda"] = number(c.lambda);
  r.values["beta"] = number(c.beta);
  r.values["sample_count"] = c.sample_count;
  return r;
}

inline Report make_report(const AreaReport& a) {
  Report r;
  r.name = "intrinsic_area_bound";
  r.hypotheses["area_hypothesis"] = a.hypothesis_ok;
  r.hypotheses["conjugate_variant"] = a.conjugate_hypothesis;
  r.hypotheses["half_log2_variant"] = a.half_log2_hypothesis;
  r.values["center"] = a.center;
  r.values["rho"] = number(a.rho);
  r.values["gamma"] = number(a.gamma);
  r.values["hypothesis_value"] = number(a.hypothesis_value);
  r.values["disk_area"] = number(a.disk_area);
  r.values["bound"] = number(a.bound);
  r.values["inequality_holds"] = a.inequality_holds;
  r.tolerances["strict"] = 0.0;
  r.passed = a.passed;
  return r;
}

inline Report make_report(const DensityReport& d) {
  Report r;
  r.name = "density_monotonicity";
  r.hypotheses["normalized"] = true;
  r.values["center"] = numbers({d.center(0), d.center(1), d.center(2)});
  r.values["epsilon"] = number(d.epsilon);
  r.values["offset"] = number(d.offset);
  r.values["radii"] = numbers(d.radii);
  r.values["areas"] = numbers(d.areas);
  r.values["o_values"] = numbers(d.o_values);
  r.values["lengths"] = numbers(d.lengths);
  r.values["weighted_values"] = numbers(d.weighted_values);
  r.values["monotone"] = d.monotone;
  r.tolerances["o_values"] = numbers(d.tolerances);
  r.passed = d.monotone;
  return r;
}

inline Report make_report(const ConvexityReport& c) {
  Report r;
  r.name = "convexity";
  r.hypotheses["c1"] = c.c1;
  r.hypotheses["cc3"] = c.cc3;
  r.hypotheses["d3_nonpositive"] = c.d3_nonpositive;
  r.hypotheses["mean_curvature_nonpositive"] = c.mean_curvature_nonpositive;
  r.values["min_K"] = number(c.min_K);
  r.values["min_k2"] = number(c.min_k2);
  r.values["theta_sup"] = number(c.theta_sup);
  r.values["lambda_K_inf"] = number(c.lambda_K_inf);
  r.values["flat_hint"] = c.flat_hint;
  r.values["verdict"] = to_string(c.verdict);
  r.tolerances["min_K"] = number(c.tol);
  r.passed = c.verdict != ConvexityVerdict::NotConvex;
  return r;
}

inline Report make_report(const IlmanenEstimateReport& e) {
  Report r;
  r.name = "ilmanen_estimates";
  r.values["sup_curvature_times_min_distance_R"] = number(e.sup_R);
  r.values["sup_curvature_times_min_distance_A"] = number(e.sup_A);
  r.values["R"] = number(e.R);
  r.values["A"] = number(e.A);
  r.values["sup_conformal_curvature"] = number(e.sup_S_phi);
  r.values["argsup"] = e.argsup_R;
  return r;
}

inline Report make_report(const OmoriReport& o) {
  Report r;
  r.name = "omori_test_function";
  r.values["A"] = number(o.A);
  r.values["threshold"] = number(o.threshold);
  r.values["checked"] = o.checked;
  r.values["max_gradient"] = number(o.max_gradient);
  r.values["max_laplacian"] = number(o.max_laplacian);
  r.values["gradient_violation"] = number(o.gradient.max_abs_residual);
  r.values["laplacian_violation"] = number(o.laplacian.max_abs_residual);
  r.values["closed_form_vs_fd"] = number(o.agreement.max_abs_residual);
  r.tolerances["gradient"] = 2.0;
  r.tolerances["laplacian"] = number(2.0 * o.A + 1.0);
  r.passed = o.passed;
  return r;
}

inline Report make_report(const BlowupResult& b) {
  Report r;
  r.name = "blowup";
  r.values["model"] = to_string(b.model);
  r.values["estimated_c"] = number(b.estimated_c);
  Json stages = Json::array();
  for (const auto& s : b.stages) {
    Json j;
    j["scale"] = number(s.scale);
    j["basepoint"] = s.basepoint;
    j["ratio"] = number(s.ratio);
    j["hausdorff"] = number(s.hausdorff);
    j["c2"] = number(s.c2);
    j["window_samples"] = s.window_samples;
    j["curvature_scaling_error"] = number(s.curvature_scaling_error);
    stages.push_back(j);
  }
  r.values["stages"] = stages;
  r.values["hausdorff_distance"] = number(b.hausdorff_distance);
  r.values["c2_distance"] = number(b.c2_distance);
  return r;
}

// ---------------------------------------------------------------------------------------
// Files

/// Writes through a temporary sibling and renames it into place.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw Error(ErrorKind::Io, "cli", "cannot create " + path.parent_path().string() + ": " + ec.message());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorKind::Io, "cli", "cannot open " + tmp.string());
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) throw Error(ErrorKind::Io, "cli", "cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorKind::Io, "cli", "cannot rename " + tmp.string() + ": " + ec.message());
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::Io, "cli", "cannot read " + path.string());
  return std::string(std::istreambuf_iterator<char>(f), {});
}

}  // namespace phimin
