#pragma once

// Command pipelines behind the `phimin` executable and the run manifest.

#include <openssl/evp.h>

#include <chrono>
#include <filesystem>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "phimin/config.hpp"
#include "phimin/estimates.hpp"
#include "phimin/identities.hpp"
#include "phimin/io.hpp"
#include "phimin/solvers.hpp"
#include "phimin/stability.hpp"

namespace phimin {

inline constexpr const char* version = "0.1.0";

inline std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error(ErrorKind::Io, "cli", "SHA-256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

struct Artifact {
  std::string path;  // relative to the output directory
  std::string content;
};

struct RunOutcome {
  int exit_code = 0;
  std::vector<Report> reports;
  std::vector<Artifact> artifacts;
  Json manifest;
};

namespace detail {

using OJson = nlohmann::ordered_json;

inline double num(const OJson& p, const char* k) { return p.at(k).get<double>(); }

inline ShootingConfig shooting_config(const OJson& p) {
  ShootingConfig c;
  if (p.at("start").get<std::string>() == "axis") c.start = AxisRegular{num(p, "z0")};
  else c.start = PointStart{num(p, "x0"), num(p, "z0"), num(p, "theta0")};
  c.s_min = num(p, "s_min");
  c.s_max = num(p, "s_max");
  c.step = num(p, "step");
  return c;
}

/// Height of the rotational profile over radius r by linear interpolation in arclength.
inline double profile_height(const ProfileCurve& c, double r) {
  for (std::size_t k = 1; k < c.size(); ++k)
    if (c.samples[k].x >= r) {
      const auto& a = c.samples[k - 1];
      const auto& b = c.samples[k];
      return a.z + (r - a.x) / (b.x - a.x) * (b.z - a.z);
    }
  throw Error(ErrorKind::Precondition, "cli", "boundary profile does not reach the patch corners");
}

inline SolveResult solve_graph_from(const PotentialSpec& spec, const OJson& p) {
  const auto d = p.at("domain").get<std::vector<double>>();
  if (d.size() != 4 || !(d[0] < d[1] && d[2] < d[3]))
    throw Error(ErrorKind::Schema, "cli", "/command_params/domain: expected [x0, x1, y0, y1] with x0 < x1, y0 < y1");
  const Rect rect{d[0], d[1], d[2], d[3]};
  NewtonConfig cfg;
  cfg.tol_residual = num(p, "tol_residual");
  cfg.max_iters = p.at("max_iters").get<int>();
  cfg.damping = num(p, "damping");
  if (p.at("initial_guess").get<std::string>() == "paraboloid") {
    cfg.initial_guess = InitialGuessKind::Paraboloid;
    cfg.paraboloid_a = num(p, "paraboloid_a");
  }
  if (p.at("boundary").get<std::string>() == "zero")
    return solve_graph(spec, rect, num(p, "h"), [](double, double) { return 0.0; }, cfg);

  double reach = 0.0;
  for (double x : {d[0], d[1]})
    for (double y : {d[2], d[3]}) reach = std::max(reach, std::hypot(x, y));
  ShootingConfig sc;
  sc.start = AxisRegular{num(p, "profile_z0")};
  sc.step = num(p, "profile_step");
  sc.s_max = sc.step * std::ceil((2.0 * reach + 1.0) / sc.step);
  ProfileCurve prof = std::get<ProfileCurve>(solve_rotational_profile(spec, sc).surface);
  while (prof.samples.back().x < reach) {
    sc.s_max *= 2.0;
    if (sc.s_max > 1e4) throw Error(ErrorKind::Precondition, "cli", "boundary profile does not reach the patch corners");
    prof = std::get<ProfileCurve>(solve_rotational_profile(spec, sc).surface);
  }
  return solve_graph(spec, rect, num(p, "h"), [&](double x, double y) { return profile_height(prof, std::hypot(x, y)); },
                     cfg);
}

inline SolveResult build_surface(const PotentialSpec& spec, const OJson& s, const std::string& kind) {
  if (kind == "rotational") return solve_rotational_profile(spec, shooting_config(s));
  if (kind == "translation") return solve_translation_profile(spec, shooting_config(s));
  return solve_graph_from(spec, s);
}

inline SolveResult build_surface(const PotentialSpec& spec, const OJson& s) {
  return build_surface(spec, s, s.at("kind").get<std::string>());
}

inline std::size_t default_center(const GeometryField& g) {
  if (g.is_graph()) return g.graph().index(g.graph().nx() / 2, g.graph().ny() / 2);
  if (g.rotational()) return 0;
  return g.size() / 2;
}

inline Report solve_report(const SolveResult& r, const GeometryField& g, const PotentialSpec& spec) {
  Report rep;
  rep.name = "solve";
  rep.values["converged"] = r.converged;
  rep.values["iterations"] = r.iterations;
  rep.values["residual"] = number(r.residual);
  rep.values["diagnostics"] = r.diagnostics;
  rep.values["samples"] = g.size();
  rep.values["phi_minimal_residual"] = number(phi_minimal_residual(g, spec).max_abs_residual);
  rep.passed = r.converged;
  return rep;
}

inline void surface_artifacts(const GeometryField& g, std::vector<Artifact>& out, const std::string& stem,
                              bool obj = true) {
  if (g.is_profile()) {
    out.push_back({stem + ".csv", profile_csv(g)});
  } else {
    out.push_back({stem + ".csv", graph_csv(g)});
    if (obj) out.push_back({stem + ".obj", graph_obj(g.graph())});
  }
}

inline double surface_gamma(const PotentialSpec& spec, const GeometryField& g) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double z : g.mu) {
    lo = std::min(lo, z);
    hi = std::max(hi, z);
  }
  if (!(hi > lo)) hi = lo + 1.0;
  return check_conditions(spec, lo, hi, 401).gamma;
}

}  // namespace detail

/// Runs one command. Artifacts are returned in memory; `write_outputs` stores them.
inline RunOutcome execute(const RunConfig& cfg) {
  using detail::OJson;
  const PotentialSpec& spec = cfg.potential;
  const OJson& p = cfg.params;
  RunOutcome out;
  auto& reports = out.reports;
  auto& arts = out.artifacts;
  auto surface_geometry = [&](SolveResult& solved) {
    solved = detail::build_surface(spec, p.at("surface"));
    return sample_geometry(solved.surface, spec);
  };

  switch (cfg.command) {
    case Command::PotentialCheck: {
      const auto c = check_conditions(spec, detail::num(p, "z_lo"), detail::num(p, "z_hi"), p.at("samples").get<int>());
      reports.push_back(make_report(c, spec));
      arts.push_back({"conditions.json", reports_json(reports)});
      break;
    }
    case Command::SolveRotational:
    case Command::SolveTranslation:
    case Command::SolveGraph: {
      const std::string kind = cfg.command == Command::SolveRotational    ? "rotational"
                               : cfg.command == Command::SolveTranslation ? "translation"
                                                                          : "graph";
      const SolveResult r = detail::build_surface(spec, p, kind);
      const GeometryField g = sample_geometry(r.surface, spec);
      reports.push_back(detail::solve_report(r, g, spec));
      detail::surface_artifacts(g, arts, g.is_profile() ? "profile" : "graph");
      arts.push_back({"solve.json", reports_json(reports)});
      break;
    }
    case Command::AuditFundamental: {
      SolveResult solved;
      const GeometryField g = surface_geometry(solved);
      const auto items = p.at("items").get<std::set<int>>();
      const double tol = p.at("tolerance").is_null() ? std::numeric_limits<double>::infinity() : detail::num(p, "tolerance");
      reports.push_back(make_report(phi_minimal_residual(g, spec), tol));
      for (const auto& r : fundamental_identity_residuals(g, spec, items)) reports.push_back(make_report(r, tol));
      if (g.is_profile())
        for (const auto& r : curvature_evolution_residuals(g, spec)) reports.push_back(make_report(r, tol));
      arts.push_back({"fundamental.json", reports_json(reports)});
      break;
    }
    case Command::AuditStability: {
      SolveResult solved;
      const GeometryField g = surface_geometry(solved);
      StabilityOptions opt;
      if (!p.at("ruling_length").is_null()) opt.ruling_length = detail::num(p, "ruling_length");
      const double tol = detail::num(p, "tolerance");
      const StabilityAssembly a = assemble_stability(g, spec, interior_region(g, p.at("margin").get<int>()), opt);
      const SpectrumResult sp = first_eigenvalue(a);
      bool nonpos = true, nonneg = true;
      for (std::size_t k : a.region) {
        nonpos = nonpos && g.H[k] <= tol;
        nonneg = nonneg && g.H[k] >= -tol;
      }
      // Rayleigh quotients of random trial functions against lambda_1.
      std::mt19937_64 rng(cfg.seed);
      std::uniform_real_distribution<double> unif(-1.0, 1.0);
      const int trials = p.at("trials").get<int>();
      double worst = std::numeric_limits<double>::infinity();
      for (int t = 0; t < trials; ++t) {
        std::vector<double> u(g.size(), 0.0);
        for (std::size_t k : a.region) u[k] = unif(rng);
        const Eigen::VectorXd v = a.restrict(u);
        worst = std::min(worst, quadratic_form(a, u, u) / v.dot(a.mass.cwiseProduct(v)));
      }
      Report r;
      r.name = "stability";
      r.hypotheses["mean_convex"] = nonpos || nonneg;
      r.values["lambda1"] = number(sp.lambda1);
      r.values["iterations"] = sp.iterations;
      r.values["eigen_residual"] = number(sp.residual);
      r.values["region_size"] = a.region.size();
      r.values["spectral_shift"] = number(a.spectral_shift);
      r.values["trials"] = trials;
      r.values["min_rayleigh_quotient"] = number(trials ? worst : fd::nan);
      r.tolerances["lambda1"] = tol;
      const bool rayleigh_ok = trials == 0 || worst >= sp.lambda1 - 1e-8 * std::max(1.0, std::abs(sp.lambda1));
      r.passed = rayleigh_ok && (!(nonpos || nonneg) || sp.lambda1 >= -tol);
      reports.push_back(r);
      arts.push_back({"stability.json", reports_json(reports)});
      std::vector<double> idx(g.size());
      for (std::size_t k = 0; k < g.size(); ++k) idx[k] = static_cast<double>(k);
      arts.push_back({"eigenfunction.csv", columns_csv({"sample", "u"}, {idx, sp.eigenfunction})});
      break;
    }
    case Command::AuditArea: {
      SolveResult solved;
      const GeometryField g = surface_geometry(solved);
      const std::size_t c = p.at("center").is_null() ? detail::default_center(g) : p.at("center").get<std::size_t>();
      const double gamma = p.at("gamma").is_null() ? detail::surface_gamma(spec, g) : detail::num(p, "gamma");
      reports.push_back(make_report(geodesic_disk_area_check(g, c, detail::num(p, "rho"), spec, gamma)));
      arts.push_back({"area.json", reports_json(reports)});
      break;
    }
    case Command::AuditMonotonicity: {
      SolveResult solved;
      const GeometryField g = surface_geometry(solved);
      Vec3 q = g.position[detail::default_center(g)];
      if (!p.at("center").is_null()) {
        const auto v = p.at("center").get<std::vector<double>>();
        if (v.size() != 3) throw Error(ErrorKind::Schema, "cli", "/command_params/center: expected [x, y, z]");
        q = Vec3(v[0], v[1], v[2]);
      }
      std::vector<double> radii;
      if (!p.at("radii").is_null()) radii = p.at("radii").get<std::vector<double>>();
      else {
        const int n = p.at("count").get<int>();
        const double lo = detail::num(p, "r_min"), hi = detail::num(p, "r_max");
        for (int i = 0; i < n; ++i) radii.push_back(n == 1 ? lo : lo + (hi - lo) * i / (n - 1));
      }
      DensityOptions opt;
      opt.depth = p.at("depth").get<int>();
      const DensityReport d = density_monotonicity(g, q, radii, spec, opt);
      reports.push_back(make_report(d));
      arts.push_back({"density.json", reports_json(reports)});
      arts.push_back({"density.csv", columns_csv({"r", "O", "tolerance"}, {d.radii, d.o_values, d.tolerances})});
      break;
    }
    case Command::AuditCurvatureRatio: {
      SolveResult solved;
      const GeometryField g = surface_geometry(solved);
      Report r;
      r.name = "curvature_ratio";
      r.values["sup_curvature_over_phi_prime"] = number(curvature_ratio_sup(g, spec));
      reports.push_back(r);
      std::vector<std::size_t> boundary;
      for (std::size_t k = 0; k < g.size(); ++k) {
        if (g.rotational() && k == 0 && g.profile().samples[0].x == 0.0) continue;
        if (!g.interior(k, 1)) boundary.push_back(k);
      }
      reports.push_back(make_report(ilmanen_estimate_report(g, spec, boundary)));
      arts.push_back({"curvature_ratio.json", reports_json(reports)});
      break;
    }
    case Command::AuditConvexity: {
      SolveResult solved;
      const GeometryField g = surface_geometry(solved);
      const double tol = p.at("tolerance").is_null() ? -1.0 : detail::num(p, "tolerance");
      reports.push_back(make_report(convexity_report(g, spec, tol)));
      if (p.at("omori").get<bool>()) reports.push_back(make_report(omori_gamma_check(g, spec, detail::num(p, "omori_threshold"))));
      std::vector<double> idx, ratio;
      for (std::size_t k = 0; k < g.size(); ++k) {
        idx.push_back(static_cast<double>(k));
        ratio.push_back(g.eta[k] > 0.0 ? g.k2[k] / g.eta[k] : fd::nan);
      }
      arts.push_back({"convexity.json", reports_json(reports)});
      arts.push_back({"convexity.csv", columns_csv({"sample", "K", "k2_over_eta"}, {idx, g.K, ratio})});
      break;
    }
    case Command::Blowup: {
      if (p.at("surface").at("kind") == "graph")
        throw Error(ErrorKind::UnsupportedCombination, "cli", "blow-up works on profiles");
      const SolveResult solved = detail::build_surface(spec, p.at("surface"));
      const ProfileCurve& prof = std::get<ProfileCurve>(solved.surface);
      const auto scales = p.at("scales").get<std::vector<double>>();
      std::vector<std::size_t> base;
      if (!p.at("indices").is_null()) base = p.at("indices").get<std::vector<std::size_t>>();
      else if (!p.at("heights").is_null()) {
        for (double z : p.at("heights").get<std::vector<double>>()) {
          std::size_t k = 0;
          while (k < prof.size() && prof.samples[k].z < z) ++k;
          if (k == prof.size()) throw Error(ErrorKind::WindowUnderflow, "cli", "profile does not reach a basepoint height");
          base.push_back(k);
        }
      } else throw Error(ErrorKind::Schema, "cli", "/command_params: heights or indices required");
      const std::string m = p.at("model").get<std::string>();
      const BlowupModel model = m == "Plane" ? BlowupModel::Plane : m == "Bowl" ? BlowupModel::Bowl : BlowupModel::GrimReaper;
      const BlowupResult b = blowup_rescale({prof}, base, scales, spec, model);
      reports.push_back(make_report(b));
      arts.push_back({"blowup.json", reports_json(reports)});
      break;
    }
    case Command::Export: {
      SolveResult solved;
      const GeometryField g = surface_geometry(solved);
      const auto formats = p.at("formats").get<std::vector<std::string>>();
      auto want = [&](const char* f) { return std::find(formats.begin(), formats.end(), f) != formats.end(); };
      if (want("csv")) arts.push_back({"surface.csv", g.is_profile() ? profile_csv(g) : graph_csv(g)});
      if (want("obj") && g.is_graph()) arts.push_back({"surface.obj", graph_obj(g.graph())});
      reports.push_back(detail::solve_report(solved, g, spec));
      if (want("json")) arts.push_back({"surface.json", reports_json(reports)});
      break;
    }
  }
  out.exit_code = 0;
  for (const auto& r : reports)
    if (!r.passed) out.exit_code = 1;
  return out;
}

/// Writes the artifacts and the manifest under the output directory; returns the manifest.
inline Json write_outputs(const RunConfig& cfg, RunOutcome& outcome, double wall_seconds) {
  const std::filesystem::path dir(cfg.output_dir);
  Json arts = Json::array();
  for (const auto& a : outcome.artifacts) {
    write_atomic(dir / a.path, a.content);
    Json j;
    j["path"] = a.path;
    j["sha256"] = sha256_hex(a.content);
    j["bytes"] = a.content.size();
    arts.push_back(j);
  }
  Json m;
  m["config"] = config_to_json(cfg);
  m["artifacts"] = arts;
  m["versions"] = {{"phimin", version},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)},
                   {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                         std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                         std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
  m["exit_code"] = outcome.exit_code;
  m["wall_time_seconds"] = wall_seconds;
  write_atomic(dir / "manifest.json", m.dump(2) + '\n');
  outcome.manifest = m;
  return m;
}

/// Executes the configuration and writes its outputs. Exit codes: 0 all gated assertions
/// pass, 1 an audit failed, 2 an error occurred (the message goes to `err`).
inline int run(const RunConfig& cfg, std::string* err = nullptr) {
  const auto t0 = std::chrono::steady_clock::now();
  try {
    RunOutcome o = execute(cfg);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_outputs(cfg, o, secs);
    return o.exit_code;
  } catch (const std::exception& e) {
    if (err) *err = e.what();
    return 2;
  }
}

}  // namespace phimin
