// Acceptance runner: one PASS/FAIL line per criterion.
// Usage: phimin_acceptance <path-to-phimin-cli> <work-dir> <configs-dir>

#include <boost/math/special_functions/bessel.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "phimin/estimates.hpp"
#include "phimin/identities.hpp"
#include "phimin/io.hpp"
#include "phimin/solvers.hpp"
#include "phimin/stability.hpp"

using namespace phimin;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool passed = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      passed = false;
      detail << " [failed: " << what << "]";
    }
  }
};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double order(double coarse, double fine) { return std::log2(coarse / fine); }

const ProfileCurve& curve(const SolveResult& r) { return std::get<ProfileCurve>(r.surface); }

ProfileCurve shoot_rotational(const PotentialSpec& spec, std::variant<AxisRegular, PointStart> start, double s_min,
                              double s_max, double step) {
  ShootingConfig c;
  c.start = start;
  c.s_min = s_min;
  c.s_max = s_max;
  c.step = step;
  return curve(solve_rotational_profile(spec, c));
}

ProfileCurve shoot_translation(const PotentialSpec& spec, double s_min, double s_max, double step) {
  ShootingConfig c;
  c.start = PointStart{0.0, 0.0, 0.0};
  c.s_min = s_min;
  c.s_max = s_max;
  c.step = step;
  return curve(solve_translation_profile(spec, c));
}

ProfileCurve bowl(const PotentialSpec& spec, double z0, double s_max, double step) {
  return shoot_rotational(spec, AxisRegular{z0}, 0.0, s_max, step);
}

ProfileCurve catenoid(double s_lo, double s_hi, double step) {
  return shoot_rotational(PotentialSpec::constant(0.0), PointStart{1.0, 0.0, M_PI / 2}, s_lo, s_hi, step);
}

ProfileCurve reaper(double s_lo, double s_hi, double step) {
  return shoot_translation(PotentialSpec::linear(1.0), s_lo, s_hi, step);
}

/// Height of a rotational profile at radius r by linear interpolation in x.
double height_at(const ProfileCurve& c, double r) {
  const auto it = std::lower_bound(c.samples.begin(), c.samples.end(), r,
                                   [](const ProfileSample& s, double v) { return s.x < v; });
  if (it == c.samples.begin()) return it->z;
  if (it == c.samples.end()) throw Error(ErrorKind::PatchExceeded, "acceptance", "radius beyond the profile");
  const auto& a = *(it - 1);
  const auto& b = *it;
  return a.z + (r - a.x) / (b.x - a.x) * (b.z - a.z);
}

GraphPatch bowl_graph(double h, const ProfileCurve& prof, const Rect& domain = {-1, 1, -1, 1}) {
  NewtonConfig cfg;
  cfg.initial_guess = InitialGuessKind::Paraboloid;
  cfg.paraboloid_a = 0.25;
  const auto r = solve_graph(PotentialSpec::linear(1.0), domain, h,
                             [&](double x, double y) { return height_at(prof, std::hypot(x, y)); }, cfg);
  if (!r.converged) throw Error(ErrorKind::NonConvergence, "acceptance", "graph Newton did not converge");
  return std::get<GraphPatch>(r.surface);
}

std::size_t graph_centre(const GraphPatch& p) { return p.index(p.nx() / 2, p.ny() / 2); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------------------

void closed_form_solvers(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  auto rel = [](double got, double want) { return std::abs(got - want) / std::max(1.0, std::abs(want)); };

  auto catenoid_error = [&](double step) {
    double worst = 0.0;
    for (const auto& p : catenoid(-1.2, 1.2, step).samples) {
      if (std::abs(p.z) > 1.0) continue;
      worst = std::max({worst, rel(p.x, std::cosh(p.z)), rel(p.x, std::sqrt(1 + p.s * p.s)), rel(p.z, std::asinh(p.s))});
    }
    return worst;
  };
  auto reaper_error = [&](double step) {
    double worst = 0.0;
    for (const auto& p : reaper(-2.5, 2.5, step).samples) {
      if (std::abs(p.x) > 1.4) continue;
      worst = std::max({worst, rel(p.z, -std::log(std::cos(p.x))), rel(p.x, std::atan(std::sinh(p.s))),
                        rel(p.z, std::log(std::cosh(p.s)))});
    }
    return worst;
  };

  const double cat = catenoid_error(1e-4), rea = reaper_error(1e-4);
  o.require(cat <= 1e-6, "catenoid error");
  o.require(rea <= 1e-6, "grim reaper error");
  const double cat_ratio = catenoid_error(0.02) / catenoid_error(0.01);
  const double rea_ratio = reaper_error(0.02) / reaper_error(0.01);
  o.require(std::abs(cat_ratio - 16) <= 3, "catenoid ratio");
  o.require(std::abs(rea_ratio - 16) <= 3, "grim reaper ratio");
  const double t = seconds_since(t0);
  o.require(t < 5.0, "runtime");
  o.detail << "catenoid err " << sci(cat) << " ratio " << sci(cat_ratio) << "; grim reaper err " << sci(rea)
           << " ratio " << sci(rea_ratio) << "; " << sci(t) << " s";
}

void cross_solver(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const ProfileCurve prof = bowl(PotentialSpec::linear(1.0), 0.0, 2.0, 1e-4);
  std::vector<double> err;
  for (double h : {1.0 / 64, 1.0 / 128}) {
    const GraphPatch p = bowl_graph(h, prof);
    double e = 0.0;
    for (int i = 1; i + 1 < p.nx(); ++i)
      for (int j = 1; j + 1 < p.ny(); ++j)
        e = std::max(e, std::abs(p.u(i, j) - height_at(prof, std::hypot(p.x(i), p.y(j)))));
    err.push_back(e);
  }
  const double ratio = err[0] / err[1];
  o.require(std::abs(ratio - 4) <= 0.8, "error ratio");
  const double t = seconds_since(t0);
  o.require(t < 60.0, "runtime");
  o.detail << "max error h=1/64 " << sci(err[0]) << ", h=1/128 " << sci(err[1]) << ", ratio " << sci(ratio) << "; "
           << sci(t) << " s";
}

void identity_suite(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::set<int> items{1, 2, 3, 4, 5, 6, 7, 8};
  struct Case {
    std::string name;
    PotentialSpec spec;
    std::function<ProfileCurve(double)> make;
  };
  const auto one = PotentialSpec::linear(1.0);
  const auto quad = PotentialSpec::quadratic(1.0, 1.0);
  const std::vector<Case> cases{
      {"catenoid", PotentialSpec::constant(0.0), [](double h) { return catenoid(-1.2, 1.2, h); }},
      {"grim reaper", one, [](double h) { return reaper(-1.5, 1.5, h); }},
      {"bowl", one, [&](double h) { return bowl(one, 0.0, 2.0, h); }},
      {"quadratic bowl", quad, [&](double h) { return bowl(quad, 0.5, 2.0, h); }},
  };
  double worst_order = INFINITY, worst_item2 = 0.0;
  int measured = 0, exact = 0;
  std::string worst_where;
  for (const auto& c : cases) {
    const auto gc = sample_geometry(c.make(0.02), c.spec);
    const auto gf = sample_geometry(c.make(0.01), c.spec);
    const auto rc = fundamental_identity_residuals(gc, c.spec, items);
    const auto rf = fundamental_identity_residuals(gf, c.spec, items);
    o.require(rc.size() == items.size() && rf.size() == items.size(), c.name + " missing items");
    for (std::size_t i = 0; i < rc.size(); ++i) {
      o.require(rf[i].sample_count > 0, c.name + " " + rf[i].identity_name + " has no samples");
      // Skip residuals at rounding level.
      if (rf[i].max_abs_residual <= 1e-11) {
        ++exact;
        continue;
      }
      ++measured;
      const double p = order(rc[i].max_abs_residual, rf[i].max_abs_residual);
      if (p < worst_order) {
        worst_order = p;
        worst_where = c.name + " " + rf[i].identity_name;
      }
      o.require(p >= 1.8, c.name + " " + rf[i].identity_name + " order " + sci(p));
    }
    for (const auto* g : {&gc, &gf}) {
      const double r2 = item2_substituted_residual(*g, c.spec).max_abs_residual;
      worst_item2 = std::max(worst_item2, r2);
      o.require(r2 <= 1e-10, c.name + " item 2 " + sci(r2));
    }
  }
  const double t = seconds_since(t0);
  o.require(t < 60.0, "runtime");
  o.detail << measured << " residuals converge, " << exact << " at rounding level; min order " << sci(worst_order)
           << " (" << worst_where << "); item 2 max " << sci(worst_item2) << "; "
           << sci(t) << " s";
}

void stability(Outcome& o) {
  const auto one = PotentialSpec::linear(1.0);
  const auto quad = PotentialSpec::quadratic(1.0, 1.0);
  struct Case {
    std::string name;
    PotentialSpec spec;
    std::function<double(int)> lambda;  // level 0, 1, 2 = h, h/2, h/4
  };
  auto profile_lambda = [](const PotentialSpec& spec, std::function<ProfileCurve(double)> make, double h0, double lo,
                           double hi) {
    return [=](int level) {
      const auto g = sample_geometry(make(h0 / (1 << level)), spec);
      return first_eigenvalue(g, spec, arc_region(g, lo, hi)).lambda1;
    };
  };
  const ProfileCurve fine_bowl = bowl(one, 0.0, 2.0, 1e-4);
  const std::vector<Case> cases{
      {"bowl", one, profile_lambda(one, [&](double h) { return bowl(one, 0.0, 2.0, h); }, 0.04, 0.0, 1.6)},
      {"quadratic bowl", quad, profile_lambda(quad, [&](double h) { return bowl(quad, 0.5, 2.0, h); }, 0.04, 0.0, 1.6)},
      {"grim reaper", one, profile_lambda(one, [](double h) { return reaper(-1.6, 1.6, h); }, 0.04, -1.4, 1.4)},
      {"bowl graph", one,
       [&](int level) {
         const auto g = sample_geometry(bowl_graph(1.0 / (16 << level), fine_bowl), one);
         return first_eigenvalue(g, one, interior_region(g, 1)).lambda1;
       }},
  };
  for (const auto& c : cases) {
    const double l0 = c.lambda(0), l1 = c.lambda(1), l2 = c.lambda(2);
    const double e0 = std::abs(l0 - l1), e1 = std::abs(l1 - l2);
    o.require(l0 >= -e0 && l1 >= -e1, c.name + " lambda1");
    o.require(e1 <= 0.35 * e0, c.name + " eps ratio " + sci(e1 / e0));
    o.detail << c.name << " lambda1 " << sci(l2) << " eps ratio " << sci(e1 / e0) << "; ";
  }

  // Jacobi residuals with C = 1.
  std::vector<double> kill, eta, hs{0.02, 0.01};
  for (double h : hs) {
    const auto gr = sample_geometry(reaper(-1.5, 1.5, h), one);
    kill.push_back(jacobi_residual(gr, one, JacobiCertificate::killing(Vec3(1, 0, 0)), arc_region(gr, -1.4, -0.05))
                       .max_abs_residual);
    const auto gb = sample_geometry(bowl(one, 0.0, 2.0, h), one);
    eta.push_back(jacobi_residual(gb, one, JacobiCertificate::eta()).max_abs_residual);
  }
  for (int i = 0; i < 2; ++i) {
    o.require(kill[i] <= hs[i] * hs[i], "Killing residual above h^2");
    o.require(eta[i] <= hs[i] * hs[i], "eta residual above h^2");
  }
  o.require(order(kill[0], kill[1]) >= 1.8, "Killing order");
  o.require(order(eta[0], eta[1]) >= 1.8, "eta order");
  o.detail << "Killing order " << sci(order(kill[0], kill[1])) << ", eta order " << sci(order(eta[0], eta[1])) << "; ";

  const double j01 = boost::math::cyl_bessel_j_zero(0.0, 1);
  const auto zero = PotentialSpec::constant(0.0);
  const auto disk = sample_geometry(GraphPatch::zeros({-1.0625, 1.0625, -1.0625, 1.0625}, 1.0 / 128), zero);
  const double l = first_eigenvalue(disk, zero, disk_region(disk, 0.0, 0.0, 1.0)).lambda1;
  o.require(std::abs(l - 5.7832) <= 0.01 * 5.7832, "disk eigenvalue");
  o.detail << "disk lambda1 " << l << " vs j01^2 " << j01 * j01;
}

void area_bound(Outcome& o) {
  struct Case {
    std::string name;
    PotentialSpec spec;
    GeometryField g;
    std::vector<std::size_t> centres;
  };
  const auto one = PotentialSpec::linear(1.0);
  const auto quad = PotentialSpec::quadratic(1.0, 1.0);
  std::vector<Case> cases;
  {
    const auto g = sample_geometry(bowl_graph(1.0 / 32, bowl(one, 0.0, 2.0, 1e-4)), one);
    const auto& p = g.graph();
    cases.push_back({"bowl graph", one, g,
                     {graph_centre(p), p.index(p.nx() / 2 + 8, p.ny() / 2), p.index(p.nx() / 2 - 6, p.ny() / 2 + 6)}});
  }
  cases.push_back({"bowl", one, sample_geometry(bowl(one, 0.0, 2.0, 1e-3), one), {0}});
  cases.push_back({"quadratic bowl", quad, sample_geometry(bowl(quad, 0.5, 2.0, 1e-3), quad), {0}});
  {
    const auto g = sample_geometry(reaper(-2.0, 2.0, 1e-3), one);
    cases.push_back({"grim reaper", one, g, {g.size() / 2, g.size() / 2 + 500, g.size() / 2 - 1000}});
  }
  int checked = 0, skipped = 0;
  double worst = 0.0;
  for (const auto& c : cases) {
    const double gamma = check_conditions(c.spec, -1.0, 50.0, 2001).gamma;
    for (std::size_t p : c.centres)
      for (double rho : {0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.34}) {
        const auto r = geodesic_disk_area_check(c.g, p, rho, c.spec, gamma);
        if (!r.hypothesis_ok) {
          ++skipped;
          continue;
        }
        ++checked;
        worst = std::max(worst, r.disk_area / r.bound);
        o.require(r.disk_area < r.bound, c.name + " rho " + sci(rho));
      }
  }
  o.require(checked > 0, "no case satisfies the hypotheses");

  const auto zero = PotentialSpec::constant(0.0);
  double lo = INFINITY, hi = 0.0;
  for (auto [rho, h] : {std::pair{0.3, 0.01}, std::pair{0.6, 0.02}}) {
    const auto g = sample_geometry(GraphPatch::zeros({-1, 1, -1, 1}, h), zero);
    const auto r = geodesic_disk_area_check(g, graph_centre(g.graph()), rho, zero, 0.0);
    const double ratio = r.disk_area / (M_PI * rho * rho);
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
  }
  o.require(lo >= 0.95 && hi <= 1.05, "flat ratio");
  o.detail << checked << " disks checked (" << skipped << " outside the hypotheses), max A/(4 pi rho^2) " << sci(worst)
           << "; flat A/(pi rho^2) in [" << lo << ", " << hi << "]";
}

void monotonicity(Outcome& o) {
  const auto one = PotentialSpec::linear(1.0);
  std::vector<double> radii;
  for (int i = 0; i < 20; ++i) radii.push_back(0.05 + 0.85 * i / 19.0);

  const auto plane = sample_geometry(GraphPatch::zeros({-1, 1, -1, 1}, 0.05), PotentialSpec::constant(0.0));
  const auto pr = density_monotonicity(plane, Vec3::Zero(), radii, one);
  double dev = 0.0;
  for (std::size_t i = 0; i < radii.size(); ++i) {
    dev = std::max(dev, std::abs(pr.o_values[i] - radii[i] / 4) - pr.tolerances[i]);
    o.require(std::abs(pr.o_values[i] - radii[i] / 4) <= pr.tolerances[i], "plane r/4 at r=" + sci(radii[i]));
  }
  o.detail << "plane max excess over tolerance " << sci(dev) << "; ";

  struct Case {
    std::string name;
    GeometryField g;
    Vec3 q;
  };
  const std::vector<Case> cases{
      {"catenoid", sample_geometry(catenoid(-3, 3, 0.01), PotentialSpec::constant(0.0)), Vec3(1, 0, 0)},
      {"bowl", sample_geometry(bowl(one, 0.0, 2.0, 0.005), one), Vec3::Zero()},
      {"bowl graph", sample_geometry(bowl_graph(1.0 / 32, bowl(one, 0.0, 2.0, 1e-4)), one), Vec3::Zero()},
  };
  for (const auto& c : cases) {
    const auto r = density_monotonicity(c.g, c.q, radii, one);
    o.require(r.monotone, c.name + " monotone");
    o.detail << c.name << (r.monotone ? " monotone" : " decreasing") << " over " << radii.size() << " radii; ";
  }
}

void curvature_ratio(Outcome& o) {
  const auto one = PotentialSpec::linear(1.0);
  const auto quad = PotentialSpec::quadratic(1.0, 1.0);
  auto sup = [](const PotentialSpec& s, const ProfileCurve& c) { return curvature_ratio_sup(sample_geometry(c, s), s); };
  struct Case {
    std::string name;
    PotentialSpec spec;
    double z0, window, step;
  };
  for (const Case& c : {Case{"bowl", one, 0.0, 2.0, 0.01}, Case{"quadratic bowl", quad, 0.5, 1.5, 0.01}}) {
    const double base = sup(c.spec, bowl(c.spec, c.z0, c.window, c.step));
    const double wide = sup(c.spec, bowl(c.spec, c.z0, 2 * c.window, c.step));
    const double fine = sup(c.spec, bowl(c.spec, c.z0, c.window, c.step / 2));
    const double drift = std::max(std::abs(wide - base), std::abs(fine - base)) / base;
    o.require(drift <= 0.05, c.name + " drift");
    o.detail << c.name << " sup " << sci(base) << " drift " << sci(drift) << "; ";
  }
  const double r = sup(one, reaper(-2.0, 2.0, 1e-3));
  o.require(std::abs(r - 1.0) <= 2e-3, "grim reaper sup");
  o.detail << "grim reaper sup " << r;
}

void convexity(Outcome& o) {
  const auto one = PotentialSpec::linear(1.0);
  const auto quad = PotentialSpec::quadratic(1.0, 1.0);
  const auto zero = PotentialSpec::constant(0.0);
  struct Case {
    std::string name;
    PotentialSpec spec;
    std::function<ProfileCurve(double)> make;
    bool convex;
  };
  const std::vector<Case> cases{
      {"bowl", one, [&](double h) { return bowl(one, 0.0, 2.0, h); }, true},
      {"quadratic bowl", quad, [&](double h) { return bowl(quad, 0.5, 2.0, h); }, true},
      {"grim reaper", one, [](double h) { return reaper(-2.0, 2.0, h); }, true},
      {"catenoid", zero, [](double h) { return catenoid(-1.2, 1.2, h); }, false},
  };
  for (const auto& c : cases) {
    std::vector<ConvexityVerdict> verdicts;
    for (double h : {0.01, 0.005}) {
      const auto g = sample_geometry(c.make(h), c.spec);
      const auto r = convexity_report(g, c.spec);
      verdicts.push_back(r.verdict);
      if (c.convex) {
        o.require(r.c1 && r.cc3 && r.d3_nonpositive && r.mean_curvature_nonpositive, c.name + " hypotheses");
        o.require(r.verdict == ConvexityVerdict::ConvexWithinTol && r.min_K >= -r.tol, c.name + " min K");
      } else {
        o.require(r.verdict == ConvexityVerdict::HypothesesFail && r.min_K < 0.0, c.name + " verdict");
      }
      if (h == 0.005) o.detail << c.name << " " << to_string(r.verdict) << " min K " << sci(r.min_K) << "; ";
    }
    o.require(verdicts[0] == verdicts[1], c.name + " verdict changes under refinement");
  }
}

void blowup(Outcome& o) {
  const auto one = PotentialSpec::linear(1.0);
  const ProfileCurve prof = bowl(one, 0.0, 24.0, 0.002);
  const std::vector<double> scales{4, 8, 16};
  std::vector<std::size_t> base;
  for (double n : scales) {
    std::size_t k = 0;
    while (prof.samples[k].z < n) ++k;
    base.push_back(k);
  }
  const auto r = blowup_rescale({prof}, base, scales, one, BlowupModel::Plane);
  double cov = 0.0;
  for (std::size_t i = 0; i < r.stages.size(); ++i) {
    cov = std::max(cov, r.stages[i].curvature_scaling_error);
    if (i > 0) o.require(r.stages[i].c2 < r.stages[i - 1].c2, "c2 not decreasing");
    o.detail << "n=" << scales[i] << " c2 " << sci(r.stages[i].c2) << "; ";
  }
  o.require(r.c2_distance <= 0.05, "final c2");
  o.require(cov <= 1e-12, "covariance");
  o.detail << "covariance error " << sci(cov);
}

// ---------------------------------------------------------------------------------------
// CLI determinism and formats

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  return out;
}

bool is_number(const std::string& s) {
  if (s == "nan" || s == "inf" || s == "-inf") return true;
  char* end = nullptr;
  std::strtod(s.c_str(), &end);
  return !s.empty() && end == s.c_str() + s.size();
}

/// Checks a CSV against a header; returns the data rows or an empty vector on mismatch.
bool csv_matches(const std::string& text, const std::string& header, std::vector<std::vector<std::string>>& rows) {
  if (text.empty() || text.back() != '\n') return false;
  const auto lines = split(text, '\n');
  if (lines.empty() || lines[0] != header) return false;
  const std::size_t cols = split(header, ',').size();
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto f = split(lines[i], ',');
    if (f.size() != cols) return false;
    for (const auto& v : f)
      if (!is_number(v)) return false;
    rows.push_back(std::move(f));
  }
  return !rows.empty();
}

std::string check_formats(const fs::path& dir) {
  std::vector<std::vector<std::string>> graph_rows;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    const std::string text = read_file(e.path());
    if (name == "profile.csv" || name == "graph.csv" || name == "surface.csv") {
      std::vector<std::vector<std::string>> rows;
      const bool profile = text.rfind(profile_csv_header, 0) == 0;
      if (!csv_matches(text, profile ? profile_csv_header : graph_csv_header, rows)) return name + " schema";
      if (!profile) {
        int nx = 0, ny = 0;
        for (std::size_t r = 0; r < rows.size(); ++r) {
          nx = std::max(nx, std::stoi(rows[r][0]) + 1);
          ny = std::max(ny, std::stoi(rows[r][1]) + 1);
        }
        if (static_cast<std::size_t>(nx * ny) != rows.size()) return name + " node count";
        for (std::size_t r = 0; r < rows.size(); ++r)
          if (std::stoi(rows[r][0]) != static_cast<int>(r) / ny || std::stoi(rows[r][1]) != static_cast<int>(r) % ny)
            return name + " row order";
        graph_rows = rows;
      }
    } else if (name.size() > 5 && name.substr(name.size() - 5) == ".json" && name != "manifest.json") {
      const auto j = nlohmann::ordered_json::parse(text);
      if (!j.is_array()) return name + " is not an array";
      for (const auto& r : j) {
        std::vector<std::string> keys;
        for (const auto& [k, v] : r.items()) keys.push_back(k);
        if (keys != std::vector<std::string>{"name", "hypotheses", "values", "tolerances", "passed"})
          return name + " report keys";
        if (!r["passed"].is_boolean()) return name + " passed flag";
      }
    }
  }
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() != ".obj") continue;
    if (graph_rows.empty()) return "OBJ without a graph CSV";
    int nx = std::stoi(graph_rows.back()[0]) + 1, ny = std::stoi(graph_rows.back()[1]) + 1;
    const auto lines = split(read_file(e.path()), '\n');
    std::size_t v = 0, f = 0;
    for (const auto& l : lines) {
      const auto t = split(l, ' ');
      if (t.size() != 4) return "OBJ line arity";
      if (t[0] == "v") {
        if (f > 0) return "OBJ vertex after faces";
        for (int k = 1; k < 4; ++k)
          if (!is_number(t[k])) return "OBJ vertex";
        // Vertex coordinates equal the CSV x, y, u columns.
        const auto& row = graph_rows[v];
        if (t[1] != row[2] || t[2] != row[3] || t[3] != row[4]) return "OBJ vertex differs from CSV";
        ++v;
      } else if (t[0] == "f") {
        for (int k = 1; k < 4; ++k) {
          const long id = std::stol(t[k]);
          if (id < 1 || id > static_cast<long>(v)) return "OBJ face index";
        }
        ++f;
      } else {
        return "OBJ record type";
      }
    }
    if (v != static_cast<std::size_t>(nx * ny) || f != static_cast<std::size_t>(2 * (nx - 1) * (ny - 1)))
      return "OBJ counts";
  }
  return "";
}

void determinism(Outcome& o, const std::string& cli, const fs::path& work, const fs::path& configs) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(configs))
    if (e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  o.require(!files.empty(), "no configs");
  std::size_t artifacts = 0;
  for (const auto& f : files) {
    const auto cfg = nlohmann::json::parse(read_file(f));
    const std::string command = cfg.at("command");
    std::vector<std::map<std::string, std::string>> runs;
    std::vector<int> codes;
    int run_id = 0;
    for (const char* threads : {"1", "1", "4", "4"}) {
      const fs::path out = work / f.stem() / ("run" + std::to_string(run_id++));
      fs::remove_all(out);
      const std::string cmd = "PHIMIN_THREADS=" + std::string(threads) + " '" + cli + "' " + command + " --config '" +
                              f.string() + "' --out '" + out.string() + "' > /dev/null";
      const int status = std::system(cmd.c_str());
      codes.push_back(WIFEXITED(status) ? WEXITSTATUS(status) : -1);
      std::map<std::string, std::string> contents;
      if (fs::exists(out))
        for (const auto& e : fs::directory_iterator(out)) {
          std::string text = read_file(e.path());
          if (e.path().filename() == "manifest.json") {
            auto m = nlohmann::ordered_json::parse(text);
            m.erase("wall_time_seconds");
            m["config"].erase("output_dir");
            text = m.dump();
          }
          contents[e.path().filename().string()] = text;
        }
      runs.push_back(contents);
      if (run_id == 1) {
        const std::string err = check_formats(out);
        o.require(err.empty(), f.filename().string() + ": " + err);
      }
    }
    o.require(codes[0] == 0, f.filename().string() + " exit code " + std::to_string(codes[0]));
    for (std::size_t i = 1; i < runs.size(); ++i) {
      o.require(codes[i] == codes[0], f.filename().string() + " exit codes differ");
      o.require(runs[i] == runs[0], f.filename().string() + " artifacts differ between runs");
    }
    artifacts += runs[0].size();
  }
  o.detail << files.size() << " configs, " << artifacts << " files per run, 4 runs each (PHIMIN_THREADS 1, 1, 4, 4)";
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 4) {
    std::fprintf(stderr, "usage: %s <phimin-cli> <work-dir> <configs-dir>\n", argv[0]);
    return 2;
  }
  const std::string cli = argv[1];
  const fs::path work = argv[2], configs = argv[3];
  fs::create_directories(work);

  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
      {"closed-form solver oracles", closed_form_solvers},
      {"graph and profile solvers agree", cross_solver},
      {"fundamental identity suite", identity_suite},
      {"stability", stability},
      {"intrinsic area bound", area_bound},
      {"density monotonicity", monotonicity},
      {"curvature ratio audit", curvature_ratio},
      {"convexity audit", convexity},
      {"blow-up", blowup},
      {"determinism and formats", [&](Outcome& o) { determinism(o, cli, work, configs); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.passed = false;
      o.detail << " [error: " << e.what() << "]";
    }
    if (!o.passed) ++failed;
    std::printf("%s %2zu %s: %s\n", o.passed ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.str().c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
