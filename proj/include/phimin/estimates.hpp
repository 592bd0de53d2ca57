#pragma once

// Quantitative audits: intrinsic area bound, extrinsic density monotonicity, curvature
// ratio, Ilmanen-space estimates, convexity, blow-up rescaling and the Omori-Yau test function.

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "phimin/geometry.hpp"
#include "phimin/ilmanen.hpp"
#include "phimin/solvers.hpp"

namespace phimin {

namespace detail {

inline constexpr double inf = std::numeric_limits<double>::infinity();

/// Fraction of a triangle where the linear interpolant of (f0, f1, f2) is negative.
inline double clip_fraction(double f0, double f1, double f2) {
  std::array<double, 3> f{f0, f1, f2};
  const int neg = (f0 < 0) + (f1 < 0) + (f2 < 0);
  if (neg == 0) return 0.0;
  if (neg == 3) return 1.0;
  if (neg == 1) {
    const int i = f0 < 0 ? 0 : (f1 < 0 ? 1 : 2);
    const double a = f[i], b = f[(i + 1) % 3], c = f[(i + 2) % 3];
    return a * a / ((a - b) * (a - c));
  }
  const int i = f0 >= 0 ? 0 : (f1 >= 0 ? 1 : 2);
  const double a = f[i], b = f[(i + 1) % 3], c = f[(i + 2) % 3];
  return 1.0 - a * a / ((a - b) * (a - c));
}

/// Length of the zero set of the linear interpolant of f over the triangle v.
inline double clip_length(const std::array<Vec3, 3>& v, const std::array<double, 3>& f) {
  std::vector<Vec3> cut;
  for (int q = 0; q < 3; ++q) {
    const int r = (q + 1) % 3;
    if ((f[q] < 0) != (f[r] < 0)) {
      const double t = f[q] / (f[q] - f[r]);
      cut.push_back(v[q] + t * (v[r] - v[q]));
    }
  }
  return cut.size() == 2 ? (cut[0] - cut[1]).norm() : 0.0;
}

inline double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) { return 0.5 * (b - a).cross(c - a).norm(); }

/// Dijkstra with deterministic tie-breaking by node index.
template <class Neighbours>
std::vector<double> dijkstra(std::size_t n, const std::vector<std::size_t>& sources, double cutoff,
                             Neighbours&& neighbours) {
  std::vector<double> dist(n, inf);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
  for (std::size_t s : sources) {
    dist[s] = 0.0;
    pq.push({0.0, s});
  }
  while (!pq.empty()) {
    const auto [d, k] = pq.top();
    pq.pop();
    if (d > dist[k] || d > cutoff) continue;
    neighbours(k, [&](std::size_t j, double w) {
      const double nd = d + w;
      if (nd < dist[j]) {
        dist[j] = nd;
        pq.push({nd, j});
      }
    });
  }
  return dist;
}

/// Sample graph of a patch: grid corners plus edge midpoints, every pair of the eight points
/// of a cell joined by a chord of the lifted surface. Corner ids coincide with sample ids.
struct CellGraph {
  const GraphPatch& p;
  int nx, ny;
  std::size_t n_corner, n_hmid, n_vmid;

  explicit CellGraph(const GraphPatch& patch)
      : p(patch), nx(patch.nx()), ny(patch.ny()),
        n_corner(static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny)),
        n_hmid(static_cast<std::size_t>(nx - 1) * static_cast<std::size_t>(ny)),
        n_vmid(static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny - 1)) {}

  std::size_t size() const { return n_corner + n_hmid + n_vmid; }
  std::size_t corner(int i, int j) const { return static_cast<std::size_t>(p.index(i, j)); }
  std::size_t hmid(int i, int j) const { return n_corner + static_cast<std::size_t>(i) * ny + j; }
  std::size_t vmid(int i, int j) const { return n_corner + n_hmid + static_cast<std::size_t>(i) * (ny - 1) + j; }

  Vec3 position(std::size_t id) const {
    if (id < n_corner) {
      const int i = static_cast<int>(id / ny), j = static_cast<int>(id % ny);
      return {p.x(i), p.y(j), p.u(i, j)};
    }
    if (id < n_corner + n_hmid) {
      const std::size_t r = id - n_corner;
      const int i = static_cast<int>(r / ny), j = static_cast<int>(r % ny);
      return {0.5 * (p.x(i) + p.x(i + 1)), p.y(j), 0.5 * (p.u(i, j) + p.u(i + 1, j))};
    }
    const std::size_t r = id - n_corner - n_hmid;
    const int i = static_cast<int>(r / (ny - 1)), j = static_cast<int>(r % (ny - 1));
    return {p.x(i), 0.5 * (p.y(j) + p.y(j + 1)), 0.5 * (p.u(i, j) + p.u(i, j + 1))};
  }

  std::array<std::size_t, 8> cell(int i, int j) const {
    return {corner(i, j), corner(i + 1, j), corner(i, j + 1), corner(i + 1, j + 1),
            hmid(i, j),   hmid(i, j + 1),   vmid(i, j),       vmid(i + 1, j)};
  }

  template <class Fn>
  void for_cells(std::size_t id, Fn&& fn) const {
    auto visit = [&](int i, int j) {
      if (i >= 0 && j >= 0 && i < nx - 1 && j < ny - 1) fn(i, j);
    };
    if (id < n_corner) {
      const int i = static_cast<int>(id / ny), j = static_cast<int>(id % ny);
      visit(i - 1, j - 1);
      visit(i, j - 1);
      visit(i - 1, j);
      visit(i, j);
    } else if (id < n_corner + n_hmid) {
      const std::size_t r = id - n_corner;
      const int i = static_cast<int>(r / ny), j = static_cast<int>(r % ny);
      visit(i, j - 1);
      visit(i, j);
    } else {
      const std::size_t r = id - n_corner - n_hmid;
      const int i = static_cast<int>(r / (ny - 1)), j = static_cast<int>(r % (ny - 1));
      visit(i - 1, j);
      visit(i, j);
    }
  }

  /// Shortest chord paths from the sources; `density` weights each chord at its midpoint.
  std::vector<double> distances(const std::vector<std::size_t>& sources, double cutoff,
                                const std::function<double(const Vec3&)>& density = {}) const {
    return dijkstra(size(), sources, cutoff, [&](std::size_t k, auto&& relax) {
      const Vec3 a = position(k);
      for_cells(k, [&](int i, int j) {
        for (std::size_t m : cell(i, j)) {
          if (m == k) continue;
          const Vec3 b = position(m);
          const double w = density ? density(0.5 * (a + b)) : 1.0;
          relax(m, w * (b - a).norm());
        }
      });
    });
  }

  bool on_boundary(std::size_t id) const {
    const int i = static_cast<int>(id / ny), j = static_cast<int>(id % ny);
    return i == 0 || j == 0 || i == nx - 1 || j == ny - 1;
  }

  /// The two triangles of cell (i, j), matching the OBJ export.
  std::array<std::array<std::size_t, 3>, 2> triangles(int i, int j) const {
    return {{{corner(i, j), corner(i + 1, j), corner(i + 1, j + 1)},
             {corner(i, j), corner(i + 1, j + 1), corner(i, j + 1)}}};
  }
};

}  // namespace detail

// ---------------------------------------------------------------------------------------
// Intrinsic area bound

struct AreaReport {
  std::size_t center = 0;
  double rho = 0.0;
  double gamma = 0.0;
  /// 2 rho phi'(rho + mu(p)) < log 2 and sqrt|Gamma| rho < 1.
  bool hypothesis_ok = false;
  /// Alternative hypotheses, recorded only: rho phi' < sqrt(2) pi and rho phi' < log(2)/2.
  bool conjugate_hypothesis = false;
  bool half_log2_hypothesis = false;
  double hypothesis_value = 0.0;  // 2 rho phi'(rho + mu(p))
  double disk_area = 0.0;
  double bound = 0.0;
  bool inequality_holds = false;
  bool passed = false;
};

/// Area of the intrinsic disk D_rho(p) against 4 pi rho^2.
/// Graphs: Dijkstra on corners and edge midpoints, area by clipping the linear interpolant of
/// the distance on each triangle. Rotational profiles: centre on the axis, area int 2 pi x ds.
/// Translation-invariant profiles: the intrinsic metric is flat, so the disk is Euclidean.
inline AreaReport geodesic_disk_area_check(const GeometryField& g, std::size_t p, double rho,
                                           const PotentialSpec& spec, double gamma) {
  if (!(rho > 0.0)) throw Error(ErrorKind::Precondition, "estimates", "rho must be positive");
  if (p >= g.size()) throw Error(ErrorKind::Precondition, "estimates", "centre index out of range");
  AreaReport r;
  r.center = p;
  r.rho = rho;
  r.gamma = gamma;
  r.bound = 4.0 * M_PI * rho * rho;
  const double d1 = eval_potential(spec, rho + g.mu[p]).d1;
  r.hypothesis_value = 2.0 * rho * d1;
  r.hypothesis_ok = r.hypothesis_value < std::log(2.0) && std::sqrt(std::abs(gamma)) * rho < 1.0;
  r.conjugate_hypothesis = rho * d1 < std::sqrt(2.0) * M_PI;
  r.half_log2_hypothesis = rho * d1 < 0.5 * std::log(2.0);

  if (g.is_profile()) {
    const ProfileCurve& c = g.profile();
    const double s0 = c.samples[p].s;
    if (c.kind == ProfileKind::TranslationInvariant) {
      if (s0 - rho < c.samples.front().s || s0 + rho > c.samples.back().s)
        throw Error(ErrorKind::PatchExceeded, "estimates", "geodesic disk leaves the sampled profile");
      r.disk_area = M_PI * rho * rho;
    } else {
      if (c.samples[p].x != 0.0)
        throw Error(ErrorKind::Precondition, "estimates", "rotational disks must be centred on the axis");
      const bool forward = p == 0 || c.samples[p + 1 < c.size() ? p + 1 : p].x > 0.0;
      double area = 0.0;
      for (std::size_t k = p;; ) {
        const std::size_t next = forward ? k + 1 : k - 1;
        if ((forward && next >= c.size()) || (!forward && k == 0))
          throw Error(ErrorKind::PatchExceeded, "estimates", "geodesic disk leaves the sampled profile");
        const double da = std::abs(c.samples[k].s - s0), db = std::abs(c.samples[next].s - s0);
        const double xa = c.samples[k].x, xb = c.samples[next].x;
        if (db >= rho) {
          const double t = (rho - da) / (db - da);
          const double xr = xa + t * (xb - xa);
          area += M_PI * (xa + xr) * (rho - da);
          break;
        }
        area += M_PI * (xa + xb) * (db - da);
        k = next;
      }
      r.disk_area = area;
    }
  } else {
    const GraphPatch& patch = g.graph();
    const detail::CellGraph cg(patch);
    const auto dist = cg.distances({p}, 1.5 * rho);
    for (std::size_t k = 0; k < cg.n_corner; ++k)
      if (cg.on_boundary(k) && dist[k] < rho)
        throw Error(ErrorKind::PatchExceeded, "estimates", "geodesic disk reaches the patch boundary");
    double area = 0.0;
    for (int i = 0; i + 1 < cg.nx; ++i)
      for (int j = 0; j + 1 < cg.ny; ++j)
        for (const auto& t : cg.triangles(i, j)) {
          const double f0 = dist[t[0]] - rho, f1 = dist[t[1]] - rho, f2 = dist[t[2]] - rho;
          if (f0 >= 0 && f1 >= 0 && f2 >= 0) continue;
          const double frac = detail::clip_fraction(std::min(f0, 1e300), std::min(f1, 1e300), std::min(f2, 1e300));
          area += frac * detail::triangle_area(cg.position(t[0]), cg.position(t[1]), cg.position(t[2]));
        }
    r.disk_area = area;
  }
  r.inequality_holds = r.disk_area < r.bound;
  r.passed = !r.hypothesis_ok || r.inequality_holds;
  return r;
}

// ---------------------------------------------------------------------------------------
// Extrinsic density

struct DensityOptions {
  /// Recursion depth of the triangle subdivision (graphs) or log2 of the sub-steps per
  /// sample interval (profiles).
  int depth = 4;
};

struct DensityReport {
  Vec3 center = Vec3::Zero();
  std::vector<double> radii;
  std::vector<double> areas;
  std::vector<double> o_values;  // phi(r) A(r) / (4 pi r^2)
  std::vector<double> tolerances;  // clipping error of o_values
  std::vector<double> lengths;  // L(r), NaN where not computed
  /// Weighted variant: int_{Sigma cap B(q, r)} e^{phi(mu)} / (4 pi r^2).
  std::vector<double> weighted_values;
  double epsilon = 0.0;
  double offset = 0.0;
  bool monotone = true;
};

namespace detail {

struct BallMeasure {
  double area = 0.0;
  double weighted = 0.0;
  double length = 0.0;
};

inline void clip_ball(const std::array<Vec3, 3>& v, const Vec3& q, double r, int depth, const PotentialSpec& spec,
                      BallMeasure& out) {
  const Vec3 c = (v[0] + v[1] + v[2]) / 3.0;
  double rad = 0.0;
  for (const auto& p : v) rad = std::max(rad, (p - c).norm());
  const double dc = (c - q).norm();
  if (dc - rad >= r) return;
  const double area = triangle_area(v[0], v[1], v[2]);
  if (dc + rad <= r) {
    out.area += area;
    out.weighted += area * std::exp(eval_potential(spec, c(2)).phi);
    return;
  }
  if (depth == 0) {
    const std::array<double, 3> f{(v[0] - q).norm() - r, (v[1] - q).norm() - r, (v[2] - q).norm() - r};
    const double a = clip_fraction(f[0], f[1], f[2]) * area;
    out.area += a;
    out.weighted += a * std::exp(eval_potential(spec, c(2)).phi);
    out.length += clip_length(v, f);
    return;
  }
  const Vec3 m01 = 0.5 * (v[0] + v[1]), m12 = 0.5 * (v[1] + v[2]), m20 = 0.5 * (v[2] + v[0]);
  clip_ball({v[0], m01, m20}, q, r, depth - 1, spec, out);
  clip_ball({m01, v[1], m12}, q, r, depth - 1, spec, out);
  clip_ball({m20, m12, v[2]}, q, r, depth - 1, spec, out);
  clip_ball({m01, m12, m20}, q, r, depth - 1, spec, out);
}

inline BallMeasure ball_measure_graph(const GeometryField& g, const Vec3& q, double r, int depth,
                                      const PotentialSpec& spec) {
  const CellGraph cg(g.graph());
  BallMeasure m;
  for (int i = 0; i + 1 < cg.nx; ++i)
    for (int j = 0; j + 1 < cg.ny; ++j)
      for (const auto& t : cg.triangles(i, j))
        clip_ball({cg.position(t[0]), cg.position(t[1]), cg.position(t[2])}, q, r, depth, spec, m);
  return m;
}

/// Profiles: midpoint rule on 2^depth sub-steps per interval with the exact fraction of each
/// parallel circle (rotational) or ruling segment (translation-invariant) inside the ball.
inline BallMeasure ball_measure_profile(const GeometryField& g, const Vec3& q, double r, int depth,
                                        const PotentialSpec& spec) {
  const ProfileCurve& c = g.profile();
  const bool rot = c.kind == ProfileKind::Rotational;
  const double xq = rot ? std::hypot(q(0), q(1)) : q(0);
  const int m = 1 << depth;
  BallMeasure out;
  out.length = fd::nan;
  for (std::size_t k = 0; k + 1 < c.size(); ++k) {
    const auto& a = c.samples[k];
    const auto& b = c.samples[k + 1];
    const double ds = (b.s - a.s) / m;
    for (int t = 0; t < m; ++t) {
      const double w = (t + 0.5) / m;
      const double x = a.x + w * (b.x - a.x), z = a.z + w * (b.z - a.z);
      double len;
      if (rot) {
        const double base = x * x + xq * xq + (z - q(2)) * (z - q(2)) - r * r;
        double frac;
        if (x * xq == 0.0) frac = base < 0.0 ? 1.0 : 0.0;
        else frac = std::acos(std::clamp(base / (2.0 * x * xq), -1.0, 1.0)) / M_PI;
        len = 2.0 * M_PI * x * frac;
      } else {
        const double d2 = (x - xq) * (x - xq) + (z - q(2)) * (z - q(2));
        len = d2 < r * r ? 2.0 * std::sqrt(r * r - d2) : 0.0;
      }
      if (len == 0.0) continue;
      out.area += len * ds;
      out.weighted += len * ds * std::exp(eval_potential(spec, z).phi);
    }
  }
  return out;
}

}  // namespace detail

/// O(r) = phi(r) A(r) / (4 pi r^2) with A(r) the area of the surface inside B(q, r), phi
/// evaluated at the radius. The potential is shifted when needed so that 0 <= phi(r) < 1 on
/// the radii; the tolerance of each value is the change under one more level of refinement.
inline DensityReport density_monotonicity(const GeometryField& g, const Vec3& q, std::vector<double> radii,
                                          const PotentialSpec& spec, const DensityOptions& opt = {}) {
  if (radii.empty()) throw Error(ErrorKind::Precondition, "estimates", "no radii");
  for (std::size_t i = 0; i < radii.size(); ++i) {
    if (!(radii[i] > 0.0)) throw Error(ErrorKind::Precondition, "estimates", "radii must be positive");
    if (i > 0 && !(radii[i] > radii[i - 1]))
      throw Error(ErrorKind::Precondition, "estimates", "radii must be strictly increasing");
  }
  DensityReport rep;
  rep.center = q;
  rep.radii = radii;
  rep.epsilon = radii.back();

  auto normalised = [&](const PotentialSpec& s) {
    for (double r : radii) {
      if (!(r > s.alpha)) return false;
      const double v = eval_potential(s, r).phi;
      if (!(v >= 0.0 && v < 1.0)) return false;
    }
    return true;
  };
  PotentialSpec ps = spec;
  if (!normalised(ps)) {
    if (!(radii.front() > spec.alpha))
      throw Error(ErrorKind::Normalization, "estimates", "radii lie outside the potential domain");
    ps.offset = spec.offset - eval_potential(spec, radii.front()).phi;
    if (!normalised(ps))
      throw Error(ErrorKind::Normalization, "estimates", "no offset gives 0 <= phi(r) < 1 on the radii");
  }
  rep.offset = ps.offset;

  // The ball must stay inside the sampled surface.
  const double r_max = radii.back();
  if (g.is_graph()) {
    const detail::CellGraph cg(g.graph());
    for (std::size_t k = 0; k < cg.n_corner; ++k)
      if (cg.on_boundary(k) && (cg.position(k) - q).norm() < r_max)
        throw Error(ErrorKind::PatchExceeded, "estimates", "ball reaches the patch boundary");
  } else {
    const ProfileCurve& c = g.profile();
    const bool rot = c.kind == ProfileKind::Rotational;
    const double xq = rot ? std::hypot(q(0), q(1)) : q(0);
    for (const auto* e : {&c.samples.front(), &c.samples.back()}) {
      if (rot && e->x == 0.0) continue;
      if (std::hypot(e->x - xq, e->z - q(2)) < r_max)
        throw Error(ErrorKind::PatchExceeded, "estimates", "ball reaches the end of the profile");
    }
  }

  auto measure = [&](double r, int depth) {
    return g.is_graph() ? detail::ball_measure_graph(g, q, r, depth, spec)
                        : detail::ball_measure_profile(g, q, r, depth, spec);
  };
  for (double r : radii) {
    const auto fine = measure(r, opt.depth);
    const auto coarse = measure(r, std::max(0, opt.depth - 1));
    const double phi_r = eval_potential(ps, r).phi;
    const double norm = 4.0 * M_PI * r * r;
    rep.areas.push_back(fine.area);
    rep.o_values.push_back(phi_r * fine.area / norm);
    rep.tolerances.push_back(phi_r * std::abs(fine.area - coarse.area) / norm);
    rep.lengths.push_back(fine.length);
    rep.weighted_values.push_back(std::exp(ps.offset - spec.offset) * fine.weighted / norm);
  }
  for (std::size_t i = 0; i + 1 < radii.size(); ++i) {
    const double tol = rep.tolerances[i] + rep.tolerances[i + 1] + 1e-12 * std::abs(rep.o_values[i]);
    if (rep.o_values[i + 1] < rep.o_values[i] - tol) rep.monotone = false;
  }
  return rep;
}

// ---------------------------------------------------------------------------------------
// Curvature ratio and convexity

/// sup |S| / phi'(mu) over samples with curvature data.
inline double curvature_ratio_sup(const GeometryField& g, const PotentialSpec& spec) {
  double sup = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double s = std::sqrt(g.shape[k].squaredNorm());
    if (!std::isfinite(s)) continue;
    const double d1 = eval_potential(spec, g.mu[k]).d1;
    if (!(d1 > 0.0)) throw Error(ErrorKind::Precondition, "estimates", "phi' must be positive on the samples");
    sup = std::max(sup, s / d1);
  }
  return sup;
}

enum class ConvexityVerdict { ConvexWithinTol, NotConvex, HypothesesFail };

inline std::string to_string(ConvexityVerdict v) {
  switch (v) {
    case ConvexityVerdict::ConvexWithinTol: return "ConvexWithinTol";
    case ConvexityVerdict::NotConvex: return "NotConvex";
    default: return "HypothesesFail";
  }
}

struct ConvexityReport {
  double min_K = 0.0;
  double min_k2 = 0.0;
  double theta_sup = -detail::inf;  // sup k2/eta over eta > 0
  double lambda_K_inf = 0.0;
  double tol = 0.0;
  bool c1 = false;
  bool cc3 = false;
  bool d3_nonpositive = false;
  bool mean_curvature_nonpositive = false;
  /// min K vanishes within tolerance, the flat alternative.
  bool flat_hint = false;
  ConvexityVerdict verdict = ConvexityVerdict::HypothesesFail;
};

/// Convexity verdict: when the hypotheses hold and Lambda K is bounded below, K >= -tol is
/// expected. A negative tol selects 10 h^2 max|S|^2.
inline ConvexityReport convexity_report(const GeometryField& g, const PotentialSpec& spec, double tol = -1.0) {
  ConvexityReport r;
  r.min_K = detail::inf;
  r.min_k2 = detail::inf;
  double max_s2 = 0.0, max_s = 0.0, max_H = -detail::inf;
  r.c1 = true;
  r.d3_nonpositive = true;
  for (std::size_t k = 0; k < g.size(); ++k) {
    const PotentialEval e = eval_potential(spec, g.mu[k]);
    if (!(e.d1 > 0.0 && e.d2 >= 0.0)) r.c1 = false;
    if (e.d3 > 0.0) r.d3_nonpositive = false;
    if (!std::isfinite(g.K[k])) continue;
    r.min_K = std::min(r.min_K, g.K[k]);
    r.min_k2 = std::min(r.min_k2, g.k2[k]);
    max_s2 = std::max(max_s2, g.shape[k].squaredNorm());
    max_s = std::max(max_s, std::sqrt(g.shape[k].squaredNorm()));
    max_H = std::max(max_H, g.H[k]);
    if (g.eta[k] > 0.0) r.theta_sup = std::max(r.theta_sup, g.k2[k] / g.eta[k]);
  }
  r.tol = tol >= 0.0 ? tol : 10.0 * g.h * g.h * max_s2;
  r.mean_curvature_nonpositive = max_H <= 10.0 * g.h * g.h * max_s;
  try {
    const Asymptotics a = asymptotics(spec);
    r.cc3 = !a.violation;
    r.lambda_K_inf = a.lambda == 0.0 ? 0.0 : a.lambda * r.min_K;
  } catch (const Error&) {
    r.cc3 = false;
    r.lambda_K_inf = fd::nan;
  }
  r.flat_hint = std::abs(r.min_K) <= r.tol;
  if (!(r.c1 && r.cc3 && r.d3_nonpositive && r.mean_curvature_nonpositive)) r.verdict = ConvexityVerdict::HypothesesFail;
  else r.verdict = r.min_K >= -r.tol ? ConvexityVerdict::ConvexWithinTol : ConvexityVerdict::NotConvex;
  return r;
}

// ---------------------------------------------------------------------------------------
// Estimates in the Ilmanen space

struct IlmanenEstimateReport {
  double sup_R = 0.0;  // sup |S^phi| min{d_phi(p, boundary), R}
  double sup_A = 0.0;  // sup |S^phi| min{d_phi(p, boundary), pi / (2 sqrt A)}
  double R = 0.0;
  double A = 0.0;
  double sup_S_phi = 0.0;
  std::size_t argsup_R = 0;
};

/// Conformal distances use edge lengths e^{phi/2} times Euclidean length; R and A come from
/// the sectional curvature bounds over the sampled heights.
inline IlmanenEstimateReport ilmanen_estimate_report(const GeometryField& g, const PotentialSpec& spec,
                                                     const std::vector<std::size_t>& boundary) {
  if (boundary.empty()) throw Error(ErrorKind::Precondition, "estimates", "empty boundary");
  const std::size_t n = g.size();
  for (std::size_t b : boundary)
    if (b >= n) throw Error(ErrorKind::Precondition, "estimates", "boundary index out of range");
  IlmanenEstimateReport r;
  double sup_k = 0.0, sup_grad = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const CurvatureBounds cb = curvature_bounds(spec, g.mu[k]);
    sup_k = std::max(sup_k, cb.sectional_abs);
    sup_grad = std::max(sup_grad, cb.gradient_norm);
  }
  r.A = sup_k;
  const double denom = sup_k + std::sqrt(sup_grad);
  r.R = denom > 0.0 ? 1.0 / denom : detail::inf;
  const double cap_A = sup_k > 0.0 ? M_PI / (2.0 * std::sqrt(sup_k)) : detail::inf;

  auto density = [&](double z) { return std::exp(0.5 * eval_potential(spec, z).phi); };
  std::vector<double> dist;
  if (g.is_profile()) {
    const ProfileCurve& c = g.profile();
    dist = detail::dijkstra(n, boundary, detail::inf, [&](std::size_t k, auto&& relax) {
      for (std::size_t m : {k - 1, k + 1}) {
        if (m >= n) continue;
        const auto& a = c.samples[k];
        const auto& b = c.samples[m];
        relax(m, density(0.5 * (a.z + b.z)) * std::abs(b.s - a.s));
      }
    });
  } else {
    const detail::CellGraph cg(g.graph());
    const auto d = cg.distances(boundary, detail::inf, [&](const Vec3& v) { return density(v(2)); });
    dist.assign(d.begin(), d.begin() + static_cast<long>(n));
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (!std::isfinite(g.shape[k](0, 0)) || !std::isfinite(dist[k])) continue;
    const ConformalShape cs = to_ilmanen_shape(spec, g.mu[k], g.shape[k], std::clamp(g.eta[k], -1.0, 1.0));
    const double s_phi = std::hypot(cs.k1_phi, cs.k2_phi);
    r.sup_S_phi = std::max(r.sup_S_phi, s_phi);
    const double vr = s_phi * std::min(dist[k], r.R);
    if (vr > r.sup_R) {
      r.sup_R = vr;
      r.argsup_R = k;
    }
    r.sup_A = std::max(r.sup_A, s_phi * std::min(dist[k], cap_A));
  }
  return r;
}

// ---------------------------------------------------------------------------------------
// Blow-up

enum class BlowupModel { Plane, GrimReaper, Bowl };

inline std::string to_string(BlowupModel m) {
  switch (m) {
    case BlowupModel::Plane: return "Plane";
    case BlowupModel::GrimReaper: return "GrimReaper";
    default: return "Bowl";
  }
}

struct BlowupStage {
  double scale = 0.0;
  std::size_t basepoint = 0;
  double ratio = 0.0;  // phi'(mu(p_n)) / lambda_n
  double hausdorff = 0.0;
  double c2 = 0.0;
  std::size_t window_samples = 0;
  double curvature_scaling_error = 0.0;  // max |lambda k' - k| / max(1, |k|)
  ProfileCurve rescaled;
};

struct BlowupResult {
  BlowupModel model = BlowupModel::Plane;
  std::vector<BlowupStage> stages;
  double estimated_c = 0.0;
  double hausdorff_distance = 0.0;  // final stage
  double c2_distance = 0.0;  // final stage
};

namespace detail {

inline GeometryField bare_geometry(const ProfileCurve& c) {
  GeometryField g = profile_geometry(c);
  principal_frame(g);
  return g;
}

inline ProfileCurve rescale_profile(const ProfileCurve& c, std::size_t p, double lambda) {
  ProfileCurve out;
  out.kind = c.kind;
  out.step = lambda * c.step;
  const auto& b = c.samples[p];
  out.samples.reserve(c.size());
  // Rotational surfaces keep their axis; only the height and arclength origin move.
  const double x0 = c.kind == ProfileKind::Rotational ? 0.0 : b.x;
  for (const auto& q : c.samples) out.samples.push_back({lambda * (q.s - b.s), lambda * (q.x - x0), lambda * (q.z - b.z), q.theta});
  return out;
}

/// Reference profile sampled densely enough for linear interpolation.
struct Reference {
  std::vector<double> s, x, z, theta, eta, H;

  void at(double sv, double& xo, double& zo, double& eo, double& ho) const {
    const auto it = std::upper_bound(s.begin(), s.end(), sv);
    std::size_t i = static_cast<std::size_t>(std::clamp<long>(it - s.begin() - 1, 0, static_cast<long>(s.size()) - 2));
    const double t = (sv - s[i]) / (s[i + 1] - s[i]);
    xo = x[i] + t * (x[i + 1] - x[i]);
    zo = z[i] + t * (z[i + 1] - z[i]);
    eo = eta[i] + t * (eta[i + 1] - eta[i]);
    ho = H[i] + t * (H[i + 1] - H[i]);
  }
  double s_at_theta(double th) const {
    for (std::size_t i = 0; i + 1 < theta.size(); ++i)
      if ((theta[i] - th) * (theta[i + 1] - th) <= 0.0 && theta[i + 1] != theta[i])
        return s[i] + (th - theta[i]) / (theta[i + 1] - theta[i]) * (s[i + 1] - s[i]);
    throw Error(ErrorKind::WindowUnderflow, "estimates", "reference profile does not reach the basepoint angle");
  }
};

inline Reference bowl_reference(double c, double s_max, double step) {
  ShootingConfig cfg;
  cfg.start = AxisRegular{0.0};
  cfg.s_max = s_max;
  cfg.step = step;
  const PotentialSpec lin = PotentialSpec::linear(c);
  const auto res = solve_rotational_profile(lin, cfg);
  const auto& prof = std::get<ProfileCurve>(res.surface);
  const GeometryField g = bare_geometry(prof);
  Reference r;
  for (std::size_t k = 0; k < prof.size(); ++k) {
    r.s.push_back(prof.samples[k].s);
    r.x.push_back(prof.samples[k].x);
    r.z.push_back(prof.samples[k].z);
    r.theta.push_back(prof.samples[k].theta);
    r.eta.push_back(g.eta[k]);
    r.H.push_back(g.H[k]);
  }
  return r;
}

/// Grim reaper with phi' = c in closed form: theta = atan(sinh(c s)).
inline Reference reaper_reference(double c, double s_max, double step) {
  Reference r;
  const long n = std::lround(s_max / step);
  for (long k = -n; k <= n; ++k) {
    const double s = k * step;
    const double th = std::atan(std::sinh(c * s));
    r.s.push_back(s);
    r.x.push_back(th / c);
    r.z.push_back(std::log(std::cosh(c * s)) / c);
    r.theta.push_back(th);
    r.eta.push_back(std::cos(th));
    r.H.push_back(-c * std::cos(th));
  }
  return r;
}

}  // namespace detail

/// Rescales Sigma_n = lambda_n (Sigma - p_n) and compares each stage with the model on the
/// unit ball around the rescaled basepoint. `sources` holds one profile per stage, or a single
/// profile shared by all stages.
inline BlowupResult blowup_rescale(const std::vector<ProfileCurve>& sources, const std::vector<std::size_t>& basepoints,
                                   const std::vector<double>& scales, const PotentialSpec& spec, BlowupModel model) {
  if (scales.empty() || scales.size() != basepoints.size())
    throw Error(ErrorKind::Precondition, "estimates", "one basepoint per scale required");
  if (sources.size() != 1 && sources.size() != scales.size())
    throw Error(ErrorKind::Precondition, "estimates", "one source per stage, or a single source");
  for (std::size_t i = 0; i < scales.size(); ++i) {
    if (!(scales[i] > 0.0)) throw Error(ErrorKind::Precondition, "estimates", "scales must be positive");
    if (i > 0 && scales[i] < scales[i - 1]) throw Error(ErrorKind::Precondition, "estimates", "scales must not decrease");
  }
  BlowupResult out;
  out.model = model;
  for (std::size_t i = 0; i < scales.size(); ++i) {
    const ProfileCurve& src = sources.size() == 1 ? sources[0] : sources[i];
    const std::size_t p = basepoints[i];
    if (p >= src.size()) throw Error(ErrorKind::Precondition, "estimates", "basepoint out of range");
    if (model == BlowupModel::Bowl && src.kind != ProfileKind::Rotational)
      throw Error(ErrorKind::UnsupportedCombination, "estimates", "bowl model needs a rotational source");
    if (model == BlowupModel::GrimReaper && src.kind != ProfileKind::TranslationInvariant)
      throw Error(ErrorKind::UnsupportedCombination, "estimates", "grim reaper model needs a translation-invariant source");
    const double lambda = scales[i];
    BlowupStage st;
    st.scale = lambda;
    st.basepoint = p;
    st.ratio = eval_potential(spec, src.samples[p].z).d1 / lambda;
    st.rescaled = detail::rescale_profile(src, p, lambda);
    out.stages.push_back(std::move(st));
  }
  out.estimated_c = out.stages.back().ratio;

  std::optional<detail::Reference> ref;
  for (auto& st : out.stages) {
    const ProfileCurve& src = sources.size() == 1 ? sources[0] : sources[&st - out.stages.data()];
    const GeometryField g0 = detail::bare_geometry(src);
    const GeometryField g = detail::bare_geometry(st.rescaled);
    for (std::size_t k = 0; k < g.size(); ++k) {
      if (!std::isfinite(g.k1[k])) continue;
      st.curvature_scaling_error = std::max(st.curvature_scaling_error,
                                            std::max(std::abs(st.scale * g.k1[k] - g0.k1[k]),
                                                     std::abs(st.scale * g.k2[k] - g0.k2[k])) /
                                                std::max(1.0, std::max(std::abs(g0.k1[k]), std::abs(g0.k2[k]))));
    }

    const auto& S = st.rescaled.samples;
    const bool rot = st.rescaled.kind == ProfileKind::Rotational;
    const Vec3 base(S[st.basepoint].x, 0.0, S[st.basepoint].z);
    if (S.front().s > -1.0 && !(rot && S.front().x == 0.0 && st.basepoint == 0))
      throw Error(ErrorKind::WindowUnderflow, "estimates", "rescaled profile does not cover the window");
    if (S.back().s < 1.0) throw Error(ErrorKind::WindowUnderflow, "estimates", "rescaled profile does not cover the window");

    // Window samples of the meridian: surface points within the unit ball of the basepoint.
    std::vector<std::size_t> window;
    for (std::size_t k = 0; k < S.size(); ++k)
      if (std::hypot(S[k].x - base(0), S[k].z - base(2)) < 1.0) window.push_back(k);
    st.window_samples = window.size();
    if (window.size() < 3) throw Error(ErrorKind::WindowUnderflow, "estimates", "too few samples in the window");

    if (model == BlowupModel::Plane) {
      std::vector<Vec3> pts, nrm;
      std::vector<std::size_t> owner;
      for (std::size_t k : window) {
        const double X = S[k].x, Z = S[k].z;
        const double st_ = std::sin(S[k].theta), ct = std::cos(S[k].theta);
        if (rot) {
          double psi_max = M_PI;
          if (X > 0.0 && base(0) > 0.0) {
            const double c = (X * X + base(0) * base(0) + (Z - base(2)) * (Z - base(2)) - 1.0) / (2.0 * X * base(0));
            psi_max = std::acos(std::clamp(c, -1.0, 1.0));
          }
          const int m = std::max(1, static_cast<int>(std::ceil(psi_max * X / st.rescaled.step)));
          for (int j = -m; j <= m; ++j) {
            const double psi = psi_max * j / m;
            pts.emplace_back(X * std::cos(psi), X * std::sin(psi), Z);
            nrm.emplace_back(-st_ * std::cos(psi), -st_ * std::sin(psi), ct);
            owner.push_back(k);
          }
        } else {
          const double d2 = (X - base(0)) * (X - base(0)) + (Z - base(2)) * (Z - base(2));
          const double ymax = std::sqrt(std::max(0.0, 1.0 - d2));
          const int m = std::max(1, static_cast<int>(std::ceil(ymax / st.rescaled.step)));
          for (int j = -m; j <= m; ++j) {
            pts.emplace_back(X, ymax * j / m, Z);
            nrm.emplace_back(-st_, 0.0, ct);
            owner.push_back(k);
          }
        }
      }
      Vec3 centroid = Vec3::Zero(), mean_n = Vec3::Zero();
      for (std::size_t t = 0; t < pts.size(); ++t) {
        centroid += pts[t];
        mean_n += nrm[t];
      }
      centroid /= static_cast<double>(pts.size());
      Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
      for (const auto& q : pts) cov += (q - centroid) * (q - centroid).transpose();
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
      Vec3 n = es.eigenvectors().col(0);
      if (n.dot(mean_n) < 0.0) n = -n;
      double haus = 0.0, c2 = 0.0;
      for (std::size_t t = 0; t < pts.size(); ++t) {
        haus = std::max(haus, std::abs((pts[t] - centroid).dot(n)));
        c2 = std::max(c2, std::max((nrm[t] - n).norm(), std::abs(g.H[owner[t]])));
      }
      st.hausdorff = haus;
      st.c2 = c2;
    } else {
      const double c = out.estimated_c;
      if (!(c > 0.0)) throw Error(ErrorKind::Precondition, "estimates", "soliton models need a positive limit constant");
      const double reach = std::abs(S[st.basepoint].s) + 4.0;
      if (!ref) {
        const double step = std::min(1e-3, 0.25 * st.rescaled.step);
        ref = model == BlowupModel::Bowl ? detail::bowl_reference(c, 30.0 + reach, step)
                                         : detail::reaper_reference(c, 30.0 + reach, step);
      }
      const double s_ref0 = ref->s_at_theta(S[st.basepoint].theta);
      double xr0, zr0, er0, hr0;
      ref->at(s_ref0, xr0, zr0, er0, hr0);
      const double xo = rot ? 0.0 : xr0;
      double haus = 0.0, c2 = 0.0;
      for (std::size_t k : window) {
        double xr, zr, er, hr;
        ref->at(s_ref0 + S[k].s, xr, zr, er, hr);
        const double dx = (S[k].x - (rot ? 0.0 : base(0))) - (xr - xo);
        const double dz = (S[k].z - base(2)) - (zr - zr0);
        haus = std::max(haus, std::hypot(dx, dz));
        if (std::isfinite(g.H[k])) c2 = std::max(c2, std::max(std::abs(g.eta[k] - er), std::abs(g.H[k] - hr)));
      }
      st.hausdorff = haus;
      st.c2 = c2;
    }
  }
  out.hausdorff_distance = out.stages.back().hausdorff;
  out.c2_distance = out.stages.back().c2;
  return out;
}

// ---------------------------------------------------------------------------------------
// Omori-Yau test function gamma = 2 log|p|

struct OmoriReport {
  ResidualReport gradient;  // violations of |grad gamma| <= 2
  ResidualReport laplacian;  // violations of Delta^phi gamma <= 2A + 1
  ResidualReport agreement;  // closed form minus finite differences of Delta^phi gamma
  double A = 0.0;
  double max_gradient = 0.0;
  double max_laplacian = 0.0;
  double threshold = 2.0;
  std::size_t checked = 0;
  bool passed = false;
};

/// Checks |grad gamma| = 2|p^T|/|p|^2 <= 2 and
///   Delta^phi gamma = (4 + 2 mu phi'(mu))/|p|^2 - 4|p^T|^2/|p|^4 <= 2A + 1,
/// A = max(0, sup mu phi' / |p|^2), at samples with |p| >= threshold. The closed form is
/// compared with the finite-difference drift Laplacian of gamma.
inline OmoriReport omori_gamma_check(const GeometryField& g, const PotentialSpec& spec, double threshold = 2.0) {
  const std::size_t n = g.size();
  std::vector<double> gamma(n), rad(n), tang(n), d1(n);
  for (std::size_t k = 0; k < n; ++k) {
    const Vec3& p = g.position[k];
    rad[k] = p.norm();
    if (rad[k] < 1e-8) throw Error(ErrorKind::OriginProximity, "estimates", "a sample lies at the ambient origin");
    gamma[k] = 2.0 * std::log(rad[k]);
    tang[k] = std::hypot(p.dot(g.frame1[k]), p.dot(g.frame2[k]));
    d1[k] = eval_potential(spec, g.mu[k]).d1;
  }
  OmoriReport r;
  r.threshold = threshold;
  for (std::size_t k = 0; k < n; ++k)
    if (rad[k] >= threshold) r.A = std::max(r.A, g.mu[k] * d1[k] / (rad[k] * rad[k]));
  const auto fdlap = drift_laplacian(g, gamma, phi_of_mu(g, spec));
  std::vector<double> vg(n, fd::nan), vl(n, fd::nan), agree(n, fd::nan);
  for (std::size_t k = 0; k < n; ++k) {
    const double p2 = rad[k] * rad[k];
    const double grad = 2.0 * tang[k] / p2;
    const double lap = (4.0 + 2.0 * g.mu[k] * d1[k]) / p2 - 4.0 * tang[k] * tang[k] / (p2 * p2);
    agree[k] = lap - fdlap[k];
    if (rad[k] < threshold) continue;
    ++r.checked;
    r.max_gradient = std::max(r.max_gradient, grad);
    r.max_laplacian = std::max(r.max_laplacian, lap);
    vg[k] = std::max(0.0, grad - 2.0);
    vl[k] = std::max(0.0, lap - (2.0 * r.A + 1.0));
  }
  if (r.checked == 0) throw Error(ErrorKind::Precondition, "estimates", "no sample beyond the threshold radius");
  r.gradient = residual_norms(g, vg, "omori_gradient", 0);
  r.laplacian = residual_norms(g, vl, "omori_laplacian", 0);
  r.agreement = residual_norms(g, agree, "omori_agreement", g.is_profile() ? 1 : 2);
  r.passed = r.gradient.max_abs_residual == 0.0 && r.laplacian.max_abs_residual == 0.0;
  return r;
}

}  // namespace phimin
