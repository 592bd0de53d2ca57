#pragma once

// Weighted stability: Q_phi, L_phi = Delta^phi + |S|^2 - phi'' eta^2, its first Dirichlet
// eigenvalue and Jacobi-field residuals.

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "phimin/geometry.hpp"

namespace phimin {

using Region = std::vector<std::size_t>;

/// Samples at least `margin` away from the boundary of the sample set.
inline Region interior_region(const GeometryField& g, int margin = 1) {
  Region r;
  for (std::size_t k = 0; k < g.size(); ++k)
    if (g.interior(k, margin)) r.push_back(k);
  return r;
}

/// Graph samples with |(x, y) - c| < radius.
inline Region disk_region(const GeometryField& g, double cx, double cy, double radius) {
  const GraphPatch& p = g.graph();
  Region r;
  for (int i = 0; i < p.nx(); ++i)
    for (int j = 0; j < p.ny(); ++j)
      if (std::hypot(p.x(i) - cx, p.y(j) - cy) < radius) r.push_back(static_cast<std::size_t>(p.index(i, j)));
  return r;
}

/// Discretises the arc [s_lo, s_hi]: samples strictly inside are free, samples at the ends
/// carry the Dirichlet condition. Axis samples of rotational profiles are never boundary.
inline Region arc_region(const GeometryField& g, double s_lo, double s_hi) {
  const ProfileCurve& c = g.profile();
  const double tol = 1e-9 * c.step;
  Region r;
  for (std::size_t k = 0; k < c.size(); ++k) {
    const auto& p = c.samples[k];
    const bool axis = c.kind == ProfileKind::Rotational && p.x == 0.0;
    if (p.s >= s_lo - tol && p.s <= s_hi + tol && (axis || (p.s > s_lo + tol && p.s < s_hi - tol))) r.push_back(k);
  }
  return r;
}

struct StabilityOptions {
  /// Length of the ruling for translation-invariant profiles; Dirichlet data at its ends adds
  /// (pi/L)^2 to the spectrum. Infinite by default.
  double ruling_length = std::numeric_limits<double>::infinity();
};

/// Discrete Q_phi on a Dirichlet region. Matrices act on region unknowns in region order.
struct StabilityAssembly {
  std::vector<double> weights;  // e^phi per sample
  std::vector<double> potential;  // |S|^2 - phi'' eta^2 per sample
  Eigen::SparseMatrix<double> stiffness;
  Eigen::VectorXd potential_term;  // potential * mass on region unknowns
  Eigen::VectorXd mass;
  Region region;
  std::vector<long> slot;  // sample -> unknown, -1 outside the region
  double spectral_shift = 0.0;  // (pi/L)^2 for finite rulings

  Eigen::VectorXd restrict(const std::vector<double>& u) const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(region.size()));
    for (std::size_t r = 0; r < region.size(); ++r) v(static_cast<Eigen::Index>(r)) = u[region[r]];
    return v;
  }
  std::vector<double> extend(const Eigen::VectorXd& v) const {
    std::vector<double> u(slot.size(), 0.0);
    for (std::size_t r = 0; r < region.size(); ++r) u[region[r]] = v(static_cast<Eigen::Index>(r));
    return u;
  }
};

namespace detail {

inline Region checked_region(const GeometryField& g, Region region) {
  if (region.empty()) throw Error(ErrorKind::Support, "stability", "empty region");
  std::sort(region.begin(), region.end());
  region.erase(std::unique(region.begin(), region.end()), region.end());
  if (region.back() >= g.size()) throw Error(ErrorKind::Support, "stability", "region index out of range");
  return region;
}

/// Profiles: P1 elements in arclength with density e^phi (2 pi x or 1), lumped mass by the
/// quarter-point rule.
inline void assemble_profile(const GeometryField& g, StabilityAssembly& a) {
  const ProfileCurve& c = g.profile();
  const bool rot = c.kind == ProfileKind::Rotational;
  const double h = c.step;
  const std::size_t n = g.size();
  std::vector<double> dens(n);
  for (std::size_t k = 0; k < n; ++k) dens[k] = a.weights[k] * (rot ? 2.0 * M_PI * c.samples[k].x : 1.0);
  const auto m = static_cast<Eigen::Index>(a.region.size());
  std::vector<Eigen::Triplet<double>> trip;
  a.mass = Eigen::VectorXd::Zero(m);
  for (std::size_t e = 0; e + 1 < n; ++e) {
    const long i = a.slot[e], j = a.slot[e + 1];
    if (i < 0 && j < 0) continue;
    const double w = 0.5 * (dens[e] + dens[e + 1]) / h;
    if (i >= 0) {
      trip.emplace_back(i, i, w);
      a.mass(i) += 0.5 * h * (3.0 * dens[e] + dens[e + 1]) / 4.0;
    }
    if (j >= 0) {
      trip.emplace_back(j, j, w);
      a.mass(j) += 0.5 * h * (dens[e] + 3.0 * dens[e + 1]) / 4.0;
    }
    if (i >= 0 && j >= 0) {
      trip.emplace_back(i, j, -w);
      trip.emplace_back(j, i, -w);
    }
  }
  a.stiffness.resize(m, m);
  a.stiffness.setFromTriplets(trip.begin(), trip.end());
}

/// Graphs: P1 elements on the lifted triangulation (two triangles per cell), e^phi at the
/// triangle centroid for stiffness and at the vertex for lumped mass.
inline void assemble_graph(const GeometryField& g, const PotentialSpec& spec, StabilityAssembly& a) {
  const GraphPatch& p = g.graph();
  const auto m = static_cast<Eigen::Index>(a.region.size());
  std::vector<Eigen::Triplet<double>> trip;
  a.mass = Eigen::VectorXd::Zero(m);
  auto vertex = [&](int i, int j) { return Vec3(p.x(i), p.y(j), p.u(i, j)); };
  auto triangle = [&](const std::array<std::pair<int, int>, 3>& t) {
    std::array<long, 3> id;
    std::array<Vec3, 3> v;
    bool touches = false;
    for (int q = 0; q < 3; ++q) {
      const auto k = static_cast<std::size_t>(p.index(t[q].first, t[q].second));
      id[q] = a.slot[k];
      v[q] = vertex(t[q].first, t[q].second);
      touches = touches || id[q] >= 0;
    }
    if (!touches) return;
    std::array<Vec3, 3> e;
    for (int q = 0; q < 3; ++q) e[q] = v[(q + 2) % 3] - v[(q + 1) % 3];
    const double area = 0.5 * e[0].cross(e[1]).norm();
    const double zc = (v[0](2) + v[1](2) + v[2](2)) / 3.0;
    const double w = std::exp(eval_potential(spec, zc).phi) / (4.0 * area);
    for (int q = 0; q < 3; ++q) {
      if (id[q] < 0) continue;
      a.mass(id[q]) += std::exp(eval_potential(spec, v[q](2)).phi) * area / 3.0;
      for (int r = 0; r < 3; ++r)
        if (id[r] >= 0) trip.emplace_back(id[q], id[r], w * e[q].dot(e[r]));
    }
  };
  for (int i = 0; i + 1 < p.nx(); ++i)
    for (int j = 0; j + 1 < p.ny(); ++j) {
      triangle({{{i, j}, {i + 1, j}, {i + 1, j + 1}}});
      triangle({{{i, j}, {i + 1, j + 1}, {i, j + 1}}});
    }
  a.stiffness.resize(m, m);
  a.stiffness.setFromTriplets(trip.begin(), trip.end());
}

}  // namespace detail

/// Stiffness, potential and mass of Q_phi(u, u) = int e^phi (|grad u|^2 - (|S|^2 - phi'' eta^2) u^2)
/// for u vanishing outside `region`.
inline StabilityAssembly assemble_stability(const GeometryField& g, const PotentialSpec& spec, Region region,
                                            const StabilityOptions& opt = {}) {
  StabilityAssembly a;
  a.region = detail::checked_region(g, std::move(region));
  const std::size_t n = g.size();
  a.slot.assign(n, -1);
  for (std::size_t r = 0; r < a.region.size(); ++r) a.slot[a.region[r]] = static_cast<long>(r);
  a.weights.resize(n);
  a.potential.resize(n);
  parallel_for(n, [&](std::size_t k) {
    const PotentialEval e = eval_potential(spec, g.mu[k]);
    a.weights[k] = std::exp(e.phi);
    a.potential[k] = g.shape[k].squaredNorm() - e.d2 * g.eta[k] * g.eta[k];
  });
  for (std::size_t k : a.region)
    if (!std::isfinite(a.potential[k]))
      throw Error(ErrorKind::Support, "stability", "region reaches samples without curvature data");
  if (g.is_profile()) {
    detail::assemble_profile(g, a);
    if (g.profile().kind == ProfileKind::TranslationInvariant && std::isfinite(opt.ruling_length)) {
      if (!(opt.ruling_length > 0.0)) throw Error(ErrorKind::Precondition, "stability", "ruling length must be positive");
      a.spectral_shift = std::pow(M_PI / opt.ruling_length, 2);
    }
  } else {
    detail::assemble_graph(g, spec, a);
  }
  a.potential_term.resize(a.mass.size());
  for (std::size_t r = 0; r < a.region.size(); ++r) {
    const auto i = static_cast<Eigen::Index>(r);
    if (!(a.mass(i) > 0.0)) throw Error(ErrorKind::Support, "stability", "degenerate mass on the region");
    a.potential_term(i) = a.potential[a.region[r]] * a.mass(i);
  }
  return a;
}

/// Q_phi(u, v) through the assembly.
inline double quadratic_form(const StabilityAssembly& a, const std::vector<double>& u, const std::vector<double>& v) {
  const Eigen::VectorXd x = a.restrict(u), y = a.restrict(v);
  auto half = [&](const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
    return p.dot(a.stiffness * q) - p.dot(a.potential_term.cwiseProduct(q)) + a.spectral_shift * p.dot(a.mass.cwiseProduct(q));
  };
  // Symmetrised average of both orders.
  return 0.5 * (half(x, y) + half(y, x));
}

/// Q_phi(u, u); u must vanish outside the region.
inline double quadratic_form(const GeometryField& g, const PotentialSpec& spec, const std::vector<double>& u,
                             const Region& region, const StabilityOptions& opt = {}) {
  if (u.size() != g.size()) throw Error(ErrorKind::Precondition, "stability", "field size mismatch");
  std::vector<unsigned char> inside(g.size(), 0);
  for (std::size_t k : region)
    if (k < g.size()) inside[k] = 1;
  for (std::size_t k = 0; k < u.size(); ++k)
    if (!inside[k] && u[k] != 0.0) throw Error(ErrorKind::Support, "stability", "u is not supported in the region");
  const StabilityAssembly a = assemble_stability(g, spec, region, opt);
  return quadratic_form(a, u, u);
}

struct SpectrumResult {
  double lambda1 = 0.0;
  std::vector<double> eigenfunction;  // mass-normalised, zero outside the region
  int iterations = 0;
  double residual = 0.0;  // |(-L) u - lambda M u| in the M^{-1} norm
};

/// Smallest eigenvalue of -L_phi on the region by inverse iteration with the shift
/// -max|potential| - 1.
inline SpectrumResult first_eigenvalue(const StabilityAssembly& a, double tol = 1e-9, int max_iters = 20000) {
  const Eigen::Index m = a.mass.size();
  Eigen::SparseMatrix<double> A = a.stiffness;
  for (Eigen::Index i = 0; i < m; ++i) A.coeffRef(i, i) += a.spectral_shift * a.mass(i) - a.potential_term(i);
  const double sigma = -(a.potential_term.cwiseQuotient(a.mass)).cwiseAbs().maxCoeff() - 1.0;
  Eigen::SparseMatrix<double> S = A;
  for (Eigen::Index i = 0; i < m; ++i) S.coeffRef(i, i) -= sigma * a.mass(i);
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(S);
  if (solver.info() != Eigen::Success) throw Error(ErrorKind::NonConvergence, "stability", "factorisation failed");

  auto normalise = [&](Eigen::VectorXd& v) { v /= std::sqrt(v.dot(a.mass.cwiseProduct(v))); };
  Eigen::VectorXd u = Eigen::VectorXd::Ones(m);
  normalise(u);
  SpectrumResult res;
  for (int it = 1; it <= max_iters; ++it) {
    const Eigen::VectorXd rhs = a.mass.cwiseProduct(u);
    u = solver.solve(rhs);
    normalise(u);
    const Eigen::VectorXd Au = A * u;
    const double lambda = u.dot(Au);
    const Eigen::VectorXd r = Au - lambda * a.mass.cwiseProduct(u);
    const double rn = std::sqrt(r.dot(r.cwiseQuotient(a.mass)));
    res.lambda1 = lambda;
    res.residual = rn;
    res.iterations = it;
    if (rn <= tol * std::max(1.0, std::abs(lambda))) {
      if (u.sum() < 0.0) u = -u;
      res.eigenfunction = a.extend(u);
      return res;
    }
  }
  throw Error(ErrorKind::NonConvergence, "stability", "inverse iteration did not reach the residual tolerance");
}

inline SpectrumResult first_eigenvalue(const GeometryField& g, const PotentialSpec& spec, const Region& region,
                                       double tol = 1e-9, const StabilityOptions& opt = {}) {
  return first_eigenvalue(assemble_stability(g, spec, region, opt), tol);
}

/// Positive solutions of the Jacobi equation certifying stability: nu = <V, N> for a
/// horizontal Killing field V, or the angle certificate w = log eta on mean convex graphs.
struct JacobiCertificate {
  enum class Kind { HorizontalKilling, EtaCertificate };
  Kind kind = Kind::HorizontalKilling;
  Vec3 direction = Vec3(1.0, 0.0, 0.0);

  static JacobiCertificate killing(const Vec3& v) { return {Kind::HorizontalKilling, v}; }
  static JacobiCertificate eta() { return {Kind::EtaCertificate, Vec3(0.0, 0.0, 1.0)}; }
};

/// Residual of L_phi nu = 0 (Killing) or of
///   Delta w + <grad phi, grad w> = -|grad eta|^2/eta^2 - |S|^2 - phi'' |grad mu|^2, w = log eta.
/// On rotational profiles a horizontal V gives nu = -sin(theta) cos(psi), handled as a
/// first Fourier mode. An empty region means every sample.
/// Errors with SignViolation when the certificate is not positive on the region.
inline ResidualReport jacobi_residual(const GeometryField& g, const PotentialSpec& spec, const JacobiCertificate& cert,
                                      const Region& region = {}) {
  const std::size_t n = g.size();
  std::vector<unsigned char> inside(n, region.empty() ? 1 : 0);
  for (std::size_t k : region)
    if (k < n) inside[k] = 1;
  const auto psi = phi_of_mu(g, spec);
  const ScalarDerivs dpsi = differentiate(g, psi);
  std::vector<double> r(n, fd::nan);

  if (cert.kind == JacobiCertificate::Kind::HorizontalKilling) {
    if (std::abs(cert.direction(2)) > 1e-12 || cert.direction.norm() == 0.0)
      throw Error(ErrorKind::Precondition, "stability", "Killing direction must be a nonzero horizontal vector");
    const Vec3 V = cert.direction.normalized();
    std::vector<double> nu(n);
    int mode = 0;
    if (g.rotational()) {
      // Meridian psi = 0 carries the normal (-sin theta, 0, cos theta); only |V| matters.
      mode = 1;
      for (std::size_t k = 0; k < n; ++k) nu[k] = g.normal[k](0);
    } else {
      for (std::size_t k = 0; k < n; ++k) nu[k] = V.dot(g.normal[k]);
    }
    // A rotational surface is never a horizontal graph; there only the Jacobi equation is checked.
    for (std::size_t k = 0; k < n; ++k)
      if (mode == 0 && inside[k] && std::isfinite(nu[k]) && !(nu[k] > 0.0))
        throw Error(ErrorKind::SignViolation, "stability", "<V, N> is not positive on the region");
    const ScalarDerivs dn = differentiate(g, nu, mode);
    for (std::size_t k = 0; k < n; ++k) {
      if (!inside[k]) continue;
      const double pot = g.shape[k].squaredNorm() - eval_potential(spec, g.mu[k]).d2 * g.eta[k] * g.eta[k];
      r[k] = dn.lap[k] + dpsi.grad[k].dot(dn.grad[k]) + pot * nu[k];
    }
  } else {
    std::vector<double> w(n, fd::nan);
    for (std::size_t k = 0; k < n; ++k) {
      if (inside[k] && std::isfinite(g.eta[k]) && !(g.eta[k] > 0.0))
        throw Error(ErrorKind::SignViolation, "stability", "eta is not positive on the region");
      w[k] = std::log(g.eta[k]);
    }
    const ScalarDerivs dw = differentiate(g, w);
    const ScalarDerivs de = differentiate(g, g.eta);
    for (std::size_t k = 0; k < n; ++k) {
      if (!inside[k]) continue;
      const double e = g.eta[k];
      const double rhs = -de.grad[k].squaredNorm() / (e * e) - g.shape[k].squaredNorm() -
                         eval_potential(spec, g.mu[k]).d2 * g.grad_mu[k].squaredNorm();
      r[k] = dw.lap[k] + dpsi.grad[k].dot(dw.grad[k]) - rhs;
    }
  }
  return residual_norms(g, r, cert.kind == JacobiCertificate::Kind::EtaCertificate ? "jacobi_eta" : "jacobi_killing",
                        g.is_profile() ? 1 : 2);
}

}  // namespace phimin
