#pragma once

// Residual audits of the pointwise and differential identities satisfied by
// phi-minimal surfaces.

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "phimin/geometry.hpp"

namespace phimin {

/// |H + phi'(mu) eta| over interior samples.
inline ResidualReport phi_minimal_residual(const GeometryField& g, const PotentialSpec& spec) {
  std::vector<double> r(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) r[k] = g.H[k] + eval_potential(spec, g.mu[k]).d1 * g.eta[k];
  return residual_norms(g, r, "phi_minimal", 1);
}

/// Item 2 with H replaced by -phi' eta: phi'^2 (1 - |grad mu|^2 - eta^2), pointwise.
inline ResidualReport item2_substituted_residual(const GeometryField& g, const PotentialSpec& spec) {
  std::vector<double> r(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double d1 = eval_potential(spec, g.mu[k]).d1;
    const double H = -d1 * g.eta[k];
    r[k] = d1 * d1 - d1 * d1 * g.grad_mu[k].squaredNorm() - H * H;
  }
  return residual_norms(g, r, "item2_substituted", 1);
}

namespace detail {

struct Potentials {
  std::vector<double> phi, d1, d2, d3;
};

inline Potentials potentials(const GeometryField& g, const PotentialSpec& spec) {
  Potentials p;
  const std::size_t n = g.size();
  p.phi.resize(n);
  p.d1.resize(n);
  p.d2.resize(n);
  p.d3.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const PotentialEval e = eval_potential(spec, g.mu[k]);
    p.phi[k] = e.phi;
    p.d1[k] = e.d1;
    p.d2[k] = e.d2;
    p.d3[k] = e.d3;
  }
  return p;
}

inline double frob(const Mat2& m) { return std::sqrt(m.squaredNorm()); }

/// Radius below which residuals on rotational profiles are dropped.
inline constexpr double axis_clearance = 0.25;

inline void mask_axis(const GeometryField& g, std::vector<double>& r) {
  if (!g.rotational()) return;
  const auto& s = g.profile().samples;
  for (std::size_t k = 0; k < r.size(); ++k)
    if (std::abs(s[k].x) < axis_clearance) r[k] = fd::nan;
}

/// Hessian of mu: H S / phi' where phi' != 0, else the differentiated Hessian.
inline std::vector<Mat2> hess_mu(const GeometryField& g, const Potentials& p, const ScalarDerivs& dmu) {
  std::vector<Mat2> out(g.size());
  for (std::size_t k = 0; k < g.size(); ++k)
    out[k] = p.d1[k] != 0.0 ? Mat2(g.H[k] * g.shape[k] / p.d1[k]) : dmu.hess[k];
  return out;
}

/// Hessian of phi'(mu): phi''' grad mu (x) grad mu + phi'' Hess mu.
inline Mat2 hess_d1(const GeometryField& g, const Potentials& p, const std::vector<Mat2>& hmu, std::size_t k) {
  const Vec2& gm = g.grad_mu[k];
  return p.d3[k] * gm * gm.transpose() + p.d2[k] * hmu[k];
}

/// B(X, Y) = <grad phi', X> S(grad mu, Y) + <grad phi', Y> S(grad mu, X).
inline Mat2 b_form(const GeometryField& g, const Potentials& p, std::size_t k) {
  const Vec2 gd1 = p.d2[k] * g.grad_mu[k];
  const Vec2 sg = g.shape[k] * g.grad_mu[k];
  return gd1 * sg.transpose() + sg * gd1.transpose();
}

/// Rough Laplacian of S on a profile, in the (T, E) frame.
inline std::vector<Mat2> profile_shape_laplacian(const GeometryField& g) {
  const std::size_t n = g.size();
  const ProfileCurve& c = g.profile();
  std::vector<double> a(n), b(n);
  for (std::size_t k = 0; k < n; ++k) {
    a[k] = g.shape[k](0, 0);
    b[k] = g.shape[k](1, 1);
  }
  const auto a1 = fd::d1(a, c.step), a2 = fd::d2(a, c.step);
  const auto b1 = fd::d1(b, c.step), b2 = fd::d2(b, c.step);
  std::vector<Mat2> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double cc = g.conn[k];
    const double tw = 2.0 * cc * cc * (a[k] - b[k]);
    out[k] << a2[k] + cc * a1[k] - tw, 0.0, 0.0, b2[k] + cc * b1[k] + tw;
  }
  return out;
}

}  // namespace detail

/// Residuals of the fundamental identities (items 1-8). Items 4, 7 and 8 differentiate
/// the shape operator twice and are available on profiles only.
///
/// In items 7 and 8 the symmetric form B enters with the sign given by the product rule
/// applied to H = -phi' eta:
///   Hess H = -eta Hess phi' - nabla_{grad phi} S - H S^[2] - B,
///   Delta S + nabla_{grad phi} S + eta Hess phi' + |S|^2 S + B = 0.
inline std::vector<ResidualReport> fundamental_identity_residuals(
    const GeometryField& g, const PotentialSpec& spec, const std::set<int>& items,
    double tol_input = std::numeric_limits<double>::infinity()) {
  for (int it : items)
    if (it < 1 || it > 8) throw Error(ErrorKind::Precondition, "surface_geometry", "identity items are 1..8");
  if (g.is_graph())
    for (int it : {4, 7, 8})
      if (items.count(it))
        throw Error(ErrorKind::UnsupportedCombination, "surface_geometry",
                    "item " + std::to_string(it) + " needs a profile source");
  if (std::isfinite(tol_input)) {
    const ResidualReport pm = phi_minimal_residual(g, spec);
    if (pm.max_abs_residual > tol_input)
      throw Error(ErrorKind::Precondition, "surface_geometry", "input is not phi-minimal within tolerance");
  }
  const std::size_t n = g.size();
  const auto P = detail::potentials(g, spec);
  const ScalarDerivs dmu = differentiate(g, g.mu);
  const ScalarDerivs deta = differentiate(g, g.eta);
  const auto hmu = detail::hess_mu(g, P, dmu);
  std::vector<ResidualReport> out;
  const int second = 2;

  for (int item : items) {
    std::vector<double> r(n, fd::nan);
    int margin = 1;
    switch (item) {
      case 1:
        margin = 1;
        for (std::size_t k = 0; k < n; ++k) {
          const double e1 = (dmu.grad[k] - g.grad_mu[k]).norm();
          const double e2 = (deta.grad[k] - g.shape[k] * g.grad_mu[k]).norm();
          r[k] = std::max(e1, e2);
        }
        break;
      case 2:
        for (std::size_t k = 0; k < n; ++k) {
          const double d = P.d1[k];
          r[k] = d * d - d * d * g.grad_mu[k].squaredNorm() - g.H[k] * g.H[k];
        }
        break;
      case 3:
        margin = second;
        for (std::size_t k = 0; k < n; ++k) r[k] = detail::frob(P.d1[k] * dmu.hess[k] - g.H[k] * g.shape[k]);
        break;
      case 4:
        margin = 3;
        for (std::size_t k = 0; k < n; ++k) {
          const Vec2& gm = g.grad_mu[k];
          const Mat2 dS = gm(0) * g.dshape[k][0] + gm(1) * g.dshape[k][1];
          const Mat2 s2 = g.shape[k] * g.shape[k];
          r[k] = detail::frob(deta.hess[k] - dS + g.eta[k] * s2);
        }
        break;
      case 5:
        margin = second;
        for (std::size_t k = 0; k < n; ++k) r[k] = dmu.lap[k] - P.d1[k] * (1.0 - g.grad_mu[k].squaredNorm());
        break;
      case 6: {
        margin = second;
        std::array<std::vector<double>, 3> comp;
        for (int c = 0; c < 3; ++c) {
          comp[c].resize(n);
          for (std::size_t k = 0; k < n; ++k) comp[c][k] = g.normal[k](c);
        }
        std::array<std::vector<double>, 3> lap;
        for (int c = 0; c < 3; ++c) {
          // On surfaces of revolution N_x = -sin(theta) cos(psi) and N_y vanishes on the meridian.
          const int mode = (g.rotational() && c < 2) ? 1 : 0;
          if (g.rotational() && c == 1) lap[c].assign(n, 0.0);
          else lap[c] = differentiate(g, comp[c], mode).lap;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const Vec3 dN(lap[0][k], lap[1][k], lap[2][k]);
          const double s2 = g.shape[k].squaredNorm();
          const Vec3 v = dN + P.d1[k] * g.ambient(k, deta.grad[k]) + P.d2[k] * g.eta[k] * g.ambient(k, g.grad_mu[k]) +
                         s2 * g.normal[k];
          r[k] = v.norm();
        }
        break;
      }
      case 7: {
        margin = 3;
        const ScalarDerivs dH = differentiate(g, g.H);
        for (std::size_t k = 0; k < n; ++k) {
          const Vec2 gphi = P.d1[k] * g.grad_mu[k];
          const Mat2 dS = gphi(0) * g.dshape[k][0] + gphi(1) * g.dshape[k][1];
          const Mat2 rhs = -g.eta[k] * detail::hess_d1(g, P, hmu, k) - dS - g.H[k] * g.shape[k] * g.shape[k] -
                           detail::b_form(g, P, k);
          r[k] = detail::frob(dH.hess[k] - rhs);
        }
        break;
      }
      case 8: {
        margin = 3;
        const auto lapS = detail::profile_shape_laplacian(g);
        for (std::size_t k = 0; k < n; ++k) {
          const Vec2 gphi = P.d1[k] * g.grad_mu[k];
          const Mat2 dS = gphi(0) * g.dshape[k][0] + gphi(1) * g.dshape[k][1];
          const Mat2 lhs = lapS[k] + dS + g.eta[k] * detail::hess_d1(g, P, hmu, k) +
                           g.shape[k].squaredNorm() * g.shape[k] + detail::b_form(g, P, k);
          r[k] = detail::frob(lhs);
        }
        break;
      }
    }
    if (item == 4 || item >= 6) detail::mask_axis(g, r);
    out.push_back(residual_norms(g, r, "item" + std::to_string(item), margin));
  }
  return out;
}

/// Evolution of the principal curvatures and the two J-operator identities, on profiles.
///
///   Delta^phi k_i = -|S|^2 k_i - eta Hess phi'(v_i, v_i) - B(v_i, v_i) + 2 (-1)^{i+1} Q^2 / (k1 - k2)
///   J^eta(k2/eta) = -phi''' <grad mu, v2>^2 + phi'' (k2/eta)(1 - 2 <grad mu, v2>^2) - (2/eta) Q^2/(k1 - k2)
///   J^{-k1}(eta/k1) = phi''' <grad mu, v1>^2 (eta/k1)^2 - phi'' (eta/k1)(1 - 2 <grad mu, v1>^2)
///                     - 2 (eta/k1) Q^2 / (k1 (k1 - k2))
/// with J^psi = Delta^phi + 2 <grad psi / psi, grad .>. Samples at umbilics, with eta <= 0
/// (J identities) or k1 >= 0 (last identity) are skipped.
inline std::vector<ResidualReport> curvature_evolution_residuals(const GeometryField& g, const PotentialSpec& spec) {
  if (!g.is_profile())
    throw Error(ErrorKind::UnsupportedCombination, "surface_geometry", "curvature evolution needs a profile source");
  const std::size_t n = g.size();
  bool any = false;
  for (std::size_t k = 0; k < n; ++k)
    if (g.interior(k, 3) && std::isfinite(g.k1[k]) && !g.umbilic[k]) any = true;
  if (!any) throw Error(ErrorKind::Umbilic, "surface_geometry", "no non-umbilic samples");

  const auto P = detail::potentials(g, spec);
  const ScalarDerivs dmu = differentiate(g, g.mu);
  const auto hmu = detail::hess_mu(g, P, dmu);
  std::vector<double> a(n), b(n), a_eta(n), b_eta(n), eta_a(n), eta_b(n);
  for (std::size_t k = 0; k < n; ++k) {
    a[k] = g.shape[k](0, 0);
    b[k] = g.shape[k](1, 1);
    a_eta[k] = a[k] / g.eta[k];
    b_eta[k] = b[k] / g.eta[k];
    eta_a[k] = g.eta[k] / a[k];
    eta_b[k] = g.eta[k] / b[k];
  }
  const ScalarDerivs Da = differentiate(g, a), Db = differentiate(g, b);
  const ScalarDerivs Dae = differentiate(g, a_eta), Dbe = differentiate(g, b_eta);
  const ScalarDerivs Dea = differentiate(g, eta_a), Deb = differentiate(g, eta_b);
  const ScalarDerivs Deta = differentiate(g, g.eta);
  const Vec2 T(1.0, 0.0), E(0.0, 1.0);

  std::vector<double> r1(n, fd::nan), r2(n, fd::nan), rj2(n, fd::nan), rj1(n, fd::nan);
  for (std::size_t k = 0; k < n; ++k) {
    if (g.umbilic[k] || !std::isfinite(g.q_squared[k])) continue;
    const bool a_first = a[k] <= b[k];
    const Vec2 v1 = a_first ? T : E, v2 = a_first ? E : T;
    const double k1 = a_first ? a[k] : b[k], k2 = a_first ? b[k] : a[k];
    const ScalarDerivs& D1 = a_first ? Da : Db;
    const ScalarDerivs& D2 = a_first ? Db : Da;
    const double q2 = g.q_squared[k];
    const double gap = k1 - k2;
    const Vec2 gphi = P.d1[k] * g.grad_mu[k];
    const Mat2 hd1 = detail::hess_d1(g, P, hmu, k);
    const Mat2 B = detail::b_form(g, P, k);
    const double s2 = g.shape[k].squaredNorm();

    const double lap1 = D1.lap[k] + gphi.dot(D1.grad[k]);
    const double lap2 = D2.lap[k] + gphi.dot(D2.grad[k]);
    r1[k] = lap1 - (-s2 * k1 - g.eta[k] * v1.dot(hd1 * v1) - v1.dot(B * v1) + 2.0 * q2 / gap);
    r2[k] = lap2 - (-s2 * k2 - g.eta[k] * v2.dot(hd1 * v2) - v2.dot(B * v2) - 2.0 * q2 / gap);

    const double m1 = g.grad_mu[k].dot(v1), m2 = g.grad_mu[k].dot(v2);
    if (g.eta[k] > 0.0) {
      const ScalarDerivs& Df = a_first ? Dbe : Dae;  // k2 / eta
      const double f = k2 / g.eta[k];
      const Vec2 drift = gphi + 2.0 * Deta.grad[k] / g.eta[k];
      const double J = Df.lap[k] + drift.dot(Df.grad[k]);
      const double rhs = -P.d3[k] * m2 * m2 + P.d2[k] * f * (1.0 - 2.0 * m2 * m2) - 2.0 / g.eta[k] * q2 / gap;
      rj2[k] = J - rhs;
      if (k1 < 0.0) {
        const ScalarDerivs& Dg = a_first ? Dea : Deb;  // eta / k1
        const double f1 = g.eta[k] / k1;
        const Vec2 drift1 = gphi + 2.0 * D1.grad[k] / k1;
        const double J1 = Dg.lap[k] + drift1.dot(Dg.grad[k]);
        const double rhs1 = P.d3[k] * m1 * m1 * f1 * f1 - P.d2[k] * f1 * (1.0 - 2.0 * m1 * m1) -
                            2.0 * f1 * q2 / (k1 * gap);
        rj1[k] = J1 - rhs1;
      }
    }
  }
  for (auto* r : {&r1, &r2, &rj2, &rj1}) detail::mask_axis(g, *r);
  return {residual_norms(g, r1, "evolution_k1", 3), residual_norms(g, r2, "evolution_k2", 3),
          residual_norms(g, rj2, "J_eta_k2_over_eta", 3), residual_norms(g, rj1, "J_minus_k1_eta_over_k1", 3)};
}

}  // namespace phimin
