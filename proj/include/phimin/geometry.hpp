#pragma once

// Per-sample geometry of profiles and graph patches, and the intrinsic calculus
// (gradient, Hessian, Laplacian) of scalar fields sampled on them.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Eigenvalues>

#include "phimin/parallel.hpp"
#include "phimin/potential.hpp"
#include "phimin/surface.hpp"

namespace phimin {

namespace fd {

constexpr double nan = std::numeric_limits<double>::quiet_NaN();

/// First derivative on a uniform 1-D grid; second order, one-sided at the ends.
inline std::vector<double> d1(const std::vector<double>& f, double h) {
  const std::size_t n = f.size();
  std::vector<double> d(n, nan);
  if (n < 3) return d;
  for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
  d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
  d[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h);
  return d;
}

/// Second derivative on a uniform 1-D grid; second order, one-sided at the ends.
inline std::vector<double> d2(const std::vector<double>& f, double h) {
  const std::size_t n = f.size();
  std::vector<double> d(n, nan);
  if (n < 4) return d;
  const double h2 = h * h;
  for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (f[i + 1] - 2.0 * f[i] + f[i - 1]) / h2;
  d[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / h2;
  d[n - 1] = (2.0 * f[n - 1] - 5.0 * f[n - 2] + 4.0 * f[n - 3] - f[n - 4]) / h2;
  return d;
}

/// Central differences of a grid function stored row-major (index i * ny + j).
/// Boundary nodes get NaN.
struct GridDerivs {
  std::vector<double> x, y, xx, xy, yy;
};

inline GridDerivs grid_derivs(const std::vector<double>& f, int nx, int ny, double h) {
  const std::size_t n = static_cast<std::size_t>(nx) * ny;
  GridDerivs d{std::vector<double>(n, nan), std::vector<double>(n, nan), std::vector<double>(n, nan),
               std::vector<double>(n, nan), std::vector<double>(n, nan)};
  auto at = [&](int i, int j) { return f[static_cast<std::size_t>(i) * ny + j]; };
  const double h2 = h * h;
  parallel_for(static_cast<std::size_t>(nx), [&](std::size_t ii) {
    const int i = static_cast<int>(ii);
    if (i == 0 || i == nx - 1) return;
    for (int j = 1; j < ny - 1; ++j) {
      const std::size_t k = static_cast<std::size_t>(i) * ny + j;
      d.x[k] = (at(i + 1, j) - at(i - 1, j)) / (2.0 * h);
      d.y[k] = (at(i, j + 1) - at(i, j - 1)) / (2.0 * h);
      d.xx[k] = (at(i + 1, j) - 2.0 * at(i, j) + at(i - 1, j)) / h2;
      d.yy[k] = (at(i, j + 1) - 2.0 * at(i, j) + at(i, j - 1)) / h2;
      d.xy[k] = (at(i + 1, j + 1) - at(i + 1, j - 1) - at(i - 1, j + 1) + at(i - 1, j - 1)) / (4.0 * h2);
    }
  });
  return d;
}

}  // namespace fd

/// Gradient (frame components), Hessian (frame components) and Laplacian of a scalar field.
struct ScalarDerivs {
  std::vector<Vec2> grad;
  std::vector<Mat2> hess;
  std::vector<double> lap;
};

/// Differentiates f on the surface. On rotational profiles `mode` = 1 treats f as the
/// meridian trace of f(s) cos(psi); other representations ignore it.
inline ScalarDerivs differentiate(const GeometryField& g, const std::vector<double>& f, int mode = 0) {
  const std::size_t n = g.size();
  if (f.size() != n) throw Error(ErrorKind::Precondition, "surface_geometry", "field size mismatch");
  ScalarDerivs d;
  d.grad.assign(n, Vec2::Constant(fd::nan));
  d.hess.assign(n, Mat2::Constant(fd::nan));
  d.lap.assign(n, fd::nan);
  if (g.is_profile()) {
    const ProfileCurve& c = g.profile();
    const auto f1 = fd::d1(f, c.step);
    const auto f2 = fd::d2(f, c.step);
    const bool rot = c.kind == ProfileKind::Rotational;
    for (std::size_t k = 0; k < n; ++k) {
      const double x = c.samples[k].x;
      double ee = 0.0;
      if (rot) {
        if (x == 0.0) ee = mode == 0 ? f2[k] : fd::nan;
        else ee = g.conn[k] * f1[k] - (mode == 1 ? f[k] / (x * x) : 0.0);
      }
      d.grad[k] = Vec2(f1[k], 0.0);
      d.hess[k] << f2[k], 0.0, 0.0, ee;
      d.lap[k] = f2[k] + ee;
    }
    return d;
  }
  const GraphPatch& p = g.graph();
  const auto fd2 = fd::grid_derivs(f, p.nx(), p.ny(), p.h);
  parallel_for(n, [&](std::size_t k) {
    const Vec2 df(fd2.x[k], fd2.y[k]);
    Mat2 hc;
    hc << fd2.xx[k], fd2.xy[k], fd2.xy[k], fd2.yy[k];
    const Vec2& du = g.du[k];
    const double w2 = 1.0 + du.squaredNorm();
    hc -= g.ddu[k] * (du.dot(df) / w2);
    const Mat2& P = g.frame_coeffs[k];
    d.grad[k] = P * df;
    d.hess[k] = P * hc * P.transpose();
    d.lap[k] = d.hess[k].trace();
  });
  return d;
}

/// Principal curvatures and directions, the alpha coefficients of the principal frame and
/// both expressions of Q^2. Points with |k1 - k2| <= threshold are flagged umbilic and get
/// NaN alphas. A negative threshold selects 1e-8 max|S|.
inline void principal_frame(GeometryField& g, double umbilic_threshold = -1.0) {
  const std::size_t n = g.size();
  if (umbilic_threshold < 0.0) {
    double smax = 0.0;
    for (const Mat2& s : g.shape)
      if (s.allFinite()) smax = std::max(smax, s.norm());
    umbilic_threshold = 1e-8 * smax;
  }
  g.umbilic_threshold = umbilic_threshold;
  g.v1.assign(n, Vec2::Constant(fd::nan));
  g.v2.assign(n, Vec2::Constant(fd::nan));
  g.alpha1.assign(n, fd::nan);
  g.alpha2.assign(n, fd::nan);
  g.q_squared.assign(n, fd::nan);
  g.q_squared_alt.assign(n, fd::nan);
  g.umbilic.assign(n, 0);
  for (std::size_t k = 0; k < n; ++k) {
    const Mat2& s = g.shape[k];
    if (!s.allFinite()) continue;
    Eigen::SelfAdjointEigenSolver<Mat2> es(s);
    const Mat2 V = es.eigenvectors();
    g.k1[k] = es.eigenvalues()(0);
    g.k2[k] = es.eigenvalues()(1);
    g.v1[k] = V.col(0);
    g.v2[k] = V.col(1);
    const double gap = g.k1[k] - g.k2[k];
    g.umbilic[k] = std::abs(gap) <= umbilic_threshold;
    const auto& ds = g.dshape[k];
    if (!ds[0].allFinite() || !ds[1].allFinite()) continue;
    // h(i, j, c) = (nabla_{v_c} S)(v_i, v_j)
    auto hijk = [&](int i, int j, int c) {
      const Mat2 d = V(0, c) * ds[0] + V(1, c) * ds[1];
      return V.col(i).dot(d * V.col(j));
    };
    const double h121 = hijk(0, 1, 0), h122 = hijk(0, 1, 1);
    const double h112 = hijk(0, 0, 1), h221 = hijk(1, 1, 0);
    g.q_squared[k] = h121 * h121 + h122 * h122;
    g.q_squared_alt[k] = h112 * h112 + h221 * h221;
    if (!g.umbilic[k]) {
      g.alpha1[k] = h121 / gap;
      g.alpha2[k] = h122 / gap;
    }
  }
}

namespace detail {

inline void allocate(GeometryField& g, std::size_t n) {
  const Vec3 v3 = Vec3::Constant(fd::nan);
  g.position.assign(n, v3);
  g.normal.assign(n, v3);
  g.frame1.assign(n, v3);
  g.frame2.assign(n, v3);
  g.mu.assign(n, fd::nan);
  g.eta.assign(n, fd::nan);
  g.grad_mu.assign(n, Vec2::Constant(fd::nan));
  g.shape.assign(n, Mat2::Constant(fd::nan));
  g.H.assign(n, fd::nan);
  g.K.assign(n, fd::nan);
  g.k1.assign(n, fd::nan);
  g.k2.assign(n, fd::nan);
  g.dshape.assign(n, {Mat2::Constant(fd::nan), Mat2::Constant(fd::nan)});
  g.area.assign(n, fd::nan);
}

inline void check_heights(const std::vector<double>& z, const PotentialSpec& spec) {
  for (double v : z)
    if (!(v > spec.alpha))
      throw Error(ErrorKind::Domain, "surface_geometry", "sample height outside the potential domain");
}

inline GeometryField profile_geometry(const ProfileCurve& c) {
  const std::size_t n = c.size();
  if (n < 4) throw Error(ErrorKind::Stencil, "surface_geometry", "profile needs at least 4 samples");
  if (!(c.step > 0.0)) throw Error(ErrorKind::Precondition, "surface_geometry", "profile step must be positive");
  const bool rot = c.kind == ProfileKind::Rotational;
  GeometryField g;
  g.source = c;
  g.h = c.step;
  allocate(g, n);
  g.conn.assign(n, 0.0);

  std::vector<double> theta(n);
  for (std::size_t k = 0; k < n; ++k) theta[k] = c.samples[k].theta;
  const auto dtheta = fd::d1(theta, c.step);

  std::vector<double> a(n), b(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& p = c.samples[k];
    const double ct = std::cos(p.theta), st = std::sin(p.theta);
    if (rot) {
      if (p.x < 0.0) throw Error(ErrorKind::AxisSingularity, "surface_geometry", "negative radius");
      if (p.x == 0.0 && std::abs(st) > 1e-9)
        throw Error(ErrorKind::AxisSingularity, "surface_geometry", "curve meets the axis at a non-axis angle");
    }
    g.position[k] = Vec3(p.x, 0.0, p.z);
    g.frame1[k] = Vec3(ct, 0.0, st);
    g.frame2[k] = Vec3(0.0, 1.0, 0.0);
    g.normal[k] = Vec3(-st, 0.0, ct);
    g.mu[k] = p.z;
    g.eta[k] = ct;
    g.grad_mu[k] = Vec2(st, 0.0);
    a[k] = -dtheta[k];
    if (rot) {
      b[k] = p.x == 0.0 ? a[k] : -st / p.x;
      g.conn[k] = p.x == 0.0 ? fd::nan : ct / p.x;
    } else {
      b[k] = 0.0;
    }
    g.shape[k] << a[k], 0.0, 0.0, b[k];
    g.H[k] = a[k] + b[k];
    g.K[k] = a[k] * b[k];
    g.k1[k] = std::min(a[k], b[k]);
    g.k2[k] = std::max(a[k], b[k]);
    g.area[k] = (rot ? 2.0 * M_PI * p.x : 1.0) * c.step;
  }
  g.area.front() *= 0.5;
  g.area.back() *= 0.5;
  if (rot && c.samples.front().x == 0.0) g.area.front() = M_PI * std::pow(0.5 * c.step, 2);

  const auto da = fd::d1(a, c.step);
  const auto db = fd::d1(b, c.step);
  for (std::size_t k = 0; k < n; ++k) {
    const double off = rot ? g.conn[k] * (a[k] - b[k]) : 0.0;
    g.dshape[k][0] << da[k], 0.0, 0.0, db[k];
    g.dshape[k][1] << 0.0, off, off, 0.0;
  }
  return g;
}

inline GeometryField graph_geometry(const GraphPatch& p) {
  const int nx = p.nx(), ny = p.ny();
  if (nx < 5 || ny < 5) throw Error(ErrorKind::Stencil, "surface_geometry", "graph patch needs at least 5x5 nodes");
  if (!p.u.allFinite()) throw Error(ErrorKind::Precondition, "surface_geometry", "graph heights must be finite");
  const std::size_t n = static_cast<std::size_t>(nx) * ny;
  GeometryField g;
  g.source = p;
  g.h = p.h;
  allocate(g, n);
  g.frame_coeffs.assign(n, Mat2::Constant(fd::nan));
  g.du.assign(n, Vec2::Constant(fd::nan));
  g.ddu.assign(n, Mat2::Constant(fd::nan));

  std::vector<double> uf(n);
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j) uf[p.index(i, j)] = p.u(i, j);
  const auto d = fd::grid_derivs(uf, nx, ny, p.h);

  // Coordinate second fundamental form II_ij = -u_ij / W, kept for its derivatives.
  std::vector<double> IIxx(n, fd::nan), IIxy(n, fd::nan), IIyy(n, fd::nan);
  parallel_for(n, [&](std::size_t k) {
    const int i = static_cast<int>(k / ny), j = static_cast<int>(k % ny);
    g.position[k] = Vec3(p.x(i), p.y(j), p.u(i, j));
    g.mu[k] = p.u(i, j);
    if (!std::isfinite(d.x[k])) return;
    const double ux = d.x[k], uy = d.y[k];
    const double W = std::sqrt(1.0 + ux * ux + uy * uy);
    const double gxx = 1.0 + ux * ux;
    Mat2 P;
    P << 1.0 / std::sqrt(gxx), 0.0, -ux * uy / (std::sqrt(gxx) * W), std::sqrt(gxx) / W;
    Mat2 hu;
    hu << d.xx[k], d.xy[k], d.xy[k], d.yy[k];
    const Vec3 dx(1.0, 0.0, ux), dy(0.0, 1.0, uy);
    g.frame_coeffs[k] = P;
    g.du[k] = Vec2(ux, uy);
    g.ddu[k] = hu;
    g.frame1[k] = P(0, 0) * dx + P(0, 1) * dy;
    g.frame2[k] = P(1, 0) * dx + P(1, 1) * dy;
    g.normal[k] = Vec3(-ux, -uy, 1.0) / W;
    g.eta[k] = 1.0 / W;
    g.grad_mu[k] = Vec2(g.frame1[k](2), g.frame2[k](2));
    const Mat2 II = -hu / W;
    IIxx[k] = II(0, 0);
    IIxy[k] = II(0, 1);
    IIyy[k] = II(1, 1);
    g.shape[k] = P * II * P.transpose();
    g.H[k] = g.shape[k].trace();
    g.K[k] = g.shape[k].determinant();
    g.area[k] = W * p.h * p.h;
  });

  const auto dxx = fd::grid_derivs(IIxx, nx, ny, p.h);
  const auto dxy = fd::grid_derivs(IIxy, nx, ny, p.h);
  const auto dyy = fd::grid_derivs(IIyy, nx, ny, p.h);
  parallel_for(n, [&](std::size_t k) {
    if (!std::isfinite(dxx.x[k])) return;
    const Vec2& du = g.du[k];
    const double w2 = 1.0 + du.squaredNorm();
    Mat2 II;
    II << IIxx[k], IIxy[k], IIxy[k], IIyy[k];
    // Gamma^l_{ki} = u_l u_{ki} / W^2
    std::array<Mat2, 2> cov;
    for (int c = 0; c < 2; ++c) {
      Mat2 dII;
      if (c == 0) dII << dxx.x[k], dxy.x[k], dxy.x[k], dyy.x[k];
      else dII << dxx.y[k], dxy.y[k], dxy.y[k], dyy.y[k];
      const Vec2 gam = g.ddu[k].row(c).transpose() / w2;  // u_{c i} / W^2 for i = 0, 1
      const Vec2 uII = II.transpose() * du;  // sum_l u_l II_{l j}
      cov[c] = dII - gam * uII.transpose() - uII * gam.transpose();
    }
    const Mat2& P = g.frame_coeffs[k];
    for (int a = 0; a < 2; ++a)
      g.dshape[k][a] = P * (P(a, 0) * cov[0] + P(a, 1) * cov[1]) * P.transpose();
  });
  return g;
}

}  // namespace detail

/// Geometry fields of a profile or graph patch; principal frame with the default umbilic
/// threshold is included.
inline GeometryField sample_geometry(const Surface& surface, const PotentialSpec& spec) {
  GeometryField g = std::visit(
      [](const auto& s) -> GeometryField {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, ProfileCurve>) return detail::profile_geometry(s);
        else return detail::graph_geometry(s);
      },
      surface);
  detail::check_heights(g.mu, spec);
  principal_frame(g);
  return g;
}

/// Delta f + <grad psi, grad f>.
inline std::vector<double> drift_laplacian(const GeometryField& g, const std::vector<double>& f,
                                           const std::vector<double>& psi) {
  const ScalarDerivs df = differentiate(g, f);
  const ScalarDerivs dp = differentiate(g, psi);
  std::vector<double> out(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) out[k] = df.lap[k] + dp.grad[k].dot(df.grad[k]);
  return out;
}

/// phi(mu) per sample.
inline std::vector<double> phi_of_mu(const GeometryField& g, const PotentialSpec& spec) {
  std::vector<double> out(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) out[k] = eval_potential(spec, g.mu[k]).phi;
  return out;
}

}  // namespace phimin
