#pragma once

// Geometry of the conformal space (R^2 x I, e^phi <.,.>) for a height potential.
//
// Frame indices are 0-based; index 2 is the vertical direction e3.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <variant>

#include <Eigen/Eigenvalues>

#include "phimin/potential.hpp"
#include "phimin/types.hpp"

namespace phimin {

using Array3 = std::array<std::array<double, 3>, 3>;
using Array333 = std::array<Array3, 3>;

struct FrameQuantities {
  double z = 0.0;
  /// connection[i][j][k] = <D_{e_i} e_j, e_k> in the conformal orthonormal frame.
  Array333 connection{};
  /// Sectional curvature of the plane spanned by e_i, e_j (i != j); diagonal is unused.
  Array3 sectional{};
  /// e3-component of the conformal gradient of sectional(i, j), in the scaling
  /// e^phi * d/dz sectional(i, j).
  Array3 curvature_gradient_e3{};
};

/// Closed-form connection coefficients, sectional curvatures and curvature gradient.
///
/// The sectional curvature of a plane depends only on whether it contains e3, so the
/// Kronecker factor of the closed form is applied to the plane, not to the first slot.
inline FrameQuantities frame_quantities(const PotentialSpec& spec, double z) {
  const PotentialEval p = eval_potential(spec, z);
  FrameQuantities q;
  q.z = z;
  const double conn = 0.5 * std::exp(-0.5 * p.phi) * p.d1;
  auto delta = [](int a, int b) { return a == b ? 1.0 : 0.0; };
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        q.connection[i][j][k] = conn * (delta(2, j) * delta(i, k) - delta(i, j) * delta(2, k));

  const double em = std::exp(-p.phi);
  const double d1sq = p.d1 * p.d1;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      if (i == j) continue;
      const double vertical = (i == 2 || j == 2) ? 1.0 : 0.0;
      q.sectional[i][j] = 0.25 * em * ((d1sq - 2.0 * p.d2) * vertical - d1sq);
      q.curvature_gradient_e3[i][j] =
          0.25 * (d1sq * p.d1 - (d1sq * p.d1 - 2.0 * p.d1 * p.d2) * vertical +
                  2.0 * (p.d1 * p.d2 - p.d3) * vertical - 2.0 * p.d1 * p.d2);
    }
  }
  return q;
}

/// Supremum of |sectional curvature| and of the metric norm of its gradient at height z.
struct CurvatureBounds {
  double sectional_abs = 0.0;
  double gradient_norm = 0.0;
};

inline CurvatureBounds curvature_bounds(const PotentialSpec& spec, double z) {
  const FrameQuantities q = frame_quantities(spec, z);
  const double phi = eval_potential(spec, z).phi;
  CurvatureBounds b;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      if (i == j) continue;
      b.sectional_abs = std::max(b.sectional_abs, std::abs(q.sectional[i][j]));
      // |grad^phi K|_phi = e^{-phi/2} |dK/dz| and the stored scalar is e^phi dK/dz.
      b.gradient_norm =
          std::max(b.gradient_norm, std::exp(-1.5 * phi) * std::abs(q.curvature_gradient_e3[i][j]));
    }
  return b;
}

struct BoundedGeometryReport {
  double sup_quantity = 0.0;
  double argsup = 0.0;
  bool stabilized = false;
  bool tail_bounded = false;
  bool bounded = false;
  bool complete_hint = false;
};

namespace detail {

// Whether e^{-phi} max(phi'^2, phi'') stays bounded towards the ends of the domain.
inline bool bounded_geometry_tail(const PotentialSpec& spec) {
  return std::visit(
      [&](const auto& f) -> bool {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, ConstantFamily>) {
          return true;
        } else if constexpr (std::is_same_v<F, LinearFamily>) {
          // e^{-s z} s^2: bounded at +inf iff s >= 0; at a finite alpha always bounded.
          return f.slope >= 0.0 || (std::isfinite(spec.alpha) && f.slope == 0.0);
        } else if constexpr (std::is_same_v<F, QuadraticFamily>) {
          if (f.lambda > 0.0) return true;
          if (f.lambda < 0.0) return false;
          return f.beta >= 0.0;
        } else if constexpr (std::is_same_v<F, LogPowerFamily>) {
          // e^{-phi} max(...) = c z^{-a-2}: bounded at +inf iff a >= -2, at 0+ iff a <= -2.
          if (f.a == 0.0) return true;
          const bool upper = f.a >= -2.0;
          const bool lower = spec.alpha > 0.0 || f.a <= -2.0;
          return upper && lower;
        } else {
          if (f.lambda > 0.0) return true;
          if (f.lambda < 0.0) return false;
          if (f.beta != 0.0) return f.beta > 0.0;
          // Leading 1/u term behaves like LogPower(c1) at +inf.
          const double c1 = f.coeffs.empty() ? 0.0 : f.coeffs.front();
          return c1 >= -2.0;
        }
      },
      spec.family);
}

}  // namespace detail

/// Samples e^{-phi} max(phi'^2, phi'') on [z_lo, z_hi] at n and 2n points and combines
/// the result with the family's behaviour at the ends of its domain.
inline BoundedGeometryReport bounded_geometry_check(const PotentialSpec& spec, double z_lo,
                                                    double z_hi, int n) {
  if (!(spec.alpha < z_lo && z_lo < z_hi) || n < 2)
    throw Error(ErrorKind::Domain, "ilmanen", "bounded_geometry_check needs alpha < z_lo < z_hi");
  auto quantity = [&](double z) {
    const PotentialEval p = eval_potential(spec, z);
    return std::exp(-p.phi) * std::max(p.d1 * p.d1, p.d2);
  };
  auto sup_at = [&](int count, double* where) {
    double best = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < count; ++k) {
      const double z = z_lo + (z_hi - z_lo) * k / (count - 1);
      const double v = quantity(z);
      if (v > best) {
        best = v;
        if (where) *where = z;
      }
    }
    return best;
  };
  BoundedGeometryReport r;
  const double coarse = sup_at(n, nullptr);
  r.sup_quantity = sup_at(2 * n - 1, &r.argsup);
  r.stabilized = std::isfinite(r.sup_quantity) &&
                 std::abs(r.sup_quantity - coarse) <= 1e-3 * std::max(1.0, std::abs(r.sup_quantity));
  r.tail_bounded = detail::bounded_geometry_tail(spec);
  r.bounded = r.stabilized && r.tail_bounded;

  // Completeness hint: phi positive on the upper tenth of the sampled range.
  r.complete_hint = true;
  for (int k = 0; k <= 10; ++k) {
    const double z = z_hi - 0.1 * (z_hi - z_lo) * k / 10.0;
    if (!(eval_potential(spec, z).phi > 0.0)) r.complete_hint = false;
  }
  return r;
}

/// Second fundamental form, principal and mean curvature of a surface seen in the
/// conformal space, given its Euclidean shape operator in an orthonormal frame.
struct ConformalShape {
  Mat2 s_phi = Mat2::Zero();
  double k1_phi = 0.0;
  double k2_phi = 0.0;
  double h_phi = 0.0;
};

inline ConformalShape to_ilmanen_shape(const PotentialSpec& spec, double z, const Mat2& s_euclidean,
                                       double eta) {
  if (std::abs(eta) > 1.0 + 1e-12)
    throw Error(ErrorKind::Domain, "ilmanen", "|eta| exceeds 1");
  const PotentialEval p = eval_potential(spec, z);
  const double shift = 0.5 * p.d1 * eta;
  ConformalShape c;
  c.s_phi = std::exp(0.5 * p.phi) * (s_euclidean + shift * Mat2::Identity());
  Eigen::SelfAdjointEigenSolver<Mat2> es(s_euclidean, Eigen::EigenvaluesOnly);
  const double scale = std::exp(-0.5 * p.phi);
  c.k1_phi = scale * (es.eigenvalues()(0) + shift);
  c.k2_phi = scale * (es.eigenvalues()(1) + shift);
  c.h_phi = scale * (s_euclidean.trace() + p.d1 * eta);
  return c;
}

}  // namespace phimin
