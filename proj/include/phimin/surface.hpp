#pragma once

// Discrete surfaces: meridian/cross-section profiles and height-field patches.

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "phimin/error.hpp"
#include "phimin/types.hpp"

namespace phimin {

enum class ProfileKind { Rotational, TranslationInvariant };

struct ProfileSample {
  double s = 0.0;
  double x = 0.0;
  double z = 0.0;
  double theta = 0.0;
};

/// Arclength-parametrised curve (x(s), z(s)) with tangent angle theta and a uniform step.
///
/// Rotational: the surface of revolution of the curve about the z-axis, x is the radius.
/// TranslationInvariant: the cylinder over the curve in the e2 direction.
struct ProfileCurve {
  std::vector<ProfileSample> samples;
  ProfileKind kind = ProfileKind::Rotational;
  double step = 0.0;

  std::size_t size() const { return samples.size(); }
};

struct Rect {
  double x0 = -1.0;
  double x1 = 1.0;
  double y0 = -1.0;
  double y1 = 1.0;
};

/// Height field u(i, j) = u(x0 + i h, y0 + j h) with Dirichlet boundary rows.
struct GraphPatch {
  Rect domain;
  double h = 0.0;
  Eigen::MatrixXd u;

  int nx() const { return static_cast<int>(u.rows()); }
  int ny() const { return static_cast<int>(u.cols()); }
  double x(int i) const { return domain.x0 + i * h; }
  double y(int j) const { return domain.y0 + j * h; }
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(i) * ny() + j; }

  /// Grid of (x1 - x0)/h + 1 by (y1 - y0)/h + 1 nodes, zero heights.
  static GraphPatch zeros(const Rect& r, double h) {
    const auto cells = [h](double a, double b) {
      const double n = (b - a) / h;
      const long k = std::lround(n);
      if (k < 1 || std::abs(n - k) > 1e-9 * std::max(1.0, n))
        throw Error(ErrorKind::Precondition, "surface_geometry", "h must divide the domain sides");
      return static_cast<int>(k);
    };
    GraphPatch g;
    g.domain = r;
    g.h = h;
    g.u = Eigen::MatrixXd::Zero(cells(r.x0, r.x1) + 1, cells(r.y0, r.y1) + 1);
    return g;
  }
};

using Surface = std::variant<ProfileCurve, GraphPatch>;

/// Per-sample geometry. Entries are NaN where a stencil is incomplete.
///
/// Vectors in the tangent plane are stored by components in the frame (frame1, frame2).
/// Profiles: frame1 = T = (cos theta, 0, sin theta), frame2 = e2, evaluated on the
/// meridian y = 0. Graphs: Gram-Schmidt of the coordinate vectors d/dx, d/dy.
struct GeometryField {
  Surface source;
  double h = 0.0;

  std::vector<Vec3> position;
  std::vector<Vec3> normal;
  std::vector<Vec3> frame1;
  std::vector<Vec3> frame2;
  std::vector<double> mu;
  std::vector<double> eta;
  std::vector<Vec2> grad_mu;
  std::vector<Mat2> shape;
  std::vector<double> H;
  std::vector<double> K;
  std::vector<double> k1;
  std::vector<double> k2;
  /// dshape[i][a](b, c) = (nabla_{e_a} S)(e_b, e_c).
  std::vector<std::array<Mat2, 2>> dshape;
  /// Surface area element per sample: 2 pi x ds (rotational), ds per unit length
  /// (translation-invariant), sqrt(g) h^2 (graphs).
  std::vector<double> area;

  // Filled by principal_frame.
  std::vector<Vec2> v1;
  std::vector<Vec2> v2;
  std::vector<double> alpha1;
  std::vector<double> alpha2;
  std::vector<double> q_squared;
  std::vector<double> q_squared_alt;
  std::vector<unsigned char> umbilic;
  double umbilic_threshold = 0.0;

  // Representation-specific data used by the calculus.
  std::vector<double> conn;  // profiles: cos(theta)/x for rotational, 0 otherwise
  std::vector<Mat2> frame_coeffs;  // graphs: e_a = sum_i P(a, i) d_i
  std::vector<Vec2> du;  // graphs: (u_x, u_y)
  std::vector<Mat2> ddu;  // graphs: coordinate Hessian of u

  std::size_t size() const { return position.size(); }
  bool is_profile() const { return std::holds_alternative<ProfileCurve>(source); }
  bool is_graph() const { return std::holds_alternative<GraphPatch>(source); }
  const ProfileCurve& profile() const { return std::get<ProfileCurve>(source); }
  const GraphPatch& graph() const { return std::get<GraphPatch>(source); }
  bool rotational() const { return is_profile() && profile().kind == ProfileKind::Rotational; }

  /// True when sample k lies at least `margin` samples away from the boundary.
  bool interior(std::size_t k, int margin) const {
    if (is_profile()) {
      const auto n = static_cast<long>(size());
      const auto i = static_cast<long>(k);
      return i >= margin && i < n - margin;
    }
    const GraphPatch& g = graph();
    const int i = static_cast<int>(k / g.ny());
    const int j = static_cast<int>(k % g.ny());
    return i >= margin && j >= margin && i < g.nx() - margin && j < g.ny() - margin;
  }

  /// Ambient vector of frame components w.
  Vec3 ambient(std::size_t k, const Vec2& w) const { return w(0) * frame1[k] + w(1) * frame2[k]; }
};

struct ResidualReport {
  std::string identity_name;
  double max_abs_residual = 0.0;
  double l2_residual = 0.0;
  double grid_h = 0.0;
  int interior_margin = 0;
  std::size_t sample_count = 0;
};

/// Max and root-mean-square of |r| over finite entries at interior samples, summed in
/// index order.
inline ResidualReport residual_norms(const GeometryField& f, const std::vector<double>& r,
                                     std::string name, int margin) {
  ResidualReport rep;
  rep.identity_name = std::move(name);
  rep.grid_h = f.h;
  rep.interior_margin = margin;
  double sum = 0.0;
  for (std::size_t k = 0; k < r.size(); ++k) {
    if (!f.interior(k, margin) || !std::isfinite(r[k])) continue;
    const double a = std::abs(r[k]);
    rep.max_abs_residual = std::max(rep.max_abs_residual, a);
    sum += a * a;
    ++rep.sample_count;
  }
  rep.l2_residual = rep.sample_count ? std::sqrt(sum / static_cast<double>(rep.sample_count)) : 0.0;
  return rep;
}

}  // namespace phimin
