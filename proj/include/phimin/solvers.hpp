#pragma once

// Construction of phi-minimal surfaces: profile shooting and the graph equation.

#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "phimin/geometry.hpp"
#include "phimin/potential.hpp"
#include "phimin/surface.hpp"

namespace phimin {

/// Regular start on the axis at height z0 (rotational profiles only).
struct AxisRegular {
  double z0 = 0.0;
};

/// Start at (x0, z0) with tangent angle theta0.
struct PointStart {
  double x0 = 0.0;
  double z0 = 0.0;
  double theta0 = 0.0;
};

struct ShootingConfig {
  std::variant<AxisRegular, PointStart> start = AxisRegular{};
  double s_max = 1.0;
  double step = 1e-3;
  /// Backward extent for point starts; the curve covers [s_min, s_max].
  double s_min = 0.0;
  int integrator_order = 4;

  void validate() const {
    if (!(step > 0.0)) throw Error(ErrorKind::Precondition, "solvers", "step must be positive");
    if (!(s_max > step)) throw Error(ErrorKind::Precondition, "solvers", "s_max must exceed step");
    if (s_min > 0.0) throw Error(ErrorKind::Precondition, "solvers", "s_min must be <= 0");
    if (integrator_order != 4) throw Error(ErrorKind::Precondition, "solvers", "only order 4 is available");
    if (std::holds_alternative<AxisRegular>(start) && s_min != 0.0)
      throw Error(ErrorKind::Precondition, "solvers", "axis starts integrate forward only");
  }
};

struct Paraboloid {
  double a = 0.0;
};

enum class InitialGuessKind { Zero, Paraboloid, Supplied };

struct NewtonConfig {
  double tol_residual = 1e-10;
  int max_iters = 50;
  double damping = 1.0;
  InitialGuessKind initial_guess = InitialGuessKind::Zero;
  double paraboloid_a = 0.0;
  Eigen::MatrixXd supplied;
};

struct SolveResult {
  Surface surface;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string diagnostics;
};

namespace detail {

using State = std::array<double, 3>;  // x, z, theta

inline State axpy(const State& y, double a, const State& k) {
  return {y[0] + a * k[0], y[1] + a * k[1], y[2] + a * k[2]};
}

template <class Rhs>
State rk4_step(const Rhs& f, const State& y, double h) {
  const State k1 = f(y);
  const State k2 = f(axpy(y, 0.5 * h, k1));
  const State k3 = f(axpy(y, 0.5 * h, k2));
  const State k4 = f(axpy(y, h, k3));
  State out;
  for (int i = 0; i < 3; ++i) out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return out;
}

inline double profile_d1(const PotentialSpec& spec, double z) {
  if (!(z > spec.alpha))
    throw Error(ErrorKind::DomainExit, "solvers", "profile left the potential domain at z=" + std::to_string(z));
  try {
    return eval_potential(spec, z).d1;
  } catch (const Error& e) {
    throw Error(ErrorKind::DomainExit, "solvers", e.what());
  }
}

inline std::vector<State> integrate(const PotentialSpec& spec, ProfileKind kind, State y, double h, long steps) {
  const bool rot = kind == ProfileKind::Rotational;
  auto f = [&](const State& s) -> State {
    const double ct = std::cos(s[2]), st = std::sin(s[2]);
    double dtheta = profile_d1(spec, s[1]) * ct;
    if (rot) {
      if (!(s[0] > 0.0))
        throw Error(ErrorKind::AxisCollision, "solvers", "profile reached the axis away from a regular point");
      dtheta -= st / s[0];
    }
    return {ct, st, dtheta};
  };
  std::vector<State> out;
  out.reserve(static_cast<std::size_t>(steps) + 1);
  out.push_back(y);
  for (long k = 0; k < steps; ++k) {
    y = rk4_step(f, y, h);
    if (!std::isfinite(y[0]) || !std::isfinite(y[1]) || !std::isfinite(y[2]))
      throw Error(ErrorKind::DomainExit, "solvers", "profile integration produced a non-finite state");
    if (rot && y[0] <= 0.0) {
      const double sn = std::abs(std::sin(y[2]));
      if (sn > 1e-6) throw Error(ErrorKind::AxisCollision, "solvers", "profile reached the axis at a non-axis angle");
    }
    out.push_back(y);
  }
  return out;
}

inline long step_count(double length, double step) {
  const double n = length / step;
  const long k = std::lround(n);
  if (std::abs(n - k) > 1e-6 * std::max(1.0, n))
    throw Error(ErrorKind::Precondition, "solvers", "step must divide the integration length");
  return k;
}

inline SolveResult finish_profile(ProfileCurve curve, const PotentialSpec& spec) {
  SolveResult r;
  const GeometryField g = sample_geometry(curve, spec);
  double worst = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (!g.interior(k, 1)) continue;
    worst = std::max(worst, std::abs(g.H[k] + eval_potential(spec, g.mu[k]).d1 * g.eta[k]));
  }
  r.residual = worst;
  r.iterations = static_cast<int>(curve.size()) - 1;
  r.converged = true;
  std::ostringstream os;
  os.precision(6);
  os << "rk4 steps=" << r.iterations << " residual_over_step2=" << worst / (curve.step * curve.step);
  r.diagnostics = os.str();
  r.surface = std::move(curve);
  return r;
}

inline SolveResult solve_profile(const PotentialSpec& spec, const ShootingConfig& cfg, ProfileKind kind) {
  cfg.validate();
  spec.validate();
  ProfileCurve curve;
  curve.kind = kind;
  curve.step = cfg.step;
  const double h = cfg.step;
  const long n_fwd = step_count(cfg.s_max, h);
  const long n_bwd = step_count(-cfg.s_min, h);

  if (const auto* ax = std::get_if<AxisRegular>(&cfg.start)) {
    if (kind != ProfileKind::Rotational)
      throw Error(ErrorKind::Precondition, "solvers", "axis starts require a rotational profile");
    const PotentialEval p = [&] {
      try {
        return eval_potential(spec, ax->z0);
      } catch (const Error& e) {
        throw Error(ErrorKind::DomainExit, "solvers", e.what());
      }
    }();
    // Regular expansion at the axis: theta = A s + C s^3.
    const double A = 0.5 * p.d1;
    const double C = p.d1 * p.d2 / 16.0 - std::pow(p.d1, 3) / 32.0;
    const double s = h;
    const State first{s - A * A * s * s * s / 6.0, ax->z0 + 0.5 * A * s * s + (C - A * A * A / 6.0) * std::pow(s, 4) / 4.0,
                      A * s + C * s * s * s};
    const auto path = integrate(spec, kind, first, h, n_fwd - 1);
    curve.samples.push_back({0.0, 0.0, ax->z0, 0.0});
    for (std::size_t k = 0; k < path.size(); ++k)
      curve.samples.push_back({h * static_cast<double>(k + 1), path[k][0], path[k][1], path[k][2]});
    return finish_profile(std::move(curve), spec);
  }

  const auto& pt = std::get<PointStart>(cfg.start);
  const State y0{pt.x0, pt.z0, pt.theta0};
  if (kind == ProfileKind::Rotational && !(pt.x0 > 0.0))
    throw Error(ErrorKind::AxisCollision, "solvers", "point starts need a positive radius");
  const auto fwd = integrate(spec, kind, y0, h, n_fwd);
  std::vector<State> bwd;
  if (n_bwd > 0) bwd = integrate(spec, kind, y0, -h, n_bwd);
  for (long k = n_bwd; k >= 1; --k) {
    const auto& y = bwd[static_cast<std::size_t>(k)];
    curve.samples.push_back({-h * static_cast<double>(k), y[0], y[1], y[2]});
  }
  for (std::size_t k = 0; k < fwd.size(); ++k)
    curve.samples.push_back({h * static_cast<double>(k), fwd[k][0], fwd[k][1], fwd[k][2]});
  return finish_profile(std::move(curve), spec);
}

}  // namespace detail

/// Rotational profile: x' = cos theta, z' = sin theta, theta' = phi'(z) cos theta - sin theta / x.
inline SolveResult solve_rotational_profile(const PotentialSpec& spec, const ShootingConfig& cfg) {
  return detail::solve_profile(spec, cfg, ProfileKind::Rotational);
}

/// Cross-section of a surface invariant under e2: theta' = phi'(z) cos theta.
inline SolveResult solve_translation_profile(const PotentialSpec& spec, const ShootingConfig& cfg) {
  if (std::holds_alternative<AxisRegular>(cfg.start))
    throw Error(ErrorKind::Precondition, "solvers", "axis starts are invalid for translation-invariant profiles");
  return detail::solve_profile(spec, cfg, ProfileKind::TranslationInvariant);
}

namespace detail {

struct GraphSystem {
  const PotentialSpec& spec;
  int nx, ny;
  double h;

  bool interior(int i, int j) const { return i > 0 && j > 0 && i < nx - 1 && j < ny - 1; }

  // F = -(H + phi' eta), evaluated at interior nodes.
  double residual_at(const Eigen::MatrixXd& u, int i, int j) const {
    const double p = (u(i + 1, j) - u(i - 1, j)) / (2 * h);
    const double q = (u(i, j + 1) - u(i, j - 1)) / (2 * h);
    const double r = (u(i + 1, j) - 2 * u(i, j) + u(i - 1, j)) / (h * h);
    const double t = (u(i, j + 1) - 2 * u(i, j) + u(i, j - 1)) / (h * h);
    const double s = (u(i + 1, j + 1) - u(i + 1, j - 1) - u(i - 1, j + 1) + u(i - 1, j - 1)) / (4 * h * h);
    const double W = std::sqrt(1 + p * p + q * q);
    const double num = (1 + q * q) * r - 2 * p * q * s + (1 + p * p) * t;
    return num / (W * W * W) - eval_potential(spec, u(i, j)).d1 / W;
  }

  Eigen::VectorXd residual(const Eigen::MatrixXd& u) const {
    Eigen::VectorXd F((nx - 2) * (ny - 2));
    parallel_for(static_cast<std::size_t>(nx - 2), [&](std::size_t ii) {
      const int i = static_cast<int>(ii) + 1;
      for (int j = 1; j < ny - 1; ++j) F(unknown(i, j)) = residual_at(u, i, j);
    });
    return F;
  }

  int unknown(int i, int j) const { return (i - 1) * (ny - 2) + (j - 1); }

  Eigen::SparseMatrix<double> jacobian(const Eigen::MatrixXd& u) const {
    const int m = (nx - 2) * (ny - 2);
    std::vector<std::vector<Eigen::Triplet<double>>> rows(static_cast<std::size_t>(nx - 2));
    parallel_for(static_cast<std::size_t>(nx - 2), [&](std::size_t ii) {
      const int i = static_cast<int>(ii) + 1;
      auto& out = rows[ii];
      out.reserve(static_cast<std::size_t>(ny) * 9);
      for (int j = 1; j < ny - 1; ++j) {
        const double p = (u(i + 1, j) - u(i - 1, j)) / (2 * h);
        const double q = (u(i, j + 1) - u(i, j - 1)) / (2 * h);
        const double r = (u(i + 1, j) - 2 * u(i, j) + u(i - 1, j)) / (h * h);
        const double t = (u(i, j + 1) - 2 * u(i, j) + u(i, j - 1)) / (h * h);
        const double s = (u(i + 1, j + 1) - u(i + 1, j - 1) - u(i - 1, j + 1) + u(i - 1, j - 1)) / (4 * h * h);
        const double W2 = 1 + p * p + q * q;
        const double W = std::sqrt(W2);
        const double W3 = W2 * W;
        const double num = (1 + q * q) * r - 2 * p * q * s + (1 + p * p) * t;
        const PotentialEval pe = eval_potential(spec, u(i, j));
        const double Fr = (1 + q * q) / W3, Ft = (1 + p * p) / W3, Fs = -2 * p * q / W3;
        const double Fp = (2 * p * t - 2 * q * s) / W3 - 3 * num * p / (W3 * W2) + pe.d1 * p / W3;
        const double Fq = (2 * q * r - 2 * p * s) / W3 - 3 * num * q / (W3 * W2) + pe.d1 * q / W3;
        const double Fu = -pe.d2 / W;
        const int row = unknown(i, j);
        auto add = [&](int a, int b, double v) {
          if (v != 0.0 && interior(a, b)) out.emplace_back(row, unknown(a, b), v);
        };
        const double h2 = h * h;
        add(i, j, Fu - 2 * Fr / h2 - 2 * Ft / h2);
        add(i + 1, j, Fr / h2 + Fp / (2 * h));
        add(i - 1, j, Fr / h2 - Fp / (2 * h));
        add(i, j + 1, Ft / h2 + Fq / (2 * h));
        add(i, j - 1, Ft / h2 - Fq / (2 * h));
        add(i + 1, j + 1, Fs / (4 * h2));
        add(i - 1, j - 1, Fs / (4 * h2));
        add(i + 1, j - 1, -Fs / (4 * h2));
        add(i - 1, j + 1, -Fs / (4 * h2));
      }
    });
    std::vector<Eigen::Triplet<double>> all;
    for (auto& r : rows) all.insert(all.end(), r.begin(), r.end());
    Eigen::SparseMatrix<double> J(m, m);
    J.setFromTriplets(all.begin(), all.end());
    return J;
  }

  void check_domain(const Eigen::MatrixXd& u) const {
    for (Eigen::Index k = 0; k < u.size(); ++k)
      if (!(u.data()[k] > spec.alpha))
        throw Error(ErrorKind::DomainExit, "solvers", "graph iterate left the potential domain");
  }
};

}  // namespace detail

/// Damped Newton on the central-difference discretisation of
/// div(grad u / W) = phi'(u) / W with Dirichlet data.
inline SolveResult solve_graph(const PotentialSpec& spec, const Rect& domain, double h,
                               const std::function<double(double, double)>& boundary,
                               const NewtonConfig& cfg) {
  if (!(cfg.tol_residual > 0.0)) throw Error(ErrorKind::Precondition, "solvers", "tol_residual must be positive");
  if (!(cfg.damping > 0.0 && cfg.damping <= 1.0))
    throw Error(ErrorKind::Precondition, "solvers", "damping must lie in (0, 1]");
  spec.validate();
  GraphPatch patch = GraphPatch::zeros(domain, h);
  const int nx = patch.nx(), ny = patch.ny();
  if (nx < 5 || ny < 5) throw Error(ErrorKind::Stencil, "solvers", "graph grid needs at least 5x5 nodes");
  Eigen::MatrixXd& u = patch.u;
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j) {
      const double x = patch.x(i), y = patch.y(j);
      const bool edge = i == 0 || j == 0 || i == nx - 1 || j == ny - 1;
      if (edge) {
        u(i, j) = boundary(x, y);
      } else if (cfg.initial_guess == InitialGuessKind::Paraboloid) {
        u(i, j) = cfg.paraboloid_a * (x * x + y * y);
      } else if (cfg.initial_guess == InitialGuessKind::Supplied) {
        if (cfg.supplied.rows() != nx || cfg.supplied.cols() != ny)
          throw Error(ErrorKind::Precondition, "solvers", "supplied initial guess has the wrong shape");
        u(i, j) = cfg.supplied(i, j);
      }
    }
  if (cfg.initial_guess != InitialGuessKind::Supplied) {
    // Coons patch of the mismatch between the guess and the Dirichlet data on the edges.
    auto guess = [&](int i, int j) {
      const double x = patch.x(i), y = patch.y(j);
      return cfg.initial_guess == InitialGuessKind::Paraboloid ? cfg.paraboloid_a * (x * x + y * y) : 0.0;
    };
    auto e = [&](int i, int j) { return u(i, j) - guess(i, j); };
    const int I = nx - 1, J = ny - 1;
    for (int i = 1; i < I; ++i)
      for (int j = 1; j < J; ++j) {
        const double a = static_cast<double>(i) / I, b = static_cast<double>(j) / J;
        u(i, j) += (1 - a) * e(0, j) + a * e(I, j) + (1 - b) * e(i, 0) + b * e(i, J) -
                   ((1 - a) * (1 - b) * e(0, 0) + a * (1 - b) * e(I, 0) + (1 - a) * b * e(0, J) + a * b * e(I, J));
      }
  }
  detail::GraphSystem sys{spec, nx, ny, h};
  sys.check_domain(u);

  auto apply = [&](Eigen::MatrixXd& v, const Eigen::VectorXd& delta, double t) {
    for (int i = 1; i < nx - 1; ++i)
      for (int j = 1; j < ny - 1; ++j) v(i, j) += t * delta(sys.unknown(i, j));
  };

  Eigen::VectorXd F = sys.residual(u);
  double norm = F.lpNorm<Eigen::Infinity>();
  double merit = F.norm();
  SolveResult res;
  std::ostringstream log;
  log.precision(3);
  int it = 0;
  for (; it < cfg.max_iters && norm > cfg.tol_residual; ++it) {
    const Eigen::SparseMatrix<double> J = sys.jacobian(u);
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(J);
    if (lu.info() != Eigen::Success) {
      log << "factorisation failed at iteration " << it << "; ";
      break;
    }
    const Eigen::VectorXd delta = lu.solve(-F);
    double t = cfg.damping;
    bool accepted = false;
    while (t >= std::ldexp(1.0, -10)) {
      Eigen::MatrixXd trial = u;
      apply(trial, delta, t);
      sys.check_domain(trial);
      const Eigen::VectorXd Ft = sys.residual(trial);
      // Armijo test on the Euclidean residual norm.
      const double mt = Ft.norm();
      if (mt <= (1.0 - 1e-4 * t) * merit) {
        u = std::move(trial);
        F = Ft;
        norm = F.lpNorm<Eigen::Infinity>();
        merit = mt;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    log << "it " << it + 1 << " step " << t << " residual " << norm << "; ";
    if (!accepted) {
      log << "line search stalled; ";
      ++it;
      break;
    }
  }
  res.iterations = it;
  res.residual = norm;
  res.converged = norm <= cfg.tol_residual;
  res.diagnostics = log.str();
  res.surface = std::move(patch);
  return res;
}

}  // namespace phimin
