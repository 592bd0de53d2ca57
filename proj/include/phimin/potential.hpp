#pragma once

// Height potentials phi(z) and their hypothesis checks.
//
// A potential is stored up to an additive constant (`offset`). Every family is
// closed-form through the third derivative.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "phimin/error.hpp"

namespace phimin {

struct ConstantFamily {
  double c0 = 0.0;
  bool operator==(const ConstantFamily&) const = default;
};

struct LinearFamily {
  double slope = 1.0;
  bool operator==(const LinearFamily&) const = default;
};

/// phi' = lambda z + beta.
struct QuadraticFamily {
  double lambda = 0.0;
  double beta = 0.0;
  bool operator==(const QuadraticFamily&) const = default;
};

/// phi' = a / z on z > 0.
struct LogPowerFamily {
  double a = 1.0;
  bool operator==(const LogPowerFamily&) const = default;
};

/// phi'(u) = lambda u + beta + sum_i c_i u^-i for u >= u0.
///
/// Below u0 the derivative is continued by its second-order Taylor polynomial
/// at u0, so phi is C^3 on the whole domain and phi''' is constant there.
struct SeriesFamily {
  double lambda = 0.0;
  double beta = 0.0;
  std::vector<double> coeffs;
  double u0 = 1.0;
  bool operator==(const SeriesFamily&) const = default;
};

using PotentialFamily =
    std::variant<ConstantFamily, LinearFamily, QuadraticFamily, LogPowerFamily, SeriesFamily>;

struct PotentialSpec {
  PotentialFamily family = LinearFamily{};
  double alpha = -std::numeric_limits<double>::infinity();
  std::string label;
  double offset = 0.0;

  static PotentialSpec constant(double c0) { return {ConstantFamily{c0}, -inf(), "constant", 0.0}; }
  static PotentialSpec linear(double slope) { return {LinearFamily{slope}, -inf(), "linear", 0.0}; }
  static PotentialSpec quadratic(double lambda, double beta) {
    return {QuadraticFamily{lambda, beta}, -inf(), "quadratic", 0.0};
  }
  static PotentialSpec log_power(double a, double alpha = 0.0) {
    return {LogPowerFamily{a}, alpha, "log-power", 0.0};
  }
  static PotentialSpec series(double lambda, double beta, std::vector<double> coeffs, double u0,
                              double alpha = 0.0) {
    return {SeriesFamily{lambda, beta, std::move(coeffs), u0}, alpha, "series", 0.0};
  }

  std::string family_name() const {
    return std::visit(
        [](const auto& f) -> std::string {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, ConstantFamily>) return "Constant";
          else if constexpr (std::is_same_v<F, LinearFamily>) return "Linear";
          else if constexpr (std::is_same_v<F, QuadraticFamily>) return "Quadratic";
          else if constexpr (std::is_same_v<F, LogPowerFamily>) return "LogPower";
          else return "Series";
        },
        family);
  }

  /// Throws a family error when the stored parameters violate the family invariants.
  void validate() const {
    if (std::isnan(alpha)) throw Error(ErrorKind::Family, "potential", "alpha is NaN");
    if (std::holds_alternative<LogPowerFamily>(family) && alpha < 0.0)
      throw Error(ErrorKind::Family, "potential", "LogPower requires alpha >= 0");
    if (const auto* s = std::get_if<SeriesFamily>(&family)) {
      if (!(s->u0 > std::max(alpha, 0.0)))
        throw Error(ErrorKind::Family, "potential", "Series requires u0 > max(alpha, 0)");
    }
  }

  bool operator==(const PotentialSpec&) const = default;

 private:
  static double inf() { return std::numeric_limits<double>::infinity(); }
};

/// phi and its first three height derivatives at one point.
struct PotentialEval {
  double phi = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
  double d3 = 0.0;
};

namespace detail {

// Truncated expansion, valid for u >= u0 > 0.
inline PotentialEval series_tail(const SeriesFamily& s, double u) {
  PotentialEval e;
  e.phi = 0.5 * s.lambda * u * u + s.beta * u;
  e.d1 = s.lambda * u + s.beta;
  e.d2 = s.lambda;
  e.d3 = 0.0;
  const double inv = 1.0 / u;
  double pw = inv;  // u^-i
  for (std::size_t k = 0; k < s.coeffs.size(); ++k) {
    const double i = static_cast<double>(k + 1);
    const double c = s.coeffs[k];
    if (k == 0) e.phi += c * std::log(u);
    else e.phi += c * pw * u / (1.0 - i);
    e.d1 += c * pw;
    e.d2 -= i * c * pw * inv;
    e.d3 += i * (i + 1.0) * c * pw * inv * inv;
    pw *= inv;
  }
  return e;
}

}  // namespace detail

/// Evaluates phi, phi', phi'', phi''' at height z > alpha.
inline PotentialEval eval_potential(const PotentialSpec& spec, double z) {
  if (!(z > spec.alpha))
    throw Error(ErrorKind::Domain, "potential",
                "height " + std::to_string(z) + " is not above alpha=" + std::to_string(spec.alpha));
  PotentialEval e = std::visit(
      [z](const auto& f) -> PotentialEval {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, ConstantFamily>) {
          return {f.c0, 0.0, 0.0, 0.0};
        } else if constexpr (std::is_same_v<F, LinearFamily>) {
          return {f.slope * z, f.slope, 0.0, 0.0};
        } else if constexpr (std::is_same_v<F, QuadraticFamily>) {
          return {0.5 * f.lambda * z * z + f.beta * z, f.lambda * z + f.beta, f.lambda, 0.0};
        } else if constexpr (std::is_same_v<F, LogPowerFamily>) {
          if (!(z > 0.0))
            throw Error(ErrorKind::Family, "potential", "LogPower evaluated at z <= 0");
          return {f.a * std::log(z), f.a / z, -f.a / (z * z), 2.0 * f.a / (z * z * z)};
        } else {
          if (z >= f.u0) return detail::series_tail(f, z);
          const PotentialEval at = detail::series_tail(f, f.u0);
          const double t = z - f.u0;
          PotentialEval e;
          e.d1 = at.d1 + at.d2 * t + 0.5 * at.d3 * t * t;
          e.d2 = at.d2 + at.d3 * t;
          e.d3 = at.d3;
          e.phi = at.phi + at.d1 * t + 0.5 * at.d2 * t * t + at.d3 * t * t * t / 6.0;
          return e;
        }
      },
      spec.family);
  e.phi += spec.offset;
  return e;
}

/// Leading coefficients of phi' at +infinity.
struct Asymptotics {
  double lambda = 0.0;
  double beta = 0.0;
  /// Set when lambda < 0, or lambda == 0 and beta <= 0.
  bool violation = false;
};

inline Asymptotics asymptotics(const PotentialSpec& spec) {
  Asymptotics a = std::visit(
      [](const auto& f) -> Asymptotics {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, ConstantFamily>) return {0.0, 0.0};
        else if constexpr (std::is_same_v<F, LinearFamily>) return {0.0, f.slope};
        else if constexpr (std::is_same_v<F, QuadraticFamily>) return {f.lambda, f.beta};
        else if constexpr (std::is_same_v<F, SeriesFamily>) return {f.lambda, f.beta};
        else
          throw Error(ErrorKind::UnsupportedFamily, "potential",
                      "LogPower has no expansion with a linear or constant leading term");
      },
      spec.family);
  a.violation = a.lambda < 0.0 || (a.lambda == 0.0 && !(a.beta > 0.0));
  return a;
}

struct ConditionReport {
  bool c1_holds = false;
  double gamma = 0.0;
  /// True when gamma came from sampling plus refinement rather than a closed form.
  bool gamma_approximate = false;
  double gamma_sampled = 0.0;
  bool c2_holds = false;
  bool cc3_holds = false;
  bool d3_nonpositive = false;
  double lambda = 0.0;
  double beta = 0.0;
  int sample_count = 0;
};

namespace detail {

/// Golden-section maximisation of f on [a, b].
template <class F>
double golden_max(F&& f, double a, double b, int iterations = 80) {
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - r * (b - a);
  double d = a + r * (b - a);
  double fc = f(c);
  double fd = f(d);
  for (int it = 0; it < iterations; ++it) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    }
  }
  return std::max({fc, fd, f(a), f(b)});
}

/// Sampled supremum of f on [lo, hi] refined by golden section around the best sample.
template <class F>
double sampled_sup(F&& f, double lo, double hi, int n) {
  double best = -std::numeric_limits<double>::infinity();
  int best_k = 0;
  const double dz = (hi - lo) / (n - 1);
  for (int k = 0; k < n; ++k) {
    const double v = f(lo + k * dz);
    if (v > best) {
      best = v;
      best_k = k;
    }
  }
  const double a = lo + std::max(best_k - 1, 0) * dz;
  const double b = lo + std::min(best_k + 1, n - 1) * dz;
  return std::max(best, golden_max(f, a, b));
}

}  // namespace detail

/// Samples the hypotheses on [z_lo, z_hi] and combines them with the analytic
/// behaviour of the family over the whole domain where one is known.
inline ConditionReport check_conditions(const PotentialSpec& spec, double z_lo, double z_hi,
                                        int n_samples) {
  if (!(spec.alpha < z_lo && z_lo < z_hi) || n_samples < 2)
    throw Error(ErrorKind::Domain, "potential", "check_conditions needs alpha < z_lo < z_hi, n >= 2");
  spec.validate();
  ConditionReport r;
  r.sample_count = n_samples;

  auto d1 = [&](double z) { return eval_potential(spec, z).d1; };
  auto d2 = [&](double z) { return eval_potential(spec, z).d2; };
  auto d3 = [&](double z) { return eval_potential(spec, z).d3; };
  auto g = [&](double z) {
    const auto e = eval_potential(spec, z);
    return 2.0 * e.d2 - e.d1 * e.d1;
  };
  r.gamma_sampled = detail::sampled_sup(g, z_lo, z_hi, n_samples);

  std::visit(
      [&](const auto& f) {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, ConstantFamily>) {
          r.c1_holds = false;
          r.gamma = 0.0;
          r.c2_holds = true;
          r.d3_nonpositive = true;
        } else if constexpr (std::is_same_v<F, LinearFamily>) {
          r.c1_holds = f.slope > 0.0;
          r.gamma = -f.slope * f.slope;
          r.c2_holds = true;
          r.d3_nonpositive = true;
        } else if constexpr (std::is_same_v<F, QuadraticFamily>) {
          r.c1_holds = f.lambda >= 0.0 && std::min(f.lambda * z_lo + f.beta, f.lambda * z_hi + f.beta) > 0.0;
          double min_sq = std::min(std::pow(f.lambda * z_lo + f.beta, 2), std::pow(f.lambda * z_hi + f.beta, 2));
          if (f.lambda != 0.0) {
            const double root = -f.beta / f.lambda;
            if (root >= z_lo && root <= z_hi) min_sq = 0.0;
          }
          r.gamma = 2.0 * f.lambda - min_sq;
          r.c2_holds = true;
          r.d3_nonpositive = true;
        } else if constexpr (std::is_same_v<F, LogPowerFamily>) {
          // phi' = a/z and phi'' = -a/z^2 never share a strict/weak positive sign.
          r.c1_holds = false;
          const double k = -(2.0 * f.a + f.a * f.a);  // 2 phi'' - phi'^2 = k / z^2
          r.gamma = k >= 0.0 ? k / (z_lo * z_lo) : k / (z_hi * z_hi);
          r.c2_holds = spec.alpha > 0.0 || k <= 0.0;
          r.d3_nonpositive = f.a <= 0.0;
        } else {
          auto neg = [](auto fn) { return [fn](double z) { return -fn(z); }; };
          const double min_d1 = -detail::sampled_sup(neg(d1), z_lo, z_hi, n_samples);
          const double min_d2 = -detail::sampled_sup(neg(d2), z_lo, z_hi, n_samples);
          r.c1_holds = min_d1 > 0.0 && min_d2 >= 0.0;
          r.gamma = r.gamma_sampled;
          r.gamma_approximate = true;
          // Quadratic continuation below u0 and a decaying tail above it keep
          // 2 phi'' - phi'^2 bounded above on the whole domain.
          r.c2_holds = true;
          r.d3_nonpositive = detail::sampled_sup(d3, z_lo, z_hi, n_samples) <= 0.0;
        }
      },
      spec.family);

  if (std::holds_alternative<LogPowerFamily>(spec.family)) {
    r.cc3_holds = false;
  } else {
    const Asymptotics a = asymptotics(spec);
    r.lambda = a.lambda;
    r.beta = a.beta;
    r.cc3_holds = !a.violation;
  }
  return r;
}

}  // namespace phimin
