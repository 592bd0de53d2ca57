#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "phimin/potential.hpp"

using namespace phimin;
using Catch::Approx;

namespace {

std::vector<PotentialSpec> sample_specs() {
  return {PotentialSpec::constant(0.3), PotentialSpec::linear(1.5), PotentialSpec::quadratic(1.0, 0.5),
          PotentialSpec::log_power(1.0), PotentialSpec::log_power(-2.0),
          PotentialSpec::series(0.5, 1.0, {0.7, -0.2}, 1.0), PotentialSpec::series(0.0, 2.0, {1.0}, 1.0)};
}

double central(const PotentialSpec& s, double z, double h, int order) {
  auto f = [&](double t) {
    const auto e = eval_potential(s, t);
    return order == 1 ? e.phi : order == 2 ? e.d1 : e.d2;
  };
  return (f(z + h) - f(z - h)) / (2.0 * h);
}

}  // namespace

TEST_CASE("eval_potential closed forms") {
  auto lin = eval_potential(PotentialSpec::linear(1.0), 5.0);
  CHECK(lin.d1 == 1.0);
  CHECK(lin.d2 == 0.0);
  CHECK(lin.d3 == 0.0);

  auto quad = eval_potential(PotentialSpec::quadratic(1.0, 1.0), 2.0);
  CHECK(quad.d1 == 3.0);
  CHECK(quad.d2 == 1.0);
  CHECK(quad.d3 == 0.0);
}

TEST_CASE("series evaluation agrees with differences of phi") {
  const auto spec = PotentialSpec::series(0.0, 2.0, {1.0}, 1.0);
  const auto e = eval_potential(spec, 4.0);
  CHECK(e.d1 == Approx(2.25).epsilon(1e-14));
  CHECK(e.d2 == Approx(-1.0 / 16.0).epsilon(1e-14));
  const double h = 1e-5;
  CHECK(central(spec, 4.0, h, 1) == Approx(2.25).epsilon(1e-9));
  const double d2 = (eval_potential(spec, 4.0 + h).phi - 2.0 * e.phi + eval_potential(spec, 4.0 - h).phi) / (h * h);
  CHECK(d2 == Approx(-1.0 / 16.0).margin(1e-4));
}

TEST_CASE("series below u0 continues phi smoothly") {
  const auto spec = PotentialSpec::series(0.5, 1.0, {0.7, -0.2}, 1.0);
  const double eps = 1e-9;
  const auto lo = eval_potential(spec, 1.0 - eps), hi = eval_potential(spec, 1.0 + eps);
  CHECK(lo.phi == Approx(hi.phi).margin(1e-7));
  CHECK(lo.d1 == Approx(hi.d1).margin(1e-7));
  CHECK(lo.d2 == Approx(hi.d2).margin(1e-7));
  CHECK(lo.d3 == Approx(hi.d3).margin(1e-6));
}

TEST_CASE("domain and family errors") {
  CHECK_THROWS_AS(eval_potential(PotentialSpec::log_power(1.0), 0.0), Error);
  try {
    eval_potential(PotentialSpec::log_power(1.0), -1.0);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Domain);
  }
  PotentialSpec loose{LogPowerFamily{1.0}, -1.0, "", 0.0};
  try {
    eval_potential(loose, -0.5);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Family);
  }
  CHECK_THROWS_AS(loose.validate(), Error);
  CHECK_THROWS_AS(PotentialSpec::series(0, 1, {}, 0.0).validate(), Error);
}

TEST_CASE("finite differences converge at second order for every family") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> unif(0.5, 6.0);
  for (const auto& spec : sample_specs()) {
    for (int trial = 0; trial < 20; ++trial) {
      const double z = unif(rng);
      const auto e = eval_potential(spec, z);
      for (int order : {1, 2, 3}) {
        const double exact = order == 1 ? e.d1 : order == 2 ? e.d2 : e.d3;
        const double err1 = std::abs(central(spec, z, 1e-2, order) - exact);
        const double err2 = std::abs(central(spec, z, 5e-3, order) - exact);
        CHECK(err1 <= 1e-2);
        // Exact differences (polynomial families) leave only rounding; otherwise check the order.
        if (err1 > 1e-10) CHECK(std::log2(err1 / err2) >= 1.9);
      }
    }
  }
}

TEST_CASE("check_conditions on closed-form families") {
  auto lin = check_conditions(PotentialSpec::linear(1.0), 0.0, 10.0, 101);
  CHECK(lin.c1_holds);
  CHECK(lin.gamma == -1.0);
  CHECK(lin.c2_holds);
  CHECK_FALSE(lin.gamma_approximate);

  auto quad = check_conditions(PotentialSpec::quadratic(1.0, 1.0), 0.0, 10.0, 101);
  CHECK(quad.gamma == Approx(1.0).epsilon(1e-14));
  CHECK(quad.lambda == 1.0);
  CHECK(quad.cc3_holds);

  auto lp = check_conditions(PotentialSpec::log_power(1.0), 0.1, 10.0, 101);
  CHECK_FALSE(lp.c1_holds);
  CHECK_FALSE(lp.cc3_holds);

  CHECK_THROWS_AS(check_conditions(PotentialSpec::linear(1.0), 2.0, 1.0, 10), Error);
  CHECK_THROWS_AS(check_conditions(PotentialSpec::log_power(1.0), -1.0, 1.0, 10), Error);
}

TEST_CASE("analytic and sampled gamma agree") {
  for (const auto& spec : {PotentialSpec::linear(2.0), PotentialSpec::quadratic(1.0, 1.0),
                           PotentialSpec::quadratic(2.0, -3.0), PotentialSpec::constant(1.0)}) {
    const auto r = check_conditions(spec, 0.0, 5.0, 201);
    const double dz = 5.0 / 200.0;
    CHECK(r.gamma_sampled <= r.gamma + 1e-12);
    CHECK(r.gamma - r.gamma_sampled <= 1e-6 + 1e-3 * dz);
  }
}

TEST_CASE("c1 failure persists on larger intervals") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> unif(0.2, 5.0);
  const std::vector<PotentialSpec> specs = {PotentialSpec::series(0.0, 2.0, {1.0}, 1.0),
                                            PotentialSpec::series(0.0, 1.0, {-3.0}, 1.0),
                                            PotentialSpec::quadratic(1.0, -2.0), PotentialSpec::log_power(0.5)};
  for (const auto& spec : specs) {
    for (int t = 0; t < 20; ++t) {
      double a = unif(rng), b = unif(rng);
      if (a > b) std::swap(a, b);
      if (b - a < 1e-3) continue;
      const auto inner = check_conditions(spec, a, b, 50);
      if (inner.c1_holds) continue;
      const auto outer = check_conditions(spec, a * 0.5, b + 1.0, 50);
      CHECK_FALSE(outer.c1_holds);
    }
  }
}

TEST_CASE("cc3 implies c2 for series potentials") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  for (int t = 0; t < 50; ++t) {
    const auto spec = PotentialSpec::series(std::abs(unif(rng)), unif(rng), {unif(rng), unif(rng)}, 1.0);
    const auto r = check_conditions(spec, 0.5, 8.0, 64);
    if (r.cc3_holds) CHECK(r.c2_holds);
    CHECK(r.gamma_approximate);
  }
}

TEST_CASE("asymptotics") {
  auto a = asymptotics(PotentialSpec::linear(0.7));
  CHECK(a.lambda == 0.0);
  CHECK(a.beta == 0.7);
  CHECK_FALSE(a.violation);
  auto q = asymptotics(PotentialSpec::quadratic(2.0, 3.0));
  CHECK(q.lambda == 2.0);
  CHECK(q.beta == 3.0);
  auto c = asymptotics(PotentialSpec::constant(1.0));
  CHECK(c.lambda == 0.0);
  CHECK(c.beta == 0.0);
  CHECK(c.violation);
  try {
    asymptotics(PotentialSpec::log_power(1.0));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnsupportedFamily);
  }
}

TEST_CASE("offset shifts phi only") {
  auto s = PotentialSpec::quadratic(1.0, 1.0);
  s.offset = 2.5;
  const auto e = eval_potential(s, 1.0), f = eval_potential(PotentialSpec::quadratic(1.0, 1.0), 1.0);
  CHECK(e.phi == f.phi + 2.5);
  CHECK(e.d1 == f.d1);
}
