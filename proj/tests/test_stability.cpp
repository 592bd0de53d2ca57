#include <catch_amalgamated.hpp>

#include <boost/math/special_functions/bessel.hpp>
#include <cmath>
#include <random>

#include "phimin/solvers.hpp"
#include "phimin/stability.hpp"
#include "test_support.hpp"

using namespace phimin;
using namespace testsupport;
using Catch::Approx;

namespace {

GeometryField bowl(double step, double s_max = 2.0) {
  ShootingConfig c;
  c.start = AxisRegular{0.0};
  c.s_max = s_max;
  c.step = step;
  return sample_geometry(solve_rotational_profile(PotentialSpec::linear(1.0), c).surface, PotentialSpec::linear(1.0));
}

GeometryField reaper(double step) {
  ShootingConfig c;
  c.start = PointStart{0.0, 0.0, 0.0};
  c.s_min = -1.5;
  c.s_max = 1.5;
  c.step = step;
  return sample_geometry(solve_translation_profile(PotentialSpec::linear(1.0), c).surface, PotentialSpec::linear(1.0));
}

std::vector<double> bump(const GeometryField& g, const Region& region, double lo, double hi) {
  std::vector<double> u(g.size(), 0.0);
  const auto& s = g.profile().samples;
  for (std::size_t k : region) {
    const double t = (s[k].s - lo) / (hi - lo);
    if (t > 0.0 && t < 1.0) u[k] = std::pow(std::sin(M_PI * t), 2);
  }
  return u;
}

}  // namespace

TEST_CASE("flat disk reproduces the Dirichlet eigenvalue of the Laplacian") {
  const double j01 = boost::math::cyl_bessel_j_zero(0.0, 1);
  const auto p = GraphPatch::zeros({-1.0625, 1.0625, -1.0625, 1.0625}, 1.0 / 64);
  const auto spec = PotentialSpec::constant(0.0);
  const auto g = sample_geometry(p, spec);
  const auto r = first_eigenvalue(g, spec, disk_region(g, 0.0, 0.0, 1.0));
  CHECK(r.lambda1 == Approx(j01 * j01).epsilon(0.02));
  CHECK(r.residual <= 1e-9 * r.lambda1);
  for (double v : r.eigenfunction) CHECK(v >= 0.0);
}

TEST_CASE("assembly is symmetric with positive mass") {
  const auto g = bowl(0.02);
  const auto a = assemble_stability(g, PotentialSpec::linear(1.0), interior_region(g));
  const Eigen::SparseMatrix<double> d = a.stiffness - Eigen::SparseMatrix<double>(a.stiffness.transpose());
  CHECK(d.norm() == 0.0);
  CHECK(a.mass.minCoeff() > 0.0);
  std::mt19937 rng(3);
  std::normal_distribution<double> nd;
  std::vector<double> u(g.size(), 0.0), v(g.size(), 0.0);
  for (std::size_t k : a.region) {
    u[k] = nd(rng);
    v[k] = nd(rng);
  }
  CHECK(quadratic_form(a, u, v) == quadratic_form(a, v, u));
  CHECK(quadratic_form(a, std::vector<double>(g.size(), 0.0), std::vector<double>(g.size(), 0.0)) == 0.0);
}

TEST_CASE("quadratic form matches direct quadrature on the catenoid") {
  const auto spec = PotentialSpec::constant(0.0);
  std::vector<double> errs;
  for (double step : {0.01, 0.005}) {
    const auto g = sample_geometry(catenoid(-1.2, 1.2, step), spec);
    const Region region = arc_region(g, -1.0, 1.0);
    const auto u = bump(g, region, -1.0, 1.0);
    const double q = quadratic_form(g, spec, u, region);
    // Closed form on the catenoid: x = sqrt(1 + s^2), |S|^2 = 2 / x^4, u = sin^2(pi (s + 1) / 2).
    auto integrand = [](double s) {
      const double x = std::sqrt(1 + s * s);
      const double t = M_PI * (s + 1.0) / 2.0;
      const double u = std::pow(std::sin(t), 2);
      const double du = M_PI * std::sin(t) * std::cos(t);
      return 2 * M_PI * x * (du * du - 2.0 / std::pow(x, 4) * u * u);
    };
    double exact = 0.0;
    const int N = 20000;
    for (int i = 0; i < N; ++i) exact += integrand(-1.0 + (i + 0.5) * 2.0 / N) * 2.0 / N;
    errs.push_back(std::abs(q - exact));
    CHECK(q == Approx(exact).epsilon(2e-3));
  }
  CHECK(order(errs[0], errs[1]) > 1.8);
}

TEST_CASE("vertical plane is strictly stable on compact regions") {
  const auto spec = PotentialSpec::linear(1.0);
  const auto g = sample_geometry(vertical_plane(0.0, 2.0, 0.01), spec);
  const Region region = interior_region(g);
  const auto u = bump(g, region, 0.3, 1.7);
  CHECK(quadratic_form(g, spec, u, region) > 0.0);
  CHECK(first_eigenvalue(g, spec, region).lambda1 > 0.0);
  StabilityOptions opt;
  opt.ruling_length = 2.0;
  const double l_inf = first_eigenvalue(g, spec, region).lambda1;
  const double l_fin = first_eigenvalue(g, spec, region, 1e-9, opt).lambda1;
  CHECK(l_fin - l_inf == Approx(M_PI * M_PI / 4.0).epsilon(1e-8));
}

TEST_CASE("first eigenvalue bounds the Rayleigh quotient of random trials") {
  const auto spec = PotentialSpec::linear(1.0);
  const auto g = bowl(0.02);
  const auto a = assemble_stability(g, spec, interior_region(g));
  const auto r = first_eigenvalue(a);
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  double best = std::numeric_limits<double>::infinity();
  for (int t = 0; t < 200; ++t) {
    std::vector<double> u(g.size(), 0.0);
    const double c1 = unif(rng), c2 = unif(rng), c3 = unif(rng);
    for (std::size_t k : a.region) {
      const double s = g.profile().samples[k].s / g.profile().samples.back().s;
      u[k] = std::sin(M_PI * s) * (1 + 0.3 * c1) + c2 * std::sin(2 * M_PI * s) + c3 * std::sin(3 * M_PI * s);
    }
    const Eigen::VectorXd x = a.restrict(u);
    best = std::min(best, quadratic_form(a, u, u) / x.dot(a.mass.cwiseProduct(x)));
  }
  CHECK(r.lambda1 <= best + 1e-12);
  CHECK(r.lambda1 > 0.0);
  const Eigen::VectorXd x = a.restrict(r.eigenfunction);
  CHECK(x.dot(a.mass.cwiseProduct(x)) == Approx(1.0).epsilon(1e-12));
  CHECK(x.minCoeff() > 0.0);
}

TEST_CASE("Killing Jacobi field on half a grim reaper") {
  std::vector<double> res;
  for (double step : {0.02, 0.01}) {
    const auto g = reaper(step);
    res.push_back(jacobi_residual(g, PotentialSpec::linear(1.0), JacobiCertificate::killing(Vec3(1, 0, 0)),
                                  arc_region(g, -1.4, -0.05))
                      .max_abs_residual);
  }
  CHECK(order(res[0], res[1]) > 1.8);

  const auto g = reaper(0.02);
  try {
    jacobi_residual(g, PotentialSpec::linear(1.0), JacobiCertificate::killing(Vec3(1, 0, 0)));
    FAIL("expected a sign violation");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SignViolation);
  }
  CHECK_THROWS_AS(jacobi_residual(g, PotentialSpec::linear(1.0), JacobiCertificate::killing(Vec3(0, 0, 1))), Error);
}

TEST_CASE("vertical plane normal is an exact Jacobi field") {
  const auto spec = PotentialSpec::quadratic(1.0, 1.0);
  const auto g = sample_geometry(vertical_plane(0.5, 2.0, 0.01), spec);
  const auto r = jacobi_residual(g, spec, JacobiCertificate::killing(Vec3(-1, 0, 0)));
  CHECK(r.max_abs_residual <= 1e-15);
  CHECK(r.sample_count > 0);
}

TEST_CASE("angle certificate and rotational Killing mode on the bowl") {
  std::vector<double> eta_res, kill_res;
  for (double step : {0.02, 0.01}) {
    const auto g = bowl(step);
    eta_res.push_back(jacobi_residual(g, PotentialSpec::linear(1.0), JacobiCertificate::eta()).max_abs_residual);
    kill_res.push_back(jacobi_residual(g, PotentialSpec::linear(1.0), JacobiCertificate::killing(Vec3(0, 1, 0)),
                                       arc_region(g, 0.25, 2.0))
                           .max_abs_residual);
  }
  CHECK(order(eta_res[0], eta_res[1]) > 1.8);
  CHECK(order(kill_res[0], kill_res[1]) > 1.8);
}

TEST_CASE("region errors") {
  const auto spec = PotentialSpec::constant(0.0);
  const auto g = sample_geometry(GraphPatch::zeros({-1, 1, -1, 1}, 0.1), spec);
  CHECK_THROWS_AS(first_eigenvalue(g, spec, Region{}), Error);
  try {
    first_eigenvalue(g, spec, interior_region(g, 0));
    FAIL("expected a support error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Support);
  }
  const Region region = interior_region(g, 2);
  std::vector<double> u(g.size(), 1.0);
  CHECK_THROWS_AS(quadratic_form(g, spec, u, region), Error);
}
