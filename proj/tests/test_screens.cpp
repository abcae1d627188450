#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "projdyn/random.hpp"
#include "projdyn/screen.hpp"

using namespace projdyn;

namespace {

Multivectord vec3(double x, double y, double z) {
  Eigen::Vector3d v(x, y, z);
  return Multivectord::vector(v);
}

Eigen::MatrixXd diag3(double a, double b, double c) {
  return Eigen::Vector3d(a, b, c).asDiagonal();
}

ScreenSpec make_variant(int which, Rng& rng, int dim) {
  switch (which) {
    case 0: {
      Eigen::VectorXd h = rng.unit_vector(dim);
      return ScreenSpec::flat(Formd::covector(h));
    }
    case 1: {
      Eigen::MatrixXd m = Eigen::MatrixXd::NullaryExpr(
          dim, dim, [&](Eigen::Index, Eigen::Index) { return rng.range(-1, 1); });
      Eigen::MatrixXd B = m.transpose() * m +
                          0.3 * Eigen::MatrixXd::Identity(dim, dim);
      return ScreenSpec::sphere(B);
    }
    default: {
      // degenerate form with a random one-dimensional kernel
      Eigen::VectorXd k = rng.unit_vector(dim);
      Eigen::MatrixXd P = Eigen::MatrixXd::Identity(dim, dim) - k * k.transpose();
      Eigen::MatrixXd m = Eigen::MatrixXd::NullaryExpr(
          dim, dim, [&](Eigen::Index, Eigen::Index) { return rng.range(-1, 1); });
      Eigen::MatrixXd B =
          P * (m.transpose() * m + 0.3 * Eigen::MatrixXd::Identity(dim, dim)) * P;
      return ScreenSpec::cylinder(B);
    }
  }
}

Multivectord domain_point(const ScreenSpec& s, Rng& rng) {
  for (;;) {
    Multivectord q = Multivectord::vector(
        (rng.unit_vector(s.dim()) * rng.range(0.5, 2.0)).eval());
    if (!s.in_domain(q)) continue;
    if (s.kind() == ScreenKind::Flat && s.value(q) < 0.2) continue;
    if (s.kind() != ScreenKind::Flat && s.value(q) < 0.2) continue;
    return q;
  }
}

}  // namespace

TEST_CASE("screen_eval per variant") {
  // flat h = eps3 at (2,5,4)
  auto flat = ScreenSpec::flat(Formd::basis_covector(3, 2));
  auto ev = flat.eval(vec3(2, 5, 4));
  CHECK(ev.h == doctest::Approx(4.0));
  CHECK((ev.dh.coeffs() - Eigen::Vector3d(0, 0, 1)).norm() == 0.0);
  CHECK(ev.hess.norm() == 0.0);

  // Euclidean sphere at (1,0,0): differentiating sqrt(q.q) gives
  // dh = q/|q|, hess = (I - qq^T/|q|^2)/|q|.
  auto sph = ScreenSpec::euclidean_sphere(3);
  auto evs = sph.eval(vec3(1, 0, 0));
  CHECK(evs.h == doctest::Approx(1.0));
  CHECK((evs.dh.coeffs() - Eigen::Vector3d(1, 0, 0)).norm() < 1e-15);
  CHECK((evs.hess - diag3(0, 1, 1)).norm() < 1e-15);

  // cylinder diag(1,1,0) at (0,1,7), kernel along e3
  auto cyl = ScreenSpec::cylinder(diag3(1, 1, 0));
  auto evc = cyl.eval(vec3(0, 1, 7));
  CHECK(evc.h == doctest::Approx(1.0));
  CHECK((evc.dh.coeffs() - Eigen::Vector3d(0, 1, 0)).norm() < 1e-15);
}

TEST_CASE("screen domain errors") {
  auto cyl = ScreenSpec::cylinder(diag3(1, 1, 0));
  CHECK_THROWS_AS(cyl.eval(vec3(0, 0, 3)), DomainError);

  auto gq = ScreenSpec::general_quadratic(diag3(1, 1, -1));
  CHECK_THROWS_AS(gq.eval(vec3(0, 0, 1)), DomainError);
  CHECK(gq.value(vec3(1, 0, 0.5)) == doctest::Approx(std::sqrt(0.75)));

  CHECK_THROWS_AS(ScreenSpec::cylinder(diag3(1, 0, 0)), std::invalid_argument);
  CHECK_THROWS_AS(ScreenSpec::sphere(diag3(1, 1, 0)), std::invalid_argument);
}

TEST_CASE("project_to_screen") {
  auto flat = ScreenSpec::flat(Formd::basis_covector(3, 0));
  auto p = project_to_screen(flat, vec3(2, 4, 6));
  CHECK((p.coeffs() - Eigen::Vector3d(1, 2, 3)).norm() < 1e-15);
  CHECK_THROWS_AS(project_to_screen(flat, vec3(-1, 2, 0)), DomainError);

  auto sph = ScreenSpec::euclidean_sphere(3);
  auto ps = project_to_screen(sph, vec3(3, 4, 0));
  CHECK((ps.coeffs() - Eigen::Vector3d(0.6, 0.8, 0)).norm() < 1e-15);

  auto cyl = ScreenSpec::cylinder(diag3(1, 1, 0));
  auto pc = project_to_screen(cyl, vec3(3, 4, 9));
  CHECK((pc.coeffs() - Eigen::Vector3d(0.6, 0.8, 1.8)).norm() < 1e-15);
}

TEST_CASE("impulsion to velocity and back") {
  auto flat = ScreenSpec::flat(Formd::basis_covector(3, 0));
  auto q = vec3(1, 0, 0);
  auto v = impulsion_to_velocity(flat, q, wedge(q, vec3(0, 1, 0)));
  CHECK((v.coeffs() - Eigen::Vector3d(0, 1, 0)).norm() < 1e-15);

  // radial component of the generating velocity is invisible
  auto v2 = impulsion_to_velocity(flat, q, wedge(q, vec3(5, 1, 0)));
  CHECK((v2.coeffs() - Eigen::Vector3d(0, 1, 0)).norm() < 1e-15);

  auto sph = ScreenSpec::euclidean_sphere(3);
  auto vs = impulsion_to_velocity(
      sph, q, Multivectord::basis_blade(3, 0b011));  // e1^e2
  CHECK((vs.coeffs() - Eigen::Vector3d(0, 1, 0)).norm() < 1e-15);

  // velocity_to_impulsion basics
  CHECK(velocity_to_impulsion(q, vec3(0, 1, 0)).coeff(0b011) ==
        doctest::Approx(1.0));
  CHECK(velocity_to_impulsion(q, q * 3.7).norm() == 0.0);

  // inconsistent state rejected
  CHECK_THROWS_AS(
      impulsion_to_velocity(flat, vec3(2, 0, 0), wedge(q, vec3(0, 1, 0))),
      InconsistentStateError);
  CHECK_THROWS_AS(
      impulsion_to_velocity(flat, q, Multivectord::basis_blade(3, 0b110)),
      InconsistentStateError);
}

TEST_CASE("round trip on random tangent velocities") {
  Rng rng(7);
  for (int which = 0; which < 3; ++which) {
    for (int rep = 0; rep < 25; ++rep) {
      auto s = make_variant(which, rng, 3);
      auto q = project_to_screen(s, domain_point(s, rng));
      auto ev = s.eval(q);
      Multivectord w = Multivectord::vector(rng.unit_vector(3));
      // tangent part of w
      Multivectord v = w - q * (pair(ev.dh, w) / pair(ev.dh, q));
      auto back = impulsion_to_velocity(s, q, velocity_to_impulsion(q, v));
      CHECK((back.coeffs() - v.coeffs()).norm() < 1e-12);

      // result is independent of the radial part of the generator
      double mu = rng.range(-2, 2);
      auto back2 =
          impulsion_to_velocity(s, q, velocity_to_impulsion(q, v + q * mu));
      CHECK((back2.coeffs() - back.coeffs()).norm() < 1e-12);
    }
  }
}

TEST_CASE("reaction lambda") {
  auto flat = ScreenSpec::flat(Formd::basis_covector(3, 2));
  CHECK(reaction_lambda(flat, vec3(0.4, -2, 1), vec3(1, 2, 0)) == 0.0);

  // Euclidean sphere, unit tangent velocity
  auto sph = ScreenSpec::euclidean_sphere(3);
  CHECK(reaction_lambda(sph, vec3(1, 0, 0), vec3(0, 1, 0)) ==
        doctest::Approx(-1.0));

  // cylinder free motion with angular rate thetadot: lambda = -thetadot^2
  auto cyl = ScreenSpec::cylinder(diag3(1, 1, 0));
  double th = 0.73, thdot = 1.31, zdot = -0.4;
  auto q = vec3(std::cos(th), std::sin(th), 2.2);
  auto qdot = vec3(-thdot * std::sin(th), thdot * std::cos(th), zdot);
  CHECK(reaction_lambda(cyl, q, qdot) == doctest::Approx(-thdot * thdot));

  CHECK_THROWS_AS(reaction_lambda(sph, vec3(2, 0, 0), vec3(0, 1, 0)),
                  InconsistentStateError);
}

TEST_CASE("Euler identity and gradient homogeneity") {
  Rng rng(13);
  for (int which = 0; which < 3; ++which) {
    for (int dim = 3; dim <= 5; ++dim) {
      for (int rep = 0; rep < 20; ++rep) {
        auto s = make_variant(which, rng, dim);
        auto q = domain_point(s, rng);
        auto ev = s.eval(q);
        CHECK(pair(ev.dh, q) == doctest::Approx(ev.h).epsilon(1e-12));
        for (double lam : {0.5, 2.0}) {
          CHECK(s.value(q * lam) == doctest::Approx(lam * ev.h).epsilon(1e-12));
          auto dls = s.eval(q * lam);
          CHECK((dls.dh.coeffs() - ev.dh.coeffs()).norm() <
                1e-12 * (1.0 + ev.dh.norm()));
        }
      }
    }
  }
}

TEST_CASE("state validation") {
  auto sph = ScreenSpec::euclidean_sphere(3);
  ScreenState good{vec3(1, 0, 0), vec3(0, 0.5, 1)};
  CHECK_NOTHROW(validate_screen_state(sph, good));
  ScreenState bad{vec3(1, 0, 0), vec3(0.5, 0.5, 1)};
  CHECK_THROWS_AS(validate_screen_state(sph, bad), InconsistentStateError);

  ProjectiveState ps{vec3(1, 2, 0), wedge(vec3(1, 2, 0), vec3(0, 1, 1))};
  CHECK_NOTHROW(validate_projective_state(ps));
  ProjectiveState psbad{vec3(0, 0, 1), Multivectord::basis_blade(3, 0b011)};
  CHECK_THROWS_AS(validate_projective_state(psbad), InconsistentStateError);
}
