#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "projdyn/force.hpp"
#include "projdyn/integrate.hpp"
#include "projdyn/random.hpp"

using namespace projdyn;

namespace {

Multivectord vec3(double x, double y, double z) {
  Eigen::Vector3d v(x, y, z);
  return Multivectord::vector(v);
}

Eigen::MatrixXd diag3(double a, double b, double c) {
  return Eigen::Vector3d(a, b, c).asDiagonal();
}

const Eigen::MatrixXd kB = diag3(1, 1, 0);
const Multivectord kC = vec3(0, 0, 1);

}  // namespace

TEST_CASE("eval_force basics") {
  auto zero = ForceFieldSpec::zero(3);
  CHECK(zero.eval(vec3(0.3, -2, 5)).norm() == 0.0);

  auto kep = ForceFieldSpec::kepler(kC, kB);
  auto f = kep.eval(vec3(1, 0, 0));
  // |q| = 1, f = q ^ c = e1 ^ e3
  CHECK(f.coeff(0b101) == doctest::Approx(1.0));
  CHECK(f.coeff(0b011) == 0.0);
  CHECK(f.coeff(0b110) == 0.0);

  // degree -2 homogeneity
  auto f2 = kep.eval(vec3(2, 0, 0));
  CHECK((f2.coeffs() - 0.25 * f.coeffs()).norm() < 1e-15);

  // singular ray rejected
  CHECK_THROWS_AS(kep.eval(vec3(0, 0, 2)), SingularityError);
  CHECK_THROWS_AS(kep.eval(vec3(1e-8, 0, 1)), SingularityError);
}

TEST_CASE("field construction validation") {
  CHECK_THROWS_AS(ForceFieldSpec::kepler(kC, diag3(1, 1, 1)),
                  std::invalid_argument);
  CHECK_THROWS_AS(ForceFieldSpec::kepler(kC, diag3(1, 0, 0)),
                  std::invalid_argument);
  CHECK_THROWS_AS(ForceFieldSpec::kepler(vec3(1, 0, 0), kB),
                  std::invalid_argument);
  // center not on the screen
  CHECK_THROWS_AS(
      ForceFieldSpec::central_psi(vec3(1, 0, 0), Formd::basis_covector(3, 2),
                                  [](const Eigen::VectorXd&) { return 1.0; }),
      std::invalid_argument);
}

TEST_CASE("central_from_psi restricts to -psi (q - c)") {
  auto h = Formd::basis_covector(3, 2);  // screen z = 1
  auto fs = central_from_psi(kC, h, [](const Eigen::VectorXd&) { return 1.0; });
  auto screen = ScreenSpec::flat(h);
  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    auto q = vec3(rng.range(-2, 2), rng.range(-2, 2), 1.0);
    if (q.coeffs().head(2).norm() < 0.1) continue;
    auto fh = restrict_to_screen(fs, screen, q);
    Eigen::Vector3d expect = -(q.coeffs() - kC.coeffs());
    CHECK((fh.coeffs() - expect).norm() < 1e-12);
  }

  // Psi is homogeneous of degree -3 by construction
  auto q = vec3(0.4, -1.1, 1.0);
  CHECK(fs.psi_value(q * 2.0) ==
        doctest::Approx(fs.psi_value(q) / 8.0).epsilon(1e-12));
}

TEST_CASE("power law with beta = -3 is the Kepler field") {
  auto h = Formd::basis_covector(3, 2);
  auto pl = ForceFieldSpec::power_law(-3.0, h, kC);
  auto kep = ForceFieldSpec::kepler(kC, pl.bilinear());
  Rng rng(9);
  for (int i = 0; i < 30; ++i) {
    Multivectord q = sample_domain_point(pl, rng);
    auto fa = pl.eval(q);
    auto fb = kep.eval(q);
    CHECK((fa.coeffs() - fb.coeffs()).norm() < 1e-12 * fb.norm());
  }
}

TEST_CASE("restrict_to_screen") {
  auto kep = ForceFieldSpec::kepler(kC, kB);

  // on the canonical cylinder the restricted force is the constant c
  auto cyl = ScreenSpec::cylinder(kB);
  Rng rng(13);
  for (int i = 0; i < 20; ++i) {
    double th = rng.range(0, 2 * M_PI), z = rng.range(-2, 2);
    auto q = vec3(std::cos(th), std::sin(th), z);
    auto fh = restrict_to_screen(kep, cyl, q);
    CHECK((fh.coeffs() - kC.coeffs()).norm() < 1e-12);
  }

  // zero field restricts to zero
  auto zero = ForceFieldSpec::zero(3);
  CHECK(restrict_to_screen(zero, cyl, vec3(1, 0, 0)).norm() == 0.0);

  // flat screen z = 1: Newtonian force toward the center
  auto flat = ScreenSpec::flat(Formd::basis_covector(3, 2));
  auto fh = restrict_to_screen(kep, flat, vec3(1, 0, 1));
  CHECK((fh.coeffs() - Eigen::Vector3d(-1, 0, 0)).norm() < 1e-14);
  // cross-check against -(q-c)/|q-c|^3 at a generic screen point
  auto q = vec3(0.6, -1.2, 1.0);
  Eigen::Vector3d rel = q.coeffs() - kC.coeffs();
  Eigen::Vector3d newton = -rel / std::pow(rel.norm(), 3.0);
  CHECK((restrict_to_screen(kep, flat, q).coeffs() - newton).norm() < 1e-12);
}

TEST_CASE("central fields keep c in the force support") {
  auto kep = ForceFieldSpec::kepler(kC, kB);
  auto jac = ForceFieldSpec::jacobi_anisotropic(kC, diag3(1, 4, 0));
  Rng rng(17);
  for (int i = 0; i < 50; ++i) {
    for (const auto* fs : {&kep, &jac}) {
      Multivectord q = sample_domain_point(*fs, rng);
      auto f = fs->eval(q);
      CHECK(wedge(kC, f).norm() < 1e-12 * std::max(1.0, f.norm()));
    }
  }
}

TEST_CASE("Jacobi attractor is invariant under translations along c") {
  auto jac = ForceFieldSpec::jacobi_anisotropic(kC, diag3(1, 4, 0));
  Rng rng(21);
  for (int i = 0; i < 50; ++i) {
    Multivectord q = sample_domain_point(jac, rng);
    double gamma = rng.range(-2, 2);
    Multivectord qt = q + kC * gamma;
    CHECK(std::abs(jac.psi_value(qt) - jac.psi_value(q)) <
          1e-10 * std::abs(jac.psi_value(q)));
    // the force bivector itself is unchanged: (q + gamma c) ^ c = q ^ c
    auto f = jac.eval(q);
    auto ft = jac.eval(qt);
    CHECK((f.coeffs() - ft.coeffs()).norm() < 1e-10 * f.norm());
  }
}

TEST_CASE("halphen transform closed form") {
  auto h = Formd::basis_covector(3, 2);
  Eigen::Vector3d h1c(1, 0, 1);
  auto h1 = Formd::covector(h1c);
  auto c = vec3(0.5, 0, 1);  // <h,c> = 1, <h1,c> = 1.5

  auto t = halphen_transform(-3.0, h, h1, c);
  CHECK_FALSE(t.vertical);
  CHECK(t.exponent == doctest::Approx(0.0));  // Kepler maps to Kepler form
  CHECK(t.mass == doctest::Approx(1.5));

  auto t0 = halphen_transform(0.0, h, h1, c);
  CHECK(t0.exponent == doctest::Approx(-3.0));

  // identity screens: mass 1, transformed field equals the original
  auto tid = halphen_transform(-1.0, h, h, c);
  CHECK(tid.mass == doctest::Approx(1.0));
  CHECK(tid.exponent == doctest::Approx(-2.0));

  // vertical target screen: closed form unavailable, reported not thrown
  auto tv = halphen_transform(-1.0, h, Formd::basis_covector(3, 0),
                              vec3(0, 0, 1));
  CHECK(tv.vertical);
}

TEST_CASE("halphen transform agrees with transporting the field") {
  // The projective extension of the power-law system on screen h, restricted
  // to screen h1, must match the closed-form transformed system of the
  // returned {exponent, mass} data.
  auto h = Formd::basis_covector(3, 2);
  Eigen::Vector3d h1c(1, 0, 1);
  auto h1 = Formd::covector(h1c);
  auto c = vec3(0.5, 0, 1);
  auto screen1 = ScreenSpec::flat(h1);

  for (double beta : {0.0, -1.0, -3.0}) {
    auto fs = ForceFieldSpec::power_law(beta, h, c);
    auto t = halphen_transform(beta, h, h1, c);
    const Eigen::MatrixXd& B = fs.bilinear();
    Eigen::Vector3d c1 = c.coeffs() / t.mass;
    Rng rng(31);
    int checked = 0;
    while (checked < 50) {
      Eigen::Vector3d v(rng.range(-2, 2), rng.range(-2, 2), rng.range(0.2, 2));
      double s1 = h1c.dot(v);
      if (s1 < 0.3) continue;
      Eigen::Vector3d q1 = v / s1;
      Multivectord q1v = Multivectord::vector(q1);
      if (q1[2] < 0.2) continue;  // stay where <h,q1> is comfortably positive
      if (fs.domain_status(q1v) != FieldDomainStatus::Ok) continue;
      Eigen::Vector3d rel = q1 - c1;
      double relnorm = std::sqrt(rel.dot(B * rel));
      if (relnorm < 0.1) continue;
      auto fh1 = restrict_to_screen(fs, screen1, q1v);
      Eigen::Vector3d closed = -t.mass * std::pow(relnorm, beta) *
                               std::pow(q1[2], t.exponent) * rel;
      CHECK((fh1.coeffs() - closed).norm() < 1e-8 * closed.norm());
      ++checked;
    }
  }
}

TEST_CASE("integrating then transporting matches the transformed system") {
  // motion under the power-law field on screen h, carried over to screen h1,
  // obeys the transformed force of the returned {exponent, mass} data
  auto h = Formd::basis_covector(3, 2);
  Eigen::Vector3d h1c(1, 0, 1);
  auto h1 = Formd::covector(h1c);
  auto c = vec3(0.5, 0, 1);
  auto screenA = ScreenSpec::flat(h);
  auto screenB = ScreenSpec::flat(h1);

  for (double beta : {0.0, -1.0, -3.0}) {
    auto fs = ForceFieldSpec::power_law(beta, h, c);
    auto t = halphen_transform(beta, h, h1, c);
    const Eigen::MatrixXd& B = fs.bilinear();
    Eigen::Vector3d c1 = c.coeffs() / t.mass;

    IntegratorConfig cfg;
    cfg.rel_tol = 1e-12;
    cfg.abs_tol = 1e-14;
    ScreenState init{vec3(1.2, 0, 1), vec3(0, 0.9, 0)};
    auto traj = integrate(fs, screenA, init, 1.0, cfg);
    auto moved = transport_to_screen(traj, screenB);

    double worst = 0.0;
    for (std::size_t k = 0; k < moved.nodes().size(); ++k) {
      auto st = moved.node_state(k);
      Eigen::Vector3d q1 = st.q.coeffs();
      Eigen::Vector3d rel = q1 - c1;
      Eigen::Vector3d force = -t.mass *
                              std::pow(std::sqrt(rel.dot(B * rel)), beta) *
                              std::pow(q1[2], t.exponent) * rel;
      // transported impulsion rate must equal q1 ^ (transformed force)
      auto expected = wedge(st.q, Multivectord::vector(force));
      worst = std::max(worst,
                       (st.pidot.coeffs() - expected.coeffs()).norm() /
                           std::max(expected.norm(), 1e-300));
    }
    CHECK(worst < 1e-8);
  }
}

TEST_CASE("validate_field verdicts") {
  auto kep = ForceFieldSpec::kepler(kC, kB);
  auto rep = validate_field(kep, 100, 42);
  CHECK(rep.pass);
  CHECK(rep.samples == 100);
  CHECK(rep.max_homogeneity_residual < 1e-10);
  CHECK(rep.max_decomposability_residual < 1e-10);

  // constant field: wrong homogeneity degree
  auto constant = ForceFieldSpec::custom(
      3,
      [](const Multivectord&) { return Multivectord::basis_blade(3, 0b011); },
      HomogeneityTag{0.0});
  auto repc = validate_field(constant, 50, 42);
  CHECK_FALSE(repc.pass);
  CHECK(repc.max_homogeneity_residual > 0.5);

  // correct homogeneity but not decomposable against q
  auto nondecomp = ForceFieldSpec::custom(
      3,
      [](const Multivectord& q) {
        return Multivectord::basis_blade(3, 0b011) *
               (1.0 / q.coeffs().squaredNorm());
      },
      HomogeneityTag{-2.0});
  auto repn = validate_field(nondecomp, 50, 42);
  CHECK_FALSE(repn.pass);
  CHECK(repn.max_homogeneity_residual < 1e-10);
  CHECK(repn.max_decomposability_residual > 1e-3);
}

TEST_CASE("built-in fields satisfy the projective field conditions") {
  auto h = Formd::basis_covector(3, 2);
  std::vector<ForceFieldSpec> fields;
  fields.push_back(ForceFieldSpec::zero(3));
  fields.push_back(ForceFieldSpec::kepler(kC, kB));
  fields.push_back(ForceFieldSpec::jacobi_anisotropic(kC, diag3(1, 4, 0)));
  fields.push_back(ForceFieldSpec::power_law(-1.0, h, kC));
  for (const auto& fs : fields) {
    auto rep = validate_field(fs, 200, 7);
    CHECK(rep.pass);
  }
}
