// Acceptance suite: one criterion per function, each printing a single
// PASS/FAIL line with its measured values and pinned tolerances. The binary
// exits with the number of failed criteria.

#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "projdyn/analysis.hpp"
#include "projdyn/random.hpp"
#include "projdyn/scenario.hpp"
#include "support/kepler_oracle.hpp"

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

ForceFieldSpec kepler3() { return ForceFieldSpec::kepler(kC, kB); }

ForceFieldSpec kepler_dim(int dim) {
  Eigen::VectorXd d = Eigen::VectorXd::Ones(dim);
  d[dim - 1] = 0.0;
  Eigen::VectorXd c = Eigen::VectorXd::Zero(dim);
  c[dim - 1] = 1.0;
  return ForceFieldSpec::kepler(Multivectord::vector(c),
                                Eigen::MatrixXd(d.asDiagonal()));
}

IntegratorConfig tight() {
  IntegratorConfig cfg;
  cfg.rel_tol = 1e-12;
  cfg.abs_tol = 1e-14;
  return cfg;
}

/// Newtonian oracle elements of the flat-screen (z = 1) state carried by a
/// normalized leaf state.
kepler_oracle::Elements leaf_elements(const LeafState& ls) {
  Eigen::Vector2d r(1.0 / ls.z, 0.0);
  Eigen::Vector2d v(-ls.zdot, ls.z * ls.C);
  return kepler_oracle::elements(r, v);
}

ScreenState leaf_to_flat_state(const LeafState& ls) {
  return ScreenState{vec3(1.0 / ls.z, 0, 1), vec3(-ls.zdot, ls.z * ls.C, 0)};
}

struct Criterion {
  std::string label;
  std::function<bool(std::string&)> run;
};

// ---------------------------------------------------------------------------
// 1. Screen invariance

bool c1_screen_invariance(std::string& detail) {
  const double tol = 1e-6;
  auto kep = kepler3();
  auto flatA = ScreenSpec::flat(Formd::basis_covector(3, 2));     // z = 1
  auto flatB = ScreenSpec::flat(Formd::covector(Eigen::Vector3d(1, 0, 1)));

  ScreenState init{vec3(1, 0, 1), vec3(0, 0.8, 0)};
  auto el = kepler_oracle::elements({1, 0}, {0, 0.8});
  auto trajA = integrate(kep, flatA, init, el.period, tight());
  auto moved = transport_to_screen(trajA, flatB);

  IntegratorConfig cfg = tight();
  for (const auto& s : moved.samples()) cfg.output_times.push_back(s.t);
  ProjectiveState init2{moved.samples().front().q, moved.samples().front().pi};
  auto trajB =
      integrate(kep, flatB, init2, moved.t_reached(), cfg);

  double worst_angle = 0.0, worst_pi = 0.0;
  for (std::size_t i = 0; i < moved.samples().size(); ++i) {
    const auto& sa = moved.samples()[i];
    const auto& sb = trajB.samples()[i];
    worst_angle = std::max(worst_angle, ray_angle(sa.q, sb.q));
    worst_pi = std::max(worst_pi, (sa.pi.coeffs() - sb.pi.coeffs()).norm() /
                                      sa.pi.norm());
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "ray angle %.2e, pi deviation %.2e (tol %.0e)", worst_angle,
                worst_pi, tol);
  detail = buf;
  return worst_angle < tol && worst_pi < tol;
}

// ---------------------------------------------------------------------------
// 2. Kepler conic on the cylinder screen

bool c2_kepler_conic(std::string& detail) {
  const double plane_tol = 1e-7, rate_tol = 1e-8, center_tol = 1e-7;
  auto kep = kepler3();
  auto cyl = ScreenSpec::cylinder(kB);
  ScreenState init{vec3(1, 0, 0.9), vec3(0, 1.05, 0.2)};
  auto traj = integrate(kep, cyl, init, 40.0, tight());
  auto rep = conic_analysis(traj, kC);
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "%s, plane %.2e (tol %.0e), rate dev %.2e (tol %.0e), "
                "center %.2e (tol %.0e)",
                to_string(rep.classification), rep.max_plane_residual,
                plane_tol, rep.theta_rate_max_dev, rate_tol,
                rep.center_point_residual, center_tol);
  detail = buf;
  return rep.classification == ConicClass::Ellipse &&
         rep.max_plane_residual < plane_tol &&
         rep.theta_rate_max_dev < rate_tol &&
         rep.center_point_residual < center_tol;
}

// ---------------------------------------------------------------------------
// 3. Closed orbits and identity monodromy

bool c3_closed_orbits(std::string& detail) {
  const double omega_tol = 1e-6, closure_tol = 1e-5, period_tol = 1e-6;
  auto kep = kepler3();
  auto frame = LeafFrame::for_field(kep);
  auto flat = ScreenSpec::flat(Formd::basis_covector(3, 2));
  const std::vector<LeafState> inits = {
      {0.8, 0.1, 1.0}, {1.3, -0.2, 1.0}, {1.6, 0.05, 1.0},
      {0.9, 0.15, 1.0}, {1.1, 0.3, 1.0}};

  double worst_omega = 0.0, worst_closure = 0.0, worst_period = 0.0;
  for (const auto& ls : inits) {
    auto res = return_map(kep, 0.0, 0.0, 1, from_leaf_state(frame, ls));
    if (!res.complete || !res.g.has_value()) {
      detail = "return map incomplete";
      return false;
    }
    worst_omega = std::max(worst_omega, res.g->omega_norm());

    // flat-screen closure against the closed-form period
    auto el = leaf_elements(ls);
    auto traj =
        integrate(kep, flat, leaf_to_flat_state(ls), 1.05 * el.period, tight());
    auto st = traj.state_at(el.period);
    auto st0 = traj.samples().front();
    double closure = std::max(
        (st.q.coeffs() - st0.q.coeffs()).norm() / st0.q.norm(),
        (st.pi.coeffs() - st0.pi.coeffs()).norm() / st0.pi.norm());
    worst_closure = std::max(worst_closure, closure);

    auto crossings = detect_crossings(traj, Formd::basis_covector(3, 1));
    if (crossings.empty()) {
      detail = "no period crossing found";
      return false;
    }
    worst_period = std::max(
        worst_period, std::abs(crossings.front().t - el.period) / el.period);
  }
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "|omega| %.2e (tol %.0e), closure %.2e (tol %.0e), period "
                "%.2e (tol %.0e)",
                worst_omega, omega_tol, worst_closure, closure_tol,
                worst_period, period_tol);
  detail = buf;
  return worst_omega < omega_tol && worst_closure < closure_tol &&
         worst_period < period_tol;
}

// ---------------------------------------------------------------------------
// 4. Constant of areas over ten periods

bool c4_constant_of_areas(std::string& detail) {
  const double tol = 1e-8;
  auto kep = kepler3();
  auto flat = ScreenSpec::flat(Formd::basis_covector(3, 2));
  ScreenState init{vec3(1, 0, 1), vec3(0, 0.8, 0)};
  auto el = kepler_oracle::elements({1, 0}, {0, 0.8});
  auto traj = integrate(kep, flat, init, 10.0 * el.period, tight());
  double kep_drift = constant_of_areas(kC, traj, &kep).max_drift;

  auto jac = ForceFieldSpec::jacobi_anisotropic(kC, diag3(1, 4, 0));
  auto frame = LeafFrame::for_field(jac);
  auto jinit = from_leaf_state(frame, LeafState{1.1, 0.15, 1.0});
  auto turn = return_map(jac, 0.0, 0.0, 1, jinit);
  if (!turn.complete) {
    detail = "Jacobi turn estimate incomplete";
    return false;
  }
  auto sphere = ScreenSpec::euclidean_sphere(3);
  auto jtraj = integrate(jac, sphere, jinit,
                         10.0 * turn.crossing_times.back(), tight());
  double jac_drift = constant_of_areas(kC, jtraj, &jac).max_drift;

  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "Kepler drift %.2e, Jacobi drift %.2e (tol %.0e)", kep_drift,
                jac_drift, tol);
  detail = buf;
  return kep_drift < tol && jac_drift < tol;
}

// ---------------------------------------------------------------------------
// 5. Halphen power-law transform

bool c5_halphen(std::string& detail) {
  const double tol = 1e-8;
  auto h = Formd::basis_covector(3, 2);
  Eigen::Vector3d h1c(1, 0, 1);
  auto h1 = Formd::covector(h1c);
  auto c = vec3(0.5, 0, 1);  // <h,c> = 1, <h1,c> = 1.5
  auto screen1 = ScreenSpec::flat(h1);

  double worst = 0.0;
  double kepler_exponent = -1.0;
  for (double beta : {0.0, -1.0, -3.0}) {
    auto fs = ForceFieldSpec::power_law(beta, h, c);
    auto t = halphen_transform(beta, h, h1, c);
    if (beta == -3.0) kepler_exponent = t.exponent;
    const Eigen::MatrixXd& B = fs.bilinear();
    Eigen::Vector3d c1 = c.coeffs() / t.mass;
    Rng rng(2026);
    int checked = 0;
    while (checked < 50) {
      Eigen::Vector3d v(rng.range(-2, 2), rng.range(-2, 2), rng.range(0.2, 2));
      double s1 = h1c.dot(v);
      if (s1 < 0.3) continue;
      Eigen::Vector3d q1 = v / s1;
      Multivectord q1v = Multivectord::vector(q1);
      if (q1[2] < 0.2) continue;
      if (fs.domain_status(q1v) != FieldDomainStatus::Ok) continue;
      Eigen::Vector3d rel = q1 - c1;
      double relnorm = std::sqrt(rel.dot(B * rel));
      if (relnorm < 0.1) continue;
      auto fh1 = restrict_to_screen(fs, screen1, q1v);
      Eigen::Vector3d closed = -t.mass * std::pow(relnorm, beta) *
                               std::pow(q1[2], t.exponent) * rel;
      worst = std::max(worst, (fh1.coeffs() - closed).norm() / closed.norm());
      ++checked;
    }
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "field residual %.2e (tol %.0e), beta=-3 exponent %g", worst,
                tol, kepler_exponent);
  detail = buf;
  return worst < tol && kepler_exponent == 0.0;
}

// ---------------------------------------------------------------------------
// 6. Divergence identities

bool c6_divergence(std::string& detail) {
  const double tol = 1e-5;
  auto kep4 = kepler_dim(4);
  auto rep4 =
      divergence_check(kep4, Formd::volume(4),
                       divergence_sample_points(kep4, 50, 601), tol);
  auto kep3 = kepler_dim(3);
  auto rep3 =
      divergence_check(kep3, Formd::volume(3),
                       divergence_sample_points(kep3, 50, 602), tol);

  double worst_identity = std::max(rep3.max_identity_residual,
                                   rep4.max_identity_residual);
  for (int dim = 3; dim <= 5; ++dim) {
    std::vector<ForceFieldSpec> fields;
    fields.push_back(ForceFieldSpec::zero(dim));
    fields.push_back(kepler_dim(dim));
    Eigen::VectorXd d = Eigen::VectorXd::Ones(dim);
    d[dim - 1] = 0.0;
    d[0] = 3.0;
    Eigen::VectorXd cc = Eigen::VectorXd::Zero(dim);
    cc[dim - 1] = 1.0;
    fields.push_back(ForceFieldSpec::jacobi_anisotropic(
        Multivectord::vector(cc), Eigen::MatrixXd(d.asDiagonal())));
    fields.push_back(ForceFieldSpec::power_law(
        -1.0, Formd::basis_covector(dim, dim - 1), Multivectord::vector(cc)));
    for (const auto& fs : fields) {
      auto rep = divergence_check(fs, Formd::volume(dim),
                                  divergence_sample_points(fs, 50, 610 + dim),
                                  tol);
      worst_identity = std::max(worst_identity, rep.max_identity_residual);
    }
  }
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "dim4 closed %.2e, dim3 identity %.2e, all-fields identity "
                "%.2e (tol %.0e)",
                rep4.max_closed_residual, rep3.max_identity_residual,
                worst_identity, tol);
  detail = buf;
  return rep4.max_closed_residual < tol && rep3.max_identity_residual < tol &&
         worst_identity < tol;
}

// ---------------------------------------------------------------------------
// 7. Return-map equivariance under the transvection group

bool c7_equivariance(std::string& detail) {
  const double tol = 1e-6;
  auto jac = ForceFieldSpec::jacobi_anisotropic(kC, diag3(1, 4, 0));
  auto frame = LeafFrame::for_field(jac);
  Rng rng(701);
  double worst = 0.0;
  for (int rep = 0; rep < 10; ++rep) {
    LeafState ls{rng.range(0.7, 1.4), rng.range(-0.2, 0.2), 1.0};
    auto init = from_leaf_state(frame, ls);
    Eigen::Vector3d w(rng.range(-0.3, 0.3), rng.range(-0.3, 0.3), 0.0);
    auto g0 = GElement::make(
        Formd::covector((frame.Ainv.transpose() * w).eval()), frame.center());
    auto lhs = return_map(jac, 0.0, 0.0, 1, g0.apply(init));
    auto rhs = return_map(jac, 0.0, 0.0, 1, init);
    if (!lhs.complete || !rhs.complete) {
      detail = "return map incomplete";
      return false;
    }
    auto expect = g0.apply(rhs.state);
    worst = std::max(worst, ray_angle(lhs.state.ray, expect.ray));
    worst = std::max(worst,
                     (lhs.state.pi.coeffs() - expect.pi.coeffs()).norm() /
                         expect.pi.norm());
  }
  char buf[120];
  std::snprintf(buf, sizeof(buf), "commutation residual %.2e (tol %.0e)",
                worst, tol);
  detail = buf;
  return worst < tol;
}

// ---------------------------------------------------------------------------
// 8. Symmetry group of the Kepler field

bool c8_symmetry_H(std::string& detail) {
  const double tol = 1e-7;
  auto kep = kepler3();
  auto cyl = ScreenSpec::cylinder(kB);
  ScreenState init{vec3(1, 0, 0.9), vec3(0, 1.05, 0.2)};
  auto traj = integrate(kep, cyl, init, 12.0, tight());

  Rng rng(801);
  double worst = 0.0;
  for (int i = 0; i < 5; ++i) {  // transvections
    auto g = GElement::make(
        Formd::covector(
            Eigen::Vector3d(rng.range(-0.4, 0.4), rng.range(-0.4, 0.4), 0)),
        kC);
    worst = std::max(worst, symmetry_check_H(kep, traj, g.matrix()));
  }
  for (int i = 0; i < 5; ++i) {  // rotations of the horizontal complement
    double a = rng.range(0.3, 2 * M_PI - 0.3);
    Eigen::Matrix3d rot;
    rot << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
    worst = std::max(worst, symmetry_check_H(kep, traj, rot));
  }
  char buf[120];
  std::snprintf(buf, sizeof(buf), "dynamics residual %.2e (tol %.0e)", worst,
                tol);
  detail = buf;
  return worst < tol;
}

// ---------------------------------------------------------------------------
// 9. Free motion

bool c9_free_motion(std::string& detail) {
  const double pi_tol = 1e-10, plane_tol = 1e-9;
  auto zero = ForceFieldSpec::zero(3);
  struct Case {
    ScreenSpec screen;
    ScreenState init;
  };
  std::vector<Case> cases;
  cases.push_back({ScreenSpec::flat(Formd::basis_covector(3, 2)),
                   {vec3(0.3, -0.2, 1), vec3(0.6, 1.1, 0)}});
  cases.push_back({ScreenSpec::euclidean_sphere(3),
                   {vec3(1, 0, 0), vec3(0, 0.7, 0.4)}});
  cases.push_back({ScreenSpec::cylinder(kB),
                   {vec3(0, 1, 0.4), vec3(0.8, 0, 0.2)}});

  double worst_pi = 0.0, plane_res = 0.0;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    auto traj = integrate(zero, cases[i].screen, cases[i].init, 6.0, tight());
    const auto& first = traj.samples().front().pi;
    for (const auto& s : traj.samples())
      worst_pi = std::max(worst_pi, (s.pi.coeffs() - first.coeffs()).norm() /
                                        first.norm());
    if (cases[i].screen.kind() == ScreenKind::Sphere) {
      Eigen::MatrixXd pts(traj.samples().size(), 3);
      for (std::size_t k = 0; k < traj.samples().size(); ++k)
        pts.row(k) = traj.samples()[k].q.coeffs().transpose();
      plane_res = fit_linear_plane(pts).max_residual;
    }
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "pi drift %.2e (tol %.0e), great-circle residual %.2e (tol %.0e)",
                worst_pi, pi_tol, plane_res, plane_tol);
  detail = buf;
  return worst_pi < pi_tol && plane_res < plane_tol;
}

// ---------------------------------------------------------------------------
// 10. Dilation invariance

bool c10_dilation(std::string& detail) {
  const double tol = 1e-5;
  auto kep = kepler3();
  auto frame = LeafFrame::for_field(kep);
  auto init = from_leaf_state(frame, LeafState{1.2, 0.1, 1.0});

  double worst = 0.0;
  for (double lam : {0.5, 2.0}) {
    auto scaled = dilation_map(frame, init, lam);
    auto res = return_map(kep, 0.0, 0.0, 1, scaled);
    if (!res.complete || !res.g.has_value()) {
      detail = "return map incomplete";
      return false;
    }
    worst = std::max(worst, res.g->omega_norm());
  }
  char buf[120];
  std::snprintf(buf, sizeof(buf), "closure defect %.2e (tol %.0e)", worst, tol);
  detail = buf;
  return worst < tol;
}

}  // namespace

int main() {
  std::vector<Criterion> criteria = {
      {"screen invariance of the Kepler orbit", c1_screen_invariance},
      {"Kepler conic on the cylinder screen", c2_kepler_conic},
      {"closed orbits with identity monodromy", c3_closed_orbits},
      {"constant of areas over ten periods", c4_constant_of_areas},
      {"power-law change of screen", c5_halphen},
      {"divergence identities in dims 3-5", c6_divergence},
      {"return-map equivariance under transvections", c7_equivariance},
      {"Kepler symmetry group maps solutions to solutions", c8_symmetry_H},
      {"free motion: constant impulsion, great circles", c9_free_motion},
      {"dilation maps closed orbits to closed orbits", c10_dilation},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    std::string detail;
    bool ok = false;
    try {
      ok = criteria[i].run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    std::printf("[%s] %2zu. %s: %s\n", ok ? "PASS" : "FAIL", i + 1,
                criteria[i].label.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  if (failures == 0)
    std::printf("all %zu acceptance criteria passed\n", criteria.size());
  else
    std::printf("%d of %zu acceptance criteria FAILED\n", failures,
                criteria.size());
  return failures;
}
