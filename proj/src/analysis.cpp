#include "projdyn/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "projdyn/random.hpp"

namespace projdyn {

// ---------------------------------------------------------------------------
// GElement

GElement GElement::identity(const Multivectord& c) {
  return GElement{Formd::zero(c.dim(), 1), c};
}

GElement GElement::make(const Formd& omega, const Multivectord& c) {
  if (omega.dim() != c.dim() || omega.degree() != 1 || c.grade() != 1)
    throw std::invalid_argument("GElement: covector/center shape mismatch");
  if (std::abs(pair(omega, c)) > 1e-12 * std::max(1.0, omega.norm() * c.norm()))
    throw std::invalid_argument("GElement: omega must annihilate c");
  return GElement{omega, c};
}

Eigen::MatrixXd GElement::matrix() const {
  const int d = c.dim();
  return Eigen::MatrixXd::Identity(d, d) +
         c.coeffs() * omega.coeffs().transpose();
}

Multivectord GElement::apply(const Multivectord& v) const {
  return v + c * pair(omega, v);
}

ProjectiveState GElement::apply(const ProjectiveState& s) const {
  return ProjectiveState{apply(s.ray), pushforward(matrix(), s.pi)};
}

GElement GElement::compose(const GElement& other) const {
  return GElement{omega + other.omega, c};
}

GElement GElement::inverse() const { return GElement{-omega, c}; }

// ---------------------------------------------------------------------------
// LeafFrame

LeafFrame LeafFrame::from_center(const Multivectord& c) {
  if (c.dim() != 3 || c.grade() != 1 || c.norm() == 0.0)
    throw std::invalid_argument("LeafFrame: nonzero grade-1 center in dim 3 expected");
  Eigen::Vector3d cc = c.coeffs();
  Eigen::Vector3d chat = cc.normalized();
  int least = 0;
  for (int i = 1; i < 3; ++i)
    if (std::abs(chat[i]) < std::abs(chat[least])) least = i;
  Eigen::Vector3d u = Eigen::Vector3d::Unit(least);
  u = (u - chat * chat.dot(u)).normalized();
  Eigen::Vector3d v = chat.cross(u);
  LeafFrame f;
  f.A.col(0) = u;
  f.A.col(1) = v;
  f.A.col(2) = cc;
  f.Ainv = f.A.inverse();
  return f;
}

LeafFrame LeafFrame::from_quadratic(const Eigen::MatrixXd& B,
                                    const Multivectord& c) {
  if (c.dim() != 3 || B.rows() != 3 || B.cols() != 3)
    throw std::invalid_argument("LeafFrame: dim-3 form and center expected");
  Eigen::Vector3d cc = c.coeffs();
  LeafFrame f;
  double bmax = B.cwiseAbs().maxCoeff();
  bool diagonal = true;
  for (int i = 0; i < 3 && diagonal; ++i)
    for (int j = 0; j < 3; ++j)
      if (i != j && std::abs(B(i, j)) > 1e-13 * bmax) diagonal = false;
  if (diagonal) {
    // keep the natural axis order when B is already diagonal
    int axis = 0;
    for (int i = 1; i < 3; ++i)
      if (std::abs(B(i, i)) < std::abs(B(axis, axis))) axis = i;
    int h0 = (axis + 1) % 3, h1 = (axis + 2) % 3;
    if (h0 > h1) std::swap(h0, h1);
    f.Ainv.row(0) = std::sqrt(B(h0, h0)) * Eigen::RowVector3d::Unit(h0);
    f.Ainv.row(1) = std::sqrt(B(h1, h1)) * Eigen::RowVector3d::Unit(h1);
    if (std::abs(cc[axis]) < 1e-12 * cc.norm())
      throw std::invalid_argument("LeafFrame: center not along the kernel");
    f.Ainv.row(2) = Eigen::RowVector3d::Unit(axis) / cc[axis];
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (B + B.transpose()));
    Eigen::Vector3d kernel = es.eigenvectors().col(0);
    if (std::abs(kernel.dot(cc)) < 1e-8 * cc.norm())
      throw std::invalid_argument("LeafFrame: center not along the kernel of B");
    f.Ainv.row(0) = std::sqrt(es.eigenvalues()[1]) *
                    es.eigenvectors().col(1).transpose();
    f.Ainv.row(1) = std::sqrt(es.eigenvalues()[2]) *
                    es.eigenvectors().col(2).transpose();
    f.Ainv.row(2) = kernel.transpose() / kernel.dot(cc);
  }
  f.A = f.Ainv.inverse();
  if (f.A.determinant() < 0.0) {  // keep a right-handed frame
    f.Ainv.row(1) = -f.Ainv.row(1);
    f.A = f.Ainv.inverse();
  }
  return f;
}

LeafFrame LeafFrame::for_field(const ForceFieldSpec& fs) {
  if (!fs.has_center())
    throw std::invalid_argument("LeafFrame: field has no center");
  if (fs.bilinear().size() > 0)
    return from_quadratic(fs.bilinear(), fs.center());
  return from_center(fs.center());
}

Multivectord LeafFrame::center() const {
  return Multivectord::vector(A.col(2).eval());
}

LeafFrame LeafFrame::rotated(double angle) const {
  Eigen::Matrix3d rz;
  rz << std::cos(angle), -std::sin(angle), 0,  //
      std::sin(angle), std::cos(angle), 0,     //
      0, 0, 1;
  LeafFrame f;
  f.A = A * rz;
  f.Ainv = rz.transpose() * Ainv;
  return f;
}

LeafState to_leaf_state(const LeafFrame& frame, const ProjectiveState& st,
                        double tol) {
  if (st.ray.dim() != 3)
    throw std::invalid_argument("to_leaf_state: dim 3 expected");
  Eigen::Vector3d qf = frame.Ainv * st.ray.coeffs();
  double scale = qf.norm();
  if (std::abs(qf[1]) > tol * scale || qf[0] <= 0.0)
    throw std::invalid_argument("to_leaf_state: state is not on the leaf");
  Multivectord pif = pushforward(Eigen::MatrixXd(frame.Ainv), st.pi);
  qf /= qf[0];
  // pi is homogeneous of degree 0 along the ray, so normalizing q leaves it
  // unchanged; v = dx -| pi already satisfies q_n ^ v = pi and x(v) = 0
  Multivectord vf = interior_coform(Formd::basis_covector(3, 0), pif);
  LeafState ls;
  ls.z = qf[2];
  ls.C = vf.coeffs()[1];
  ls.zdot = vf.coeffs()[2];
  return ls;
}

ProjectiveState from_leaf_state(const LeafFrame& frame, const LeafState& ls) {
  Eigen::Vector3d qf(1.0, 0.0, ls.z);
  Eigen::Vector3d vf(0.0, ls.C, ls.zdot);
  Multivectord pif = wedge(Multivectord::vector(qf), Multivectord::vector(vf));
  return ProjectiveState{
      Multivectord::vector((frame.A * qf).eval()),
      pushforward(Eigen::MatrixXd(frame.A), pif)};
}

Formd leaf_form(const LeafFrame& frame, double angle, int orientation) {
  Eigen::Vector3d lf(-std::sin(angle), std::cos(angle), 0.0);
  if (orientation < 0) lf = -lf;
  return Formd::covector((frame.Ainv.transpose() * lf).eval());
}

namespace {

double wrap_angle(double a) { return std::remainder(a, 2.0 * M_PI); }

}  // namespace

// ---------------------------------------------------------------------------
// Constant of areas

AreasReport constant_of_areas(const Multivectord& c, const Trajectory& traj,
                              const ForceFieldSpec* fs) {
  if (traj.samples().empty())
    throw std::invalid_argument("constant_of_areas: empty trajectory");
  AreasReport rep;
  rep.C = wedge(c, traj.samples().front().pi);
  double denom = std::max(rep.C.norm(),
                          1e-15 * c.norm() * traj.samples().front().pi.norm());
  for (const auto& s : traj.samples()) {
    Multivectord Ct = wedge(c, s.pi);
    rep.max_drift =
        std::max(rep.max_drift, (Ct.coeffs() - rep.C.coeffs()).norm() / denom);
  }
  if (fs != nullptr) {
    bool central = fs->has_center() &&
                   ray_angle(fs->center(), c) < 1e-9;
    rep.non_central_warning = !central && fs->kind() != ForceKind::Zero;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Divergence instruments

DivergenceReport divergence_check(const ForceFieldSpec& fs, const Formd& mu,
                                  const std::vector<Multivectord>& points,
                                  double tol) {
  if (mu.degree() != mu.dim() || mu.dim() != fs.dim())
    throw std::invalid_argument("divergence_check: top-degree volume form expected");
  if (mu.norm() == 0.0)
    throw std::invalid_argument("divergence_check: zero volume form");
  DivergenceReport rep;
  rep.n = fs.dim() - 1;
  rep.tolerance = tol;
  auto omega_field = [&](const Multivectord& p) {
    return volume_contract(fs.eval(p), mu);
  };
  for (const auto& q : points) {
    Formd omega, domega;
    try {
      omega = omega_field(q);
      domega = numeric_d(omega_field, q);
    } catch (const std::exception&) {
      ++rep.skipped;
      continue;
    }
    ++rep.checked;
    double oscale =
        std::max(omega.coeffs().lpNorm<Eigen::Infinity>(), 1e-300);
    Formd lhs = interior_vector(q, domega);
    Formd rhs = omega * static_cast<double>(rep.n - 3);
    rep.max_identity_residual = std::max(
        rep.max_identity_residual,
        (lhs.coeffs() - rhs.coeffs()).lpNorm<Eigen::Infinity>() / oscale);
    double qscale = q.coeffs().lpNorm<Eigen::Infinity>();
    rep.max_closed_residual =
        std::max(rep.max_closed_residual,
                 domega.coeffs().lpNorm<Eigen::Infinity>() * qscale / oscale);
  }
  rep.identity_ok = rep.checked > 0 && rep.max_identity_residual < tol;
  return rep;
}

std::vector<Multivectord> divergence_sample_points(const ForceFieldSpec& fs,
                                                   int count,
                                                   std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Multivectord> pts;
  pts.reserve(count);
  for (int i = 0; i < count; ++i) {
    // stay clear of the singular ray so the finite-difference stencil fits
    for (int attempt = 0; attempt < 1000; ++attempt) {
      Multivectord q = sample_domain_point(fs, rng);
      bool safe = true;
      if (fs.has_center()) {
        Eigen::VectorXd cc = fs.center().coeffs().normalized();
        Eigen::VectorXd qq = q.coeffs();
        safe = (qq - cc * cc.dot(qq)).norm() > 0.05 * qq.norm();
        if (fs.kind() == ForceKind::CentralPsi)
          safe = safe && pair(fs.screen_form(), q) > 0.05 * q.norm();
      }
      if (safe) {
        pts.push_back(q);
        break;
      }
    }
  }
  return pts;
}

// ---------------------------------------------------------------------------
// Conic analysis

const char* to_string(ConicClass c) {
  switch (c) {
    case ConicClass::Ellipse: return "ellipse";
    case ConicClass::Parabola: return "parabola";
    case ConicClass::Hyperbola: return "hyperbola";
    case ConicClass::Line: return "line";
  }
  return "?";
}

PlaneFit fit_affine_plane(const Eigen::MatrixXd& pts) {
  PlaneFit fit;
  Eigen::RowVectorXd centroid = pts.colwise().mean();
  Eigen::MatrixXd centered = pts.rowwise() - centroid;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  fit.normal = svd.matrixV().col(pts.cols() - 1);
  fit.centroid = centroid.transpose();
  fit.max_residual = (centered * fit.normal).cwiseAbs().maxCoeff();
  return fit;
}

PlaneFit fit_linear_plane(const Eigen::MatrixXd& pts) {
  PlaneFit fit;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(pts, Eigen::ComputeThinV);
  fit.normal = svd.matrixV().col(pts.cols() - 1);
  fit.centroid = Eigen::VectorXd::Zero(pts.cols());
  fit.max_residual = (pts * fit.normal).cwiseAbs().maxCoeff();
  return fit;
}

ConicReport conic_analysis(const Trajectory& traj, const Multivectord& c) {
  if (traj.dim() != 3)
    throw std::invalid_argument("conic_analysis: dim 3 expected");
  if (traj.screen().kind() != ScreenKind::Cylinder)
    throw std::invalid_argument("conic_analysis: cylinder screen expected");
  const auto& samples = traj.samples();
  if (samples.size() < 8)
    throw std::invalid_argument("conic_analysis: too few samples");

  LeafFrame frame = LeafFrame::from_quadratic(traj.screen().bilinear(), c);
  ConicReport rep;

  Multivectord C0 = wedge(c, samples.front().pi);
  double cscale = c.norm() * std::max(samples.front().pi.norm(), 1e-300);
  if (C0.norm() <= 1e-12 * cscale) {
    // C = 0: vertical line, uniformly accelerated motion along the rulings
    rep.classification = ConicClass::Line;
    Eigen::MatrixXd vandermonde(samples.size(), 3);
    Eigen::VectorXd zs(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
      double t = samples[i].t;
      vandermonde.row(i) << 1.0, t, t * t;
      zs[i] = (frame.Ainv * samples[i].q.coeffs())[2];
    }
    Eigen::VectorXd coef =
        vandermonde.colPivHouseholderQr().solve(zs);
    rep.vertical_fit_residual =
        (vandermonde * coef - zs).cwiseAbs().maxCoeff();
    return rep;
  }

  Eigen::MatrixXd pts(samples.size(), 3);
  for (std::size_t i = 0; i < samples.size(); ++i)
    pts.row(i) = (frame.Ainv * samples[i].q.coeffs()).transpose();

  PlaneFit fit = fit_affine_plane(pts);
  Eigen::Vector3d normal = fit.normal;
  if (normal[2] < 0.0) normal = -normal;
  rep.plane_normal = normal;
  rep.max_plane_residual = fit.max_residual;

  // uniformity of the angular coordinate
  std::vector<double> theta(samples.size());
  double prev = std::atan2(pts(0, 1), pts(0, 0));
  theta[0] = prev;
  double acc = prev;
  for (std::size_t i = 1; i < samples.size(); ++i) {
    double a = std::atan2(pts(i, 1), pts(i, 0));
    acc += wrap_angle(a - prev);
    prev = a;
    theta[i] = acc;
  }
  double mean_rate =
      (theta.back() - theta.front()) / (samples.back().t - samples.front().t);
  double worst = 0.0;
  for (std::size_t i = 1; i < samples.size(); ++i) {
    double rate = (theta[i] - theta[i - 1]) / (samples[i].t - samples[i - 1].t);
    worst = std::max(worst, std::abs(rate - mean_rate));
  }
  rep.theta_rate_mean = mean_rate;
  rep.theta_rate_max_dev = worst / std::max(std::abs(mean_rate), 1e-300);

  // the fitted plane must pass through thetadot^{-2} c = (0, 0, thetadot^{-2})
  Eigen::Vector3d pc(0.0, 0.0, 1.0 / (mean_rate * mean_rate));
  rep.center_point_residual =
      std::abs(normal.dot(pc - fit.centroid)) / std::max(1.0, pc.norm());

  // classification by plane tilt against the unit cylinder
  if (std::abs(normal[2]) < 1e-12) {
    rep.classification = ConicClass::Line;  // vertical plane: degenerate
    return rep;
  }
  double alpha = -normal[0] / normal[2];
  double beta = -normal[1] / normal[2];
  double delta = normal.dot(fit.centroid) / normal[2];
  rep.plane_offset = delta;
  double tilt = std::hypot(alpha, beta);
  double margin = tilt - delta;
  if (std::abs(margin) <= 1e-9)
    rep.classification = ConicClass::Parabola;
  else if (margin < 0.0)
    rep.classification = ConicClass::Ellipse;
  else
    rep.classification = ConicClass::Hyperbola;
  return rep;
}

// ---------------------------------------------------------------------------
// Return map

ReturnMapResult return_map(const ForceFieldSpec& fs, double source_leaf_angle,
                           double target_leaf_angle, int k,
                           const ProjectiveState& init,
                           const IntegratorConfig& cfg0) {
  if (fs.dim() != 3)
    throw std::invalid_argument("return_map: dim 3 expected");
  if (!fs.has_center())
    throw std::invalid_argument("return_map: central field expected");
  if (k < 1) throw std::invalid_argument("return_map: k must be >= 1");
  validate_projective_state(init, 1e-8);

  LeafFrame frame = LeafFrame::for_field(fs);
  LeafFrame source = frame.rotated(source_leaf_angle);
  LeafState ls = to_leaf_state(source, init);
  if (std::abs(ls.C) < 1e-12)
    throw std::invalid_argument("return_map: constant of areas must be nonzero");
  int orientation = ls.C > 0.0 ? +1 : -1;
  Formd crossing_form = leaf_form(frame, target_leaf_angle, orientation);

  // integrate on the Euclidean sphere screen: it covers every ray, so the
  // return map sees closed projective orbits regardless of their affine type
  ScreenSpec sphere = ScreenSpec::euclidean_sphere(3);
  IntegratorConfig cfg = cfg0;
  if (cfg.rel_tol > 1e-12) cfg.rel_tol = 1e-12;
  if (cfg.abs_tol > 1e-14) cfg.abs_tol = 1e-14;

  // crude turn-time estimate from the angular rate at the initial point
  Multivectord q0 = project_to_screen(sphere, init.ray);
  Multivectord v0 = impulsion_to_velocity(sphere, q0, init.pi);
  Eigen::Vector3d qf = frame.Ainv * q0.coeffs();
  Eigen::Vector3d vf = frame.Ainv * v0.coeffs();
  double thdot0 =
      (qf[0] * vf[1] - qf[1] * vf[0]) / (qf[0] * qf[0] + qf[1] * qf[1]);
  double turn_guess = 2.0 * M_PI / std::max(std::abs(thdot0), 1e-6);

  ReturnMapResult res;
  double t_end = 1.5 * k * turn_guess;
  for (int attempt = 0; attempt < 8; ++attempt) {
    Trajectory traj = integrate(fs, sphere, init, t_end, cfg);
    auto crossings = detect_crossings(traj, crossing_form);
    res.crossings_found = static_cast<int>(crossings.size());
    res.trajectory = traj;
    if (res.crossings_found >= k) {
      const auto& hit = crossings[k - 1];
      res.state = hit.state;
      res.crossing_times.clear();
      for (int i = 0; i < k; ++i) res.crossing_times.push_back(crossings[i].t);
      res.complete = true;
      bool same_leaf =
          std::abs(wrap_angle(target_leaf_angle - source_leaf_angle)) < 1e-12;
      if (same_leaf) {
        LeafState out = to_leaf_state(source, res.state);
        Eigen::Vector3d of(out.z - ls.z, (out.zdot - ls.zdot) / ls.C, 0.0);
        // omega in V coordinates: gamma dx + gamma' dy of the source frame
        Eigen::Vector3d omega_v =
            source.Ainv.transpose() *
            Eigen::Vector3d(of[0], of[1], 0.0);
        res.g = GElement::make(Formd::covector(omega_v), frame.center());
      }
      return res;
    }
    if (traj.terminated_by() != Termination::TimeLimit) {
      res.complete = false;  // singular or out-of-domain before k crossings
      return res;
    }
    t_end *= 2.0;
  }
  res.complete = false;  // crossing budget exhausted
  return res;
}

GElement eccentricity_covector(const LeafFrame& frame,
                               const ProjectiveState& orbit_state,
                               const ProjectiveState& reference_state) {
  LeafState a = to_leaf_state(frame, orbit_state);
  LeafState r = to_leaf_state(frame, reference_state);
  if (std::abs(a.C - r.C) > 1e-8 * std::max(std::abs(a.C), std::abs(r.C)))
    throw std::invalid_argument(
        "eccentricity_covector: states carry different constants of areas");
  Eigen::Vector3d omega_f(a.z - r.z, (a.zdot - r.zdot) / r.C, 0.0);
  Eigen::Vector3d omega_v = frame.Ainv.transpose() * omega_f;
  return GElement::make(Formd::covector(omega_v), frame.center());
}

ProjectiveState dilation_map(const LeafFrame& frame, const ProjectiveState& st,
                             double lambda) {
  if (!(lambda > 0.0))
    throw std::invalid_argument("dilation_map: lambda must be positive");
  LeafState ls = to_leaf_state(frame, st);
  LeafState scaled;
  scaled.z = ls.z / lambda;
  scaled.C = ls.C / std::sqrt(lambda);
  scaled.zdot = ls.zdot / (lambda * std::sqrt(lambda));
  return from_leaf_state(frame, scaled);
}

// ---------------------------------------------------------------------------
// Symmetry group of the Kepler field

double symmetry_check_H(const ForceFieldSpec& fs, const Trajectory& traj,
                        const Eigen::MatrixXd& g, const IntegratorConfig& cfg0) {
  if (fs.kind() != ForceKind::Kepler)
    throw std::invalid_argument("symmetry_check_H: Kepler field expected");
  const Eigen::MatrixXd& B = fs.bilinear();
  double bscale = B.cwiseAbs().maxCoeff();
  if ((g.transpose() * B * g - B).cwiseAbs().maxCoeff() > 1e-10 * bscale)
    throw std::invalid_argument("symmetry_check_H: g does not preserve the form");
  const Eigen::VectorXd cc = fs.center().coeffs();
  if ((g * cc - cc).norm() > 1e-10 * cc.norm())
    throw std::invalid_argument("symmetry_check_H: g does not fix the center");
  const auto& samples = traj.samples();
  if (samples.size() < 2)
    throw std::invalid_argument("symmetry_check_H: too few samples");
  for (std::size_t i = 0; i < samples.size(); i += samples.size() / 4 + 1) {
    Multivectord gq = Multivectord::vector((g * samples[i].q.coeffs()).eval());
    if (std::abs(traj.screen().value(gq) - 1.0) > 1e-8)
      throw std::invalid_argument(
          "symmetry_check_H: screen is not invariant under g");
  }

  // transformed data should again solve the dynamics in the same clock
  IntegratorConfig cfg = cfg0;
  if (cfg.rel_tol > 1e-12) cfg.rel_tol = 1e-12;
  if (cfg.abs_tol > 1e-14) cfg.abs_tol = 1e-14;
  cfg.output_times.clear();
  for (const auto& s : samples)
    cfg.output_times.push_back(s.t - samples.front().t);
  ProjectiveState tinit{
      Multivectord::vector((g * samples.front().q.coeffs()).eval()),
      pushforward(g, samples.front().pi)};
  double t_end = samples.back().t - samples.front().t;
  Trajectory recon = integrate(fs, traj.screen(), tinit, t_end, cfg);
  if (recon.samples().size() != samples.size())
    throw Error("symmetry_check_H: re-integration lost samples");

  double worst = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    Multivectord gq = Multivectord::vector((g * samples[i].q.coeffs()).eval());
    Multivectord gpi = pushforward(g, samples[i].pi);
    worst = std::max(worst, ray_angle(gq, recon.samples()[i].q));
    worst = std::max(worst, (gpi.coeffs() - recon.samples()[i].pi.coeffs()).norm() /
                                std::max(gpi.norm(), 1e-300));
  }
  return worst;
}

}  // namespace projdyn
