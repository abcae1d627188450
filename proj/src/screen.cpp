#include "projdyn/screen.hpp"

#include <cmath>

namespace projdyn {

namespace {

constexpr double kKernelCutoff = 1e-12;  // relative B(q,q) below which a
                                         // cylinder point counts as on-kernel

Eigen::MatrixXd checked_symmetric(const Eigen::MatrixXd& B) {
  if (B.rows() != B.cols())
    throw std::invalid_argument("screen form must be square");
  double scale = B.cwiseAbs().maxCoeff();
  if ((B - B.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(scale, 1.0))
    throw std::invalid_argument("screen form must be symmetric");
  return 0.5 * (B + B.transpose());
}

}  // namespace

ScreenSpec ScreenSpec::flat(const Formd& form) {
  if (form.degree() != 1)
    throw std::invalid_argument("flat screen needs a degree-1 form");
  if (form.norm() == 0.0)
    throw std::invalid_argument("flat screen form must be nonzero");
  ScreenSpec s;
  s.kind_ = ScreenKind::Flat;
  s.dim_ = form.dim();
  s.form_ = form;
  return s;
}

ScreenSpec ScreenSpec::sphere(const Eigen::MatrixXd& B) {
  Eigen::MatrixXd Bs = checked_symmetric(B);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Bs);
  if (es.eigenvalues().minCoeff() <=
      1e-12 * std::max(es.eigenvalues().maxCoeff(), 1.0))
    throw std::invalid_argument("sphere screen form must be positive definite");
  ScreenSpec s;
  s.kind_ = ScreenKind::Sphere;
  s.dim_ = static_cast<int>(Bs.rows());
  blades::check_dim(s.dim_);
  s.B_ = Bs;
  return s;
}

ScreenSpec ScreenSpec::euclidean_sphere(int dim) {
  return sphere(Eigen::MatrixXd::Identity(dim, dim));
}

ScreenSpec ScreenSpec::cylinder(const Eigen::MatrixXd& B) {
  Eigen::MatrixXd Bs = checked_symmetric(B);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Bs);
  double top = es.eigenvalues().maxCoeff();
  if (top <= 0.0)
    throw std::invalid_argument("cylinder screen form must be nonzero PSD");
  int zeros = 0;
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    double ev = es.eigenvalues()[i];
    if (ev < -1e-12 * top)
      throw std::invalid_argument("cylinder screen form must be PSD");
    if (ev < 1e-10 * top) ++zeros;
  }
  if (zeros != 1)
    throw std::invalid_argument(
        "cylinder screen form must have a one-dimensional kernel");
  ScreenSpec s;
  s.kind_ = ScreenKind::Cylinder;
  s.dim_ = static_cast<int>(Bs.rows());
  blades::check_dim(s.dim_);
  s.B_ = Bs;
  return s;
}

ScreenSpec ScreenSpec::general_quadratic(const Eigen::MatrixXd& B) {
  ScreenSpec s;
  s.kind_ = ScreenKind::GeneralQuadratic;
  s.B_ = checked_symmetric(B);
  s.dim_ = static_cast<int>(s.B_.rows());
  blades::check_dim(s.dim_);
  return s;
}

bool ScreenSpec::in_domain(const Multivectord& q) const {
  if (q.dim() != dim_) return false;
  switch (kind_) {
    case ScreenKind::Flat:
      return true;  // h is defined everywhere; positivity checked on use
    case ScreenKind::Sphere:
      return q.norm() > 0.0;
    case ScreenKind::Cylinder: {
      double s = q.coeffs().dot(B_ * q.coeffs());
      return s > kKernelCutoff * q.coeffs().squaredNorm();
    }
    case ScreenKind::GeneralQuadratic:
      return q.coeffs().dot(B_ * q.coeffs()) > 0.0;
  }
  return false;
}

double ScreenSpec::value(const Multivectord& q) const {
  if (q.dim() != dim_ || q.grade() != 1)
    throw std::invalid_argument("screen value: grade-1 vector of matching dim expected");
  if (kind_ == ScreenKind::Flat) return pair(form_, q);
  double s = q.coeffs().dot(B_ * q.coeffs());
  if (!in_domain(q))
    throw DomainError("screen value: point outside screen domain");
  return std::sqrt(s);
}

ScreenEval ScreenSpec::eval(const Multivectord& q) const {
  if (q.dim() != dim_ || q.grade() != 1)
    throw std::invalid_argument("screen eval: grade-1 vector of matching dim expected");
  ScreenEval out;
  if (kind_ == ScreenKind::Flat) {
    out.h = pair(form_, q);
    out.dh = form_;
    out.hess = Eigen::MatrixXd::Zero(dim_, dim_);
    return out;
  }
  if (!in_domain(q))
    throw DomainError("screen eval: point outside screen domain");
  Eigen::VectorXd Bq = B_ * q.coeffs();
  double h = std::sqrt(q.coeffs().dot(Bq));
  out.h = h;
  out.dh = Formd::covector((Bq / h).eval());
  out.hess = B_ / h - (Bq * Bq.transpose()) / (h * h * h);
  return out;
}

double decomposability_residual(const Multivectord& ray,
                                const Multivectord& pi) {
  double denom = ray.norm() * pi.norm();
  if (denom == 0.0) return 0.0;
  return wedge(ray, pi).norm() / denom;
}

void validate_screen_state(const ScreenSpec& s, const ScreenState& st,
                           double tol) {
  if (std::abs(s.value(st.q) - 1.0) > tol)
    throw InconsistentStateError("screen state: h(q) != 1");
  if (std::abs(pair(s.eval(st.q).dh, st.qdot)) >
      tol * std::max(1.0, st.qdot.norm()))
    throw InconsistentStateError("screen state: velocity not tangent");
}

void validate_projective_state(const ProjectiveState& st, double tol) {
  if (st.ray.norm() == 0.0)
    throw InconsistentStateError("projective state: zero ray");
  if (decomposability_residual(st.ray, st.pi) > tol)
    throw InconsistentStateError("projective state: ray ^ pi != 0");
}

Multivectord project_to_screen(const ScreenSpec& s, const Multivectord& v) {
  if (v.norm() == 0.0)
    throw std::invalid_argument("project_to_screen: zero vector");
  if (!s.in_domain(v))
    throw DomainError("project_to_screen: point outside screen domain");
  double h = s.value(v);
  if (!(h > 0.0))
    throw DomainError("project_to_screen: h(v) <= 0");
  return v / h;
}

Multivectord impulsion_to_velocity(const ScreenSpec& s, const Multivectord& q,
                                   const Multivectord& pi) {
  ScreenEval ev = s.eval(q);
  if (std::abs(ev.h - 1.0) > 1e-8)
    throw InconsistentStateError("impulsion_to_velocity: h(q) != 1");
  if (decomposability_residual(q, pi) > 1e-8)
    throw InconsistentStateError("impulsion_to_velocity: q ^ pi != 0");
  return interior_coform(ev.dh, pi);
}

Multivectord velocity_to_impulsion(const Multivectord& q,
                                   const Multivectord& v) {
  return wedge(q, v);
}

double reaction_lambda(const ScreenSpec& s, const Multivectord& q,
                       const Multivectord& qdot) {
  ScreenEval ev = s.eval(q);
  if (std::abs(ev.h - 1.0) > 1e-8 ||
      std::abs(pair(ev.dh, qdot)) > 1e-8 * std::max(1.0, qdot.norm()))
    throw InconsistentStateError("reaction_lambda: invalid screen state");
  return -qdot.coeffs().dot(ev.hess * qdot.coeffs()) / ev.h;
}

double ray_angle(const Multivectord& a, const Multivectord& b) {
  double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0)
    throw std::invalid_argument("ray_angle: zero representative");
  // atan2 of (sin, cos) stays accurate for angles near 0 and pi, where the
  // acos formulation loses half the significant digits
  double sin_part = wedge(a, b).norm();
  double cos_part = a.coeffs().dot(b.coeffs());
  return std::atan2(sin_part, cos_part);
}

}  // namespace projdyn
