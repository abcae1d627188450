#pragma once

// Screen functions: positive degree-1 homogeneous maps h on (a cone of) V,
// together with the dictionary between projective states (ray + impulsion
// bivector) and screen states (point + velocity) on the hypersurface h = 1.

#include <Eigen/Dense>

#include "projdyn/errors.hpp"
#include "projdyn/exterior.hpp"

namespace projdyn {

enum class ScreenKind { Flat, Sphere, Cylinder, GeneralQuadratic };

/// Value, differential and Hessian of a screen function at a point.
struct ScreenEval {
  double h = 0.0;
  Formd dh;
  Eigen::MatrixXd hess;
};

class ScreenSpec {
 public:
  /// h(q) = <form, q> with form != 0.
  static ScreenSpec flat(const Formd& form);

  /// h(q) = sqrt(B(q,q)) with B symmetric positive definite.
  static ScreenSpec sphere(const Eigen::MatrixXd& B);

  /// Euclidean unit sphere screen of R^dim.
  static ScreenSpec euclidean_sphere(int dim);

  /// h(q) = sqrt(B(q,q)) with B symmetric positive semidefinite whose kernel
  /// is exactly one-dimensional. Points within the kernel cutoff are rejected.
  static ScreenSpec cylinder(const Eigen::MatrixXd& B);

  /// h(q) = sqrt(B(q,q)) on the domain B(q,q) > 0, B symmetric.
  static ScreenSpec general_quadratic(const Eigen::MatrixXd& B);

  ScreenKind kind() const { return kind_; }
  int dim() const { return dim_; }
  const Formd& form() const { return form_; }
  const Eigen::MatrixXd& bilinear() const { return B_; }

  /// h(q); throws DomainError outside the domain.
  double value(const Multivectord& q) const;

  bool in_domain(const Multivectord& q) const;

  /// h, dh and the Hessian at q, with exact analytic derivatives.
  ScreenEval eval(const Multivectord& q) const;

 private:
  ScreenSpec() = default;

  ScreenKind kind_ = ScreenKind::Flat;
  int dim_ = 0;
  Formd form_;        // Flat only
  Eigen::MatrixXd B_;  // quadratic variants
};

/// Screen point plus velocity; valid when h(q) = 1 and <dh(q), qdot> = 0.
struct ScreenState {
  Multivectord q;
  Multivectord qdot;
};

/// Ray representative plus impulsion bivector; valid when ray^pi = 0.
struct ProjectiveState {
  Multivectord ray;
  Multivectord pi;
};

/// Relative decomposability residual |ray ^ pi| / (|ray| |pi|).
double decomposability_residual(const Multivectord& ray, const Multivectord& pi);

void validate_screen_state(const ScreenSpec& s, const ScreenState& st,
                           double tol = 1e-10);
void validate_projective_state(const ProjectiveState& st, double tol = 1e-10);

/// Scales v onto the screen: v / h(v). Throws DomainError when h(v) <= 0 or
/// undefined.
Multivectord project_to_screen(const ScreenSpec& s, const Multivectord& v);

/// v_h = dh(q) -| pi; tangent to the screen at q.
/// Throws InconsistentStateError when h(q) != 1 or q^pi != 0 beyond 1e-8.
Multivectord impulsion_to_velocity(const ScreenSpec& s, const Multivectord& q,
                                   const Multivectord& pi);

/// pi = q ^ v.
Multivectord velocity_to_impulsion(const Multivectord& q, const Multivectord& v);

/// Radial reaction coefficient: lambda = -<Hess h(q), qdot (x) qdot> / h(q),
/// the multiplier that keeps the screen motion on h = 1.
double reaction_lambda(const ScreenSpec& s, const Multivectord& q,
                       const Multivectord& qdot);

/// Angle between two rays given by nonzero representatives.
double ray_angle(const Multivectord& a, const Multivectord& b);

}  // namespace projdyn
