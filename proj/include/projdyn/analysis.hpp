#pragma once

// Verification instruments: constant of areas, divergence identities, conic
// geometry of Kepler orbits on the cylinder screen, leafwise return maps with
// their transvection-group equivariance, eccentricity covectors, dilation
// scaling and symmetry-group checks.

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "projdyn/errors.hpp"
#include "projdyn/exterior.hpp"
#include "projdyn/force.hpp"
#include "projdyn/integrate.hpp"
#include "projdyn/screen.hpp"

namespace projdyn {

// ---------------------------------------------------------------------------
// Transvection group elements

/// The linear map Id + omega (x) c with <omega, c> = 0. These maps fix c,
/// induce the identity on V/[c], and form an abelian group.
struct GElement {
  Formd omega;
  Multivectord c;

  static GElement identity(const Multivectord& c);

  /// Throws std::invalid_argument unless <omega, c> = 0 within 1e-12.
  static GElement make(const Formd& omega, const Multivectord& c);

  Eigen::MatrixXd matrix() const;
  Multivectord apply(const Multivectord& v) const;
  ProjectiveState apply(const ProjectiveState& s) const;
  GElement compose(const GElement& other) const;
  GElement inverse() const;
  double omega_norm() const { return omega.norm(); }
};

// ---------------------------------------------------------------------------
// Leaf coordinates (dim 3)

/// Adapted coordinates with c as the last basis vector: frame coordinates
/// xi = Ainv q put the center ray on the xi3-axis, and for Kepler fields the
/// cylinder h = 1 becomes the unit circular cylinder. A leaf is the
/// half-plane {y = 0, x > 0} after a rotation about the axis.
struct LeafFrame {
  Eigen::Matrix3d A;     // frame -> V (columns: x, y, c)
  Eigen::Matrix3d Ainv;  // V -> frame

  static LeafFrame from_center(const Multivectord& c);
  static LeafFrame from_quadratic(const Eigen::MatrixXd& B,
                                  const Multivectord& c);
  static LeafFrame for_field(const ForceFieldSpec& fs);

  Multivectord center() const;
  /// Frame rotated by `angle` about the axis, so that the leaf at that angle
  /// becomes {y = 0, x > 0}.
  LeafFrame rotated(double angle) const;
};

/// State on a leaf after the normalization x(q) = 1, x(qdot) = 0,
/// y(qdot) = C: only z, zdot and the areal constant remain.
struct LeafState {
  double z = 0.0;
  double zdot = 0.0;
  double C = 0.0;
};

/// Normalizes a projective state on the frame's leaf {y = 0, x > 0}.
/// Throws std::invalid_argument when the state is off the leaf.
LeafState to_leaf_state(const LeafFrame& frame, const ProjectiveState& st,
                        double tol = 1e-8);

ProjectiveState from_leaf_state(const LeafFrame& frame, const LeafState& ls);

/// Covector whose oriented zero crossing detects passage through the leaf at
/// `angle`; orientation +1 counts crossings with increasing frame angle.
Formd leaf_form(const LeafFrame& frame, double angle, int orientation);

// ---------------------------------------------------------------------------
// Constant of areas

struct AreasReport {
  Multivectord C;            // c ^ pi at the first sample
  double max_drift = 0.0;    // max relative deviation over the samples
  bool non_central_warning = false;
};

/// C = c ^ pi at t0 and its worst relative drift along the trajectory.
/// When the generating field is supplied and is not central with this c,
/// the report carries a warning (drift may be genuine).
AreasReport constant_of_areas(const Multivectord& c, const Trajectory& traj,
                              const ForceFieldSpec* fs = nullptr);

// ---------------------------------------------------------------------------
// Divergence instruments

struct DivergenceReport {
  int n = 0;  // dim V - 1
  double max_identity_residual = 0.0;  // |q -| d(omega) - (n-3) omega|
  double max_closed_residual = 0.0;    // |d(omega)|, meaningful for n = 3
  int checked = 0;
  int skipped = 0;
  double tolerance = 0.0;
  bool identity_ok = false;
};

/// Checks the homogeneity identity q -| d(f -| mu) = (n-3) (f -| mu) at the
/// given points, and accumulates the closedness residual d(f -| mu) = 0
/// (the divergence-free criterion, decisive only when n = 3).
DivergenceReport divergence_check(const ForceFieldSpec& fs, const Formd& mu,
                                  const std::vector<Multivectord>& points,
                                  double tol = 1e-5);

/// Seeded sample points in the field domain for divergence_check.
std::vector<Multivectord> divergence_sample_points(const ForceFieldSpec& fs,
                                                   int count,
                                                   std::uint64_t seed);

// ---------------------------------------------------------------------------
// Conic geometry on the cylinder screen

enum class ConicClass { Ellipse, Parabola, Hyperbola, Line };

const char* to_string(ConicClass c);

struct ConicReport {
  ConicClass classification = ConicClass::Ellipse;
  Eigen::Vector3d plane_normal = Eigen::Vector3d::Zero();  // frame coords
  double plane_offset = 0.0;       // z-intercept of the fitted plane
  double max_plane_residual = 0.0; // orthogonal distance, frame coords
  double theta_rate_mean = 0.0;
  double theta_rate_max_dev = 0.0; // relative to the mean rate
  double center_point_residual = 0.0;  // plane eval at thetadot^{-2} c
  double vertical_fit_residual = 0.0;  // line case: quadratic fit of z(t)
};

/// Plane fit, angular-rate uniformity and conic classification for a
/// trajectory on the Kepler cylinder screen (dim 3).
ConicReport conic_analysis(const Trajectory& traj, const Multivectord& c);

// ---------------------------------------------------------------------------
// Return map on leaves

struct ReturnMapResult {
  bool complete = false;
  int crossings_found = 0;
  ProjectiveState state;                // state at the k-th crossing of K
  std::optional<GElement> g;            // set when source and target coincide
  std::vector<double> crossing_times;   // internal integration clock
  std::optional<Trajectory> trajectory; // the (possibly partial) integration
};

/// Integrates from a state on the source leaf until the k-th oriented
/// crossing of the target leaf. When the leaves coincide, also extracts the
/// unique transvection mapping the initial normalized state to the returned
/// one. Incomplete runs (singularity, domain exit, crossing budget) return
/// complete = false with partial data.
ReturnMapResult return_map(const ForceFieldSpec& fs, double source_leaf_angle,
                           double target_leaf_angle, int k,
                           const ProjectiveState& init,
                           const IntegratorConfig& cfg = {});

/// The unique transvection sending the reference leaf state to the orbit's
/// leaf state. Both must carry the same constant of areas (1e-8 relative).
GElement eccentricity_covector(const LeafFrame& frame,
                               const ProjectiveState& orbit_state,
                               const ProjectiveState& reference_state);

/// Scaling map in normalized leaf coordinates:
/// (z, ydot, zdot) -> (z / lambda, ydot / sqrt(lambda), zdot / lambda^{3/2}).
ProjectiveState dilation_map(const LeafFrame& frame, const ProjectiveState& st,
                             double lambda);

// ---------------------------------------------------------------------------
// Symmetry group of the Kepler field

/// Validates that g preserves the Kepler form B and fixes c, transforms the
/// trajectory samples by (q, pi) -> (g q, /\^2 g pi), and measures how far
/// the transformed data is from being a solution by re-integration from the
/// transformed initial state. Returns the worst ray-angle / relative-pi
/// deviation over the grid.
double symmetry_check_H(const ForceFieldSpec& fs, const Trajectory& traj,
                        const Eigen::MatrixXd& g,
                        const IntegratorConfig& cfg = {});

// ---------------------------------------------------------------------------
// Plane fitting

struct PlaneFit {
  Eigen::VectorXd normal;    // unit
  Eigen::VectorXd centroid;  // zero for the through-origin fit
  double max_residual = 0.0;
};

/// Orthogonal least-squares affine plane through the rows of `pts`.
PlaneFit fit_affine_plane(const Eigen::MatrixXd& pts);

/// Orthogonal least-squares plane through the origin.
PlaneFit fit_linear_plane(const Eigen::MatrixXd& pts);

}  // namespace projdyn
