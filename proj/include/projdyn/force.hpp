#pragma once

// Projective force fields: bivector fields on a cone of V, positively
// homogeneous of degree -2 with q ^ f(q) = 0. Construction, evaluation,
// screen restriction, the Halphen power-law transform and empirical
// validation of field properties.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>

#include "projdyn/errors.hpp"
#include "projdyn/exterior.hpp"
#include "projdyn/screen.hpp"

namespace projdyn {

enum class ForceKind { Zero, CentralPsi, JacobiAttractor, Kepler, Custom };

enum class FieldDomainStatus { Ok, Singular, Outside };

class ForceFieldSpec {
 public:
  using PsiFn = std::function<double(const Eigen::VectorXd&)>;
  using CustomFn = std::function<Multivectord(const Multivectord&)>;

  static ForceFieldSpec zero(int dim);

  /// Kepler field f(q) = B(q,q)^{-3/2} q ^ c, where B is PSD with kernel
  /// exactly the line [c].
  static ForceFieldSpec kepler(const Multivectord& c, const Eigen::MatrixXd& B);

  /// Central field from an affine coefficient psi on the screen <h,q> = 1:
  /// Psi(q) = <h,q>^{-3} psi(q / <h,q>), f(q) = Psi(q) q ^ c.
  /// c is rescaled internally so that <h,c> = 1.
  static ForceFieldSpec central_psi(const Multivectord& c, const Formd& h,
                                    PsiFn psi);

  /// Power-law central field, analytic closed form: on the screen <h,q> = 1 it
  /// restricts to qddot = -|q - c|^beta (q - c), with |.| the degenerate
  /// quadratic form vanishing along c.
  static ForceFieldSpec power_law(double beta, const Formd& h,
                                  const Multivectord& c);

  /// Jacobi attractor with a caller-supplied coefficient: Psi positively
  /// homogeneous of degree -3 on V \ [c] and invariant under translations
  /// along c. Validation of these properties is empirical (validate_field).
  static ForceFieldSpec jacobi(const Multivectord& c, PsiFn Psi);

  /// Jacobi attractor Psi(q) = (q^T M q)^{-3/2} for M PSD with kernel [c].
  static ForceFieldSpec jacobi_anisotropic(const Multivectord& c,
                                           const Eigen::MatrixXd& M);

  /// Raw bivector-field evaluator with a declared homogeneity degree.
  static ForceFieldSpec custom(int dim, CustomFn f, HomogeneityTag tag);

  ForceKind kind() const { return kind_; }
  int dim() const { return dim_; }
  bool has_center() const { return kind_ != ForceKind::Zero && kind_ != ForceKind::Custom; }
  const Multivectord& center() const;
  const Eigen::MatrixXd& bilinear() const { return B_; }
  const Formd& screen_form() const { return h_; }
  double beta() const { return beta_; }
  HomogeneityTag tag() const { return tag_; }

  double singularity_cutoff() const { return cutoff_; }
  void set_singularity_cutoff(double c) { cutoff_ = c; }

  /// Degree -3 coefficient Psi(q) for central-type fields.
  double psi_value(const Multivectord& q) const;

  FieldDomainStatus domain_status(const Multivectord& q) const;

  /// f(q); throws SingularityError near [c], DomainError outside the domain.
  Multivectord eval(const Multivectord& q) const;

 private:
  ForceFieldSpec() = default;

  ForceKind kind_ = ForceKind::Zero;
  int dim_ = 0;
  Multivectord c_;
  Eigen::MatrixXd B_;     // Kepler / anisotropic Jacobi
  Formd h_;               // CentralPsi
  PsiFn psi_;             // CentralPsi (affine) or Jacobi (homogeneous)
  CustomFn custom_;
  HomogeneityTag tag_{-2.0};
  double beta_ = 0.0;     // power-law only, for reporting
  bool is_power_law_ = false;
  double cutoff_ = 1e-6;
};

/// Free-function form of ForceFieldSpec::eval.
Multivectord eval_force(const ForceFieldSpec& fs, const Multivectord& q);

/// Free-function form of ForceFieldSpec::central_psi.
ForceFieldSpec central_from_psi(const Multivectord& c, const Formd& h,
                                ForceFieldSpec::PsiFn psi);

/// f_h = dh(q) -| f(q) at a point q on the screen h = 1.
Multivectord restrict_to_screen(const ForceFieldSpec& fs, const ScreenSpec& s,
                                const Multivectord& q);

/// Power-law data after a change of screen from h to h1: the transformed
/// system is qddot = -mass |q1-c1|^beta <h,q1>^{exponent} (q1-c1) with
/// exponent = -3 - beta and mass = <h1,c>. When <h1,c> = 0 the target screen
/// is vertical and the closed form is unavailable (reported, not thrown).
struct HalphenTransform {
  bool vertical = false;
  double exponent = 0.0;
  double mass = 0.0;
};

HalphenTransform halphen_transform(double beta, const Formd& h, const Formd& h1,
                                   const Multivectord& c);

struct FieldValidationReport {
  double max_homogeneity_residual = 0.0;
  double max_decomposability_residual = 0.0;
  double max_translation_residual = 0.0;  // Jacobi only
  int samples = 0;
  int resampled = 0;
  double tolerance = 0.0;
  bool pass = false;
};

/// Deterministic sampled validation of the field properties
/// f(lambda q) = lambda^{-2} f(q) and q ^ f(q) = 0 (plus, for Jacobi
/// attractors, invariance of Psi under translations along c).
FieldValidationReport validate_field(const ForceFieldSpec& fs, int samples,
                                     std::uint64_t seed, double tol = 1e-10);

/// Seeded sample point in the field's domain, radius in [0.5, 2].
/// Used by validate_field and the divergence instruments.
Multivectord sample_domain_point(const ForceFieldSpec& fs, class Rng& rng,
                                 int* resampled = nullptr);

}  // namespace projdyn
