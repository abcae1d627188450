#include "projdyn/force.hpp"

#include <cmath>

#include "projdyn/random.hpp"

namespace projdyn {

namespace {

Eigen::MatrixXd checked_psd_with_kernel(const Eigen::MatrixXd& B,
                                        const Eigen::VectorXd& c,
                                        const char* what) {
  if (B.rows() != B.cols() || B.rows() != c.size())
    throw std::invalid_argument(std::string(what) + ": size mismatch");
  Eigen::MatrixXd Bs = 0.5 * (B + B.transpose());
  if ((B - B.transpose()).cwiseAbs().maxCoeff() >
      1e-12 * std::max(Bs.cwiseAbs().maxCoeff(), 1.0))
    throw std::invalid_argument(std::string(what) + ": form must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Bs);
  double top = es.eigenvalues().maxCoeff();
  if (top <= 0.0)
    throw std::invalid_argument(std::string(what) + ": form must be nonzero");
  int zeros = 0;
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    double ev = es.eigenvalues()[i];
    if (ev < -1e-12 * top)
      throw std::invalid_argument(std::string(what) + ": form must be PSD");
    if (ev < 1e-10 * top) ++zeros;
  }
  if (zeros != 1)
    throw std::invalid_argument(std::string(what) +
                                ": kernel must be exactly one-dimensional");
  if ((Bs * c).norm() > 1e-10 * top * c.norm())
    throw std::invalid_argument(std::string(what) +
                                ": kernel must be the line [c]");
  return Bs;
}

/// Relative Euclidean distance of the ray of q from the line [c].
double axis_distance_ratio(const Eigen::VectorXd& q, const Eigen::VectorXd& c) {
  double qn = q.norm();
  if (qn == 0.0) return 0.0;
  Eigen::VectorXd chat = c / c.norm();
  return (q - chat * chat.dot(q)).norm() / qn;
}

}  // namespace

ForceFieldSpec ForceFieldSpec::zero(int dim) {
  blades::check_dim(dim);
  ForceFieldSpec f;
  f.kind_ = ForceKind::Zero;
  f.dim_ = dim;
  return f;
}

ForceFieldSpec ForceFieldSpec::kepler(const Multivectord& c,
                                      const Eigen::MatrixXd& B) {
  if (c.grade() != 1 || c.norm() == 0.0)
    throw std::invalid_argument("kepler: nonzero grade-1 center expected");
  ForceFieldSpec f;
  f.kind_ = ForceKind::Kepler;
  f.dim_ = c.dim();
  f.c_ = c;
  f.B_ = checked_psd_with_kernel(B, c.coeffs(), "kepler");
  return f;
}

ForceFieldSpec ForceFieldSpec::central_psi(const Multivectord& c, const Formd& h,
                                           PsiFn psi) {
  if (c.grade() != 1 || h.degree() != 1 || c.dim() != h.dim())
    throw std::invalid_argument("central_psi: center and form mismatch");
  double hc = pair(h, c);
  if (std::abs(hc) < 1e-12 * std::max(1.0, c.norm() * h.norm()))
    throw std::invalid_argument("central_psi: center not on screen (<h,c> = 0)");
  ForceFieldSpec f;
  f.kind_ = ForceKind::CentralPsi;
  f.dim_ = c.dim();
  f.c_ = c / hc;  // place the center on the screen <h,c> = 1
  f.h_ = h;
  f.psi_ = std::move(psi);
  return f;
}

ForceFieldSpec ForceFieldSpec::power_law(double beta, const Formd& h,
                                         const Multivectord& c) {
  double hc = pair(h, c);
  if (std::abs(hc) < 1e-12 * std::max(1.0, c.norm() * h.norm()))
    throw std::invalid_argument("power_law: center not on screen (<h,c> = 0)");
  Multivectord cn = c / hc;
  // degenerate extension of the screen's Euclidean structure: kill the
  // component along c, measure the horizontal remainder
  const int dim = c.dim();
  Eigen::MatrixXd P = Eigen::MatrixXd::Identity(dim, dim) -
                      cn.coeffs() * h.coeffs().transpose();
  Eigen::MatrixXd B = P.transpose() * P;
  auto psi = [B, beta](const Eigen::VectorXd& p) {
    // p is an affine screen point; the form already ignores the c component,
    // so B(p,p) = |p - c|^2 in the degenerate metric
    return std::pow(p.dot(B * p), 0.5 * beta);
  };
  ForceFieldSpec f = central_psi(cn, h, psi);
  f.B_ = B;
  f.beta_ = beta;
  f.is_power_law_ = true;
  return f;
}

ForceFieldSpec ForceFieldSpec::jacobi(const Multivectord& c, PsiFn Psi) {
  if (c.grade() != 1 || c.norm() == 0.0)
    throw std::invalid_argument("jacobi: nonzero grade-1 center expected");
  ForceFieldSpec f;
  f.kind_ = ForceKind::JacobiAttractor;
  f.dim_ = c.dim();
  f.c_ = c;
  f.psi_ = std::move(Psi);
  return f;
}

ForceFieldSpec ForceFieldSpec::jacobi_anisotropic(const Multivectord& c,
                                                  const Eigen::MatrixXd& M) {
  Eigen::MatrixXd Ms = checked_psd_with_kernel(M, c.coeffs(), "jacobi_anisotropic");
  ForceFieldSpec f =
      jacobi(c, [Ms](const Eigen::VectorXd& q) {
        return std::pow(q.dot(Ms * q), -1.5);
      });
  f.B_ = Ms;
  return f;
}

ForceFieldSpec ForceFieldSpec::custom(int dim, CustomFn f, HomogeneityTag tag) {
  blades::check_dim(dim);
  ForceFieldSpec spec;
  spec.kind_ = ForceKind::Custom;
  spec.dim_ = dim;
  spec.custom_ = std::move(f);
  spec.tag_ = tag;
  return spec;
}

const Multivectord& ForceFieldSpec::center() const {
  if (!has_center())
    throw std::invalid_argument("force field has no center");
  return c_;
}

double ForceFieldSpec::psi_value(const Multivectord& q) const {
  switch (kind_) {
    case ForceKind::Kepler:
      return std::pow(q.coeffs().dot(B_ * q.coeffs()), -1.5);
    case ForceKind::JacobiAttractor:
      return psi_(q.coeffs());
    case ForceKind::CentralPsi: {
      double hq = pair(h_, q);
      if (hq <= 0.0)
        throw DomainError("central field: <h,q> <= 0");
      return std::pow(hq, -3.0) * psi_((q.coeffs() / hq).eval());
    }
    default:
      throw std::invalid_argument("psi_value: field has no central coefficient");
  }
}

FieldDomainStatus ForceFieldSpec::domain_status(const Multivectord& q) const {
  if (kind_ == ForceKind::Zero || kind_ == ForceKind::Custom)
    return FieldDomainStatus::Ok;
  if (axis_distance_ratio(q.coeffs(), c_.coeffs()) < cutoff_)
    return FieldDomainStatus::Singular;
  if (kind_ == ForceKind::CentralPsi && pair(h_, q) <= 0.0)
    return FieldDomainStatus::Outside;
  return FieldDomainStatus::Ok;
}

Multivectord ForceFieldSpec::eval(const Multivectord& q) const {
  if (q.grade() != 1 || q.dim() != dim_)
    throw std::invalid_argument("eval_force: grade-1 vector of matching dim expected");
  switch (domain_status(q)) {
    case FieldDomainStatus::Singular:
      throw SingularityError("eval_force: point on or near the center ray [c]");
    case FieldDomainStatus::Outside:
      throw DomainError("eval_force: point outside the field domain");
    case FieldDomainStatus::Ok:
      break;
  }
  if (kind_ == ForceKind::Zero) return Multivectord::zero(dim_, 2);
  if (kind_ == ForceKind::Custom) return custom_(q);
  return wedge(q, c_) * psi_value(q);
}

Multivectord eval_force(const ForceFieldSpec& fs, const Multivectord& q) {
  return fs.eval(q);
}

ForceFieldSpec central_from_psi(const Multivectord& c, const Formd& h,
                                ForceFieldSpec::PsiFn psi) {
  return ForceFieldSpec::central_psi(c, h, std::move(psi));
}

Multivectord restrict_to_screen(const ForceFieldSpec& fs, const ScreenSpec& s,
                                const Multivectord& q) {
  ScreenEval ev = s.eval(q);
  if (std::abs(ev.h - 1.0) > 1e-8)
    throw std::invalid_argument("restrict_to_screen: point not on the screen");
  return interior_coform(ev.dh, fs.eval(q));
}

HalphenTransform halphen_transform(double beta, const Formd& h, const Formd& h1,
                                   const Multivectord& c) {
  double hc = pair(h, c);
  if (std::abs(hc) < 1e-12 * std::max(1.0, c.norm() * h.norm()))
    throw std::invalid_argument("halphen_transform: center not on source screen");
  Multivectord cn = c / hc;
  HalphenTransform out;
  out.mass = pair(h1, cn);
  if (std::abs(out.mass) < 1e-12 * std::max(1.0, cn.norm() * h1.norm())) {
    out.vertical = true;  // target screen contains the direction c
    out.mass = 0.0;
    return out;
  }
  out.exponent = -3.0 - beta;
  return out;
}

Multivectord sample_domain_point(const ForceFieldSpec& fs, Rng& rng,
                                 int* resampled) {
  for (int attempt = 0; attempt < 10000; ++attempt) {
    Eigen::VectorXd v = rng.unit_vector(fs.dim()) *
                        std::exp(rng.range(std::log(0.5), std::log(2.0)));
    Multivectord q = Multivectord::vector(v);
    if (fs.domain_status(q) == FieldDomainStatus::Ok) return q;
    if (resampled) ++(*resampled);
  }
  throw Error("sample_domain_point: could not find a point in the field domain");
}

FieldValidationReport validate_field(const ForceFieldSpec& fs, int samples,
                                     std::uint64_t seed, double tol) {
  if (samples < 1)
    throw std::invalid_argument("validate_field: samples must be >= 1");
  Rng rng(seed);
  FieldValidationReport rep;
  rep.samples = samples;
  rep.tolerance = tol;
  for (int i = 0; i < samples; ++i) {
    Multivectord q = sample_domain_point(fs, rng, &rep.resampled);
    Multivectord f0 = fs.eval(q);
    double fscale = std::max(f0.norm(), 1e-300);
    for (double lam : {0.5, 2.0}) {
      Multivectord scaled = q * lam;
      if (fs.domain_status(scaled) != FieldDomainStatus::Ok) continue;
      Multivectord fl = fs.eval(scaled);
      double res = (fl.coeffs() - f0.coeffs() / (lam * lam)).norm() /
                   std::max(fscale / (lam * lam), fl.norm());
      rep.max_homogeneity_residual = std::max(rep.max_homogeneity_residual, res);
    }
    rep.max_decomposability_residual =
        std::max(rep.max_decomposability_residual,
                 decomposability_residual(q, f0));
    if (fs.kind() == ForceKind::JacobiAttractor) {
      double psi0 = fs.psi_value(q);
      for (int t = 0; t < 3; ++t) {
        double gamma = rng.range(-1.0, 1.0);
        Multivectord qt = q + fs.center() * gamma;
        if (fs.domain_status(qt) != FieldDomainStatus::Ok) continue;
        double res = std::abs(fs.psi_value(qt) - psi0) / std::abs(psi0);
        rep.max_translation_residual =
            std::max(rep.max_translation_residual, res);
      }
    }
  }
  rep.pass = rep.max_homogeneity_residual < tol &&
             rep.max_decomposability_residual < tol &&
             rep.max_translation_residual < tol;
  return rep;
}

}  // namespace projdyn
