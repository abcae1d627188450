#pragma once

// Dense exterior algebra over a real vector space of dimension 3..5.
// Multivectors and alternating forms are stored as coefficient vectors over
// the canonical basis blades, ordered by increasing bitmask. All products are
// free functions acting on the coefficient vectors (Eigen dense storage).

#include <Eigen/Dense>

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "projdyn/errors.hpp"

namespace projdyn {

inline constexpr int kMinDim = 3;
inline constexpr int kMaxDim = 5;

/// Homogeneity degree of a field along rays (the s of an s-scalar).
struct HomogeneityTag {
  double s = 0.0;
};

namespace blades {

inline int binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  int r = 1;
  for (int i = 0; i < k; ++i) r = r * (n - i) / (i + 1);
  return r;
}

inline void check_dim(int dim) {
  if (dim < kMinDim || dim > kMaxDim)
    throw std::invalid_argument("dimension must be in [3, 5], got " +
                                std::to_string(dim));
}

/// Basis blade masks of the given grade, in increasing bitmask order.
inline const std::vector<unsigned>& masks(int dim, int grade) {
  check_dim(dim);
  if (grade < 0 || grade > dim)
    throw std::invalid_argument("grade out of range for dim " +
                                std::to_string(dim));
  static const auto tables = [] {
    std::array<std::array<std::vector<unsigned>, kMaxDim + 1>, kMaxDim + 1> t{};
    for (int d = kMinDim; d <= kMaxDim; ++d)
      for (unsigned m = 0; m < (1u << d); ++m)
        t[d][std::popcount(m)].push_back(m);
    return t;
  }();
  return tables[dim][grade];
}

inline int index_of(int dim, int grade, unsigned mask) {
  const auto& ms = masks(dim, grade);
  for (int i = 0; i < static_cast<int>(ms.size()); ++i)
    if (ms[i] == mask) return i;
  throw std::invalid_argument("blade mask not found");
}

/// Sign of e_A ^ e_B as a reordering of the concatenated index sequence;
/// zero when the blades share an index.
inline int wedge_sign(unsigned a, unsigned b) {
  if (a & b) return 0;
  int inversions = 0;
  for (unsigned rest = b; rest != 0; rest &= rest - 1) {
    int j = std::countr_zero(rest);
    inversions += std::popcount(a >> (j + 1));
  }
  return (inversions & 1) ? -1 : 1;
}

/// Position of index i within the sorted blade mask.
inline int position_in(unsigned mask, int i) {
  return std::popcount(mask & ((1u << i) - 1u));
}

/// Graded wedge on raw coefficient arrays.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> wedge_coeffs(
    int dim, int ga, const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& a, int gb,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& b) {
  const auto& ma = masks(dim, ga);
  const auto& mb = masks(dim, gb);
  const auto& mr = masks(dim, ga + gb);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> r =
      Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(mr.size());
  for (std::size_t i = 0; i < ma.size(); ++i) {
    if (a[i] == Scalar(0)) continue;
    for (std::size_t j = 0; j < mb.size(); ++j) {
      int s = wedge_sign(ma[i], mb[j]);
      if (s == 0) continue;
      r[index_of(dim, ga + gb, ma[i] | mb[j])] += Scalar(s) * a[i] * b[j];
    }
  }
  return r;
}

/// Contraction into the first slot: for each blade T and each index i in T,
/// emits (-1)^{pos(i,T)} w_i coeff_T on the blade T \ {i}. This single kernel
/// realizes both iota_v on forms and the covector contraction on multivectors.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> contract_first(
    int dim, int grade, const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& coeffs,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& weights) {
  const auto& mt = masks(dim, grade);
  const auto& mr = masks(dim, grade - 1);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> r =
      Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(mr.size());
  for (std::size_t t = 0; t < mt.size(); ++t) {
    if (coeffs[t] == Scalar(0)) continue;
    for (unsigned rest = mt[t]; rest != 0; rest &= rest - 1) {
      int i = std::countr_zero(rest);
      int sgn = (position_in(mt[t], i) & 1) ? -1 : 1;
      r[index_of(dim, grade - 1, mt[t] & ~(1u << i))] +=
          Scalar(sgn) * weights[i] * coeffs[t];
    }
  }
  return r;
}

}  // namespace blades

// ---------------------------------------------------------------------------
// Multivector

template <typename Scalar>
class Multivector {
 public:
  using Coeffs = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Multivector() = default;

  Multivector(int dim, int grade)
      : dim_(dim), grade_(grade),
        coeffs_(Coeffs::Zero(blades::masks(dim, grade).size())) {}

  Multivector(int dim, int grade, Coeffs coeffs)
      : dim_(dim), grade_(grade), coeffs_(std::move(coeffs)) {
    if (coeffs_.size() !=
        static_cast<Eigen::Index>(blades::masks(dim, grade).size()))
      throw std::invalid_argument("coefficient count does not match grade");
  }

  static Multivector zero(int dim, int grade) { return Multivector(dim, grade); }

  static Multivector scalar(int dim, Scalar value) {
    Multivector m(dim, 0);
    m.coeffs_[0] = value;
    return m;
  }

  /// Grade-1 vector from an Eigen coefficient vector.
  static Multivector vector(const Coeffs& v) {
    Multivector m(static_cast<int>(v.size()), 1);
    m.coeffs_ = v;
    return m;
  }

  /// Basis vector e_i (0-based).
  static Multivector basis_vector(int dim, int i) {
    Multivector m(dim, 1);
    m.coeffs_[i] = Scalar(1);
    return m;
  }

  /// Basis blade identified by its index bitmask.
  static Multivector basis_blade(int dim, unsigned mask) {
    int g = std::popcount(mask);
    Multivector m(dim, g);
    m.coeffs_[blades::index_of(dim, g, mask)] = Scalar(1);
    return m;
  }

  int dim() const { return dim_; }
  int grade() const { return grade_; }
  const Coeffs& coeffs() const { return coeffs_; }
  Coeffs& coeffs() { return coeffs_; }

  Scalar coeff(unsigned mask) const {
    return coeffs_[blades::index_of(dim_, grade_, mask)];
  }
  Scalar& coeff(unsigned mask) {
    return coeffs_[blades::index_of(dim_, grade_, mask)];
  }

  Scalar norm() const { return coeffs_.norm(); }

  Multivector& operator+=(const Multivector& o) {
    require_same_shape(o);
    coeffs_ += o.coeffs_;
    return *this;
  }
  Multivector& operator-=(const Multivector& o) {
    require_same_shape(o);
    coeffs_ -= o.coeffs_;
    return *this;
  }
  Multivector& operator*=(Scalar s) {
    coeffs_ *= s;
    return *this;
  }
  Multivector& operator/=(Scalar s) {
    coeffs_ /= s;
    return *this;
  }

  void require_same_shape(const Multivector& o) const {
    if (dim_ != o.dim_ || grade_ != o.grade_)
      throw std::invalid_argument("multivector shape mismatch");
  }

 private:
  int dim_ = 0;
  int grade_ = 0;
  Coeffs coeffs_;
};

// ---------------------------------------------------------------------------
// AlternatingForm

template <typename Scalar>
class AlternatingForm {
 public:
  using Coeffs = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  AlternatingForm() = default;

  AlternatingForm(int dim, int degree)
      : dim_(dim), degree_(degree),
        coeffs_(Coeffs::Zero(blades::masks(dim, degree).size())) {}

  AlternatingForm(int dim, int degree, Coeffs coeffs)
      : dim_(dim), degree_(degree), coeffs_(std::move(coeffs)) {
    if (coeffs_.size() !=
        static_cast<Eigen::Index>(blades::masks(dim, degree).size()))
      throw std::invalid_argument("coefficient count does not match degree");
  }

  static AlternatingForm zero(int dim, int degree) {
    return AlternatingForm(dim, degree);
  }

  /// Covector from an Eigen coefficient vector.
  static AlternatingForm covector(const Coeffs& v) {
    AlternatingForm f(static_cast<int>(v.size()), 1);
    f.coeffs_ = v;
    return f;
  }

  /// Basis covector eps_i (0-based).
  static AlternatingForm basis_covector(int dim, int i) {
    AlternatingForm f(dim, 1);
    f.coeffs_[i] = Scalar(1);
    return f;
  }

  static AlternatingForm basis_coblade(int dim, unsigned mask) {
    int g = std::popcount(mask);
    AlternatingForm f(dim, g);
    f.coeffs_[blades::index_of(dim, g, mask)] = Scalar(1);
    return f;
  }

  /// Standard volume form eps_0 ^ ... ^ eps_{dim-1}.
  static AlternatingForm volume(int dim) {
    return basis_coblade(dim, (1u << dim) - 1u);
  }

  int dim() const { return dim_; }
  int degree() const { return degree_; }
  const Coeffs& coeffs() const { return coeffs_; }
  Coeffs& coeffs() { return coeffs_; }

  Scalar coeff(unsigned mask) const {
    return coeffs_[blades::index_of(dim_, degree_, mask)];
  }
  Scalar& coeff(unsigned mask) {
    return coeffs_[blades::index_of(dim_, degree_, mask)];
  }

  Scalar norm() const { return coeffs_.norm(); }

  AlternatingForm& operator+=(const AlternatingForm& o) {
    require_same_shape(o);
    coeffs_ += o.coeffs_;
    return *this;
  }
  AlternatingForm& operator-=(const AlternatingForm& o) {
    require_same_shape(o);
    coeffs_ -= o.coeffs_;
    return *this;
  }
  AlternatingForm& operator*=(Scalar s) {
    coeffs_ *= s;
    return *this;
  }

  void require_same_shape(const AlternatingForm& o) const {
    if (dim_ != o.dim_ || degree_ != o.degree_)
      throw std::invalid_argument("form shape mismatch");
  }

 private:
  int dim_ = 0;
  int degree_ = 0;
  Coeffs coeffs_;
};

// ---------------------------------------------------------------------------
// Arithmetic

template <typename S>
Multivector<S> operator+(Multivector<S> a, const Multivector<S>& b) {
  return a += b;
}
template <typename S>
Multivector<S> operator-(Multivector<S> a, const Multivector<S>& b) {
  return a -= b;
}
template <typename S>
Multivector<S> operator-(Multivector<S> a) {
  a.coeffs() = -a.coeffs();
  return a;
}
template <typename S>
Multivector<S> operator*(S s, Multivector<S> a) {
  return a *= s;
}
template <typename S>
Multivector<S> operator*(Multivector<S> a, S s) {
  return a *= s;
}
template <typename S>
Multivector<S> operator/(Multivector<S> a, S s) {
  return a /= s;
}

template <typename S>
AlternatingForm<S> operator+(AlternatingForm<S> a, const AlternatingForm<S>& b) {
  return a += b;
}
template <typename S>
AlternatingForm<S> operator-(AlternatingForm<S> a, const AlternatingForm<S>& b) {
  return a -= b;
}
template <typename S>
AlternatingForm<S> operator-(AlternatingForm<S> a) {
  a.coeffs() = -a.coeffs();
  return a;
}
template <typename S>
AlternatingForm<S> operator*(S s, AlternatingForm<S> a) {
  return a *= s;
}
template <typename S>
AlternatingForm<S> operator*(AlternatingForm<S> a, S s) {
  return a *= s;
}

// ---------------------------------------------------------------------------
// Products

template <typename S>
Multivector<S> wedge(const Multivector<S>& a, const Multivector<S>& b) {
  if (a.dim() != b.dim())
    throw std::invalid_argument("wedge: dimension mismatch");
  if (a.grade() + b.grade() > a.dim())
    throw std::invalid_argument("wedge: resulting grade exceeds dimension");
  return Multivector<S>(a.dim(), a.grade() + b.grade(),
                        blades::wedge_coeffs(a.dim(), a.grade(), a.coeffs(),
                                             b.grade(), b.coeffs()));
}

template <typename S>
AlternatingForm<S> wedge(const AlternatingForm<S>& a,
                         const AlternatingForm<S>& b) {
  if (a.dim() != b.dim())
    throw std::invalid_argument("wedge: dimension mismatch");
  if (a.degree() + b.degree() > a.dim())
    throw std::invalid_argument("wedge: resulting degree exceeds dimension");
  return AlternatingForm<S>(a.dim(), a.degree() + b.degree(),
                            blades::wedge_coeffs(a.dim(), a.degree(),
                                                 a.coeffs(), b.degree(),
                                                 b.coeffs()));
}

/// iota_v omega: contraction of a vector into an alternating form.
template <typename S>
AlternatingForm<S> interior_vector(const Multivector<S>& v,
                                   const AlternatingForm<S>& omega) {
  if (v.grade() != 1) throw std::invalid_argument("interior_vector: grade-1 expected");
  if (v.dim() != omega.dim())
    throw std::invalid_argument("interior_vector: dimension mismatch");
  if (omega.degree() < 1)
    throw std::invalid_argument("interior_vector: degree must be >= 1");
  return AlternatingForm<S>(
      omega.dim(), omega.degree() - 1,
      blades::contract_first(omega.dim(), omega.degree(), omega.coeffs(),
                             v.coeffs()));
}

/// alpha -| m: contraction of a covector into a multivector (first slot).
template <typename S>
Multivector<S> interior_coform(const AlternatingForm<S>& alpha,
                               const Multivector<S>& m) {
  if (alpha.degree() != 1)
    throw std::invalid_argument("interior_coform: degree-1 expected");
  if (alpha.dim() != m.dim())
    throw std::invalid_argument("interior_coform: dimension mismatch");
  if (m.grade() < 1)
    throw std::invalid_argument("interior_coform: grade must be >= 1");
  return Multivector<S>(m.dim(), m.grade() - 1,
                        blades::contract_first(m.dim(), m.grade(), m.coeffs(),
                                               alpha.coeffs()));
}

/// Full pairing of a form with a multivector of equal degree/grade.
template <typename S>
S pair(const AlternatingForm<S>& alpha, const Multivector<S>& m) {
  if (alpha.dim() != m.dim() || alpha.degree() != m.grade())
    throw std::invalid_argument("pair: shape mismatch");
  return alpha.coeffs().dot(m.coeffs());
}

/// f -| mu for a bivector f, with the fixed convention
/// iota_{a^b} = iota_b o iota_a applied blade by blade.
template <typename S>
AlternatingForm<S> volume_contract(const Multivector<S>& f,
                                   const AlternatingForm<S>& mu) {
  if (f.grade() != 2)
    throw std::invalid_argument("volume_contract: grade-2 multivector expected");
  if (f.dim() != mu.dim())
    throw std::invalid_argument("volume_contract: dimension mismatch");
  if (mu.degree() != mu.dim())
    throw std::invalid_argument("volume_contract: top-degree form expected");
  if (mu.coeffs().isZero(0))
    throw std::invalid_argument("volume_contract: volume form is zero");
  const int dim = f.dim();
  AlternatingForm<S> out(dim, dim - 2);
  const auto& fmasks = blades::masks(dim, 2);
  for (std::size_t k = 0; k < fmasks.size(); ++k) {
    S c = f.coeffs()[k];
    if (c == S(0)) continue;
    int i = std::countr_zero(fmasks[k]);
    int j = std::countr_zero(fmasks[k] & (fmasks[k] - 1));
    auto step1 = blades::contract_first(
        dim, dim, mu.coeffs(),
        Multivector<S>::basis_vector(dim, i).coeffs());
    auto step2 = blades::contract_first(
        dim, dim - 1, step1, Multivector<S>::basis_vector(dim, j).coeffs());
    out.coeffs() += c * step2;
  }
  return out;
}

/// Pushforward of a grade-k multivector under a linear map of V
/// (the induced map on the k-th exterior power).
template <typename S>
Multivector<S> pushforward(
    const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& g,
    const Multivector<S>& m) {
  const int dim = m.dim();
  if (g.rows() != dim || g.cols() != dim)
    throw std::invalid_argument("pushforward: matrix size mismatch");
  const int k = m.grade();
  if (k == 0) return m;
  const auto& mk = blades::masks(dim, k);
  Multivector<S> out(dim, k);
  std::array<int, kMaxDim> rows{}, cols{};
  for (std::size_t t = 0; t < mk.size(); ++t) {
    int nr = 0;
    for (unsigned rest = mk[t]; rest != 0; rest &= rest - 1)
      rows[nr++] = std::countr_zero(rest);
    S acc(0);
    for (std::size_t s = 0; s < mk.size(); ++s) {
      if (m.coeffs()[s] == S(0)) continue;
      int nc = 0;
      for (unsigned rest = mk[s]; rest != 0; rest &= rest - 1)
        cols[nc++] = std::countr_zero(rest);
      Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> minor(k, k);
      for (int r = 0; r < k; ++r)
        for (int c = 0; c < k; ++c) minor(r, c) = g(rows[r], cols[c]);
      acc += minor.determinant() * m.coeffs()[s];
    }
    out.coeffs()[t] = acc;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Numerical exterior derivative

/// Step balancing central-difference truncation against rounding.
inline double numeric_d_default_step(const Multivector<double>& q) {
  double scale = std::max(1.0, q.coeffs().template lpNorm<Eigen::Infinity>());
  return std::cbrt(std::numeric_limits<double>::epsilon()) * scale;
}

/// Central-difference exterior derivative of a sampled field of k-forms at q.
/// Component error is O(step^2). Evaluator failures surface as EvaluationError.
template <typename Field>
AlternatingForm<double> numeric_d(Field&& field, const Multivector<double>& q,
                                  double step) {
  if (q.grade() != 1) throw std::invalid_argument("numeric_d: grade-1 point expected");
  if (!(step > 0.0)) throw std::invalid_argument("numeric_d: step must be positive");
  const int dim = q.dim();
  AlternatingForm<double> out;
  bool first = true;
  for (int i = 0; i < dim; ++i) {
    Multivector<double> qp = q, qm = q;
    qp.coeffs()[i] += step;
    qm.coeffs()[i] -= step;
    AlternatingForm<double> fp, fm;
    try {
      fp = field(qp);
      fm = field(qm);
    } catch (const std::exception& e) {
      throw EvaluationError(std::string("numeric_d: stencil evaluation failed: ") +
                            e.what());
    }
    AlternatingForm<double> partial = fp;
    partial.coeffs() = (fp.coeffs() - fm.coeffs()) / (2.0 * step);
    AlternatingForm<double> term =
        wedge(AlternatingForm<double>::basis_covector(dim, i), partial);
    if (first) {
      out = term;
      first = false;
    } else {
      out += term;
    }
  }
  return out;
}

template <typename Field>
AlternatingForm<double> numeric_d(Field&& field, const Multivector<double>& q) {
  return numeric_d(std::forward<Field>(field), q, numeric_d_default_step(q));
}

using Multivectord = Multivector<double>;
using Formd = AlternatingForm<double>;

}  // namespace projdyn
