#pragma once

// Trigonometric phi functions
//
//   phi_cos(z) = int_0^t e^{(t-s) z} cos(lambda s) ds
//   phi_sin(z) = int_0^t e^{(t-s) z} sin(lambda s) ds
//
// for scalar and matrix arguments, together with the resolvent-based norm
// bound  ||phi(A)|| <= (1 + e^{t mu(A)}) / d(i lambda, F(A)).

#include <cmath>
#include <complex>

#include "klsde/errors.hpp"
#include "klsde/matkit.hpp"

namespace klsde {

/// Frequency and horizon of one trigonometric phi function.
struct PhiSpec {
  double lambda = 0.0;
  double t = 0.0;

  void validate() const {
    if (!std::isfinite(lambda)) throw ValidationError("PhiSpec: non-finite lambda");
    if (!std::isfinite(t) || t < 0.0) throw ValidationError("PhiSpec: t must be finite and >= 0");
  }
};

namespace detail {

// (e^x - 1) / x without cancellation near 0.
inline Complex phi1(Complex x) {
  if (std::abs(x) < 0.5) {
    Complex term(1.0, 0.0);
    Complex sum(1.0, 0.0);
    for (int j = 2; j < 30; ++j) {
      term *= x / static_cast<double>(j);
      sum += term;
      if (std::abs(term) <= 1e-17 * std::abs(sum)) break;
    }
    return sum;
  }
  return (std::exp(x) - 1.0) / x;
}

// (e^{tz} - e^{i w t}) / (z - i w), the confluent-safe form of
// int_0^t e^{(t-s) z} e^{i w s} ds.
inline Complex resolvent_kernel(Complex z, double w, double t) {
  const Complex iw(0.0, w);
  return std::exp(iw * t) * t * phi1(t * (z - iw));
}

// Near z = +-i lambda the rational formulas are 0/0; the pair of resolvent
// kernels at +lambda and -lambda evaluates the same functions stably there.
inline bool near_confluent(Complex z, double lambda) {
  const Complex denom = z * z + lambda * lambda;
  return lambda == 0.0 || std::abs(denom) <= 0.25 * (std::norm(z) + lambda * lambda);
}

}  // namespace detail

inline Complex phi_cos_scalar(const PhiSpec& spec, Complex z) {
  spec.validate();
  const double lam = spec.lambda;
  const double t = spec.t;
  if (t == 0.0) return {0.0, 0.0};
  if (detail::near_confluent(z, lam)) {
    return 0.5 * (detail::resolvent_kernel(z, lam, t) + detail::resolvent_kernel(z, -lam, t));
  }
  return (z * std::exp(z * t) - z * std::cos(lam * t) + lam * std::sin(lam * t)) / (z * z + lam * lam);
}

/// phi_cos_scalar at every z_i for one frequency, with e^{t z_i} supplied by
/// the caller.
inline void phi_cos_table(const PhiSpec& spec, const ComplexVector& z, const ComplexVector& exp_tz,
                          ComplexVector& out) {
  spec.validate();
  out.resize(z.size());
  const double lam = spec.lambda;
  const double t = spec.t;
  if (t == 0.0) {
    out.setZero();
    return;
  }
  const double c = std::cos(lam * t);
  const double s = lam * std::sin(lam * t);
  for (Index i = 0; i < z.size(); ++i) {
    const Complex zi = z(i);
    out(i) = detail::near_confluent(zi, lam) ? phi_cos_scalar(spec, zi)
                                             : (zi * (exp_tz(i) - c) + s) / (zi * zi + lam * lam);
  }
}

inline Complex phi_sin_scalar(const PhiSpec& spec, Complex z) {
  spec.validate();
  const double lam = spec.lambda;
  const double t = spec.t;
  if (t == 0.0) return {0.0, 0.0};
  if (detail::near_confluent(z, lam)) {
    return (detail::resolvent_kernel(z, lam, t) - detail::resolvent_kernel(z, -lam, t)) /
           Complex(0.0, 2.0);
  }
  return (lam * std::exp(z * t) - z * std::sin(lam * t) - lam * std::cos(lam * t)) / (z * z + lam * lam);
}

/// phi_cos(A) and phi_sin(A) for a real square A.
struct PhiMatrices {
  DenseMatrix cos;
  DenseMatrix sin;
  /// Set when i*lambda was numerically an eigenvalue of A and the block
  /// exponential route was used instead of the resolvent.
  bool fallback = false;
};

/// Reciprocal condition estimate below which (A - i lambda I) counts as singular.
inline constexpr double kResolventRcond = 1e-10;

namespace detail {

// The (1,2) block of exp(t [[A, [I 0]], [0, [[0,-lambda],[lambda,0]] (x) I]])
// equals [phi_cos(A), -phi_sin(A)].
inline PhiMatrices phi_matrices_block(const PhiSpec& spec, const DenseMatrix& a) {
  const Index n = a.rows();
  DenseMatrix big = DenseMatrix::Zero(3 * n, 3 * n);
  big.topLeftCorner(n, n) = a;
  big.block(0, n, n, n).setIdentity();
  big.block(n, 2 * n, n, n) = -spec.lambda * DenseMatrix::Identity(n, n);
  big.block(2 * n, n, n, n) = spec.lambda * DenseMatrix::Identity(n, n);
  const DenseMatrix e = expm(big, spec.t);
  return {e.block(0, n, n, n), -e.block(0, 2 * n, n, n), true};
}

}  // namespace detail

/// Resolvent evaluation (e^{tA} - e^{i lambda t} I)(A - i lambda I)^{-1}; the
/// real part is phi_cos(A), the imaginary part phi_sin(A). Pass e^{tA} when it
/// is already known.
inline PhiMatrices phi_matrices(const PhiSpec& spec, const DenseMatrix& a, const DenseMatrix& exp_ta) {
  spec.validate();
  detail::require_square(a, "phi_matrices");
  detail::require_finite(a, "phi_matrices");
  const Index n = a.rows();
  if (exp_ta.rows() != n || exp_ta.cols() != n) throw DimensionError("phi_matrices: e^{tA} has wrong shape");
  if (spec.t == 0.0) return {DenseMatrix::Zero(n, n), DenseMatrix::Zero(n, n), false};

  const Complex ilam(0.0, spec.lambda);
  ComplexMatrix shifted = a.cast<Complex>();
  shifted.diagonal().array() -= ilam;
  Eigen::PartialPivLU<ComplexMatrix> lu(shifted);
  if (!(lu.rcond() > kResolventRcond)) return detail::phi_matrices_block(spec, a);

  ComplexMatrix numer = exp_ta.cast<Complex>();
  numer.diagonal().array() -= std::exp(ilam * spec.t);
  const ComplexMatrix f = lu.solve(numer);
  return {f.real(), f.imag(), false};
}

inline PhiMatrices phi_matrices(const PhiSpec& spec, const DenseMatrix& a) {
  spec.validate();
  detail::require_square(a, "phi_matrices");
  return phi_matrices(spec, a, expm(a, spec.t));
}

inline DenseMatrix phi_cos_matrix(const PhiSpec& spec, const DenseMatrix& a) {
  return phi_matrices(spec, a).cos;
}

inline DenseMatrix phi_cos_matrix(const PhiSpec& spec, const DenseMatrix& a, const DenseMatrix& exp_ta) {
  return phi_matrices(spec, a, exp_ta).cos;
}

inline DenseMatrix phi_sin_matrix(const PhiSpec& spec, const DenseMatrix& a) {
  return phi_matrices(spec, a).sin;
}

inline DenseMatrix phi_sin_matrix(const PhiSpec& spec, const DenseMatrix& a, const DenseMatrix& exp_ta) {
  return phi_matrices(spec, a, exp_ta).sin;
}

/// (1 + e^{t mu(A)}) / d(i lambda, F(A)), valid for both phi_cos(A) and
/// phi_sin(A) in the spectral norm. Throws BoundUnavailableError when
/// i lambda is (numerically) inside F(A).
inline double phi_norm_bound(const PhiSpec& spec, const DenseMatrix& a) {
  spec.validate();
  const double d = fov_distance(a, spec.lambda);
  if (!(d > 0.0)) {
    throw BoundUnavailableError("phi_norm_bound: i*lambda lies in the numerical range of A");
  }
  return (1.0 + std::exp(spec.t * log_norm(a))) / d;
}

}  // namespace klsde
