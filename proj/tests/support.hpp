#pragma once

// Independent oracles for the tests: adaptive Gauss-Kronrod quadrature,
// classical RK4, seeded random matrices.

#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <random>

#include "klsde/matkit.hpp"

namespace testing_support {

using klsde::Complex;
using klsde::DenseMatrix;
using klsde::Index;
using klsde::Vector;

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1].
inline constexpr std::array<double, 8> kXgk{0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                                            0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                                            0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                                            0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kWgk{0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                                            0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                                            0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                                            0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kWg{0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                                           0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

// Adaptive integration of a (possibly vector or complex valued) integrand.
// T needs +, -, scalar * and a norm through `norm_of`.
template <typename T, typename F, typename N>
T gauss_kronrod(F&& f, double a, double b, double tol, N&& norm_of, int depth = 0) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const T fc = f(c);
  T kron = kWgk[7] * fc;
  T gauss = kWg[3] * fc;
  for (int j = 0; j < 7; ++j) {
    const T f1 = f(c - h * kXgk[j]);
    const T f2 = f(c + h * kXgk[j]);
    kron = kron + kWgk[j] * (f1 + f2);
    if (j % 2 == 1) gauss = gauss + kWg[j / 2] * (f1 + f2);
  }
  kron = h * kron;
  gauss = h * gauss;
  if (norm_of(kron - gauss) <= tol || depth > 40) return kron;
  return gauss_kronrod<T>(f, a, c, 0.5 * tol, norm_of, depth + 1) +
         gauss_kronrod<T>(f, c, b, 0.5 * tol, norm_of, depth + 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b, double tol = 1e-14) {
  return gauss_kronrod<double>(f, a, b, tol, [](double v) { return std::abs(v); });
}

inline Complex integrate_complex(const std::function<Complex(double)>& f, double a, double b, double tol = 1e-14) {
  return gauss_kronrod<Complex>(f, a, b, tol, [](Complex v) { return std::abs(v); });
}

inline DenseMatrix integrate_matrix(const std::function<DenseMatrix(double)>& f, double a, double b,
                                    double tol = 1e-13) {
  return gauss_kronrod<DenseMatrix>(f, a, b, tol, [](const DenseMatrix& v) { return v.norm(); });
}

// Classical RK4 for u' = rhs(s, u) with a fixed step count.
inline Vector rk4(const std::function<Vector(double, const Vector&)>& rhs, Vector u, double t0, double t1,
                  Index steps) {
  const double h = (t1 - t0) / static_cast<double>(steps);
  for (Index i = 0; i < steps; ++i) {
    const double s = t0 + static_cast<double>(i) * h;
    const Vector k1 = rhs(s, u);
    const Vector k2 = rhs(s + 0.5 * h, u + 0.5 * h * k1);
    const Vector k3 = rhs(s + 0.5 * h, u + 0.5 * h * k2);
    const Vector k4 = rhs(s + h, u + h * k3);
    u += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return u;
}

class RandomMatrices {
 public:
  explicit RandomMatrices(unsigned seed) : gen_(seed) {}

  double normal() { return dist_(gen_); }
  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(gen_); }

  DenseMatrix gaussian(Index r, Index c) {
    DenseMatrix m(r, c);
    for (Index j = 0; j < c; ++j)
      for (Index i = 0; i < r; ++i) m(i, j) = normal();
    return m;
  }

  Vector vector(Index n) { return gaussian(n, 1).col(0); }

  /// Symmetric with eigenvalues in [lo, hi].
  DenseMatrix symmetric(Index n, double lo, double hi) {
    const DenseMatrix q = orthogonal(n);
    Vector d(n);
    for (Index i = 0; i < n; ++i) d(i) = uniform(lo, hi);
    return q * d.asDiagonal() * q.transpose();
  }

  DenseMatrix orthogonal(Index n) {
    Eigen::HouseholderQR<DenseMatrix> qr(gaussian(n, n));
    return qr.householderQ() * DenseMatrix::Identity(n, n);
  }

  /// Random matrix shifted so that mu(A) = -margin (hence stable).
  DenseMatrix stable(Index n, double scale = 1.0, double margin = 0.2) {
    DenseMatrix a = scale * gaussian(n, n) / std::sqrt(static_cast<double>(n));
    const double mu = klsde::log_norm(a);
    a.diagonal().array() -= mu + margin;
    return a;
  }

 private:
  std::mt19937_64 gen_;
  std::normal_distribution<double> dist_;
};

}  // namespace testing_support
