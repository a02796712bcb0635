#pragma once

// Dense kernels: matrix exponential, Schur forms, Sylvester solves and
// numerical-range (field of values) queries.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "klsde/errors.hpp"

namespace klsde {

using DenseMatrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using Index = Eigen::Index;

namespace detail {

inline void require_square(const DenseMatrix& a, const char* what) {
  if (a.rows() != a.cols()) {
    std::ostringstream os;
    os << what << ": expected a square matrix, got " << a.rows() << "x" << a.cols();
    throw DimensionError(os.str());
  }
}

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& a, const char* what) {
  if (!a.allFinite()) throw ValidationError(std::string(what) + ": non-finite entries");
}

inline double one_norm(const DenseMatrix& a) {
  if (a.size() == 0) return 0.0;
  return a.cwiseAbs().colwise().sum().maxCoeff();
}

// Numerator/denominator halves U (odd) and V (even) of the [k/k] Pade
// approximant, so that exp(A) ~ (V - U)^{-1} (V + U).
inline void pade_terms(const DenseMatrix& a, int degree, DenseMatrix& u, DenseMatrix& v) {
  const Index n = a.rows();
  const DenseMatrix id = DenseMatrix::Identity(n, n);
  const DenseMatrix a2 = a * a;
  switch (degree) {
    case 3: {
      constexpr double b[] = {120.0, 60.0, 12.0, 1.0};
      u = a * (b[3] * a2 + b[1] * id);
      v = b[2] * a2 + b[0] * id;
      return;
    }
    case 5: {
      constexpr double b[] = {30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0};
      const DenseMatrix a4 = a2 * a2;
      u = a * (b[5] * a4 + b[3] * a2 + b[1] * id);
      v = b[4] * a4 + b[2] * a2 + b[0] * id;
      return;
    }
    case 7: {
      constexpr double b[] = {17297280.0, 8648640.0, 1995840.0, 277200.0,
                              25200.0,    1512.0,    56.0,      1.0};
      const DenseMatrix a4 = a2 * a2;
      const DenseMatrix a6 = a4 * a2;
      u = a * (b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id);
      v = b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;
      return;
    }
    case 9: {
      constexpr double b[] = {17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
                              2162160.0,     110880.0,     3960.0,       90.0,        1.0};
      const DenseMatrix a4 = a2 * a2;
      const DenseMatrix a6 = a4 * a2;
      const DenseMatrix a8 = a6 * a2;
      u = a * (b[9] * a8 + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id);
      v = b[8] * a8 + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;
      return;
    }
    default: {
      constexpr double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                              1187353796428800.0,  129060195264000.0,   10559470521600.0,
                              670442572800.0,      33522128640.0,       1323241920.0,
                              40840800.0,          960960.0,            16380.0,
                              182.0,               1.0};
      const DenseMatrix a4 = a2 * a2;
      const DenseMatrix a6 = a4 * a2;
      u = a * (a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 +
               b[3] * a2 + b[1] * id);
      v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 +
          b[0] * id;
      return;
    }
  }
}

}  // namespace detail

/// Checks the DenseMatrix construction invariant (finite entries) and returns
/// the matrix unchanged.
inline const DenseMatrix& validated(const DenseMatrix& a, const char* what = "matrix") {
  detail::require_finite(a, what);
  return a;
}

/// e^{tA} by scaling and squaring with a degree 3..13 Pade approximant chosen
/// from the 1-norm of tA.
inline DenseMatrix expm(const DenseMatrix& a, double t = 1.0) {
  detail::require_square(a, "expm");
  detail::require_finite(a, "expm");
  if (!std::isfinite(t)) throw ValidationError("expm: non-finite time");
  const Index n = a.rows();
  if (n == 0) return a;

  DenseMatrix at = t * a;
  const double norm = detail::one_norm(at);

  // Backward-error thresholds for degrees 3, 5, 7, 9, 13.
  constexpr int degrees[] = {3, 5, 7, 9};
  constexpr double theta[] = {1.495585217958292e-2, 2.539398330063230e-1, 9.504178996162932e-1,
                              2.097847961257068e0};
  constexpr double theta13 = 5.371920351148152e0;

  DenseMatrix u;
  DenseMatrix v;
  int squarings = 0;
  bool done = false;
  for (int i = 0; i < 4; ++i) {
    if (norm <= theta[i]) {
      detail::pade_terms(at, degrees[i], u, v);
      done = true;
      break;
    }
  }
  if (!done) {
    if (norm > theta13) {
      squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm / theta13))));
      at = std::ldexp(1.0, -squarings) * at;
    }
    detail::pade_terms(at, 13, u, v);
  }

  DenseMatrix r = (v - u).partialPivLu().solve(v + u);
  for (int i = 0; i < squarings; ++i) r = (r * r).eval();
  if (!r.allFinite()) throw NumericalError("expm: overflow in scaling and squaring");
  return r;
}

/// Real Schur decomposition a = q * tmat * q^T.
struct SchurForm {
  DenseMatrix q;
  DenseMatrix tmat;

  /// Eigenvalues read off the 1x1 and 2x2 diagonal blocks of tmat.
  std::vector<Complex> eigenvalues() const {
    std::vector<Complex> out;
    const Index n = tmat.rows();
    for (Index i = 0; i < n;) {
      if (i + 1 < n && tmat(i + 1, i) != 0.0) {
        const double a = tmat(i, i);
        const double b = tmat(i, i + 1);
        const double c = tmat(i + 1, i);
        const double d = tmat(i + 1, i + 1);
        const double half_trace = 0.5 * (a + d);
        const Complex disc = std::sqrt(Complex(0.25 * (a - d) * (a - d) + b * c, 0.0));
        out.push_back(half_trace + disc);
        out.push_back(half_trace - disc);
        i += 2;
      } else {
        out.emplace_back(tmat(i, i), 0.0);
        ++i;
      }
    }
    return out;
  }
};

inline SchurForm real_schur(const DenseMatrix& a) {
  detail::require_square(a, "real_schur");
  detail::require_finite(a, "real_schur");
  if (a.rows() == 0) return {a, a};
  Eigen::RealSchur<DenseMatrix> schur(a.rows());
  schur.compute(a, true);
  if (schur.info() != Eigen::Success) {
    std::ostringstream os;
    os << "real_schur: QR iteration did not converge (n=" << a.rows()
       << ", |A|_F=" << a.norm() << ", iterations=" << schur.getMaxIterations() << ")";
    throw NumericalError(os.str());
  }
  return {schur.matrixU(), schur.matrixT()};
}

/// Bartels-Stewart solver for L X - X C = Q using complex Schur forms of L
/// and C. The factorizations are computed once; solve() is O(n^2 m + n m^2).
class SylvesterSolver {
 public:
  /// Relative eigenvalue gap below which the equation is treated as singular.
  static constexpr double kGapTolerance = 1e-12;

  SylvesterSolver(const DenseMatrix& l, const DenseMatrix& c) {
    detail::require_square(l, "solve_sylvester(l)");
    detail::require_square(c, "solve_sylvester(c)");
    detail::require_finite(l, "solve_sylvester(l)");
    detail::require_finite(c, "solve_sylvester(c)");
    n_ = l.rows();
    m_ = c.rows();
    Eigen::ComplexSchur<ComplexMatrix> sl(n_);
    Eigen::ComplexSchur<ComplexMatrix> sc(m_);
    if (n_ > 0) {
      sl.compute(l.cast<Complex>());
      if (sl.info() != Eigen::Success) throw NumericalError("solve_sylvester: Schur form of L failed");
      ql_ = sl.matrixU();
      tl_ = sl.matrixT();
    }
    if (m_ > 0) {
      sc.compute(c.cast<Complex>());
      if (sc.info() != Eigen::Success) throw NumericalError("solve_sylvester: Schur form of C failed");
      qc_ = sc.matrixU();
      tc_ = sc.matrixT();
    }
    scale_ = l.norm() + c.norm();
    gap_ = std::numeric_limits<double>::infinity();
    Complex worst_l;
    Complex worst_c;
    for (Index i = 0; i < n_; ++i) {
      for (Index j = 0; j < m_; ++j) {
        const double g = std::abs(tl_(i, i) - tc_(j, j));
        if (g < gap_) {
          gap_ = g;
          worst_l = tl_(i, i);
          worst_c = tc_(j, j);
        }
      }
    }
    if (n_ > 0 && m_ > 0 && !(gap_ > kGapTolerance * scale_)) {
      std::ostringstream os;
      os.precision(17);
      os << "solve_sylvester: spectra of L and C (nearly) intersect: eigenvalue " << worst_l
         << " of L vs " << worst_c << " of C, gap " << gap_ << " <= " << kGapTolerance * scale_;
      throw SingularityError(os.str());
    }
  }

  Index rows() const { return n_; }
  Index cols() const { return m_; }
  /// Smallest distance between an eigenvalue of L and one of C.
  double eigenvalue_gap() const { return gap_; }

  DenseMatrix solve(const DenseMatrix& q) const {
    if (q.rows() != n_ || q.cols() != m_) {
      std::ostringstream os;
      os << "solve_sylvester: right side is " << q.rows() << "x" << q.cols() << ", expected "
         << n_ << "x" << m_;
      throw DimensionError(os.str());
    }
    if (n_ == 0 || m_ == 0) return DenseMatrix::Zero(n_, m_);
    ComplexMatrix f = ql_.adjoint() * q.cast<Complex>() * qc_;
    ComplexMatrix y(n_, m_);
    ComplexVector rhs(n_);
    for (Index j = 0; j < m_; ++j) {
      rhs = f.col(j);
      if (j > 0) rhs.noalias() += y.leftCols(j) * tc_.col(j).head(j);
      const Complex shift = tc_(j, j);
      // Back substitution with (T_L - shift I).
      for (Index r = n_ - 1; r >= 0; --r) {
        Complex acc = rhs(r);
        for (Index s = r + 1; s < n_; ++s) acc -= tl_(r, s) * y(s, j);
        y(r, j) = acc / (tl_(r, r) - shift);
      }
    }
    return (ql_ * y * qc_.adjoint()).real();
  }

 private:
  Index n_ = 0;
  Index m_ = 0;
  ComplexMatrix ql_, tl_, qc_, tc_;
  double scale_ = 0.0;
  double gap_ = 0.0;
};

/// Solves L X - X C = Q for X (n x m).
inline DenseMatrix solve_sylvester(const DenseMatrix& l, const DenseMatrix& c, const DenseMatrix& q) {
  detail::require_finite(q, "solve_sylvester(q)");
  return SylvesterSolver(l, c).solve(q);
}

/// Logarithmic 2-norm: the largest eigenvalue of the symmetric part.
inline double log_norm(const DenseMatrix& a) {
  detail::require_square(a, "log_norm");
  detail::require_finite(a, "log_norm");
  if (a.rows() == 0) return -std::numeric_limits<double>::infinity();
  const DenseMatrix sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

/// Spectral norm (largest singular value).
inline double norm2(const DenseMatrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<DenseMatrix> svd(a);
  return svd.singularValues()(0);
}

/// Boundary sweep of the numerical range F(A).
///
/// For K equispaced angles theta the largest eigenvalue h(theta) of the
/// Hermitian part of e^{i theta} A gives the supporting half-plane
/// Re(e^{i theta} z) <= h(theta). Its eigenvector x gives the boundary point
/// x^* A x, which lies in F(A). The intersection of the half-planes is a
/// polygon containing F(A); distances measured to it are lower bounds.
struct FovEstimate {
  double mu = 0.0;
  std::vector<Complex> boundary;
  std::size_t angles = 0;
  std::vector<double> support;
  std::vector<Complex> outer;

  double theta(std::size_t j) const { return 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(angles); }

  /// True when z satisfies every supporting half-plane.
  bool in_outer(Complex z, double tol = 0.0) const {
    for (std::size_t j = 0; j < angles; ++j) {
      if ((std::polar(1.0, theta(j)) * z).real() > support[j] + tol) return false;
    }
    return true;
  }

  /// Distance from z to the outer polygon; 0 inside.
  double outer_distance(Complex z) const {
    if (in_outer(z)) return 0.0;
    double best = std::numeric_limits<double>::infinity();
    const std::size_t k = outer.size();
    for (std::size_t i = 0; i < k; ++i) {
      const Complex p = outer[i];
      const Complex q = outer[(i + 1) % k];
      const Complex e = q - p;
      const double len2 = std::norm(e);
      double s = 0.0;
      if (len2 > 0.0) s = std::clamp(((z - p) * std::conj(e)).real() / len2, 0.0, 1.0);
      best = std::min(best, std::abs(z - (p + s * e)));
    }
    return best;
  }
};

inline FovEstimate fov_estimate(const DenseMatrix& a, std::size_t angles = 64) {
  detail::require_square(a, "fov_estimate");
  detail::require_finite(a, "fov_estimate");
  if (angles < 3) throw ValidationError("fov_estimate: need at least 3 angles");
  const Index n = a.rows();
  FovEstimate out;
  out.angles = angles;
  if (n == 0) throw DimensionError("fov_estimate: empty matrix");

  const DenseMatrix sym = 0.5 * (a + a.transpose());
  const DenseMatrix skew = 0.5 * (a - a.transpose());
  const ComplexMatrix ac = a.cast<Complex>();
  const double scale = a.norm() + 1.0;
  // Slack keeps the outer polygon a true superset despite eigensolver error.
  const double slack = 64.0 * std::numeric_limits<double>::epsilon() * scale;

  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(n);
  out.support.resize(angles);
  out.boundary.reserve(angles);
  for (std::size_t j = 0; j < angles; ++j) {
    const double th = out.theta(j);
    ComplexMatrix h = std::cos(th) * sym.cast<Complex>() + Complex(0.0, std::sin(th)) * skew.cast<Complex>();
    es.compute(h, Eigen::ComputeEigenvectors);
    out.support[j] = es.eigenvalues()(n - 1) + slack;
    const ComplexVector x = es.eigenvectors().col(n - 1);
    out.boundary.push_back(x.dot(ac * x));
  }
  out.mu = log_norm(a);

  // Clip a bounding square by every half-plane (convex polygon clipping).
  const double r = 2.0 * scale;
  std::vector<Complex> poly = {{-r, -r}, {r, -r}, {r, r}, {-r, r}};
  std::vector<Complex> next;
  for (std::size_t j = 0; j < angles && !poly.empty(); ++j) {
    const Complex rot = std::polar(1.0, out.theta(j));
    const double h = out.support[j];
    auto g = [&](Complex z) { return (rot * z).real() - h; };
    next.clear();
    const std::size_t k = poly.size();
    for (std::size_t i = 0; i < k; ++i) {
      const Complex p = poly[i];
      const Complex q = poly[(i + 1) % k];
      const double gp = g(p);
      const double gq = g(q);
      if (gp <= 0.0) next.push_back(p);
      if ((gp < 0.0 && gq > 0.0) || (gp > 0.0 && gq < 0.0)) {
        const double s = gp / (gp - gq);
        next.push_back(p + s * (q - p));
      }
    }
    poly.swap(next);
  }
  out.outer = std::move(poly);
  return out;
}

/// Lower bound on the distance from i*lambda to F(A); 0 when i*lambda lies in
/// the outer polygon (the bound is then unusable).
inline double fov_distance(const DenseMatrix& a, double lambda, std::size_t angles = 64) {
  if (!std::isfinite(lambda)) throw ValidationError("fov_distance: non-finite lambda");
  return fov_estimate(a, angles).outer_distance(Complex(0.0, lambda));
}

/// 1 / (|lambda| cos(alpha) - gamma sin(alpha)): bounds 1/d(i lambda, F(L))
/// for L sectorial with half-angle alpha and vertex gamma.
inline double sectorial_resolvent_bound(double lambda, double alpha, double gamma) {
  if (!(alpha >= 0.0 && alpha < 0.5 * std::numbers::pi)) {
    throw DomainError("sectorial_resolvent_bound: alpha must lie in [0, pi/2)");
  }
  const double denom = std::abs(lambda) * std::cos(alpha) - gamma * std::sin(alpha);
  if (!(denom > 0.0)) {
    throw DomainError("sectorial_resolvent_bound: |lambda| cos(alpha) - gamma sin(alpha) <= 0");
  }
  return 1.0 / denom;
}

/// Half-angle alpha and vertex gamma of a sector S_alpha + gamma containing F(L).
struct Sector {
  double alpha = 0.0;
  double gamma = 0.0;

  double denominator(double lambda) const {
    return std::abs(lambda) * std::cos(alpha) - gamma * std::sin(alpha);
  }
};

/// Fits a sector to the outer polygon of F(L), choosing the vertex that
/// maximizes |lambda_ref| cos(alpha) - gamma sin(alpha). Returns nullopt when
/// no candidate gives a positive denominator.
inline std::optional<Sector> fit_sector(const FovEstimate& fov, double lambda_ref) {
  if (fov.outer.empty()) return std::nullopt;
  double xmax = -std::numeric_limits<double>::infinity();
  double spread = 0.0;
  for (const Complex& v : fov.outer) xmax = std::max(xmax, v.real());
  for (const Complex& v : fov.outer) spread = std::max(spread, std::abs(v - fov.outer.front()));
  spread = std::max(spread, 1e-12);

  std::optional<Sector> best;
  double best_denom = 0.0;
  for (int j = -8; j <= 40; ++j) {
    const double gamma = xmax + spread * std::ldexp(1.0, -j);
    double alpha = 0.0;
    for (const Complex& v : fov.outer) {
      const Complex w = -(v - gamma);
      if (w.real() <= 0.0) {
        alpha = 0.5 * std::numbers::pi;
        break;
      }
      alpha = std::max(alpha, std::abs(std::arg(w)));
    }
    if (!(alpha < 0.5 * std::numbers::pi)) continue;
    const Sector s{alpha, gamma};
    const double d = s.denominator(lambda_ref);
    if (d > best_denom) {
      best_denom = d;
      best = s;
    }
  }
  return best;
}

/// ||A A^T - A^T A||_F <= tol ||A||_F^2.
inline bool is_normal(const DenseMatrix& a, double tol = 1e-10) {
  const double scale = a.squaredNorm();
  return (a * a.transpose() - a.transpose() * a).norm() <= tol * std::max(scale, 1e-300);
}

inline bool is_symmetric(const DenseMatrix& a, double tol = 0.0) {
  return a.rows() == a.cols() && (a - a.transpose()).norm() <= tol * a.norm();
}

}  // namespace klsde
