#pragma once

// Exact moments of X_t and of its truncation X_t^m, truncation-error series
// with certified tails, a-priori bounds, and the Lyapunov ODE oracle.
//
//   E||X_t||^2   = ||e^{tL} X0||^2 + (2/T) sum_{k>=1} ||phi_cos_{k,t}(L) B||_F^2
//   E||X_t^m||^2 = ||e^{tL} X0||^2 + (2/T) sum_{k<=m} ||phi_cos_{k,t}(L) B||_F^2

#include <boost/math/special_functions/trigamma.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "klsde/errors.hpp"
#include "klsde/matkit.hpp"
#include "klsde/phifn.hpp"
#include "klsde/sampler.hpp"

namespace klsde {

/// Evaluates term(k) = ||phi_cos_{k,t}(L) B||_F^2.
///
/// Diagonalizable L = V D V^{-1} with a well-conditioned V uses an O(n^2)
/// Hermitian form per term: with W = V^{-1} B and g_l = phi_cos_k(d_l),
/// ||V diag(g) W||_F^2 = sum_{l,l'} g_l conj(g_l') (V^*V)_{l'l} (W W^*)_{ll'}.
/// Otherwise each term costs one complex LU (resolvent form).
class PhiTermEvaluator {
 public:
  enum class Route { Auto, Spectral, Resolvent };

  /// Eigenvector condition number above which Auto picks the resolvent route.
  static constexpr double kSpectralConditionLimit = 1e6;

  explicit PhiTermEvaluator(const SdeProblem& problem, Route route = Route::Auto)
      : l_(problem.l), b_(problem.b), basis_(problem.basis), t_(problem.t_end) {
    problem.validate();
    const Index n = problem.dim();
    if (route != Route::Resolvent) {
      Eigen::EigenSolver<DenseMatrix> es(l_, true);
      if (es.info() == Eigen::Success) {
        const ComplexMatrix v = es.eigenvectors();
        Eigen::JacobiSVD<ComplexMatrix> svd(v);
        const auto& sv = svd.singularValues();
        const double cond = sv(n - 1) > 0.0 ? sv(0) / sv(n - 1) : std::numeric_limits<double>::infinity();
        if (cond < kSpectralConditionLimit || route == Route::Spectral) {
          const ComplexMatrix w = v.partialPivLu().solve(b_.cast<Complex>());
          const ComplexMatrix vv = v.adjoint() * v;
          const ComplexMatrix ww = w * w.adjoint();
          form_ = vv.transpose().cwiseProduct(ww);
          eigenvalues_ = es.eigenvalues();
          exp_eigenvalues_ = (t_ * eigenvalues_).array().exp();
          spectral_ = true;
        }
      }
      if (!spectral_ && route == Route::Spectral) throw StrategyError("PhiTermEvaluator: spectral route unavailable");
    }
    if (!spectral_) exp_tl_ = expm(l_, t_);
  }

  bool spectral() const { return spectral_; }

  double term(Index k) const {
    const PhiSpec spec{basis_.frequency(k), t_};
    if (spectral_) {
      ComplexVector g;
      phi_cos_table(spec, eigenvalues_, exp_eigenvalues_, g);
      const Complex q = g.transpose() * (form_ * g.conjugate());
      return std::max(q.real(), 0.0);
    }
    return (phi_matrices(spec, l_, exp_tl_).cos * b_).squaredNorm();
  }

 private:
  DenseMatrix l_;
  DenseMatrix b_;
  KlBasis basis_;
  double t_;
  bool spectral_ = false;
  ComplexMatrix form_;
  ComplexVector eigenvalues_;
  ComplexVector exp_eigenvalues_;
  DenseMatrix exp_tl_;
};

/// Upper bound on (2/T) sum_{k>K} ||phi_cos_k(L) B||_F^2.
///
/// SymmetricNsd: L symmetric with mu(L) <= 0 gives the closed form
///   2 T ||B||_2^2 n / (pi^2 (K - 1)).
/// Sectorial: F(L) inside gamma + S_alpha gives, via the resolvent bound,
///   (2/T) n ||B||^2 (1 + e^{t mu})^2 / (a (a (K - s) - gamma sin alpha)),
///   a = pi cos(alpha) / T, s the frequency shift of the basis.
/// Heuristic: no certificate; last_term * K assumes 1/k^2 decay.
class TailModel {
 public:
  enum class Kind { SymmetricNsd, Sectorial, Heuristic };

  explicit TailModel(const SdeProblem& problem) : basis_(problem.basis), t_(problem.t_end) {
    problem.validate();
    n_ = static_cast<double>(problem.dim());
    b2_ = std::pow(norm2(problem.b), 2);
    mu_ = log_norm(problem.l);
    const double lnorm = problem.l.norm();
    if (is_symmetric(problem.l, 1e-14) && mu_ <= 1e-12 * lnorm) {
      kind_ = Kind::SymmetricNsd;
      return;
    }
    const FovEstimate fov = fov_estimate(problem.l);
    if (auto s = fit_sector(fov, basis_.frequency(1000))) {
      sector_ = *s;
      kind_ = Kind::Sectorial;
      return;
    }
    kind_ = Kind::Heuristic;
  }

  Kind kind() const { return kind_; }
  bool certified() const { return kind_ != Kind::Heuristic; }
  const Sector& sector() const { return sector_; }
  double log_norm_value() const { return mu_; }

  /// Tail beyond the first K terms; last_term is term(K) without the 2/T factor.
  double bound(Index k_terms, double last_term) const {
    if (b2_ == 0.0) return 0.0;
    const double horizon = basis_.horizon;
    const double kk = static_cast<double>(k_terms);
    switch (kind_) {
      case Kind::SymmetricNsd:
        if (k_terms < 2) return std::numeric_limits<double>::infinity();
        return 2.0 * horizon * b2_ * n_ / (std::numbers::pi * std::numbers::pi * (kk - 1.0));
      case Kind::Sectorial: {
        const double a = std::numbers::pi * std::cos(sector_.alpha) / horizon;
        const double shift = basis_.kind == KlKind::Wiener ? 0.5 : 0.0;
        const double inner = a * (kk - shift) - sector_.gamma * std::sin(sector_.alpha);
        if (!(inner > 0.0)) return std::numeric_limits<double>::infinity();
        const double growth = 1.0 + std::exp(t_ * mu_);
        return basis_.amplitude() * basis_.amplitude() * n_ * b2_ * growth * growth / (a * inner);
      }
      case Kind::Heuristic:
        if (k_terms < 1) return std::numeric_limits<double>::infinity();
        return basis_.amplitude() * basis_.amplitude() * last_term * kk;
    }
    return std::numeric_limits<double>::infinity();
  }

 private:
  KlBasis basis_;
  double t_;
  double n_ = 0.0;
  double b2_ = 0.0;
  double mu_ = 0.0;
  Kind kind_ = Kind::Heuristic;
  Sector sector_;
};

inline std::string_view to_string(TailModel::Kind k) {
  switch (k) {
    case TailModel::Kind::SymmetricNsd: return "symmetric_nsd";
    case TailModel::Kind::Sectorial: return "sectorial";
    case TailModel::Kind::Heuristic: return "heuristic";
  }
  return "?";
}

/// Result of a series summed to a (certified) relative tolerance. `value`
/// holds the partial sum plus an estimate of the remainder that lies inside
/// [0, tail_bound], so |value - exact| <= tail_bound whenever `certified`.
struct SeriesValue {
  double value = 0.0;
  Index terms = 0;
  double tail_bound = 0.0;
  bool certified = true;
};

/// Default cap on the number of series terms.
inline constexpr Index kMaxSeriesTerms = 50'000'000;

namespace detail {

// sum_{k>K} 1/lambda_k^2 = (T/pi)^2 psi'(K + 1 - s).
inline double inverse_square_tail(const KlBasis& basis, Index k_terms) {
  const double shift = basis.kind == KlKind::Wiener ? 0.5 : 0.0;
  const double r = basis.horizon / std::numbers::pi;
  return r * r * boost::math::trigamma(static_cast<double>(k_terms) + 1.0 - shift);
}

// Sums scale * term(k) for k = first, first + 1, ... until the tail bound
// after the last term drops below rel_tol * (offset + partial).
//
// The terms behave like c / lambda_k^2 (times a bounded oscillation); the
// remainder estimate uses the mean of lambda_k^2 term(k) over the last half
// of the summed range, recovered from prefix sums kept at powers of two.
template <typename TermFn>
SeriesValue sum_with_tail(TermFn&& term, const TailModel& tail, const KlBasis& basis, double scale, Index first,
                          double offset, double rel_tol, Index max_terms) {
  if (!(rel_tol > 0.0)) throw ValidationError("series: rel_tol must be > 0");
  SeriesValue out;
  out.certified = tail.certified();
  Index k = first - 1;
  double tb = tail.bound(k, 0.0);
  if (tb == 0.0) return {offset, k, 0.0, out.certified};
  const Index min_terms = tail.certified() ? 1 : 16;
  double partial = 0.0;
  double weighted = 0.0;  // running sum of lambda_k^2 term(k)
  std::vector<std::pair<Index, double>> checkpoints{{k, 0.0}};
  Index next_checkpoint = 1;
  while (next_checkpoint <= k) next_checkpoint *= 2;
  double last = 0.0;
  while (true) {
    ++k;
    last = term(k);
    partial += scale * last;
    const double lam = basis.frequency(k);
    weighted += lam * lam * last;
    if (k == next_checkpoint) {
      checkpoints.emplace_back(k, weighted);
      next_checkpoint *= 2;
    }
    tb = tail.bound(k, last);
    if (k - first + 1 >= min_terms && tb <= rel_tol * (offset + partial)) break;
    if (k >= max_terms) {
      out.certified = false;
      break;
    }
  }
  // Window (k0, k] with k0 the last checkpoint not past k / 2.
  auto base = checkpoints.front();
  for (const auto& cp : checkpoints)
    if (cp.first <= k / 2) base = cp;
  const double mean_c = (weighted - base.second) / static_cast<double>(k - base.first);
  double estimate = scale * mean_c * inverse_square_tail(basis, k);
  if (!(estimate >= 0.0)) estimate = 0.0;
  if (std::isfinite(tb)) estimate = std::min(estimate, tb);
  out.value = offset + partial + estimate;
  out.terms = k;
  out.tail_bound = tb;
  return out;
}

}  // namespace detail

/// E(X_t) = e^{tL} X0.
inline Vector exact_mean(const SdeProblem& problem) {
  problem.validate();
  return expm(problem.l, problem.t_end) * problem.x0;
}

/// E||X_t||^2 by the phi series, stopped when the tail bound falls below
/// rel_tol times the partial value. `terms` is K, `tail_bound` the bound on
/// everything not summed.
inline SeriesValue exact_second_moment(const SdeProblem& problem, double rel_tol,
                                       Index max_terms = kMaxSeriesTerms) {
  problem.validate();
  const double mean2 = exact_mean(problem).squaredNorm();
  const TailModel tail(problem);
  if (problem.b.squaredNorm() == 0.0) return {mean2, 0, 0.0, true};
  const PhiTermEvaluator eval(problem);
  const double amp2 = problem.basis.amplitude() * problem.basis.amplitude();
  return detail::sum_with_tail([&](Index k) { return eval.term(k); }, tail, problem.basis, amp2, 1, mean2, rel_tol, max_terms);
}

/// E||X_t^m||^2, the finite sum.
inline double truncated_second_moment(const SdeProblem& problem, Index m) {
  problem.validate();
  if (m < 0) throw ValidationError("truncated_second_moment: m must be >= 0");
  const double mean2 = exact_mean(problem).squaredNorm();
  if (m == 0 || problem.b.squaredNorm() == 0.0) return mean2;
  const PhiTermEvaluator eval(problem);
  const double amp2 = problem.basis.amplitude() * problem.basis.amplitude();
  double s = 0.0;
  for (Index k = 1; k <= m; ++k) s += eval.term(k);
  return mean2 + amp2 * s;
}

/// E||X_t||^2 - E||X_t^m||^2 = (2/T) sum_{k>m} ||phi_cos_k(L) B||_F^2, summed
/// directly (no subtraction) until the tail bound is below rel_tol times the
/// partial tail. This is also the exact mean-square (strong) error.
inline SeriesValue weak_error_exact(const SdeProblem& problem, Index m, double rel_tol,
                                    Index max_terms = kMaxSeriesTerms) {
  problem.validate();
  if (m < 0) throw ValidationError("weak_error_exact: m must be >= 0");
  if (problem.b.squaredNorm() == 0.0) return {0.0, m, 0.0, true};
  const TailModel tail(problem);
  const PhiTermEvaluator eval(problem);
  const double amp2 = problem.basis.amplitude() * problem.basis.amplitude();
  return detail::sum_with_tail([&](Index k) { return eval.term(k); }, tail, problem.basis, amp2, m + 1, 0.0, rel_tol,
                               std::max(max_terms, m + 1));
}

/// Same series as weak_error_exact: E||X_t - X_t^m||^2.
inline SeriesValue strong_error_exact(const SdeProblem& problem, Index m, double rel_tol,
                                      Index max_terms = kMaxSeriesTerms) {
  return weak_error_exact(problem, m, rel_tol, max_terms);
}

/// E||X_t||^2 for normal L and B = c I through the eigenvalues:
/// ||e^{tL} X0||^2 + (2/T) c^2 sum_k sum_{lambda in spec(L)} |phi_cos_k(lambda)|^2.
inline SeriesValue second_moment_normal(const SdeProblem& problem, double rel_tol,
                                        Index max_terms = kMaxSeriesTerms) {
  problem.validate();
  if (!is_normal(problem.l)) throw ValidationError("second_moment_normal: L is not normal");
  const auto c = detail::scalar_identity_factor(problem.b);
  if (!c) throw ValidationError("second_moment_normal: B must be c I");
  const double mean2 = exact_mean(problem).squaredNorm();
  if (*c == 0.0) return {mean2, 0, 0.0, true};

  ComplexVector eig;
  if (is_symmetric(problem.l)) {
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es(problem.l, Eigen::EigenvaluesOnly);
    eig = es.eigenvalues().cast<Complex>();
  } else {
    Eigen::EigenSolver<DenseMatrix> es(problem.l, false);
    eig = es.eigenvalues();
  }
  const double t = problem.t_end;
  const KlBasis basis = problem.basis;
  const ComplexVector exp_eig = (t * eig).array().exp();
  ComplexVector g;
  auto term = [&](Index k) {
    phi_cos_table(PhiSpec{basis.frequency(k), t}, eig, exp_eig, g);
    return (*c) * (*c) * g.squaredNorm();
  };
  const TailModel tail(problem);
  const double amp2 = basis.amplitude() * basis.amplitude();
  return detail::sum_with_tail(term, tail, basis, amp2, 1, mean2, rel_tol, max_terms);
}

/// a-priori bound 2 T ||B||_2^2 n / (pi^2 (m - 1)) on the strong and weak
/// truncation errors, for mu(L) <= 0.
inline double strong_error_bound(const SdeProblem& problem, Index m) {
  problem.validate();
  if (m < 2) throw DomainError("strong_error_bound: m must be >= 2");
  const double mu = log_norm(problem.l);
  if (mu > 1e-12 * problem.l.norm()) {
    throw BoundUnavailableError("strong_error_bound: requires mu(L) <= 0");
  }
  const double b2 = std::pow(norm2(problem.b), 2);
  const double n = static_cast<double>(problem.dim());
  return 2.0 * problem.basis.horizon * b2 * n / (std::numbers::pi * std::numbers::pi * static_cast<double>(m - 1));
}

/// Default RK4 step count for the Lyapunov oracle.
inline constexpr Index kLyapunovSteps = 10'000;

/// Covariance P(t) of X_t from P' = L P + P L^T + B B^T, P(0) = 0, by RK4.
inline DenseMatrix lyapunov_covariance(const SdeProblem& problem, Index steps = kLyapunovSteps) {
  problem.validate();
  if (steps < 1) throw ValidationError("lyapunov_covariance: steps must be >= 1");
  const Index n = problem.dim();
  const DenseMatrix& l = problem.l;
  const DenseMatrix q = problem.b * problem.b.transpose();
  const double h = problem.t_end / static_cast<double>(steps);
  auto rhs = [&](const DenseMatrix& p) -> DenseMatrix {
    DenseMatrix lp = l * p;
    return lp + lp.transpose() + q;
  };
  DenseMatrix p = DenseMatrix::Zero(n, n);
  for (Index s = 0; s < steps; ++s) {
    const DenseMatrix k1 = rhs(p);
    const DenseMatrix k2 = rhs(p + 0.5 * h * k1);
    const DenseMatrix k3 = rhs(p + 0.5 * h * k2);
    const DenseMatrix k4 = rhs(p + h * k3);
    p += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return p;
}

/// ||e^{tL} X0||^2 + trace P(t).
inline double lyapunov_second_moment(const SdeProblem& problem, Index steps = kLyapunovSteps) {
  return exact_mean(problem).squaredNorm() + lyapunov_covariance(problem, steps).trace();
}

/// Moments and truncation errors of one problem at truncation length m.
struct MomentReport {
  Vector mean;
  double second_moment_exact = 0.0;
  double second_moment_truncated = 0.0;
  double strong_error_exact = 0.0;
  std::optional<double> strong_error_bound;
  double weak_error_exact = 0.0;
  std::optional<double> weak_error_bound;
  Index terms_used = 0;
  double tail_bound = 0.0;
  bool certified = true;
  TailModel::Kind tail_kind = TailModel::Kind::Heuristic;
};

inline MomentReport moment_report(const SdeProblem& problem, Index m, double rel_tol,
                                  Index max_terms = kMaxSeriesTerms) {
  MomentReport r;
  r.mean = exact_mean(problem);
  const SeriesValue full = exact_second_moment(problem, rel_tol, max_terms);
  r.second_moment_exact = full.value;
  r.terms_used = full.terms;
  r.tail_bound = full.tail_bound;
  r.second_moment_truncated = truncated_second_moment(problem, m);
  const SeriesValue err = weak_error_exact(problem, m, rel_tol, max_terms);
  r.weak_error_exact = err.value;
  r.strong_error_exact = err.value;
  r.certified = full.certified && err.certified;
  r.tail_kind = TailModel(problem).kind();
  if (m >= 2 && log_norm(problem.l) <= 1e-12 * problem.l.norm()) {
    r.strong_error_bound = strong_error_bound(problem, m);
    r.weak_error_bound = r.strong_error_bound;
  }
  return r;
}

}  // namespace klsde
