#pragma once

// Time-stepping references: explicit Euler-Maruyama
//   V_{i+1} = V_i + dt L V_i + B dW_i
// and the backward variant, with the noise added after the implicit solve,
//   X_{i+1} = (I - dt L)^{-1} X_i + B dW_i.

#include <cmath>
#include <cstdint>
#include <string_view>

#include "klsde/errors.hpp"
#include "klsde/klprocess.hpp"
#include "klsde/matkit.hpp"
#include "klsde/sampler.hpp"

namespace klsde {

enum class Scheme { EM, BackwardEM };

inline std::string_view to_string(Scheme s) { return s == Scheme::EM ? "em" : "bem"; }

class SteppingPlan {
 public:
  SteppingPlan(const SdeProblem& problem, Index m_steps, Scheme scheme)
      : problem_(problem), m_steps_(m_steps), scheme_(scheme) {
    problem_.validate();
    if (m_steps < 1) throw ValidationError("SteppingPlan: m_steps must be >= 1");
    dt_ = problem_.t_end / static_cast<double>(m_steps);
    if (scheme == Scheme::BackwardEM) {
      const Index n = problem_.dim();
      const DenseMatrix a = DenseMatrix::Identity(n, n) - dt_ * problem_.l;
      lu_.compute(a);
      if (!(lu_.rcond() > 1e-14)) throw SingularityError("SteppingPlan: I - dt L is singular");
    }
  }

  const SdeProblem& problem() const { return problem_; }
  Index steps() const { return m_steps_; }
  double dt() const { return dt_; }
  Scheme scheme() const { return scheme_; }

  /// Deterministic part of one step: (I + dt L) v or (I - dt L)^{-1} v.
  Vector drift_step(const Vector& v) const {
    if (scheme_ == Scheme::EM) return v + dt_ * (problem_.l * v);
    return lu_.solve(v);
  }

  /// (I - dt L)^{-1} v; only for BackwardEM.
  Vector implicit_solve(const Vector& v) const {
    if (scheme_ != Scheme::BackwardEM) throw StrategyError("implicit_solve: not a backward plan");
    return lu_.solve(v);
  }

 private:
  SdeProblem problem_;
  Index m_steps_;
  double dt_ = 0.0;
  Scheme scheme_;
  Eigen::PartialPivLU<DenseMatrix> lu_;
};

/// Runs one path; visit(i, state) is called for i = 0..steps. The increments
/// are sqrt(dt) times normals from stream (seed, sample_index).
template <typename Visit>
Vector step_path(const SteppingPlan& plan, std::uint64_t seed, std::uint64_t sample_index, Visit&& visit) {
  const SdeProblem& p = plan.problem();
  NormalStream ns(seed, sample_index);
  const double sdt = std::sqrt(plan.dt());
  Vector v = p.x0;
  Vector dw(p.noise_dim());
  visit(Index{0}, v);
  for (Index i = 0; i < plan.steps(); ++i) {
    ns.fill(dw);
    v = plan.drift_step(v);
    v.noalias() += p.b * (sdt * dw);
    visit(i + 1, v);
  }
  return v;
}

inline Vector em_path(const SteppingPlan& plan, std::uint64_t seed, std::uint64_t sample_index = 0) {
  if (plan.scheme() != Scheme::EM) throw StrategyError("em_path: plan scheme is not EM");
  return step_path(plan, seed, sample_index, [](Index, const Vector&) {});
}

inline Vector bem_path(const SteppingPlan& plan, std::uint64_t seed, std::uint64_t sample_index = 0) {
  if (plan.scheme() != Scheme::BackwardEM) throw StrategyError("bem_path: plan scheme is not BackwardEM");
  return step_path(plan, seed, sample_index, [](Index, const Vector&) {});
}

inline Vector scheme_path(const SteppingPlan& plan, std::uint64_t seed, std::uint64_t sample_index = 0) {
  return step_path(plan, seed, sample_index, [](Index, const Vector&) {});
}

/// E||V_M||^2 of the discrete scheme itself: with V_{i+1} = R V_i + B dW_i,
/// the mean is R^M x0 and the covariance obeys P <- R P R^T + dt B B^T.
inline double scheme_second_moment(const SteppingPlan& plan) {
  const SdeProblem& p = plan.problem();
  const Index n = p.dim();
  DenseMatrix r(n, n);
  for (Index j = 0; j < n; ++j) r.col(j) = plan.drift_step(Vector::Unit(n, j));
  const DenseMatrix q = plan.dt() * (p.b * p.b.transpose());
  Vector mean = p.x0;
  DenseMatrix cov = DenseMatrix::Zero(n, n);
  for (Index i = 0; i < plan.steps(); ++i) {
    mean = r * mean;
    cov = r * cov * r.transpose() + q;
  }
  return mean.squaredNorm() + cov.trace();
}

}  // namespace klsde
