#pragma once

// Realizations of the truncated KL solution
//
//   X_t^m = e^{tL} X0 + sqrt(2/T) sum_{k=1}^m phi_cos_{k,t}(L) B z_k
//
// through four interchangeable strategies, and the deterministic solution of
// u' = L u + sum_k a_k cos(c_k t) + b_k sin(c_k t).

#include <cmath>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "klsde/errors.hpp"
#include "klsde/klprocess.hpp"
#include "klsde/matkit.hpp"
#include "klsde/phifn.hpp"

namespace klsde {

/// dX = L X dt + B dW on [0, t_end], X(0) = x0.
struct SdeProblem {
  DenseMatrix l;
  DenseMatrix b;
  Vector x0;
  double t_end = 1.0;
  KlBasis basis{KlKind::Wiener, 1.0};

  Index dim() const { return l.rows(); }
  /// Number of noise channels (columns of B).
  Index noise_dim() const { return b.cols(); }

  void validate() const {
    detail::require_square(l, "SdeProblem.l");
    detail::require_finite(l, "SdeProblem.l");
    detail::require_finite(b, "SdeProblem.b");
    detail::require_finite(x0, "SdeProblem.x0");
    if (b.rows() != l.rows() || x0.size() != l.rows()) {
      std::ostringstream os;
      os << "SdeProblem: inconsistent dimensions (L " << l.rows() << "x" << l.cols() << ", B "
         << b.rows() << "x" << b.cols() << ", x0 " << x0.size() << ")";
      throw DimensionError(os.str());
    }
    if (!(std::isfinite(t_end) && t_end > 0.0)) throw ValidationError("SdeProblem: t_end must be > 0");
    basis.validate();
    if (t_end > basis.horizon * (1.0 + 1e-15)) {
      throw ValidationError("SdeProblem: t_end exceeds the KL basis horizon");
    }
  }
};

/// Builds a problem whose KL horizon equals t_end.
inline SdeProblem make_problem(DenseMatrix l, DenseMatrix b, Vector x0, double t_end,
                               KlKind kind = KlKind::Wiener) {
  SdeProblem p{std::move(l), std::move(b), std::move(x0), t_end, KlBasis{kind, t_end}};
  p.validate();
  return p;
}

/// Truncated Fourier forcing g_N(t) = sum_{k=1}^N a_k cos(c_k t) + b_k sin(c_k t);
/// a and b hold the coefficient vectors as columns.
struct FourierForcing {
  DenseMatrix a;
  DenseMatrix b;
  std::vector<double> c;

  Index size() const { return static_cast<Index>(c.size()); }

  void validate(Index n) const {
    const Index len = size();
    if (a.cols() != len || b.cols() != len || (len > 0 && (a.rows() != n || b.rows() != n))) {
      throw DimensionError("FourierForcing: coefficient lists must share length N and dimension n");
    }
    detail::require_finite(a, "FourierForcing.a");
    detail::require_finite(b, "FourierForcing.b");
    for (double ck : c)
      if (!std::isfinite(ck)) throw ValidationError("FourierForcing: non-finite frequency");
  }

  Vector evaluate(double t) const {
    Vector g = Vector::Zero(a.rows());
    for (Index k = 0; k < size(); ++k) {
      g += std::cos(c[static_cast<std::size_t>(k)] * t) * a.col(k) +
           std::sin(c[static_cast<std::size_t>(k)] * t) * b.col(k);
    }
    return g;
  }
};

namespace detail {

inline void require_vector(const Vector& v, Index n, const char* what) {
  if (v.size() != n) {
    std::ostringstream os;
    os << what << ": expected dimension " << n << ", got " << v.size();
    throw DimensionError(os.str());
  }
  require_finite(v, what);
}

// Skew generator [[0, -diag(c)], [diag(c), 0]].
inline DenseMatrix skew_frequency_block(const std::vector<double>& c) {
  const auto len = static_cast<Index>(c.size());
  DenseMatrix s = DenseMatrix::Zero(2 * len, 2 * len);
  for (Index k = 0; k < len; ++k) {
    s(k, len + k) = -c[static_cast<std::size_t>(k)];
    s(len + k, k) = c[static_cast<std::size_t>(k)];
  }
  return s;
}

}  // namespace detail

/// Variation of constants: e^{tL} u0 + sum_k phi_cos_k(L) a_k + phi_sin_k(L) b_k.
inline Vector solve_fourier_ode(const DenseMatrix& l, const FourierForcing& forcing, const Vector& u0, double t) {
  detail::require_square(l, "solve_fourier_ode");
  detail::require_finite(l, "solve_fourier_ode");
  const Index n = l.rows();
  detail::require_vector(u0, n, "solve_fourier_ode(u0)");
  forcing.validate(n);
  if (!(std::isfinite(t) && t >= 0.0)) throw ValidationError("solve_fourier_ode: t must be >= 0");

  const DenseMatrix e = expm(l, t);
  Vector u = e * u0;
  for (Index k = 0; k < forcing.size(); ++k) {
    const double ck = forcing.c[static_cast<std::size_t>(k)];
    const PhiMatrices phi = phi_matrices(PhiSpec{ck, t}, l, e);
    u.noalias() += phi.cos * forcing.a.col(k) + phi.sin * forcing.b.col(k);
  }
  return u;
}

/// Same solution as the top block of one exponential of the augmented matrix
/// [[L, A_N, B_N], [0, 0, -C_N], [0, C_N, 0]] applied to [u0; 1; 0].
inline Vector solve_augmented_exp(const DenseMatrix& l, const FourierForcing& forcing, const Vector& u0, double t) {
  detail::require_square(l, "solve_augmented_exp");
  detail::require_finite(l, "solve_augmented_exp");
  const Index n = l.rows();
  detail::require_vector(u0, n, "solve_augmented_exp(u0)");
  forcing.validate(n);
  if (!(std::isfinite(t) && t >= 0.0)) throw ValidationError("solve_augmented_exp: t must be >= 0");

  const Index len = forcing.size();
  DenseMatrix big = DenseMatrix::Zero(n + 2 * len, n + 2 * len);
  big.topLeftCorner(n, n) = l;
  if (len > 0) {
    big.block(0, n, n, len) = forcing.a;
    big.block(0, n + len, n, len) = forcing.b;
    big.bottomRightCorner(2 * len, 2 * len) = detail::skew_frequency_block(forcing.c);
  }
  Vector v = Vector::Zero(n + 2 * len);
  v.head(n) = u0;
  v.segment(n, len).setOnes();
  const DenseMatrix e = expm(big, t);
  return e.topRows(n) * v;
}

enum class Strategy { Diagonalized, PhiSeries, AugmentedExp, Sylvester };

inline std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::Diagonalized: return "diagonalized";
    case Strategy::PhiSeries: return "phi_series";
    case Strategy::AugmentedExp: return "augmented_exp";
    case Strategy::Sylvester: return "sylvester";
  }
  return "?";
}

/// Eigenvector condition number above which the diagonalized route is refused.
inline constexpr double kMaxEigenvectorCondition = 1e8;

namespace plan_cache {

// Stacked [phi_1 B, ..., phi_m B] scaled by the KL amplitude (n x m*p).
struct PhiSeries {
  DenseMatrix stacked;
};

// Normal L = Q T Q^T with T block diagonal (1x1 and 2x2 blocks [[a, w], [-w, a]]).
// For each k the block functions are stored as (re, im) pairs: a 1x1 block
// holds phi(a) in re; a 2x2 block pair holds Re/Im of phi(a + i w).
struct Orthogonal {
  DenseMatrix q;
  DenseMatrix qt_b;                 // Q^T B
  std::vector<Index> block_start;   // first row of each diagonal block
  std::vector<Index> block_size;    // 1 or 2
  DenseMatrix re;                   // (#blocks) x m
  DenseMatrix im;                   // (#blocks) x m
  bool scalar_noise = false;        // B = c I
  double noise_scale = 0.0;         // c
};

// Diagonalizable L = V D V^{-1}.
struct Eigenbasis {
  ComplexMatrix v;
  ComplexMatrix w;   // V^{-1} B
  ComplexMatrix g;   // n x m table phi_cos_k(d_i)
};

struct Sylvester {
  std::shared_ptr<const SylvesterSolver> solver;
  DenseMatrix cos_tc;  // cos(t lambda_k), length m
  DenseMatrix sin_tc;
};

}  // namespace plan_cache

/// Sample-independent precomputation for one (problem, m, strategy).
class SamplerPlan {
 public:
  Strategy strategy() const { return strategy_; }
  const SdeProblem& problem() const { return problem_; }
  Index terms() const { return m_; }
  const DenseMatrix& exp_tl() const { return exp_tl_; }
  /// e^{tL} x0, the mean of every realization.
  const Vector& deterministic() const { return mean_; }
  /// True when the diagonalized plan uses an orthogonal eigenbasis (normal L).
  bool orthogonal_route() const { return std::holds_alternative<plan_cache::Orthogonal>(cache_); }
  /// Non-fatal notes from preparation (e.g. a strategy fallback).
  const std::vector<std::string>& warnings() const { return warnings_; }
  /// True when sample_normal_fastpath() is available.
  bool supports_fastpath() const {
    const auto* o = std::get_if<plan_cache::Orthogonal>(&cache_);
    return o != nullptr && o->scalar_noise;
  }

  friend SamplerPlan prepare(const SdeProblem& problem, Index m, Strategy strategy);
  friend Vector sample(const SamplerPlan& plan, const GaussianDraw& draw);
  friend Vector sample_normal_fastpath(const SamplerPlan& plan, const GaussianDraw& draw);
  friend Vector solve_sylvester_route(const SamplerPlan& plan, const GaussianDraw& draw);

 private:
  Strategy strategy_ = Strategy::PhiSeries;
  SdeProblem problem_;
  Index m_ = 0;
  DenseMatrix exp_tl_;
  Vector mean_;
  std::vector<double> freqs_;
  std::vector<std::string> warnings_;
  std::variant<std::monostate, plan_cache::PhiSeries, plan_cache::Orthogonal, plan_cache::Eigenbasis,
               plan_cache::Sylvester>
      cache_;
};

namespace detail {

inline std::optional<double> scalar_identity_factor(const DenseMatrix& b) {
  if (b.rows() != b.cols() || b.rows() == 0) return std::nullopt;
  const double c = b(0, 0);
  const DenseMatrix diff = b - c * DenseMatrix::Identity(b.rows(), b.cols());
  if (diff.cwiseAbs().maxCoeff() != 0.0) return std::nullopt;
  return c;
}

inline plan_cache::Orthogonal build_orthogonal(const SdeProblem& p, const std::vector<double>& freqs) {
  plan_cache::Orthogonal o;
  const Index n = p.dim();
  const Index m = static_cast<Index>(freqs.size());
  const double t = p.t_end;
  std::vector<Complex> block_values;  // eigenvalue with nonnegative imag part per block
  if (is_symmetric(p.l)) {
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es(p.l);
    if (es.info() != Eigen::Success) throw NumericalError("prepare: symmetric eigensolver failed");
    o.q = es.eigenvectors();
    for (Index i = 0; i < n; ++i) {
      o.block_start.push_back(i);
      o.block_size.push_back(1);
      block_values.emplace_back(es.eigenvalues()(i), 0.0);
    }
  } else {
    const SchurForm sf = real_schur(p.l);
    o.q = sf.q;
    const DenseMatrix& tm = sf.tmat;
    for (Index i = 0; i < n;) {
      if (i + 1 < n && tm(i + 1, i) != 0.0) {
        // Normal 2x2 block [[a, w], [-w, a]] represents a + i w under J <-> i.
        const double a = 0.5 * (tm(i, i) + tm(i + 1, i + 1));
        const double w = 0.5 * (tm(i, i + 1) - tm(i + 1, i));
        o.block_start.push_back(i);
        o.block_size.push_back(2);
        block_values.emplace_back(a, w);
        i += 2;
      } else {
        o.block_start.push_back(i);
        o.block_size.push_back(1);
        block_values.emplace_back(tm(i, i), 0.0);
        ++i;
      }
    }
  }
  const auto blocks = static_cast<Index>(block_values.size());
  o.re.resize(blocks, m);
  o.im.resize(blocks, m);
  for (Index k = 0; k < m; ++k) {
    const PhiSpec spec{freqs[static_cast<std::size_t>(k)], t};
    for (Index j = 0; j < blocks; ++j) {
      const Complex v = phi_cos_scalar(spec, block_values[static_cast<std::size_t>(j)]);
      o.re(j, k) = v.real();
      o.im(j, k) = v.imag();
    }
  }
  o.qt_b = o.q.transpose() * p.b;
  if (auto c = scalar_identity_factor(p.b)) {
    o.scalar_noise = true;
    o.noise_scale = *c;
  }
  return o;
}

// y = sum_k phi_k(T) r_k for the block-diagonal T, with r = columns of `rot`.
inline Vector apply_orthogonal_blocks(const plan_cache::Orthogonal& o, const DenseMatrix& rot, Index m) {
  const Index n = rot.rows();
  Vector y = Vector::Zero(n);
  const auto blocks = static_cast<Index>(o.block_start.size());
  for (Index j = 0; j < blocks; ++j) {
    const Index s = o.block_start[static_cast<std::size_t>(j)];
    if (o.block_size[static_cast<std::size_t>(j)] == 1) {
      y(s) = o.re.row(j).head(m).dot(rot.row(s).head(m));
    } else {
      // [[re, im], [-im, re]] acting on (r_s, r_{s+1}).
      const auto re = o.re.row(j).head(m);
      const auto im = o.im.row(j).head(m);
      const auto r0 = rot.row(s).head(m);
      const auto r1 = rot.row(s + 1).head(m);
      y(s) = re.dot(r0) + im.dot(r1);
      y(s + 1) = -im.dot(r0) + re.dot(r1);
    }
  }
  return y;
}

inline plan_cache::PhiSeries build_phi_series(const SdeProblem& p, const std::vector<double>& freqs,
                                              const DenseMatrix& exp_tl, double amp) {
  const auto m = static_cast<Index>(freqs.size());
  const Index q = p.noise_dim();
  plan_cache::PhiSeries c;
  c.stacked.resize(p.dim(), m * q);
  for (Index k = 0; k < m; ++k) {
    const PhiMatrices phi = phi_matrices(PhiSpec{freqs[static_cast<std::size_t>(k)], p.t_end}, p.l, exp_tl);
    c.stacked.middleCols(k * q, q).noalias() = amp * phi.cos * p.b;
  }
  return c;
}

inline void require_draw(const SamplerPlan& plan, const GaussianDraw& draw) {
  const Index p = plan.problem().noise_dim();
  if (draw.n != p || draw.z.rows() != p) {
    std::ostringstream os;
    os << "sample: draw dimension " << draw.n << " does not match noise dimension " << p;
    throw DimensionError(os.str());
  }
  if (draw.m < plan.terms() || draw.z.cols() < plan.terms()) {
    std::ostringstream os;
    os << "sample: draw has " << draw.m << " terms, plan needs " << plan.terms();
    throw DimensionError(os.str());
  }
}

}  // namespace detail

/// Does all sample-independent work for drawing X_{t_end}^m.
inline SamplerPlan prepare(const SdeProblem& problem, Index m, Strategy strategy) {
  problem.validate();
  if (m < 0) throw ValidationError("prepare: m must be >= 0");
  SamplerPlan plan;
  plan.strategy_ = strategy;
  plan.problem_ = problem;
  plan.m_ = m;
  const Index n = problem.dim();
  const Index p = problem.noise_dim();
  const double t = problem.t_end;
  plan.exp_tl_ = expm(problem.l, t);
  plan.mean_ = plan.exp_tl_ * problem.x0;
  if (m > 0) plan.freqs_ = kl_frequencies(problem.basis, m);
  const double amp = problem.basis.amplitude();

  switch (strategy) {
    case Strategy::PhiSeries:
      plan.cache_ = detail::build_phi_series(problem, plan.freqs_, plan.exp_tl_, amp);
      break;
    case Strategy::Diagonalized: {
      if (is_normal(problem.l)) {
        plan.cache_ = detail::build_orthogonal(problem, plan.freqs_);
        break;
      }
      Eigen::EigenSolver<DenseMatrix> es(problem.l, true);
      if (es.info() != Eigen::Success) throw NumericalError("prepare: eigensolver failed");
      plan_cache::Eigenbasis c;
      c.v = es.eigenvectors();
      Eigen::JacobiSVD<ComplexMatrix> svd(c.v);
      const auto& sv = svd.singularValues();
      const double cond = sv(n - 1) > 0.0 ? sv(0) / sv(n - 1) : std::numeric_limits<double>::infinity();
      if (!(cond < kMaxEigenvectorCondition)) {
        std::ostringstream os;
        os << "prepare: L is not safely diagonalizable (eigenvector condition " << cond
           << "); use the phi_series strategy";
        throw StrategyError(os.str());
      }
      c.w = c.v.partialPivLu().solve(problem.b.cast<Complex>());
      const ComplexVector d = es.eigenvalues();
      c.g.resize(n, m);
      for (Index k = 0; k < m; ++k) {
        const PhiSpec spec{plan.freqs_[static_cast<std::size_t>(k)], t};
        for (Index i = 0; i < n; ++i) c.g(i, k) = phi_cos_scalar(spec, d(i));
      }
      plan.cache_ = std::move(c);
      break;
    }
    case Strategy::AugmentedExp:
      plan.cache_ = std::monostate{};
      break;
    case Strategy::Sylvester: {
      plan_cache::Sylvester c;
      if (m > 0) {
        try {
          c.solver = std::make_shared<const SylvesterSolver>(problem.l, detail::skew_frequency_block(plan.freqs_));
        } catch (const SingularityError& e) {
          plan.warnings_.push_back(std::string("sylvester route unavailable, using phi_series: ") + e.what());
          plan.strategy_ = Strategy::PhiSeries;
          plan.cache_ = detail::build_phi_series(problem, plan.freqs_, plan.exp_tl_, amp);
          break;
        }
      }
      c.cos_tc.resize(1, m);
      c.sin_tc.resize(1, m);
      for (Index k = 0; k < m; ++k) {
        c.cos_tc(0, k) = std::cos(t * plan.freqs_[static_cast<std::size_t>(k)]);
        c.sin_tc(0, k) = std::sin(t * plan.freqs_[static_cast<std::size_t>(k)]);
      }
      plan.cache_ = std::move(c);
      break;
    }
  }
  return plan;
}

/// Sylvester route: X solves L X - X C = e^{tL} G - G e^{tC} with
/// G = [amp B Z, 0] (cosine slot) and C the skew frequency block;
/// X_t^m = e^{tL} x0 + X [1; 0].
inline Vector solve_sylvester_route(const SamplerPlan& plan, const GaussianDraw& draw) {
  const auto* c = std::get_if<plan_cache::Sylvester>(&plan.cache_);
  if (c == nullptr) throw StrategyError("solve_sylvester_route: plan was not prepared with the sylvester strategy");
  detail::require_draw(plan, draw);
  const Index m = plan.m_;
  const Index n = plan.problem_.dim();
  if (m == 0) return plan.mean_;
  const DenseMatrix bn = plan.problem_.basis.amplitude() * (plan.problem_.b * draw.z.leftCols(m));
  // e^{tC} = [[cos, -sin], [sin, cos]] with diagonal blocks, so
  // G e^{tC} = [bn cos, -bn sin] column-wise.
  DenseMatrix rhs(n, 2 * m);
  rhs.leftCols(m).noalias() = plan.exp_tl_ * bn;
  rhs.leftCols(m) -= (bn.array().rowwise() * c->cos_tc.row(0).array()).matrix();
  rhs.rightCols(m) = (bn.array().rowwise() * c->sin_tc.row(0).array()).matrix();
  const DenseMatrix x = c->solver->solve(rhs);
  return plan.mean_ + x.leftCols(m).rowwise().sum();
}

/// One realization of X_{t_end}^m from the first m columns of the draw.
inline Vector sample(const SamplerPlan& plan, const GaussianDraw& draw) {
  detail::require_draw(plan, draw);
  const Index m = plan.m_;
  const Index n = plan.problem_.dim();
  const Index p = plan.problem_.noise_dim();
  if (m == 0) return plan.mean_;
  const double amp = plan.problem_.basis.amplitude();

  switch (plan.strategy_) {
    case Strategy::PhiSeries: {
      const auto& c = std::get<plan_cache::PhiSeries>(plan.cache_);
      const Eigen::Map<const Vector> zvec(draw.z.data(), m * p);
      return plan.mean_ + c.stacked * zvec;
    }
    case Strategy::Diagonalized: {
      if (const auto* o = std::get_if<plan_cache::Orthogonal>(&plan.cache_)) {
        const DenseMatrix rot = o->qt_b * draw.z.leftCols(m);
        return plan.mean_ + amp * (o->q * detail::apply_orthogonal_blocks(*o, rot, m));
      }
      const auto& c = std::get<plan_cache::Eigenbasis>(plan.cache_);
      const ComplexMatrix y = c.w * draw.z.leftCols(m).cast<Complex>();
      const ComplexVector s = c.g.cwiseProduct(y).rowwise().sum();
      return plan.mean_ + amp * (c.v * s).real();
    }
    case Strategy::AugmentedExp: {
      FourierForcing f;
      // d/ds sin(lambda_k s) / lambda_k = cos(lambda_k s): the draw is a
      // pure cosine forcing.
      f.a = amp * (plan.problem_.b * draw.z.leftCols(m));
      f.b = DenseMatrix::Zero(n, m);
      f.c = plan.freqs_;
      return solve_augmented_exp(plan.problem_.l, f, plan.problem_.x0, plan.problem_.t_end);
    }
    case Strategy::Sylvester:
      return solve_sylvester_route(plan, draw);
  }
  throw StrategyError("sample: unknown strategy");
}

/// Orthogonal-eigenbasis sampler for normal L and B = c I: uses the draw
/// directly in the eigenbasis, skipping the rotation Q^T z_k (rotated i.i.d.
/// Gaussians are again i.i.d.). Same distribution as sample(), different paths.
inline Vector sample_normal_fastpath(const SamplerPlan& plan, const GaussianDraw& draw) {
  const auto* o = std::get_if<plan_cache::Orthogonal>(&plan.cache_);
  if (o == nullptr || !o->scalar_noise) {
    throw StrategyError("sample_normal_fastpath: needs a diagonalized plan with normal L and B = c I");
  }
  detail::require_draw(plan, draw);
  const Index m = plan.m_;
  if (m == 0) return plan.mean_;
  const double amp = plan.problem_.basis.amplitude();
  return plan.mean_ + (amp * o->noise_scale) * (o->q * detail::apply_orthogonal_blocks(*o, draw.z, m));
}

}  // namespace klsde
