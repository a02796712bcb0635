#pragma once

// Karhunen-Loeve bases of the driving noise and reproducible Gaussian draws.

#include <boost/random/normal_distribution.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "klsde/errors.hpp"
#include "klsde/matkit.hpp"

namespace klsde {

/// Philox4x64-10 counter-based block function (Salmon et al., SC'11).
using PhiloxBlock = std::array<std::uint64_t, 4>;
using PhiloxKey = std::array<std::uint64_t, 2>;

inline PhiloxBlock philox4x64(PhiloxBlock ctr, PhiloxKey key) {
  constexpr std::uint64_t kMul0 = 0xD2E7470EE14C6C93ULL;
  constexpr std::uint64_t kMul1 = 0xCA5A826395121157ULL;
  constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ULL;
  constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73BULL;
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    const unsigned __int128 p0 = static_cast<unsigned __int128>(kMul0) * ctr[0];
    const unsigned __int128 p1 = static_cast<unsigned __int128>(kMul1) * ctr[2];
    const auto hi0 = static_cast<std::uint64_t>(p0 >> 64);
    const auto lo0 = static_cast<std::uint64_t>(p0);
    const auto hi1 = static_cast<std::uint64_t>(p1 >> 64);
    const auto lo1 = static_cast<std::uint64_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

/// Uniform 64-bit engine over one Philox stream keyed by (seed, stream).
/// Block b of the stream is philox4x64({b, 0, 0, 0}, {seed, stream}), so any
/// (seed, stream) pair is reproducible independently of every other.
class PhiloxEngine {
 public:
  using result_type = std::uint64_t;

  PhiloxEngine(std::uint64_t seed, std::uint64_t stream) : key_{seed, stream} {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (pos_ == 4) {
      buffer_ = philox4x64({block_, 0, 0, 0}, key_);
      ++block_;
      pos_ = 0;
    }
    return buffer_[pos_++];
  }

 private:
  PhiloxKey key_;
  std::uint64_t block_ = 0;
  PhiloxBlock buffer_{};
  int pos_ = 4;
};

/// Standard normal variates (ziggurat) from one Philox stream.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t stream) : engine_(seed, stream) {}

  double operator()() { return dist_(engine_); }

  template <typename Derived>
  void fill(Eigen::DenseBase<Derived>& out) {
    for (Index j = 0; j < out.cols(); ++j)
      for (Index i = 0; i < out.rows(); ++i) out(i, j) = dist_(engine_);
  }

 private:
  PhiloxEngine engine_;
  boost::random::normal_distribution<double> dist_;
};

/// m independent standard normal vectors z_1..z_m of dimension n, stored as
/// the columns of z (n x m).
struct GaussianDraw {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  Index m = 0;
  Index n = 0;
  DenseMatrix z;
};

/// Deterministic draw for sample index `stream`. Entries are produced column
/// by column, so a draw with fewer terms is a prefix of one with more.
inline GaussianDraw draw_gaussians(std::uint64_t seed, Index m, Index n, std::uint64_t stream = 0) {
  if (m < 0 || n < 1) throw ValidationError("draw_gaussians: need m >= 0 and n >= 1");
  GaussianDraw d{seed, stream, m, n, DenseMatrix(n, m)};
  NormalStream ns(seed, stream);
  ns.fill(d.z);
  return d;
}

enum class KlKind { Wiener, BrownianBridge };

inline std::string_view to_string(KlKind k) {
  return k == KlKind::Wiener ? "wiener" : "bridge";
}

/// Sine basis sqrt(2/T) sin(lambda_k t) / lambda_k of the KL expansion on [0, T].
/// Wiener: lambda_k = (k - 1/2) pi / T. Bridge: lambda_k = k pi / T.
struct KlBasis {
  KlKind kind = KlKind::Wiener;
  double horizon = 1.0;

  void validate() const {
    if (!(std::isfinite(horizon) && horizon > 0.0)) throw ValidationError("KlBasis: horizon must be > 0");
  }

  /// lambda_k for k >= 1.
  double frequency(Index k) const {
    const double kk = static_cast<double>(k);
    const double shift = kind == KlKind::Wiener ? 0.5 : 0.0;
    return (kk - shift) * std::numbers::pi / horizon;
  }

  double amplitude() const { return std::sqrt(2.0 / horizon); }
};

inline std::vector<double> kl_frequencies(const KlBasis& basis, Index m) {
  basis.validate();
  if (m < 1) throw ValidationError("kl_frequencies: m must be >= 1");
  std::vector<double> out(static_cast<std::size_t>(m));
  for (Index k = 1; k <= m; ++k) out[static_cast<std::size_t>(k - 1)] = basis.frequency(k);
  return out;
}

/// Truncated expansion sqrt(2/T) sum_k z_k sin(lambda_k t) / lambda_k.
inline Vector kl_path(const KlBasis& basis, const GaussianDraw& draw, double t) {
  basis.validate();
  if (!(t >= 0.0 && t <= basis.horizon)) throw DomainError("kl_path: t outside [0, horizon]");
  Vector w = Vector::Zero(draw.n);
  for (Index k = 1; k <= draw.m; ++k) {
    const double lam = basis.frequency(k);
    w.noalias() += (std::sin(lam * t) / lam) * draw.z.col(k - 1);
  }
  return basis.amplitude() * w;
}

}  // namespace klsde
