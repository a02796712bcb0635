#pragma once

// Monte-Carlo reduction over sample indices on a small thread pool. Samples
// are grouped into fixed chunks and chunk results are combined in index
// order, so the result does not depend on the number of threads.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "klsde/errors.hpp"
#include "klsde/matkit.hpp"

namespace klsde {

inline constexpr Index kMonteCarloChunk = 4096;

inline unsigned default_threads() {
  const unsigned h = std::thread::hardware_concurrency();
  return h == 0 ? 1u : h;
}

/// Calls body(chunk_index, begin, end) for every chunk of [0, count).
template <typename Body>
void parallel_chunks(Index count, Index chunk, unsigned threads, Body&& body) {
  if (count <= 0) return;
  const Index chunks = (count + chunk - 1) / chunk;
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(chunks)));
  std::atomic<Index> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (true) {
      const Index c = next.fetch_add(1);
      if (c >= chunks) return;
      try {
        body(c, c * chunk, std::min(count, (c + 1) * chunk));
      } catch (...) {
        const std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(chunks);
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);
}

/// Componentwise mean and standard error of the mean.
struct MonteCarloEstimate {
  Vector mean;
  Vector std_error;  // NaN when samples == 1
  Index samples = 0;
};

/// f(sample_index) returns a vector of fixed length dim.
template <typename F>
MonteCarloEstimate monte_carlo(Index samples, Index dim, F&& f, unsigned threads = default_threads()) {
  if (samples < 1) throw ValidationError("monte_carlo: need at least one sample");
  const Index chunks = (samples + kMonteCarloChunk - 1) / kMonteCarloChunk;
  // Per-chunk mean and sum of squared deviations (Welford), merged in order.
  std::vector<Vector> means(static_cast<std::size_t>(chunks), Vector::Zero(dim));
  std::vector<Vector> m2s(static_cast<std::size_t>(chunks), Vector::Zero(dim));
  parallel_chunks(samples, kMonteCarloChunk, threads, [&](Index c, Index begin, Index end) {
    Vector& mean = means[static_cast<std::size_t>(c)];
    Vector& m2 = m2s[static_cast<std::size_t>(c)];
    for (Index i = begin; i < end; ++i) {
      const Vector x = f(static_cast<std::uint64_t>(i));
      const double cnt = static_cast<double>(i - begin + 1);
      const Vector delta = x - mean;
      mean += delta / cnt;
      m2 += delta.cwiseProduct(x - mean);
    }
  });
  Vector mean = Vector::Zero(dim);
  Vector m2 = Vector::Zero(dim);
  double n_acc = 0.0;
  for (Index c = 0; c < chunks; ++c) {
    const double nb = static_cast<double>(std::min(samples, (c + 1) * kMonteCarloChunk) - c * kMonteCarloChunk);
    const Vector delta = means[static_cast<std::size_t>(c)] - mean;
    const double tot = n_acc + nb;
    mean += delta * (nb / tot);
    m2 += m2s[static_cast<std::size_t>(c)] + delta.cwiseAbs2() * (n_acc * nb / tot);
    n_acc = tot;
  }
  MonteCarloEstimate out;
  out.samples = samples;
  out.mean = mean;
  if (samples > 1) {
    const double ns = static_cast<double>(samples);
    out.std_error = (m2 / (ns - 1.0) / ns).cwiseSqrt();
  } else {
    out.std_error = Vector::Constant(dim, std::nan(""));
  }
  return out;
}

/// Scalar version of monte_carlo.
struct ScalarEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  Index samples = 0;
};

template <typename F>
ScalarEstimate monte_carlo_scalar(Index samples, F&& f, unsigned threads = default_threads()) {
  const MonteCarloEstimate e = monte_carlo(
      samples, 1, [&](std::uint64_t i) { return Vector::Constant(1, f(i)); }, threads);
  return {e.mean(0), e.std_error(0), e.samples};
}

}  // namespace klsde
