#pragma once

// Reproducible random streams and a deterministic replication fan-out.
//
// Each replication owns a xoshiro256++ generator whose state is derived by
// splitmix64 from the pair (seed, replication index), so results depend only
// on that pair and never on thread scheduling.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>
#include <vector>

#include <boost/random/binomial_distribution.hpp>
#include <boost/random/exponential_distribution.hpp>
#include <boost/random/gamma_distribution.hpp>
#include <boost/random/negative_binomial_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>
#include <boost/random/uniform_01.hpp>

namespace sbmlab {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// xoshiro256++ (Blackman and Vigna); satisfies UniformRandomBitGenerator.
class Xoshiro256pp {
 public:
  using result_type = std::uint64_t;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  explicit Xoshiro256pp(std::uint64_t seed = 0) {
    for (auto& w : s_) w = splitmix64(seed);
  }

  result_type operator()() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t s_[4];
};

/// Random stream for one replication, with the distributions the simulators need.
class Stream {
 public:
  Stream(std::uint64_t seed, std::uint64_t rep) : gen_(key(seed, rep)) {}

  static std::uint64_t key(std::uint64_t seed, std::uint64_t rep) {
    std::uint64_t s = seed;
    const std::uint64_t a = splitmix64(s);
    std::uint64_t t = a ^ (rep * 0xD1B54A32D192ED03ULL);
    return splitmix64(t);
  }

  Xoshiro256pp& engine() { return gen_; }

  /// Uniform on (0, 1): never returns 0.
  double uniform() { return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53; }
  double normal() { return normal_(gen_); }
  double exponential(double rate = 1.0) { return exp_(gen_) / rate; }
  double gamma(double shape, double scale) {
    return boost::random::gamma_distribution<double>(shape, scale)(gen_);
  }
  std::int64_t poisson(double mean) {
    if (mean <= 0.0) return 0;
    return boost::random::poisson_distribution<std::int64_t, double>(mean)(gen_);
  }
  std::int64_t binomial(std::int64_t n, double p) {
    if (n <= 0 || p <= 0.0) return 0;
    if (p >= 1.0) return n;
    return boost::random::binomial_distribution<std::int64_t, double>(n, p)(gen_);
  }
  /// Failures before the k-th success, success probability p.
  std::int64_t negative_binomial(std::int64_t k, double p) {
    if (k <= 0) return 0;
    if (p >= 1.0) return 0;
    return boost::random::negative_binomial_distribution<std::int64_t, double>(k, p)(gen_);
  }

 private:
  Xoshiro256pp gen_;
  boost::random::normal_distribution<double> normal_;
  boost::random::exponential_distribution<double> exp_;
};

inline unsigned default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

/// Runs body(i) for i in [0, n) over a pool of threads. Callers write results
/// into slot i, so the outcome does not depend on scheduling. The first
/// exception thrown by any body is rethrown after all workers stop.
template <class Body>
void parallel_for(std::size_t n, Body&& body, unsigned threads = 0) {
  if (threads == 0) threads = default_threads();
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace sbmlab
