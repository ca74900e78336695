#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace spinlab {

using cplx = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kE = std::numbers::e;
/// zeta(2) = pi^2 / 6.
inline constexpr double kZeta2 = kPi * kPi / 6.0;

/// Shared default tolerances (overridable per call where it matters).
inline constexpr double kTightTol = 1e-12;
inline constexpr double kStationarityTol = 1e-10;

/// 64-bit FNV-1a hash; used to fingerprint canonicalized configs in outputs.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

/// Shortest round-trippable decimal form of a double (%.17g), locale-free.
inline std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return std::string(buf);
}

inline std::string format_hex64(std::uint64_t h) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

/// Deterministic RNG stream: a fixed-seed mt19937_64 whose seed is derived
/// from a user seed and a stream label, so independent components never
/// share or race on a generator.
inline std::mt19937_64 make_rng(std::uint64_t seed, const std::string& stream) {
  std::uint64_t h = fnv1a(stream);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  return std::mt19937_64(seq);
}

/// Runs fn(i) for i in [0, n) on up to `threads` OS threads. Each index is
/// independent and writes only to its own outputs, so the result does not
/// depend on the thread count.
inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t t = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  std::vector<std::thread> pool;
  pool.reserve(t);
  for (std::size_t w = 0; w < t; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += t) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

/// Ordinary least squares fit y ~ a + b x with coefficient of determination.
struct LineFit {
  double intercept = 0.0;
  double slope = 0.0;
  double r_squared = 0.0;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  LineFit f;
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) return f;
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / static_cast<double>(n), my = sy / static_cast<double>(n);
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) return f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss_res = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    ss_res += r * r;
  }
  f.r_squared = (syy > 0.0) ? 1.0 - ss_res / syy : 1.0;
  return f;
}

/// Uniform-grid trapezoid weights: dt * (1/2, 1, ..., 1, 1/2).
inline std::vector<double> trapezoid_weights(std::size_t n_points, double dt) {
  std::vector<double> w(n_points, dt);
  if (n_points >= 1) w.front() = 0.5 * dt;
  if (n_points >= 2) w.back() = 0.5 * dt;
  if (n_points == 1) w.front() = 0.0;
  return w;
}

}  // namespace spinlab
