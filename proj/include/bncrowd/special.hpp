// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bncrowd/error.hpp"

namespace bncrowd {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Per-chain random engine. Stream `k` of seed `s` is the Mersenne Twister
/// seeded through std::seed_seq with the four 32-bit halves of (s, k), so
/// replicates and cells derive independent, reproducible streams from one
/// user-visible seed.
using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

inline double log_gamma(double x) {
  if (!(x > 0.0)) throw DomainError("log_gamma: argument must be positive");
#if defined(__GLIBC__)
  int sign = 0;
  return ::lgamma_r(x, &sign);
#else
  return std::lgamma(x);
#endif
}

inline double log_sum_exp(std::span<const double> w) {
  double mx = kNegInf;
  for (double v : w) mx = std::max(mx, v);
  if (mx == kNegInf) return kNegInf;
  double s = 0.0;
  for (double v : w) s += std::exp(v - mx);
  return mx + std::log(s);
}

/// log c(n, k), unsigned Stirling numbers of the first kind, via
/// c(n+1, k) = n c(n, k) + c(n, k-1) carried out in log space.
class LogStirlingTable {
 public:
  explicit LogStirlingTable(int max_n) : max_n_(max_n) {
    if (max_n < 0) throw DomainError("LogStirlingTable: max_n must be non-negative");
    values_.resize(static_cast<std::size_t>(max_n + 1) * (max_n + 2) / 2, kNegInf);
    at(0, 0) = 0.0;
    for (int n = 0; n < max_n; ++n) {
      for (int k = 1; k <= n + 1; ++k) {
        const double grow = (k <= n && n > 0) ? std::log(static_cast<double>(n)) + at(n, k) : kNegInf;
        const double join = at(n, k - 1);
        const double hi = std::max(grow, join);
        at(n + 1, k) = hi == kNegInf ? kNegInf
                                     : hi + std::log(std::exp(grow - hi) + std::exp(join - hi));
      }
    }
  }

  int max_n() const noexcept { return max_n_; }

  double operator()(int n, int k) const {
    if (n < 0 || n > max_n_) throw DomainError("LogStirlingTable: n out of range");
    if (k < 0 || k > n) return kNegInf;
    return values_[index(n, k)];
  }

  /// P(K = k) for the number of tables of n customers under concentration theta.
  double log_antoniak_pmf(int n, int k, double theta) const {
    if (!(theta > 0.0)) throw DomainError("antoniak pmf: theta must be positive");
    if (n == 0) return k == 0 ? 0.0 : kNegInf;
    return (*this)(n, k) + k * std::log(theta) + log_gamma(theta) - log_gamma(theta + n);
  }

 private:
  static std::size_t index(int n, int k) {
    return static_cast<std::size_t>(n) * (n + 1) / 2 + k;
  }
  double& at(int n, int k) { return values_[index(n, k)]; }

  int max_n_;
  std::vector<double> values_;
};

/// Uniform on the open interval (0, 1) with 53 random bits.
template <class URBG>
double sample_uniform(URBG& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

/// log of a Gamma(shape, 1) variate; stays finite for shapes far below 1
/// where the variate itself underflows.
template <class URBG>
double sample_log_gamma(double shape, URBG& rng) {
  if (!(shape > 0.0) || !std::isfinite(shape)) {
    throw DomainError("gamma: shape must be positive and finite");
  }
  if (shape >= 1.0) {
    std::gamma_distribution<double> g(shape, 1.0);
    double x = g(rng);
    while (!(x > 0.0)) x = g(rng);
    return std::log(x);
  }
  // Gamma(a) = Gamma(a + 1) * U^(1/a)
  std::gamma_distribution<double> g(shape + 1.0, 1.0);
  return std::log(g(rng)) + std::log(sample_uniform(rng)) / shape;
}

/// Gamma with shape/rate parameterisation (mean shape / rate).
template <class URBG>
double sample_gamma(double shape, double rate, URBG& rng) {
  if (!(rate > 0.0) || !std::isfinite(rate)) throw DomainError("gamma: rate must be positive");
  const double x = std::exp(sample_log_gamma(shape, rng)) / rate;
  return std::max(x, std::numeric_limits<double>::min());
}

template <class URBG>
double sample_beta(double a, double b, URBG& rng) {
  if (!(a > 0.0) || !(b > 0.0)) throw DomainError("beta: parameters must be positive");
  const double la = sample_log_gamma(a, rng);
  const double lb = sample_log_gamma(b, rng);
  const double hi = std::max(la, lb);
  const double x = std::exp(la - hi) / (std::exp(la - hi) + std::exp(lb - hi));
  constexpr double eps = std::numeric_limits<double>::epsilon();
  return std::clamp(x, std::numeric_limits<double>::min(), 1.0 - eps / 2);
}

template <class URBG>
Eigen::VectorXd sample_dirichlet(const Eigen::Ref<const Eigen::VectorXd>& concentration,
                                 URBG& rng) {
  const Eigen::Index k = concentration.size();
  if (k == 0) throw DomainError("dirichlet: empty concentration");
  Eigen::VectorXd logs(k);
  double hi = kNegInf;
  for (Eigen::Index j = 0; j < k; ++j) {
    if (!(concentration[j] > 0.0)) throw DomainError("dirichlet: concentration must be positive");
    logs[j] = sample_log_gamma(concentration[j], rng);
    hi = std::max(hi, logs[j]);
  }
  Eigen::VectorXd out = (logs.array() - hi).exp();
  out /= out.sum();
  return out;
}

/// Number of occupied tables after seating n customers by a CRP with
/// concentration theta: a sum of independent Bernoulli(theta / (theta + i - 1)).
template <class URBG>
int sample_antoniak(int n, double theta, URBG& rng) {
  if (!(theta > 0.0)) throw DomainError("antoniak: theta must be positive");
  if (n < 0) throw DomainError("antoniak: n must be non-negative");
  int k = 0;
  for (int i = 0; i < n; ++i) {
    if (sample_uniform(rng) * (theta + i) < theta) ++k;
  }
  return k;
}

/// Draws j with probability exp(w_j - logsumexp(w)).
template <class URBG>
std::size_t sample_categorical_log(std::span<const double> log_weights, URBG& rng) {
  double mx = kNegInf;
  for (double v : log_weights) {
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity()) {
      throw DegenerateDistributionError("categorical: weight is NaN or +inf");
    }
    mx = std::max(mx, v);
  }
  if (mx == kNegInf) throw DegenerateDistributionError("categorical: all weights are -inf");
  double total = 0.0;
  for (double v : log_weights) total += std::exp(v - mx);
  double u = sample_uniform(rng) * total;
  std::size_t last = 0;
  for (std::size_t j = 0; j < log_weights.size(); ++j) {
    const double p = std::exp(log_weights[j] - mx);
    if (p == 0.0) continue;
    last = j;
    if (u < p) return j;
    u -= p;
  }
  return last;
}

}  // namespace bncrowd
