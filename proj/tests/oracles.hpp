// Apache License, Version 2.0, refer to LICENSE.txt

// Reference computations for the tests. Nothing here calls into the library
// numerics; everything is recomputed from first principles.

#pragma once

#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/multiprecision/cpp_int.hpp>
#include <Eigen/Dense>

#include "bncrowd/core.hpp"

namespace oracle {

using bncrowd::Category;
using bncrowd::GroundTruth;
using bncrowd::Hyperparameters;
using bncrowd::LabelMatrix;

/// Unsigned Stirling numbers of the first kind, exact, rows 0..max_n.
inline std::vector<std::vector<boost::multiprecision::cpp_int>> stirling_table(int max_n) {
  using boost::multiprecision::cpp_int;
  std::vector<std::vector<cpp_int>> s(max_n + 1, std::vector<cpp_int>(max_n + 1, 0));
  s[0][0] = 1;
  for (int n = 0; n < max_n; ++n) {
    for (int k = 1; k <= n + 1; ++k) s[n + 1][k] = n * s[n][k] + s[n][k - 1];
  }
  return s;
}

inline double log_exact(const boost::multiprecision::cpp_int& v) {
  // Scale down before converting so huge values keep full precision.
  boost::multiprecision::cpp_int x = v;
  int shift = 0;
  const auto bits = boost::multiprecision::msb(x);
  if (bits > 60) {
    shift = static_cast<int>(bits) - 60;
    x >>= shift;
  }
  return std::log(x.convert_to<double>()) + shift * std::log(2.0);
}

/// Antoniak pmf P(k | n, theta) = s(n,k) theta^k Gamma(theta)/Gamma(theta+n).
inline std::vector<double> antoniak_pmf(int n, double theta) {
  const auto s = stirling_table(n);
  std::vector<double> p(n + 1, 0.0);
  double rising = 1.0;
  for (int i = 0; i < n; ++i) rising *= theta + i;
  for (int k = 1; k <= n; ++k) {
    p[k] = std::exp(log_exact(s[n][k]) + k * std::log(theta) - std::log(rising));
  }
  if (n == 0) p[0] = 1.0;
  return p;
}

/// Pearson chi-squared goodness-of-fit p-value. Bins with expected count
/// below 5 are merged with their neighbour.
inline double chi_squared_pvalue(const std::vector<double>& observed,
                                 const std::vector<double>& probs) {
  const double total = std::accumulate(observed.begin(), observed.end(), 0.0);
  std::vector<double> obs, exp;
  double o = 0.0, e = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    o += observed[k];
    e += probs[k] * total;
    if (e >= 5.0) {
      obs.push_back(o);
      exp.push_back(e);
      o = e = 0.0;
    }
  }
  if (e > 0.0 || o > 0.0) {
    if (exp.empty()) return 1.0;
    obs.back() += o;
    exp.back() += e;
  }
  if (exp.size() < 2) return 1.0;
  double stat = 0.0;
  for (std::size_t k = 0; k < exp.size(); ++k) {
    stat += (obs[k] - exp[k]) * (obs[k] - exp[k]) / exp[k];
  }
  boost::math::chi_squared dist(static_cast<double>(exp.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

/// Standard error of the mean of a correlated series by batch means.
inline double batch_means_se(const std::vector<double>& x, std::size_t n_batches = 50) {
  const std::size_t size = x.size() / n_batches;
  std::vector<double> means(n_batches, 0.0);
  for (std::size_t b = 0; b < n_batches; ++b) {
    for (std::size_t k = 0; k < size; ++k) means[b] += x[b * size + k];
    means[b] /= static_cast<double>(size);
  }
  const double m = std::accumulate(means.begin(), means.end(), 0.0) / n_batches;
  double ss = 0.0;
  for (double v : means) ss += (v - m) * (v - m);
  return std::sqrt(ss / (n_batches - 1) / n_batches);
}

inline double mean(const std::vector<double>& x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

inline double iid_se(const std::vector<double>& x) {
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return std::sqrt(ss / (x.size() - 1) / x.size());
}

/// Dirichlet-multinomial evidence of a count vector (ordered sequence, no
/// multinomial coefficient), by numerical integration over the simplex.
/// Supports 2 or 3 categories.
inline double dm_evidence_quadrature(const std::vector<int>& n, const std::vector<double>& conc) {
  boost::math::quadrature::tanh_sinh<double> integrator;
  double log_norm = std::lgamma(std::accumulate(conc.begin(), conc.end(), 0.0));
  for (double a : conc) log_norm -= std::lgamma(a);
  std::vector<double> e(n.size());
  for (std::size_t c = 0; c < n.size(); ++c) e[c] = conc[c] + n[c] - 1.0;
  auto pw = [](double ex, double x) { return ex == 0.0 ? 0.0 : ex * std::log(x); };
  // The integrator passes the signed distance to the nearest endpoint as the
  // second argument; recover both x and 1 - x accurately from it.
  auto sides = [](double x, double d) {
    return std::pair<double, double>{d < 0 ? -d : x, d > 0 ? d : 1.0 - x};
  };
  if (n.size() == 2) {
    auto f = [&](double x0, double d) {
      const auto [x, xc] = sides(x0, d);
      return std::exp(log_norm + pw(e[0], x) + pw(e[1], xc));
    };
    return integrator.integrate(f, 0.0, 1.0);
  }
  // Three categories: psi = (x, (1 - x) v, (1 - x)(1 - v)), Jacobian 1 - x.
  auto outer = [&](double x0, double dx) {
    const auto [x, xc] = sides(x0, dx);
    auto inner = [&, x = x, xc = xc](double v0, double dv) {
      const auto [v, vc] = sides(v0, dv);
      return std::exp(log_norm + pw(e[0], x) + pw(e[1] + e[2] + 1.0, xc) + pw(e[1], v) +
                      pw(e[2], vc));
    };
    return integrator.integrate(inner, 0.0, 1.0);
  };
  return integrator.integrate(outer, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Direct joint probability of the clustered model.

/// log p(z, partition, Y | alpha, h) with cluster confusion matrices and
/// category proportions integrated out, written out term by term.
/// `rgs` assigns users to clusters 0..K-1.
inline double log_joint_cbcc(const LabelMatrix& labels, const GroundTruth& z,
                             const std::vector<int>& rgs, const Hyperparameters& h, double alpha) {
  const int C = labels.n_categories();
  const std::size_t N = labels.n_instances();
  const std::size_t L = labels.n_users();
  const int K = *std::max_element(rgs.begin(), rgs.end()) + 1;
  double v = 0.0;
  // Chinese restaurant process.
  std::vector<int> size(K, 0);
  for (int k : rgs) ++size[k];
  v += K * std::log(alpha) + std::lgamma(alpha) - std::lgamma(alpha + L);
  for (int s : size) v += std::lgamma(s);
  // Category proportions.
  std::vector<int> nt(C, 0);
  for (Category t : z) ++nt[t];
  v += std::lgamma(h.epsilon) - std::lgamma(h.epsilon + N);
  for (int t = 0; t < C; ++t) {
    v += std::lgamma(h.epsilon * h.mu[t] + nt[t]) - std::lgamma(h.epsilon * h.mu[t]);
  }
  // Cluster confusion rows.
  std::vector<int> n(K * C * C, 0);
  for (const auto& a : labels.entries()) ++n[(rgs[a.user] * C + z[a.instance]) * C + a.label];
  for (int k = 0; k < K; ++k) {
    for (int t = 0; t < C; ++t) {
      int tot = 0;
      for (int c = 0; c < C; ++c) {
        const int cnt = n[(k * C + t) * C + c];
        tot += cnt;
        v += std::lgamma(h.beta[t] * h.eta(t, c) + cnt) - std::lgamma(h.beta[t] * h.eta(t, c));
      }
      v += std::lgamma(h.beta[t]) - std::lgamma(h.beta[t] + tot);
    }
  }
  return v;
}

/// All set partitions of n users as restricted growth strings.
inline std::vector<std::vector<int>> set_partitions(int n) {
  std::vector<std::vector<int>> out;
  std::vector<int> a(n, 0);
  std::vector<int> mx(n, 0);
  // Iterative generation: increment the rightmost position that can grow.
  for (;;) {
    out.push_back(a);
    int i = n - 1;
    while (i > 0 && a[i] == mx[i - 1] + 1) --i;
    if (i <= 0) break;
    ++a[i];
    mx[i] = std::max(mx[i - 1], a[i]);
    for (int j = i + 1; j < n; ++j) {
      a[j] = 0;
      mx[j] = mx[i];
    }
  }
  return out;
}

/// Posterior over (z, canonical partition) keyed by (z, rgs); when
/// `fixed_rgs` is non-empty the partition is held at that value.
inline std::map<std::pair<GroundTruth, std::vector<int>>, double> posterior_cbcc(
    const LabelMatrix& labels, const Hyperparameters& h, double alpha,
    const std::vector<int>& fixed_rgs = {}) {
  const int C = labels.n_categories();
  const std::size_t N = labels.n_instances();
  const auto parts = fixed_rgs.empty() ? set_partitions(static_cast<int>(labels.n_users()))
                                       : std::vector<std::vector<int>>{fixed_rgs};
  std::size_t nz = 1;
  for (std::size_t i = 0; i < N; ++i) nz *= C;
  std::vector<std::pair<std::pair<GroundTruth, std::vector<int>>, double>> logs;
  double mx = -INFINITY;
  for (std::size_t zi = 0; zi < nz; ++zi) {
    GroundTruth z(N);
    std::size_t r = zi;
    for (std::size_t i = 0; i < N; ++i) {
      z[i] = static_cast<Category>(r % C);
      r /= C;
    }
    for (const auto& p : parts) {
      const double lp = log_joint_cbcc(labels, z, p, h, alpha);
      mx = std::max(mx, lp);
      logs.push_back({{z, p}, lp});
    }
  }
  double norm = 0.0;
  for (const auto& kv : logs) norm += std::exp(kv.second - mx);
  std::map<std::pair<GroundTruth, std::vector<int>>, double> out;
  for (const auto& kv : logs) out[kv.first] = std::exp(kv.second - mx) / norm;
  return out;
}

template <class K>
double total_variation(const std::map<K, double>& p, const std::map<K, double>& q) {
  double tv = 0.0;
  for (const auto& [k, v] : p) {
    auto it = q.find(k);
    tv += std::abs(v - (it == q.end() ? 0.0 : it->second));
  }
  for (const auto& [k, v] : q) {
    if (!p.count(k)) tv += std::abs(v);
  }
  return 0.5 * tv;
}

/// Canonical relabelling of an arbitrary assignment vector.
template <class Id>
std::vector<int> canonical(const std::vector<Id>& a) {
  std::map<Id, int> remap;
  std::vector<int> out(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    auto it = remap.try_emplace(a[k], static_cast<int>(remap.size())).first;
    out[k] = it->second;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Forward simulation of the clustered prior for two annotators.

struct CorrelationEstimate {
  double corr = 0.0;
  double se = 0.0;
};

/// Monte Carlo correlation of I(y = a) for one user and I(y' = b) for a second
/// user on the same instance with z = t, drawing the partition of the two
/// users from the CRP and each cluster's row from Dir(beta * eta).
/// The standard error comes from 100 independent batches.
inline CorrelationEstimate mc_prior_correlation(double alpha, double beta,
                                                const std::vector<double>& eta, int a, int b,
                                                std::size_t draws, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto dirichlet = [&](std::vector<double>& out) {
    double s = 0.0;
    for (std::size_t c = 0; c < eta.size(); ++c) {
      std::gamma_distribution<double> g(beta * eta[c], 1.0);
      out[c] = g(rng);
      s += out[c];
    }
    for (double& v : out) v /= s;
  };
  auto categorical = [&](const std::vector<double>& p) {
    double u = unif(rng);
    for (std::size_t c = 0; c + 1 < p.size(); ++c) {
      if (u < p[c]) return static_cast<int>(c);
      u -= p[c];
    }
    return static_cast<int>(p.size() - 1);
  };
  const std::size_t batches = 100;
  const std::size_t per = draws / batches;
  std::vector<double> corr(batches);
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  std::vector<double> p1(eta.size()), p2(eta.size());
  for (std::size_t bi = 0; bi < batches; ++bi) {
    double bx = 0, by = 0, bxx = 0, byy = 0, bxy = 0;
    for (std::size_t k = 0; k < per; ++k) {
      const bool same = unif(rng) < 1.0 / (1.0 + alpha);
      dirichlet(p1);
      if (same) {
        p2 = p1;
      } else {
        dirichlet(p2);
      }
      const double x = categorical(p1) == a;
      const double y = categorical(p2) == b;
      bx += x, by += y, bxx += x * x, byy += y * y, bxy += x * y;
    }
    const double n = static_cast<double>(per);
    const double cov = bxy / n - (bx / n) * (by / n);
    corr[bi] = cov / std::sqrt((bxx / n - (bx / n) * (bx / n)) * (byy / n - (by / n) * (by / n)));
    sx += bx, sy += by, sxx += bxx, syy += byy, sxy += bxy;
  }
  const double n = static_cast<double>(per * batches);
  CorrelationEstimate e;
  const double cov = sxy / n - (sx / n) * (sy / n);
  e.corr = cov / std::sqrt((sxx / n - (sx / n) * (sx / n)) * (syy / n - (sy / n) * (sy / n)));
  e.se = iid_se(corr);
  return e;
}

}  // namespace oracle
