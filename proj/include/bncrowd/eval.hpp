// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bncrowd/core.hpp"
#include "bncrowd/model.hpp"
#include "bncrowd/sampler.hpp"

namespace bncrowd {

inline double accuracy(const GroundTruth& z_hat, const GroundTruth& gold) {
  if (z_hat.size() != gold.size()) {
    throw DimensionError("accuracy: " + std::to_string(z_hat.size()) + " estimates vs " +
                         std::to_string(gold.size()) + " gold labels");
  }
  if (gold.empty()) throw DimensionError("accuracy: empty vectors");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) hits += z_hat[i] == gold[i];
  return static_cast<double>(hits) / static_cast<double>(gold.size());
}

struct ClusterProfile {
  ClusterId id = 0;
  std::vector<std::size_t> members;
  double share = 0.0;
  Eigen::MatrixXd confusion;  // mean confusion matrix, rows = true category
};

struct PosteriorSummary {
  std::size_t n_samples = 0;
  GroundTruth z_hat;
  Eigen::MatrixXd z_marginals;   // N x C
  Eigen::MatrixXd cooccurrence;  // L x L
  double mean_n_clusters = 0.0;
  double sd_n_clusters = 0.0;
  double mean_alpha = 0.0;
  std::size_t reference_iteration = 0;
  std::vector<ClusterProfile> cluster_profiles;
  std::optional<double> accuracy;
};

/// Reduces retained samples. z_hat is the per-instance posterior mode (ties
/// to the lowest category); cluster profiles come from the sample with the
/// highest joint score (ties to the earliest iteration), since cluster ids
/// are not aligned across samples.
inline PosteriorSummary summarize(std::span<const SampleRecord> samples, const LabelMatrix& labels,
                                  const Hyperparameters& h,
                                  const std::optional<GroundTruth>& gold = std::nullopt) {
  if (samples.empty()) throw UsageError("summarize: no samples");
  const std::size_t N = labels.n_instances();
  const std::size_t L = labels.n_users();
  const int C = labels.n_categories();
  const double S = static_cast<double>(samples.size());

  // Integer tallies keep the result independent of sample order.
  std::vector<std::size_t> z_tally(N * C, 0);
  std::vector<std::size_t> co_tally(L * L, 0);
  double k_sum = 0.0;
  double alpha_sum = 0.0;
  const SampleRecord* ref = &samples.front();
  for (const auto& s : samples) {
    if (s.z.size() != N || s.partition.n_users() != L) {
      throw DimensionError("summarize: sample dimensioned differently from the labels");
    }
    for (std::size_t i = 0; i < N; ++i) ++z_tally[i * C + s.z[i]];
    const auto& q = s.partition.assignment();
    for (std::size_t a = 0; a < L; ++a) {
      for (std::size_t b = a + 1; b < L; ++b) co_tally[a * L + b] += q[a] == q[b];
    }
    k_sum += static_cast<double>(s.partition.n_clusters());
    alpha_sum += s.alpha;
    if (s.log_joint > ref->log_joint ||
        (s.log_joint == ref->log_joint && s.iteration < ref->iteration)) {
      ref = &s;
    }
  }

  PosteriorSummary out;
  out.n_samples = samples.size();
  out.z_hat.resize(N);
  out.z_marginals.resize(N, C);
  for (std::size_t i = 0; i < N; ++i) {
    std::size_t best = 0;
    for (int t = 0; t < C; ++t) {
      out.z_marginals(i, t) = static_cast<double>(z_tally[i * C + t]) / S;
      if (z_tally[i * C + t] > z_tally[i * C + best]) best = t;
    }
    out.z_hat[i] = static_cast<Category>(best);
  }
  out.cooccurrence = Eigen::MatrixXd::Identity(L, L);
  for (std::size_t a = 0; a < L; ++a) {
    for (std::size_t b = a + 1; b < L; ++b) {
      out.cooccurrence(a, b) = out.cooccurrence(b, a) =
          static_cast<double>(co_tally[a * L + b]) / S;
    }
  }
  out.mean_n_clusters = k_sum / S;
  double ss = 0.0;
  for (const auto& s : samples) {
    const double d = static_cast<double>(s.partition.n_clusters()) - out.mean_n_clusters;
    ss += d * d;
  }
  out.sd_n_clusters = samples.size() > 1 ? std::sqrt(ss / (S - 1.0)) : 0.0;
  out.mean_alpha = alpha_sum / S;
  out.reference_iteration = ref->iteration;

  const CountTensor counts = build_counts(labels, ref->z, ref->partition);
  for (ClusterId id : ref->partition.clusters()) {
    ClusterProfile p;
    p.id = id;
    for (std::size_t l = 0; l < L; ++l) {
      if (ref->partition.cluster_of(l) == id) p.members.push_back(l);
    }
    p.share = static_cast<double>(p.members.size()) / static_cast<double>(L);
    auto it = std::find_if(ref->cluster_params.begin(), ref->cluster_params.end(),
                           [id](const auto& e) { return e.first == id; });
    if (it != ref->cluster_params.end()) {
      p.confusion = it->second.eta;
    } else {
      p.confusion.resize(C, C);
      for (int t = 0; t < C; ++t) {
        for (int c = 0; c < C; ++c) {
          p.confusion(t, c) = (counts.cluster(id, t, c) + h.beta[t] * h.eta(t, c)) /
                              (counts.cluster_total(id, t) + h.beta[t]);
        }
      }
    }
    out.cluster_profiles.push_back(std::move(p));
  }
  std::sort(out.cluster_profiles.begin(), out.cluster_profiles.end(),
            [](const ClusterProfile& a, const ClusterProfile& b) {
              return a.members.front() < b.members.front();
            });
  if (gold) out.accuracy = accuracy(out.z_hat, *gold);
  return out;
}

// ---------------------------------------------------------------------------
// Exhaustive posterior for tiny problems

/// All set partitions of n items as restricted growth strings.
inline std::vector<std::vector<int>> enumerate_set_partitions(std::size_t n) {
  std::vector<std::vector<int>> out;
  std::vector<int> rgs(n, 0);
  auto rec = [&](auto&& self, std::size_t pos, int mx) -> void {
    if (pos == n) {
      out.push_back(rgs);
      return;
    }
    for (int v = 0; v <= mx + 1; ++v) {
      rgs[pos] = v;
      self(self, pos + 1, std::max(mx, v));
    }
  };
  if (n == 0) return {{}};
  rgs[0] = 0;
  rec(rec, 1, 0);
  return out;
}

inline double bell_number(std::size_t n) {
  // Bell triangle.
  std::vector<double> row{1.0};
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<double> next{row.back()};
    for (double v : row) next.push_back(next.back() + v);
    row = std::move(next);
  }
  return row.front();
}

/// Exact joint posterior over (z, partition) for the clustered model at a
/// fixed concentration. prob[z_index * n_partitions + partition_index], with
/// z_index reading z as a base-C number whose least significant digit is z_0.
struct EnumeratedPosterior {
  std::size_t n_instances = 0;
  int n_categories = 0;
  std::vector<std::vector<int>> partitions;
  std::vector<double> prob;

  std::size_t n_z() const { return partitions.empty() ? 0 : prob.size() / partitions.size(); }

  GroundTruth z_of(std::size_t index) const {
    GroundTruth z(n_instances);
    for (std::size_t i = 0; i < n_instances; ++i) {
      z[i] = static_cast<Category>(index % n_categories);
      index /= n_categories;
    }
    return z;
  }

  std::size_t z_index(const GroundTruth& z) const {
    std::size_t idx = 0;
    for (std::size_t i = n_instances; i-- > 0;) idx = idx * n_categories + z[i];
    return idx;
  }

  std::size_t partition_index(const std::vector<int>& rgs) const {
    auto it = std::lower_bound(partitions.begin(), partitions.end(), rgs);
    if (it == partitions.end() || *it != rgs) throw DomainError("not a canonical partition");
    return static_cast<std::size_t>(it - partitions.begin());
  }

  Eigen::MatrixXd z_marginals() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n_instances, n_categories);
    for (std::size_t zi = 0; zi < n_z(); ++zi) {
      double p = 0.0;
      for (std::size_t pi = 0; pi < partitions.size(); ++pi) p += prob[zi * partitions.size() + pi];
      const GroundTruth z = z_of(zi);
      for (std::size_t i = 0; i < n_instances; ++i) m(i, z[i]) += p;
    }
    return m;
  }

  /// Per-instance marginal mode, ties to the lowest category.
  GroundTruth marginal_mode() const {
    const Eigen::MatrixXd m = z_marginals();
    GroundTruth z(n_instances);
    for (std::size_t i = 0; i < n_instances; ++i) {
      Eigen::Index best = 0;
      for (Eigen::Index t = 1; t < m.cols(); ++t) {
        if (m(i, t) > m(i, best)) best = t;
      }
      z[i] = static_cast<Category>(best);
    }
    return z;
  }
};

inline constexpr double kMaxEnumeratedStates = 1e6;

inline EnumeratedPosterior enumerate_posterior_cbcc(const LabelMatrix& labels,
                                                    const Hyperparameters& h, double alpha) {
  h.validate();
  if (!(alpha > 0.0)) throw DomainError("enumerate: alpha must be positive");
  const std::size_t N = labels.n_instances();
  const std::size_t L = labels.n_users();
  const int C = labels.n_categories();
  const double states = std::pow(static_cast<double>(C), static_cast<double>(N)) * bell_number(L);
  if (states > kMaxEnumeratedStates) {
    throw SizeError("enumerate: C^N * Bell(L) = " + std::to_string(states) + " exceeds 1e6");
  }
  EnumeratedPosterior post;
  post.n_instances = N;
  post.n_categories = C;
  post.partitions = enumerate_set_partitions(L);
  const std::size_t nz = static_cast<std::size_t>(std::llround(std::pow(C, N)));
  std::vector<double> logp(nz * post.partitions.size());
  for (std::size_t pi = 0; pi < post.partitions.size(); ++pi) {
    const auto& rgs = post.partitions[pi];
    Partition part(std::vector<ClusterId>(rgs.begin(), rgs.end()));
    const double crp = log_crp_prior(part, alpha);
    for (std::size_t zi = 0; zi < nz; ++zi) {
      const CountTensor n = build_counts(labels, post.z_of(zi), part);
      logp[zi * post.partitions.size() + pi] =
          crp + log_collapsed_z_prior(n, h) + log_collapsed_likelihood_cbcc(n, h);
    }
  }
  const double norm = log_sum_exp(logp);
  post.prob.resize(logp.size());
  for (std::size_t k = 0; k < logp.size(); ++k) post.prob[k] = std::exp(logp[k] - norm);
  return post;
}

// ---------------------------------------------------------------------------
// Sparsity sweeps

struct RunResult {
  std::string method;
  double sparsity = 0.0;
  std::size_t replicate = 0;
  double accuracy = 0.0;
};

struct ImprovementRow {
  std::string method;
  double sparsity = 0.0;
  std::size_t n = 0;
  double mean_accuracy = 0.0;
  double mean_improvement = 0.0;
  double sd_improvement = 0.0;
  double se_improvement = 0.0;
};

/// Paired accuracy differences against the baseline method, averaged per
/// (method, sparsity). Rows ordered by sparsity, then by first appearance
/// of the method.
inline std::vector<ImprovementRow> improvement_curve(std::span<const RunResult> results,
                                                     std::string_view baseline = "mv") {
  std::map<std::pair<double, std::size_t>, double> base;
  std::vector<std::string> methods;
  for (const auto& r : results) {
    if (r.method == baseline) base[{r.sparsity, r.replicate}] = r.accuracy;
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) {
      methods.push_back(r.method);
    }
  }
  std::map<std::pair<double, std::size_t>, std::vector<std::pair<double, double>>> cells;
  for (const auto& r : results) {
    auto it = base.find({r.sparsity, r.replicate});
    if (it == base.end()) {
      throw PairingError("improvement curve: no " + std::string(baseline) +
                         " result for sparsity " + std::to_string(r.sparsity) + ", replicate " +
                         std::to_string(r.replicate));
    }
    const std::size_t midx = static_cast<std::size_t>(
        std::find(methods.begin(), methods.end(), r.method) - methods.begin());
    cells[{r.sparsity, midx}].emplace_back(r.accuracy, r.accuracy - it->second);
  }
  std::vector<ImprovementRow> rows;
  for (const auto& [key, v] : cells) {
    ImprovementRow row;
    row.method = methods[key.second];
    row.sparsity = key.first;
    row.n = v.size();
    for (const auto& [acc, d] : v) {
      row.mean_accuracy += acc;
      row.mean_improvement += d;
    }
    row.mean_accuracy /= static_cast<double>(row.n);
    row.mean_improvement /= static_cast<double>(row.n);
    if (row.n > 1) {
      double ss = 0.0;
      for (const auto& [acc, d] : v) ss += (d - row.mean_improvement) * (d - row.mean_improvement);
      row.sd_improvement = std::sqrt(ss / static_cast<double>(row.n - 1));
      row.se_improvement = row.sd_improvement / std::sqrt(static_cast<double>(row.n));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace bncrowd
