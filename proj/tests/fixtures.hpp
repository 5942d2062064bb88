// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <random>
#include <vector>

#include "bncrowd/core.hpp"

namespace fixture {

/// Random label matrix; each (i, l) cell is observed with probability
/// `density`, and every instance keeps at least one label.
inline bncrowd::LabelMatrix random_labels(std::size_t N, std::size_t L, int C, double density,
                                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution keep(density);
  std::uniform_int_distribution<int> label(0, C - 1);
  std::uniform_int_distribution<std::size_t> user(0, L - 1);
  std::vector<bncrowd::Annotation> a;
  for (std::size_t i = 0; i < N; ++i) {
    bool any = false;
    for (std::size_t l = 0; l < L; ++l) {
      if (keep(rng)) {
        a.push_back({i, l, label(rng)});
        any = true;
      }
    }
    if (!any) a.push_back({i, user(rng), label(rng)});
  }
  return bncrowd::LabelMatrix(N, L, C, std::move(a));
}

inline bncrowd::LabelMatrix dense_labels(std::size_t N, std::size_t L, int C,
                                         std::uint64_t seed) {
  return random_labels(N, L, C, 1.0, seed);
}

inline bncrowd::GroundTruth random_truth(std::size_t N, int C, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> d(0, C - 1);
  bncrowd::GroundTruth z(N);
  for (auto& t : z) t = d(rng);
  return z;
}

/// Hyperparameters with non-uniform entries so that symmetric mistakes show.
inline bncrowd::Hyperparameters skewed_hypers(int C) {
  auto h = bncrowd::Hyperparameters::defaults(C);
  for (int t = 0; t < C; ++t) {
    h.beta[t] = 1.5 + t;
    h.a[t] = 3.0 + t;
    h.b[t] = 1.0 + 0.5 * t;
  }
  h.epsilon = 2.5;
  h.mu = Eigen::VectorXd::LinSpaced(C, 1.0, C);
  h.mu /= h.mu.sum();
  return h;
}

}  // namespace fixture
