// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include <boost/graph/adjacency_list.hpp>
#include <boost/graph/max_cardinality_matching.hpp>

#include "bncrowd/core.hpp"
#include "bncrowd/special.hpp"

namespace bncrowd {

/// One population of annotators: users of the cluster draw each confusion
/// row from Dir(beta_t * eta_t). An infinite beta_t means every member uses
/// eta_t itself.
struct ClusterSpec {
  std::string name;
  double weight = 1.0;
  Eigen::MatrixXd eta;
  Eigen::VectorXd beta;
};

struct PopulationSpec {
  std::string name;
  std::size_t n_instances = 0;
  std::size_t n_users = 0;
  int n_categories = 0;
  Eigen::VectorXd tau;
  std::vector<ClusterSpec> clusters;

  void validate() const {
    auto fail = [](const std::string& field, const std::string& why) {
      throw ValidationError("population spec: field '" + field + "' " + why);
    };
    if (n_instances < 1) fail("n_instances", "must be >= 1");
    if (n_users < 1) fail("n_users", "must be >= 1");
    if (n_categories < 1) fail("n_categories", "must be >= 1");
    if (tau.size() != n_categories || (tau.array() < 0.0).any() ||
        std::abs(tau.sum() - 1.0) > 1e-9) {
      fail("tau", "must be a simplex vector of length n_categories");
    }
    if (clusters.empty()) fail("clusters", "must not be empty");
    double w = 0.0;
    for (std::size_t m = 0; m < clusters.size(); ++m) {
      const auto& cl = clusters[m];
      const std::string at = "clusters[" + std::to_string(m) + "].";
      if (!(cl.weight >= 0.0)) fail(at + "weight", "must be non-negative");
      w += cl.weight;
      if (cl.eta.rows() != n_categories || cl.eta.cols() != n_categories) {
        fail(at + "eta", "must be n_categories x n_categories");
      }
      for (int t = 0; t < n_categories; ++t) {
        if ((cl.eta.row(t).array() < 0.0).any() || std::abs(cl.eta.row(t).sum() - 1.0) > 1e-9) {
          fail(at + "eta", "row " + std::to_string(t) + " is not on the simplex");
        }
      }
      if (cl.beta.size() != n_categories || !(cl.beta.array() > 0.0).all()) {
        fail(at + "beta", "must hold n_categories positive precisions (inf allowed)");
      }
    }
    if (std::abs(w - 1.0) > 1e-9) fail("clusters", "weights must sum to 1");
  }

  /// Member counts by largest remainder, so shares match the weights as
  /// closely as the user count allows.
  std::vector<std::size_t> cluster_sizes() const {
    std::vector<std::size_t> sizes(clusters.size());
    std::vector<std::pair<double, std::size_t>> rem;
    std::size_t used = 0;
    for (std::size_t m = 0; m < clusters.size(); ++m) {
      const double exact = clusters[m].weight * static_cast<double>(n_users);
      sizes[m] = static_cast<std::size_t>(std::floor(exact));
      used += sizes[m];
      rem.emplace_back(exact - std::floor(exact), m);
    }
    std::stable_sort(rem.begin(), rem.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; used < n_users; ++k, ++used) ++sizes[rem[k % rem.size()].second];
    return sizes;
  }
};

struct SimulatedData {
  LabelMatrix labels;                    // dense
  GroundTruth z;
  std::vector<std::size_t> user_cluster;  // index into spec.clusters
  std::vector<Eigen::MatrixXd> confusion;  // per user
};

/// Draws a complete label matrix and all latent quantities. Users are laid
/// out in cluster blocks, in the order of spec.clusters.
inline SimulatedData simulate(const PopulationSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng = make_rng(seed, 0);
  const int C = spec.n_categories;
  SimulatedData out;
  out.z.resize(spec.n_instances);
  std::vector<double> tau(spec.tau.data(), spec.tau.data() + C);
  std::discrete_distribution<int> truth(tau.begin(), tau.end());
  for (auto& t : out.z) t = truth(rng);

  const auto sizes = spec.cluster_sizes();
  for (std::size_t m = 0; m < sizes.size(); ++m) {
    out.user_cluster.insert(out.user_cluster.end(), sizes[m], m);
  }
  for (std::size_t l = 0; l < spec.n_users; ++l) {
    const ClusterSpec& cl = spec.clusters[out.user_cluster[l]];
    Eigen::MatrixXd psi(C, C);
    for (int t = 0; t < C; ++t) {
      if (std::isinf(cl.beta[t])) {
        psi.row(t) = cl.eta.row(t);
      } else {
        // Zero-mean components stay at zero.
        Eigen::VectorXd conc = (cl.beta[t] * cl.eta.row(t).transpose()).cwiseMax(1e-300);
        psi.row(t) = sample_dirichlet(conc, rng).transpose();
        for (int c = 0; c < C; ++c) {
          if (cl.eta(t, c) == 0.0) psi(t, c) = 0.0;
        }
        psi.row(t) /= psi.row(t).sum();
      }
    }
    out.confusion.push_back(std::move(psi));
  }

  std::vector<Annotation> entries;
  entries.reserve(spec.n_instances * spec.n_users);
  for (std::size_t i = 0; i < spec.n_instances; ++i) {
    for (std::size_t l = 0; l < spec.n_users; ++l) {
      // Eigen matrices are column-major, so rows are strided.
      std::vector<double> p(C);
      for (int c = 0; c < C; ++c) p[c] = out.confusion[l](out.z[i], c);
      std::discrete_distribution<int> lab(p.begin(), p.end());
      entries.push_back({i, l, lab(rng)});
    }
  }
  out.labels = LabelMatrix(spec.n_instances, spec.n_users, C, std::move(entries));
  return out;
}

/// Number of entries kept at a given sparsity: ceil((1 - sparsity) * N * L),
/// with a guard against products landing a rounding error above an integer.
inline std::size_t retained_count(std::size_t n_instances, std::size_t n_users, double sparsity) {
  const double exact = (1.0 - sparsity) * static_cast<double>(n_instances) *
                       static_cast<double>(n_users);
  const double nearest = std::round(exact);
  if (std::abs(exact - nearest) < 1e-9 * std::max(1.0, exact)) {
    return static_cast<std::size_t>(nearest);
  }
  return static_cast<std::size_t>(std::ceil(exact));
}

/// Keeps a random subset of the entries of the requested size such that
/// every instance and every user keeps at least one label. The subset is a
/// random minimum edge cover (maximum matching plus one edge per unmatched
/// vertex) topped up uniformly from the remaining entries.
inline LabelMatrix mask(const LabelMatrix& labels, double sparsity, std::uint64_t seed) {
  if (!(sparsity >= 0.0) || !(sparsity < 1.0)) {
    throw DomainError("mask: sparsity must lie in [0, 1)");
  }
  const std::size_t N = labels.n_instances();
  const std::size_t L = labels.n_users();
  const std::size_t target = retained_count(N, L, sparsity);
  const auto entries = labels.entries();
  if (target > entries.size()) {
    throw FeasibilityError("mask: sparsity " + std::to_string(sparsity) + " needs " +
                           std::to_string(target) + " labels but only " +
                           std::to_string(entries.size()) + " are available");
  }
  for (std::size_t i = 0; i < N; ++i) {
    if (labels.instance_labels(i).empty()) {
      throw FeasibilityError("mask: instance " + std::to_string(i) +
                             " has no labels, so instance coverage cannot hold");
    }
  }
  for (std::size_t l = 0; l < L; ++l) {
    if (labels.user_labels(l).empty()) {
      throw FeasibilityError("mask: user " + std::to_string(l) +
                             " has no labels, so user coverage cannot hold");
    }
  }

  Rng rng = make_rng(seed, 0);
  // Random vertex ids and edge order make the cover exchangeable.
  std::vector<std::size_t> vid(N + L);
  std::iota(vid.begin(), vid.end(), 0);
  std::shuffle(vid.begin(), vid.end(), rng);
  std::vector<std::size_t> order(entries.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  using Graph = boost::adjacency_list<boost::vecS, boost::vecS, boost::undirectedS>;
  Graph g(N + L);
  for (std::size_t k : order) {
    boost::add_edge(vid[entries[k].instance], vid[N + entries[k].user], g);
  }
  std::vector<boost::graph_traits<Graph>::vertex_descriptor> mate(N + L);
  boost::edmonds_maximum_cardinality_matching(g, &mate[0]);
  const auto null_vertex = boost::graph_traits<Graph>::null_vertex();

  std::vector<char> keep(entries.size(), 0);
  std::vector<std::vector<std::size_t>> incident(N + L);
  for (std::size_t k : order) {
    incident[entries[k].instance].push_back(k);
    incident[N + entries[k].user].push_back(k);
  }
  std::size_t kept = 0;
  for (std::size_t k : order) {
    const auto a = vid[entries[k].instance];
    const auto b = vid[N + entries[k].user];
    if (mate[a] == b) {
      keep[k] = 1;
      ++kept;
    }
  }
  for (std::size_t v = 0; v < N + L; ++v) {
    if (mate[vid[v]] != null_vertex) continue;
    const auto& inc = incident[v];
    std::uniform_int_distribution<std::size_t> pick(0, inc.size() - 1);
    const std::size_t k = inc[pick(rng)];
    if (!keep[k]) {
      keep[k] = 1;
      ++kept;
    }
  }
  if (kept > target) {
    throw FeasibilityError("mask: coverage of every instance and user needs " +
                           std::to_string(kept) + " labels, more than the " +
                           std::to_string(target) + " allowed at sparsity " +
                           std::to_string(sparsity));
  }
  std::vector<std::size_t> rest;
  for (std::size_t k : order) {
    if (!keep[k]) rest.push_back(k);
  }
  std::shuffle(rest.begin(), rest.end(), rng);
  for (std::size_t j = 0; kept < target; ++j, ++kept) keep[rest[j]] = 1;

  std::vector<Annotation> out;
  out.reserve(target);
  for (std::size_t k = 0; k < entries.size(); ++k) {
    if (keep[k]) out.push_back(entries[k]);
  }
  return LabelMatrix(N, L, labels.n_categories(), std::move(out));
}

enum class PresetScale { Desk, Paper };

inline PresetScale parse_preset_scale(std::string_view s) {
  if (s == "desk") return PresetScale::Desk;
  if (s == "paper") return PresetScale::Paper;
  throw UsageError("unknown preset scale '" + std::string(s) + "' (expected desk or paper)");
}

namespace detail {

inline Eigen::MatrixXd rows3(std::initializer_list<std::initializer_list<double>> r) {
  Eigen::MatrixXd m(3, 3);
  int t = 0;
  for (const auto& row : r) {
    int c = 0;
    for (double v : row) m(t, c++) = v;
    ++t;
  }
  return m;
}

// Representative three-cluster population with C = 3: a spammer cluster
// whose rows ignore the truth, a competent majority, and a cluster that
// confuses categories 2 and 3.
inline std::vector<ClusterSpec> three_clusters(double precision) {
  const Eigen::VectorXd beta = Eigen::VectorXd::Constant(3, precision);
  return {
      {"spammer", 0.25, rows3({{0.6, 0.25, 0.15}, {0.6, 0.25, 0.15}, {0.6, 0.25, 0.15}}), beta},
      {"competent", 0.45, rows3({{0.8, 0.1, 0.1}, {0.1, 0.8, 0.1}, {0.1, 0.1, 0.8}}), beta},
      {"biased", 0.30, rows3({{0.6, 0.35, 0.05}, {0.05, 0.9, 0.05}, {0.05, 0.35, 0.6}}), beta},
  };
}

inline constexpr double kPresetPrecision = 10.0;

}  // namespace detail

/// Named synthetic populations:
///   dataset1  three clusters with within-cluster variability (hierarchical)
///   dataset2  the same cluster means without variability (clustered)
///   dataset3  every user drawn around the competent cluster (independent)
/// Desk scale is 200 instances x 60 users, paper scale 500 x 200; C = 3.
/// Cluster matrices are representative.
inline PopulationSpec preset(std::string_view name, PresetScale scale = PresetScale::Desk) {
  PopulationSpec spec;
  spec.name = std::string(name);
  spec.n_categories = 3;
  spec.n_instances = scale == PresetScale::Desk ? 200 : 500;
  spec.n_users = scale == PresetScale::Desk ? 60 : 200;
  spec.tau = Eigen::VectorXd::Constant(3, 1.0 / 3.0);
  if (name == "dataset1") {
    spec.clusters = detail::three_clusters(detail::kPresetPrecision);
  } else if (name == "dataset2") {
    spec.clusters = detail::three_clusters(std::numeric_limits<double>::infinity());
  } else if (name == "dataset3") {
    auto competent = detail::three_clusters(detail::kPresetPrecision)[1];
    competent.weight = 1.0;
    spec.clusters = {competent};
  } else {
    throw UsageError("unknown preset '" + std::string(name) +
                     "' (expected dataset1, dataset2 or dataset3)");
  }
  return spec;
}

}  // namespace bncrowd
