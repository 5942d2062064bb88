// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bncrowd/error.hpp"

namespace bncrowd {

// Categories are 0-based inside the library. File formats use 1..C and
// convert on ingestion; missing labels are never stored.
using Category = int;
using GroundTruth = std::vector<Category>;

using ClusterId = std::uint32_t;
inline constexpr ClusterId kNewCluster = std::numeric_limits<ClusterId>::max();
inline constexpr ClusterId kUnassigned = std::numeric_limits<ClusterId>::max() - 1;

struct Annotation {
  std::size_t instance = 0;
  std::size_t user = 0;
  Category label = 0;

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

/// Sparse N x L matrix of labels with per-instance and per-user adjacency.
/// Immutable after construction.
class LabelMatrix {
 public:
  struct Entry {
    std::size_t index;  // user for instance rows, instance for user rows
    Category label;
  };

  LabelMatrix() = default;

  LabelMatrix(std::size_t n_instances, std::size_t n_users, int n_categories,
              std::vector<Annotation> entries)
      : n_instances_(n_instances),
        n_users_(n_users),
        n_categories_(n_categories),
        entries_(std::move(entries)) {
    if (n_instances == 0 || n_users == 0 || n_categories < 1) {
      throw DimensionError("label matrix needs N, L, C >= 1");
    }
    for (const auto& a : entries_) {
      if (a.instance >= n_instances_ || a.user >= n_users_) {
        throw DimensionError("annotation (" + std::to_string(a.instance) + ", " +
                             std::to_string(a.user) + ") outside the matrix");
      }
      if (a.label < 0 || a.label >= n_categories_) {
        throw DomainError("label " + std::to_string(a.label) + " outside 0.." +
                          std::to_string(n_categories_ - 1));
      }
    }
    std::sort(entries_.begin(), entries_.end(), [](const Annotation& a, const Annotation& b) {
      return a.instance != b.instance ? a.instance < b.instance : a.user < b.user;
    });
    for (std::size_t k = 1; k < entries_.size(); ++k) {
      if (entries_[k].instance == entries_[k - 1].instance &&
          entries_[k].user == entries_[k - 1].user) {
        throw DomainError("duplicate annotation for instance " +
                          std::to_string(entries_[k].instance) + ", user " +
                          std::to_string(entries_[k].user));
      }
    }
    build_index(n_instances_, instance_offsets_, instance_rows_, true);
    build_index(n_users_, user_offsets_, user_rows_, false);
  }

  std::size_t n_instances() const noexcept { return n_instances_; }
  std::size_t n_users() const noexcept { return n_users_; }
  int n_categories() const noexcept { return n_categories_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  /// Entries sorted by (instance, user).
  std::span<const Annotation> entries() const noexcept { return entries_; }

  std::span<const Entry> instance_labels(std::size_t i) const {
    return {instance_rows_.data() + instance_offsets_[i],
            instance_offsets_[i + 1] - instance_offsets_[i]};
  }

  std::span<const Entry> user_labels(std::size_t l) const {
    return {user_rows_.data() + user_offsets_[l], user_offsets_[l + 1] - user_offsets_[l]};
  }

  std::optional<Category> at(std::size_t i, std::size_t l) const {
    for (const auto& e : instance_labels(i)) {
      if (e.index == l) return e.label;
    }
    return std::nullopt;
  }

  /// Fraction of (instance, user) cells without a label.
  double sparsity() const noexcept {
    return 1.0 - static_cast<double>(entries_.size()) /
                     (static_cast<double>(n_instances_) * static_cast<double>(n_users_));
  }

 private:
  void build_index(std::size_t n, std::vector<std::size_t>& offsets, std::vector<Entry>& rows,
                   bool by_instance) const {
    offsets.assign(n + 1, 0);
    for (const auto& a : entries_) ++offsets[(by_instance ? a.instance : a.user) + 1];
    for (std::size_t k = 0; k < n; ++k) offsets[k + 1] += offsets[k];
    rows.resize(entries_.size());
    std::vector<std::size_t> fill(offsets.begin(), offsets.end() - 1);
    for (const auto& a : entries_) {
      const std::size_t key = by_instance ? a.instance : a.user;
      rows[fill[key]++] = Entry{by_instance ? a.user : a.instance, a.label};
    }
  }

  std::size_t n_instances_ = 0;
  std::size_t n_users_ = 0;
  int n_categories_ = 0;
  std::vector<Annotation> entries_;
  std::vector<std::size_t> instance_offsets_{0};
  std::vector<Entry> instance_rows_;
  std::vector<std::size_t> user_offsets_{0};
  std::vector<Entry> user_rows_;
};

inline void validate_truth(const GroundTruth& z, std::size_t n_instances, int n_categories) {
  if (z.size() != n_instances) {
    throw DimensionError("ground truth has " + std::to_string(z.size()) + " entries, expected " +
                         std::to_string(n_instances));
  }
  for (Category t : z) {
    if (t < 0 || t >= n_categories) {
      throw DomainError("ground-truth category " + std::to_string(t) + " out of range");
    }
  }
}

/// Clustering of users. Cluster ids are stable handles: moving a user never
/// renumbers other clusters.
class Partition {
 public:
  Partition() = default;

  explicit Partition(std::vector<ClusterId> assignment) : assignment_(std::move(assignment)) {
    for (std::size_t l = 0; l < assignment_.size(); ++l) {
      const ClusterId id = assignment_[l];
      if (id == kNewCluster || id == kUnassigned) {
        throw DomainError("partition assignment uses a reserved cluster id");
      }
      assignment_[l] = kUnassigned;
      add_user(l, id);
    }
  }

  static Partition single_cluster(std::size_t n_users) {
    return Partition(std::vector<ClusterId>(n_users, 0));
  }

  static Partition singletons(std::size_t n_users) {
    std::vector<ClusterId> a(n_users);
    for (std::size_t l = 0; l < n_users; ++l) a[l] = static_cast<ClusterId>(l);
    return Partition(std::move(a));
  }

  std::size_t n_users() const noexcept { return assignment_.size(); }
  std::size_t n_clusters() const noexcept { return live_.size(); }
  ClusterId cluster_of(std::size_t user) const { return assignment_.at(user); }
  const std::vector<ClusterId>& assignment() const noexcept { return assignment_; }

  /// Live cluster ids, in order of creation (modulo swap-removal).
  const std::vector<ClusterId>& clusters() const noexcept { return live_; }

  std::size_t cluster_size(ClusterId id) const noexcept {
    return id < sizes_.size() ? sizes_[id] : 0;
  }
  bool is_live(ClusterId id) const noexcept { return cluster_size(id) > 0; }

  /// One past the largest id that has ever been live.
  std::size_t id_bound() const noexcept { return sizes_.size(); }

  /// Unassigns `user`; returns true when that emptied its cluster.
  bool remove_user(std::size_t user) {
    const ClusterId id = assignment_.at(user);
    if (id == kUnassigned) throw StateError("user " + std::to_string(user) + " is not assigned");
    assignment_[user] = kUnassigned;
    if (--sizes_[id] == 0) {
      const std::size_t pos = live_pos_[id];
      live_[pos] = live_.back();
      live_pos_[live_[pos]] = pos;
      live_.pop_back();
      return true;
    }
    return false;
  }

  /// Assigns an unassigned `user` to `id`, creating the cluster when not live.
  void add_user(std::size_t user, ClusterId id) {
    if (user >= assignment_.size()) assignment_.resize(user + 1, kUnassigned);
    if (assignment_[user] != kUnassigned) {
      throw StateError("user " + std::to_string(user) + " is already assigned");
    }
    if (id >= sizes_.size()) {
      sizes_.resize(id + 1, 0);
      live_pos_.resize(id + 1, 0);
    }
    if (sizes_[id]++ == 0) {
      live_pos_[id] = live_.size();
      live_.push_back(id);
    }
    assignment_[user] = id;
  }

  /// Cluster labels renumbered by first appearance (restricted growth string).
  std::vector<int> canonical_labels() const {
    std::vector<int> out(assignment_.size());
    std::vector<int> remap(sizes_.size(), -1);
    int next = 0;
    for (std::size_t l = 0; l < assignment_.size(); ++l) {
      int& r = remap[assignment_[l]];
      if (r < 0) r = next++;
      out[l] = r;
    }
    return out;
  }

  /// Assignment vector and per-cluster sizes describe the same partition.
  bool consistent() const {
    std::vector<std::size_t> recount(sizes_.size(), 0);
    for (ClusterId id : assignment_) {
      if (id == kUnassigned) continue;
      if (id >= sizes_.size()) return false;
      ++recount[id];
    }
    if (recount != sizes_) return false;
    std::size_t n_live = 0;
    for (std::size_t id = 0; id < sizes_.size(); ++id) {
      if (sizes_[id] == 0) continue;
      ++n_live;
      if (live_pos_[id] >= live_.size() || live_[live_pos_[id]] != id) return false;
    }
    return n_live == live_.size();
  }

  friend bool operator==(const Partition& a, const Partition& b) {
    return a.assignment_ == b.assignment_;
  }

 private:
  std::vector<ClusterId> assignment_;
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> live_pos_;
  std::vector<ClusterId> live_;
};

/// Sufficient statistics: per-user and per-cluster truth x label counts,
/// their label marginals, and instances per true category.
class CountTensor {
 public:
  CountTensor() = default;
  CountTensor(std::size_t n_users, int n_categories)
      : n_users_(n_users),
        c_(n_categories),
        user_(n_users * block(), 0),
        user_total_(n_users * n_categories, 0),
        truth_(n_categories, 0) {}

  int n_categories() const noexcept { return c_; }
  std::size_t n_users() const noexcept { return n_users_; }

  int user(std::size_t l, Category t, Category c) const { return user_[(l * c_ + t) * c_ + c]; }
  int user_total(std::size_t l, Category t) const { return user_total_[l * c_ + t]; }

  int cluster(ClusterId m, Category t, Category c) const {
    return m < n_cluster_slots() ? cluster_[(m * c_ + t) * c_ + c] : 0;
  }
  int cluster_total(ClusterId m, Category t) const {
    return m < n_cluster_slots() ? cluster_total_[m * c_ + t] : 0;
  }

  int truth(Category t) const { return truth_[t]; }
  int n_instances() const {
    int n = 0;
    for (int v : truth_) n += v;
    return n;
  }

  std::size_t n_cluster_slots() const noexcept {
    return c_ == 0 ? 0 : cluster_total_.size() / c_;
  }

  void add_annotation(std::size_t l, ClusterId m, Category t, Category c, int delta) {
    ensure_cluster(m);
    user_[(l * c_ + t) * c_ + c] += delta;
    user_total_[l * c_ + t] += delta;
    cluster_[(m * c_ + t) * c_ + c] += delta;
    cluster_total_[m * c_ + t] += delta;
  }

  void add_truth(Category t, int delta) { truth_[t] += delta; }

  /// Transfers user l's counts from cluster `from` to cluster `to`.
  /// Either side may be kUnassigned (user detached).
  void move_user(std::size_t l, ClusterId from, ClusterId to) {
    if (from != kUnassigned) shift_user(l, from, -1);
    if (to != kUnassigned) shift_user(l, to, +1);
  }

  bool all_non_negative() const {
    auto nn = [](const std::vector<int>& v) {
      return std::all_of(v.begin(), v.end(), [](int x) { return x >= 0; });
    };
    return nn(user_) && nn(user_total_) && nn(cluster_) && nn(cluster_total_) && nn(truth_);
  }

  /// Every marginal equals the sum of the cells it summarises.
  bool marginals_consistent() const {
    for (std::size_t l = 0; l < n_users_; ++l) {
      for (Category t = 0; t < c_; ++t) {
        int s = 0;
        for (Category c = 0; c < c_; ++c) s += user(l, t, c);
        if (s != user_total(l, t)) return false;
      }
    }
    for (ClusterId m = 0; m < n_cluster_slots(); ++m) {
      for (Category t = 0; t < c_; ++t) {
        int s = 0;
        for (Category c = 0; c < c_; ++c) s += cluster(m, t, c);
        if (s != cluster_total(m, t)) return false;
      }
    }
    return true;
  }

  /// Cells beyond either side's slot range compare as zero.
  friend bool operator==(const CountTensor& a, const CountTensor& b) {
    if (a.n_users_ != b.n_users_ || a.c_ != b.c_) return false;
    if (a.user_ != b.user_ || a.user_total_ != b.user_total_ || a.truth_ != b.truth_) return false;
    const std::size_t slots = std::max(a.n_cluster_slots(), b.n_cluster_slots());
    for (ClusterId m = 0; m < slots; ++m) {
      for (Category t = 0; t < a.c_; ++t) {
        if (a.cluster_total(m, t) != b.cluster_total(m, t)) return false;
        for (Category c = 0; c < a.c_; ++c) {
          if (a.cluster(m, t, c) != b.cluster(m, t, c)) return false;
        }
      }
    }
    return true;
  }

 private:
  std::size_t block() const noexcept { return static_cast<std::size_t>(c_) * c_; }

  void ensure_cluster(ClusterId m) {
    if (m >= n_cluster_slots()) {
      cluster_.resize((static_cast<std::size_t>(m) + 1) * block(), 0);
      cluster_total_.resize((static_cast<std::size_t>(m) + 1) * c_, 0);
    }
  }

  void shift_user(std::size_t l, ClusterId m, int sign) {
    ensure_cluster(m);
    for (Category t = 0; t < c_; ++t) {
      cluster_total_[m * c_ + t] += sign * user_total_[l * c_ + t];
      for (Category c = 0; c < c_; ++c) {
        cluster_[(m * c_ + t) * c_ + c] += sign * user_[(l * c_ + t) * c_ + c];
      }
    }
  }

  std::size_t n_users_ = 0;
  int c_ = 0;
  std::vector<int> user_;
  std::vector<int> user_total_;
  std::vector<int> cluster_;
  std::vector<int> cluster_total_;
  std::vector<int> truth_;
};

/// Full recount of the sufficient statistics.
inline CountTensor build_counts(const LabelMatrix& labels, const GroundTruth& z,
                                const Partition& partition) {
  validate_truth(z, labels.n_instances(), labels.n_categories());
  if (partition.n_users() != labels.n_users()) {
    throw DimensionError("partition covers " + std::to_string(partition.n_users()) +
                         " users, label matrix has " + std::to_string(labels.n_users()));
  }
  for (ClusterId id : partition.assignment()) {
    if (id == kUnassigned) throw DimensionError("partition has an unassigned user");
  }
  CountTensor counts(labels.n_users(), labels.n_categories());
  for (Category t : z) counts.add_truth(t, 1);
  for (const auto& a : labels.entries()) {
    counts.add_annotation(a.user, partition.cluster_of(a.user), z[a.instance], a.label, 1);
  }
  return counts;
}

/// Prior settings for all three Bayesian models. Matrices are C x C with
/// row t holding the simplex for true category t.
struct Hyperparameters {
  Eigen::MatrixXd eta;       // iBCC/cBCC confusion-row means
  Eigen::VectorXd beta;      // iBCC/cBCC row precisions
  Eigen::MatrixXd gamma;     // hcBCC top-level means of eta^m
  Eigen::VectorXd phi;       // hcBCC top-level precisions of eta^m
  Eigen::VectorXd a;         // hcBCC Gamma shape of beta^m_t
  Eigen::VectorXd b;         // hcBCC Gamma rate of beta^m_t
  double epsilon = 1.0;      // precision of the category-prior Dirichlet
  Eigen::VectorXd mu;        // mean of the category-prior Dirichlet
  double a_alpha = 1.0;
  double b_alpha = 10.0;

  int n_categories() const noexcept { return static_cast<int>(beta.size()); }

  /// Diagonal `diag`, remaining mass spread evenly off the diagonal.
  static Eigen::MatrixXd diagonal_simplex(int n_categories, double diag) {
    if (n_categories == 1) return Eigen::MatrixXd::Ones(1, 1);
    Eigen::MatrixXd m =
        Eigen::MatrixXd::Constant(n_categories, n_categories, (1.0 - diag) / (n_categories - 1));
    m.diagonal().setConstant(diag);
    return m;
  }

  /// Experimental defaults: eta diagonal 0.7, beta = 3, gamma = eta, phi = beta,
  /// a_t = 20, b_t = 2, a_alpha = 1, b_alpha = 10, uniform category prior.
  static Hyperparameters defaults(int n_categories) {
    Hyperparameters h;
    h.eta = diagonal_simplex(n_categories, 0.7);
    h.beta = Eigen::VectorXd::Constant(n_categories, 3.0);
    h.gamma = h.eta;
    h.phi = h.beta;
    h.a = Eigen::VectorXd::Constant(n_categories, 20.0);
    h.b = Eigen::VectorXd::Constant(n_categories, 2.0);
    h.epsilon = static_cast<double>(n_categories);
    h.mu = Eigen::VectorXd::Constant(n_categories, 1.0 / n_categories);
    h.a_alpha = 1.0;
    h.b_alpha = 10.0;
    return h;
  }

  void validate() const {
    const int c = n_categories();
    if (c < 1) throw DomainError("hyperparameters: beta is empty");
    auto check_simplex_rows = [c](const Eigen::MatrixXd& m, const char* name) {
      if (m.rows() != c || m.cols() != c) {
        throw DimensionError(std::string("hyperparameters: ") + name + " must be C x C");
      }
      for (int t = 0; t < c; ++t) {
        if ((m.row(t).array() <= 0.0).any() || std::abs(m.row(t).sum() - 1.0) > 1e-12) {
          throw DomainError(std::string("hyperparameters: ") + name + " row " +
                            std::to_string(t) + " is not a positive simplex vector");
        }
      }
    };
    auto check_positive = [c](const Eigen::VectorXd& v, const char* name) {
      if (v.size() != c) {
        throw DimensionError(std::string("hyperparameters: ") + name + " must have C entries");
      }
      if (!(v.array() > 0.0).all() || !v.allFinite()) {
        throw DomainError(std::string("hyperparameters: ") + name + " must be strictly positive");
      }
    };
    check_simplex_rows(eta, "eta");
    check_simplex_rows(gamma, "gamma");
    check_positive(beta, "beta");
    check_positive(phi, "phi");
    check_positive(a, "a_t");
    check_positive(b, "b_t");
    if (!(epsilon > 0.0)) throw DomainError("hyperparameters: epsilon must be positive");
    if (mu.size() != c || (mu.array() <= 0.0).any() || std::abs(mu.sum() - 1.0) > 1e-12) {
      throw DomainError("hyperparameters: mu must be a positive simplex vector of length C");
    }
    if (!(a_alpha > 0.0) || !(b_alpha > 0.0)) {
      throw DomainError("hyperparameters: a_alpha and b_alpha must be positive");
    }
  }
};

/// Cluster-level parameters of the hierarchical model: one precision and one
/// mean simplex per true category.
struct ClusterParams {
  Eigen::VectorXd beta;
  Eigen::MatrixXd eta;
};

}  // namespace bncrowd
