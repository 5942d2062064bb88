// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "bncrowd/core.hpp"

namespace bncrowd {

/// Mutable state of one chain. Counts are kept consistent with
/// (z, partition, labels) by every mutating call; the labels themselves are
/// passed in where needed and never stored.
///
/// Users and instances can be temporarily detached: their contribution is
/// removed from the counts so that conditionals "excluding l" or "excluding i"
/// can be read directly, then re-attached.
class GibbsState {
 public:
  GibbsState() = default;

  GibbsState(const LabelMatrix& labels, GroundTruth z, Partition partition, double alpha)
      : z_(std::move(z)), partition_(std::move(partition)), alpha_(alpha) {
    counts_ = build_counts(labels, z_, partition_);
    instance_attached_.assign(z_.size(), 1);
  }

  const GroundTruth& z() const noexcept { return z_; }
  const Partition& partition() const noexcept { return partition_; }
  const CountTensor& counts() const noexcept { return counts_; }
  double alpha() const noexcept { return alpha_; }
  void set_alpha(double alpha) noexcept { alpha_ = alpha; }
  std::size_t n_users() const noexcept { return partition_.n_users(); }
  std::size_t n_instances() const noexcept { return z_.size(); }
  int n_categories() const noexcept { return counts_.n_categories(); }

  // ---- users -------------------------------------------------------------

  struct Detached {
    ClusterId from;
    bool emptied;
  };

  Detached detach_user(std::size_t l) {
    const ClusterId from = partition_.cluster_of(l);
    counts_.move_user(l, from, kUnassigned);
    const bool emptied = partition_.remove_user(l);
    return {from, emptied};
  }

  /// `target` may be live, kNewCluster, a pooled auxiliary id (promoted out of
  /// the pool), or any free id.
  ClusterId attach_user(std::size_t l, ClusterId target) {
    if (target == kNewCluster) target = allocate_id();
    release_from_pool(target);
    partition_.add_user(l, target);
    counts_.move_user(l, kUnassigned, target);
    return target;
  }

  /// Moves user l. An emptied source cluster simply disappears; auxiliary
  /// pool recycling is the hierarchical sampler's business.
  ClusterId move_user(std::size_t l, ClusterId target) {
    if (l >= n_users()) throw DimensionError("user index out of range");
    if (target != kNewCluster && !partition_.is_live(target) && !in_pool(target)) {
      throw StateError("move target " + std::to_string(target) + " is neither live nor pooled");
    }
    detach_user(l);
    return attach_user(l, target);
  }

  // ---- instances ---------------------------------------------------------

  void detach_instance(const LabelMatrix& labels, std::size_t i) {
    if (!instance_attached_[i]) throw StateError("instance already detached");
    apply_instance(labels, i, -1);
    instance_attached_[i] = 0;
  }

  void attach_instance(const LabelMatrix& labels, std::size_t i, Category t) {
    if (instance_attached_[i]) throw StateError("instance already attached");
    if (t < 0 || t >= n_categories()) throw DomainError("category out of range");
    z_[i] = t;
    apply_instance(labels, i, +1);
    instance_attached_[i] = 1;
  }

  bool instance_attached(std::size_t i) const { return instance_attached_[i] != 0; }

  void set_truth(const LabelMatrix& labels, std::size_t i, Category t) {
    if (i >= n_instances()) throw DimensionError("instance index out of range");
    if (t == z_[i]) return;
    detach_instance(labels, i);
    attach_instance(labels, i, t);
  }

  // ---- hierarchical-model extras -----------------------------------------

  bool has_params(ClusterId id) const noexcept {
    return id < params_.size() && params_[id].beta.size() > 0;
  }
  const ClusterParams& params(ClusterId id) const {
    if (!has_params(id)) throw StateError("cluster " + std::to_string(id) + " has no parameters");
    return params_[id];
  }
  void set_params(ClusterId id, ClusterParams p) {
    if (id >= params_.size()) params_.resize(id + 1);
    params_[id] = std::move(p);
  }
  void drop_params(ClusterId id) {
    if (id < params_.size()) params_[id] = ClusterParams{};
  }

  const std::vector<ClusterId>& aux_pool() const noexcept { return aux_pool_; }
  bool in_pool(ClusterId id) const noexcept {
    return std::find(aux_pool_.begin(), aux_pool_.end(), id) != aux_pool_.end();
  }
  /// Adds a fresh id to the auxiliary pool and returns it.
  ClusterId push_pool_id() {
    const ClusterId id = allocate_id();
    aux_pool_.push_back(id);
    return id;
  }
  /// Replaces pool slot `slot` with `id` (an emptied cluster being recycled);
  /// the displaced auxiliary's parameters are discarded.
  void recycle_into_pool(std::size_t slot, ClusterId id) {
    drop_params(aux_pool_.at(slot));
    aux_pool_[slot] = id;
  }

  /// nu[l][t]; NaN marks "not sampled" (user has no labels in row t).
  double nu(std::size_t l, Category t) const { return nu_[l * n_categories() + t]; }
  int s(std::size_t l, Category t, Category c) const {
    return s_[(l * n_categories() + t) * n_categories() + c];
  }
  void resize_aux_variables() {
    const std::size_t c = n_categories();
    nu_.assign(n_users() * c, std::numeric_limits<double>::quiet_NaN());
    s_.assign(n_users() * c * c, 0);
  }
  void set_nu(std::size_t l, Category t, double v) { nu_[l * n_categories() + t] = v; }
  void set_s(std::size_t l, Category t, Category c, int v) {
    s_[(l * n_categories() + t) * n_categories() + c] = v;
  }
  bool has_aux_variables() const noexcept { return !nu_.empty(); }

  /// Counts agree with a full recount and no cell went negative.
  bool consistent(const LabelMatrix& labels) const {
    if (!partition_.consistent() || !counts_.all_non_negative()) return false;
    return counts_ == build_counts(labels, z_, partition_);
  }

 private:
  void apply_instance(const LabelMatrix& labels, std::size_t i, int delta) {
    const Category t = z_[i];
    counts_.add_truth(t, delta);
    for (const auto& e : labels.instance_labels(i)) {
      counts_.add_annotation(e.index, partition_.cluster_of(e.index), t, e.label, delta);
    }
  }

  void release_from_pool(ClusterId id) {
    auto it = std::find(aux_pool_.begin(), aux_pool_.end(), id);
    if (it != aux_pool_.end()) aux_pool_.erase(it);
  }

  ClusterId allocate_id() const {
    for (ClusterId id = 0;; ++id) {
      if (!partition_.is_live(id) && !in_pool(id)) return id;
    }
  }

  GroundTruth z_;
  Partition partition_;
  double alpha_ = 1.0;
  CountTensor counts_;
  std::vector<char> instance_attached_;
  std::vector<ClusterParams> params_;
  std::vector<ClusterId> aux_pool_;
  std::vector<double> nu_;
  std::vector<int> s_;
};

}  // namespace bncrowd
