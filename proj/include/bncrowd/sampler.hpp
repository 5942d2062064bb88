// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "bncrowd/core.hpp"
#include "bncrowd/gibbs_state.hpp"
#include "bncrowd/model.hpp"
#include "bncrowd/special.hpp"

namespace bncrowd {

struct ChainConfig {
  std::size_t n_iterations = 10000;
  std::size_t burn_in = 3000;
  std::uint64_t seed = 0;
  std::size_t alpha_subiterations = 5;  // 0 keeps alpha fixed at its initial value
  std::size_t h_aux_clusters = 10;
  std::size_t refresh_interval = 1;
  std::optional<double> initial_alpha;  // defaults to a_alpha / b_alpha

  void validate(ModelKind model) const {
    if (n_iterations == 0) throw DomainError("chain: n_iterations must be positive");
    if (burn_in >= n_iterations) throw DomainError("chain: burn_in must be < n_iterations");
    if (model == ModelKind::HCBCC && h_aux_clusters < 1) {
      throw DomainError("chain: h_aux_clusters must be >= 1 for hcbcc");
    }
    if (refresh_interval < 1) throw DomainError("chain: refresh_interval must be >= 1");
    if (initial_alpha && !(*initial_alpha > 0.0)) {
      throw DomainError("chain: initial_alpha must be positive");
    }
  }
};

struct SampleRecord {
  std::size_t iteration = 0;
  GroundTruth z;
  Partition partition;
  double alpha = 0.0;
  double log_joint = 0.0;
  // Live-cluster parameters; hierarchical model only.
  std::vector<std::pair<ClusterId, ClusterParams>> cluster_params;
};

struct SweepOptions {
  std::size_t alpha_subiterations = 5;
  std::size_t h_aux_clusters = 10;
  std::size_t refresh_interval = 1;
  bool move_users = true;
};

// ---------------------------------------------------------------------------
// Majority voting

namespace detail {

template <class URBG>
Category plurality(const LabelMatrix& labels, std::size_t i, URBG& rng, bool allow_empty) {
  const int C = labels.n_categories();
  std::vector<int> tally(C, 0);
  for (const auto& e : labels.instance_labels(i)) ++tally[e.label];
  const int best = *std::max_element(tally.begin(), tally.end());
  if (best == 0 && !allow_empty) {
    throw CoverageError("majority vote: instance " + std::to_string(i) + " has no labels");
  }
  std::vector<Category> winners;
  for (Category c = 0; c < C; ++c) {
    if (tally[c] == best) winners.push_back(c);
  }
  if (winners.size() == 1) return winners.front();
  std::uniform_int_distribution<std::size_t> pick(0, winners.size() - 1);
  return winners[pick(rng)];
}

}  // namespace detail

/// Per-instance most frequent label; ties broken uniformly at random.
template <class URBG>
GroundTruth majority_vote(const LabelMatrix& labels, URBG& rng) {
  GroundTruth z(labels.n_instances());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = detail::plurality(labels, i, rng, false);
  return z;
}

// ---------------------------------------------------------------------------
// Conditionals. The truth conditionals expect instance i to be detached; the
// user conditionals expect user l to be detached.

/// log p(z_i = t | rest) up to a constant, clustered model.
inline void truth_log_weights_cbcc(const GibbsState& state, const LabelMatrix& labels,
                                   const Hyperparameters& h, std::size_t i,
                                   std::vector<double>& out) {
  const CountTensor& n = state.counts();
  const Partition& pi = state.partition();
  const int C = state.n_categories();
  const auto row = labels.instance_labels(i);
  out.assign(C, 0.0);
  for (Category t = 0; t < C; ++t) {
    double w = std::log(n.truth(t) + h.epsilon * h.mu[t]);
    for (std::size_t k = 0; k < row.size(); ++k) {
      const ClusterId m = pi.cluster_of(row[k].index);
      const Category y = row[k].label;
      int seen_cluster = 0;
      int seen_label = 0;
      for (std::size_t j = 0; j < k; ++j) {
        if (pi.cluster_of(row[j].index) != m) continue;
        ++seen_cluster;
        if (row[j].label == y) ++seen_label;
      }
      w += std::log(n.cluster(m, t, y) + h.beta[t] * h.eta(t, y) + seen_label) -
           std::log(n.cluster_total(m, t) + h.beta[t] + seen_cluster);
    }
    out[t] = w;
  }
}

/// log p(z_i = t | rest) up to a constant, independent model (per-user counts).
inline void truth_log_weights_ibcc(const GibbsState& state, const LabelMatrix& labels,
                                   const Hyperparameters& h, std::size_t i,
                                   std::vector<double>& out) {
  const CountTensor& n = state.counts();
  const int C = state.n_categories();
  out.assign(C, 0.0);
  for (Category t = 0; t < C; ++t) {
    double w = std::log(n.truth(t) + h.epsilon * h.mu[t]);
    for (const auto& e : labels.instance_labels(i)) {
      w += std::log(n.user(e.index, t, e.label) + h.beta[t] * h.eta(t, e.label)) -
           std::log(n.user_total(e.index, t) + h.beta[t]);
    }
    out[t] = w;
  }
}

/// log p(z_i = t | rest) up to a constant, hierarchical model. Each user's
/// predictive uses the precision and mean of the cluster it belongs to.
inline void truth_log_weights_hcbcc(const GibbsState& state, const LabelMatrix& labels,
                                    const Hyperparameters& h, std::size_t i,
                                    std::vector<double>& out) {
  const CountTensor& n = state.counts();
  const int C = state.n_categories();
  out.assign(C, 0.0);
  for (Category t = 0; t < C; ++t) {
    double w = std::log(n.truth(t) + h.epsilon * h.mu[t]);
    for (const auto& e : labels.instance_labels(i)) {
      const ClusterParams& p = state.params(state.partition().cluster_of(e.index));
      w += std::log(n.user(e.index, t, e.label) + p.beta[t] * p.eta(t, e.label)) -
           std::log(n.user_total(e.index, t) + p.beta[t]);
    }
    out[t] = w;
  }
}

/// log of the collapsed predictive ratio for adding user l's counts to
/// cluster m (m may be empty / not live).
inline double user_cluster_log_ratio(const CountTensor& n, std::size_t l, ClusterId m,
                                     const Hyperparameters& h) {
  const int C = n.n_categories();
  double v = 0.0;
  for (Category t = 0; t < C; ++t) {
    const int nl = n.user_total(l, t);
    if (nl == 0) continue;
    const double nm = n.cluster_total(m, t) + h.beta[t];
    v += log_gamma(nm) - log_gamma(nm + nl);
    for (Category c = 0; c < C; ++c) {
      const int nlc = n.user(l, t, c);
      if (nlc == 0) continue;
      const double nmc = n.cluster(m, t, c) + h.beta[t] * h.eta(t, c);
      v += log_gamma(nmc + nlc) - log_gamma(nmc);
    }
  }
  return v;
}

/// Candidate clusters and their log weights for a detached user, clustered
/// model. The last candidate is kNewCluster.
inline void user_log_weights_cbcc(const GibbsState& state, const Hyperparameters& h,
                                  std::size_t l, std::vector<ClusterId>& candidates,
                                  std::vector<double>& out) {
  const Partition& pi = state.partition();
  candidates.assign(pi.clusters().begin(), pi.clusters().end());
  candidates.push_back(kNewCluster);
  out.resize(candidates.size());
  for (std::size_t k = 0; k + 1 < candidates.size(); ++k) {
    const ClusterId m = candidates[k];
    out[k] = std::log(static_cast<double>(pi.cluster_size(m))) +
             user_cluster_log_ratio(state.counts(), l, m, h);
  }
  // A never-used slot has all-zero counts; kNewCluster reads as such.
  out.back() = std::log(state.alpha()) + user_cluster_log_ratio(state.counts(), l, kNewCluster, h);
}

/// Candidates and log weights for a detached user, hierarchical model: live
/// clusters weighted by size, pooled auxiliaries by alpha / h.
inline void user_log_weights_hcbcc(const GibbsState& state, std::size_t l,
                                   std::vector<ClusterId>& candidates, std::vector<double>& out) {
  const Partition& pi = state.partition();
  const auto& pool = state.aux_pool();
  candidates.assign(pi.clusters().begin(), pi.clusters().end());
  const std::size_t n_live = candidates.size();
  candidates.insert(candidates.end(), pool.begin(), pool.end());
  out.resize(candidates.size());
  const double log_aux = std::log(state.alpha() / static_cast<double>(pool.size()));
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const ClusterId m = candidates[k];
    const double prior =
        k < n_live ? std::log(static_cast<double>(pi.cluster_size(m))) : log_aux;
    out[k] = prior + log_user_evidence(state.counts(), l, state.params(m));
  }
}

// ---------------------------------------------------------------------------
// Hyperparameter and auxiliary-variable updates

/// Auxiliary-variable update of the CRP concentration under a
/// Gamma(a_alpha, b_alpha) prior, given M live clusters among L users.
template <class URBG>
double sample_alpha(double alpha, std::size_t n_clusters, std::size_t n_users, double a_alpha,
                    double b_alpha, URBG& rng, std::size_t rounds) {
  if (n_clusters < 1 || n_users < 1) throw DomainError("sample_alpha: need M >= 1 and L >= 1");
  const double M = static_cast<double>(n_clusters);
  const double L = static_cast<double>(n_users);
  for (std::size_t r = 0; r < rounds; ++r) {
    const double x = sample_beta(alpha + 1.0, L, rng);
    const double rate = b_alpha - std::log(x);
    const double odds = (a_alpha + M - 1.0) / (L * rate);
    const double shape = sample_uniform(rng) * (1.0 + odds) < odds ? a_alpha + M : a_alpha + M - 1.0;
    alpha = sample_gamma(shape, rate, rng);
  }
  return alpha;
}

template <class URBG>
ClusterParams draw_cluster_params(const Hyperparameters& h, URBG& rng) {
  const int C = h.n_categories();
  ClusterParams p{Eigen::VectorXd(C), Eigen::MatrixXd(C, C)};
  for (int t = 0; t < C; ++t) {
    p.beta[t] = sample_gamma(h.a[t], h.b[t], rng);
    p.eta.row(t) = sample_dirichlet(h.phi[t] * h.gamma.row(t).transpose(), rng).transpose();
  }
  return p;
}

/// nu_lt ~ Beta(beta_t^q, n_lt) and s_ltc ~ Antoniak(n_ltc, beta_t^q eta_tc^q).
/// Rows with n_lt = 0 carry no auxiliary factor: nu is left unset, s = 0.
template <class URBG>
void sample_aux_variables(GibbsState& state, URBG& rng) {
  if (!state.has_aux_variables()) state.resize_aux_variables();
  const CountTensor& n = state.counts();
  const int C = state.n_categories();
  for (std::size_t l = 0; l < state.n_users(); ++l) {
    const ClusterParams& p = state.params(state.partition().cluster_of(l));
    for (Category t = 0; t < C; ++t) {
      const int nt = n.user_total(l, t);
      if (nt == 0) {
        state.set_nu(l, t, std::numeric_limits<double>::quiet_NaN());
        for (Category c = 0; c < C; ++c) state.set_s(l, t, c, 0);
        continue;
      }
      state.set_nu(l, t, sample_beta(p.beta[t], static_cast<double>(nt), rng));
      for (Category c = 0; c < C; ++c) {
        state.set_s(l, t, c, sample_antoniak(n.user(l, t, c), p.beta[t] * p.eta(t, c), rng));
      }
    }
  }
}

/// Conjugate updates of (eta^m, beta^m) for every live cluster given nu, s.
template <class URBG>
void sample_cluster_params(GibbsState& state, const Hyperparameters& h, URBG& rng) {
  const Partition& pi = state.partition();
  const CountTensor& n = state.counts();
  const int C = state.n_categories();
  const std::size_t bound = pi.id_bound();
  // Per-cluster sums of s (C x C) and of log nu (C).
  std::vector<double> s_sum(bound * C * C, 0.0);
  std::vector<double> log_nu_sum(bound * C, 0.0);
  for (std::size_t l = 0; l < state.n_users(); ++l) {
    const ClusterId m = pi.cluster_of(l);
    for (Category t = 0; t < C; ++t) {
      if (n.user_total(l, t) == 0) continue;
      log_nu_sum[m * C + t] += std::log(state.nu(l, t));
      for (Category c = 0; c < C; ++c) s_sum[(m * C + t) * C + c] += state.s(l, t, c);
    }
  }
  for (ClusterId m : pi.clusters()) {
    ClusterParams p{Eigen::VectorXd(C), Eigen::MatrixXd(C, C)};
    for (Category t = 0; t < C; ++t) {
      Eigen::VectorXd conc = h.phi[t] * h.gamma.row(t).transpose();
      double s_total = 0.0;
      for (Category c = 0; c < C; ++c) {
        conc[c] += s_sum[(m * C + t) * C + c];
        s_total += s_sum[(m * C + t) * C + c];
      }
      p.eta.row(t) = sample_dirichlet(conc, rng).transpose();
      p.beta[t] = sample_gamma(h.a[t] + s_total, h.b[t] - log_nu_sum[m * C + t], rng);
    }
    state.set_params(m, std::move(p));
  }
}

// ---------------------------------------------------------------------------
// Sweeps

namespace detail {

template <class URBG, class WeightFn>
void resample_truths(GibbsState& state, const LabelMatrix& labels, URBG& rng, WeightFn&& weights) {
  std::vector<double> w;
  for (std::size_t i = 0; i < state.n_instances(); ++i) {
    state.detach_instance(labels, i);
    weights(i, w);
    state.attach_instance(labels, i, static_cast<Category>(sample_categorical_log(w, rng)));
  }
}

template <class URBG>
void resample_alpha(GibbsState& state, const Hyperparameters& h, std::size_t rounds, URBG& rng) {
  if (rounds == 0) return;
  state.set_alpha(sample_alpha(state.alpha(), state.partition().n_clusters(), state.n_users(),
                               h.a_alpha, h.b_alpha, rng, rounds));
}

}  // namespace detail

/// One sweep of the independent model: every z_i from its exact conditional.
template <class URBG>
void gibbs_sweep_ibcc(GibbsState& state, const LabelMatrix& labels, const Hyperparameters& h,
                      URBG& rng) {
  detail::resample_truths(state, labels, rng, [&](std::size_t i, std::vector<double>& w) {
    truth_log_weights_ibcc(state, labels, h, i, w);
  });
}

/// One sweep of the clustered model: all user assignments, all truths, then
/// alpha. With move_users = false and a singleton partition this is the
/// independent model.
template <class URBG>
void gibbs_sweep_cbcc(GibbsState& state, const LabelMatrix& labels, const Hyperparameters& h,
                      URBG& rng, const SweepOptions& opts = {}) {
  if (opts.move_users) {
    std::vector<ClusterId> candidates;
    std::vector<double> w;
    for (std::size_t l = 0; l < state.n_users(); ++l) {
      state.detach_user(l);
      user_log_weights_cbcc(state, h, l, candidates, w);
      state.attach_user(l, candidates[sample_categorical_log(w, rng)]);
    }
  }
  detail::resample_truths(state, labels, rng, [&](std::size_t i, std::vector<double>& w) {
    truth_log_weights_cbcc(state, labels, h, i, w);
  });
  if (opts.move_users) detail::resample_alpha(state, h, opts.alpha_subiterations, rng);
}

/// Sets up the pool of h auxiliary empty clusters with prior draws.
template <class URBG>
void fill_aux_pool(GibbsState& state, const Hyperparameters& h, std::size_t n_aux, URBG& rng) {
  while (state.aux_pool().size() < n_aux) {
    const ClusterId id = state.push_pool_id();
    state.set_params(id, draw_cluster_params(h, rng));
  }
}

/// Reuse-style reassignment of one user in the hierarchical model. An
/// emptied source cluster displaces a uniformly chosen auxiliary; a chosen
/// auxiliary is promoted and replaced by a fresh prior draw.
template <class URBG>
void hcbcc_update_user(GibbsState& state, const Hyperparameters& h, std::size_t l,
                       std::size_t n_aux, URBG& rng, std::vector<ClusterId>& candidates,
                       std::vector<double>& w) {
  const auto detached = state.detach_user(l);
  if (detached.emptied) {
    std::uniform_int_distribution<std::size_t> slot(0, state.aux_pool().size() - 1);
    state.recycle_into_pool(slot(rng), detached.from);
  }
  user_log_weights_hcbcc(state, l, candidates, w);
  const ClusterId chosen = candidates[sample_categorical_log(w, rng)];
  const bool promoted = state.in_pool(chosen);
  state.attach_user(l, chosen);
  if (promoted) fill_aux_pool(state, h, n_aux, rng);
}

/// One sweep of the hierarchical model, in the order users, auxiliaries
/// (nu, s), live-cluster parameters, auxiliary-pool refresh, truths, alpha.
template <class URBG>
void gibbs_sweep_hcbcc(GibbsState& state, const LabelMatrix& labels, const Hyperparameters& h,
                       URBG& rng, const SweepOptions& opts = {}, std::size_t sweep_index = 0) {
  if (state.aux_pool().size() != opts.h_aux_clusters) {
    throw StateError("hcbcc sweep: auxiliary pool does not hold h clusters");
  }
  std::vector<ClusterId> candidates;
  std::vector<double> w;
  if (opts.move_users) {
    for (std::size_t l = 0; l < state.n_users(); ++l) {
      hcbcc_update_user(state, h, l, opts.h_aux_clusters, rng, candidates, w);
    }
  }
  sample_aux_variables(state, rng);
  sample_cluster_params(state, h, rng);
  if (sweep_index % opts.refresh_interval == 0) {
    for (ClusterId id : state.aux_pool()) state.set_params(id, draw_cluster_params(h, rng));
  }
  detail::resample_truths(state, labels, rng, [&](std::size_t i, std::vector<double>& wt) {
    truth_log_weights_hcbcc(state, labels, h, i, wt);
  });
  if (opts.move_users) detail::resample_alpha(state, h, opts.alpha_subiterations, rng);
}

// ---------------------------------------------------------------------------
// Chain driver

/// Majority-vote truths (uniform tie-break, uniform draw for unlabeled
/// instances), one cluster for the clustered models or singletons for iBCC,
/// alpha at its prior mean, hierarchical parameters from their priors.
template <class URBG>
GibbsState initialize_state(ModelKind model, const LabelMatrix& labels, const Hyperparameters& h,
                            const ChainConfig& config, URBG& rng) {
  GroundTruth z(labels.n_instances());
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (labels.instance_labels(i).empty()) {
      std::uniform_int_distribution<int> any(0, labels.n_categories() - 1);
      z[i] = any(rng);
    } else {
      z[i] = detail::plurality(labels, i, rng, false);
    }
  }
  Partition pi = model == ModelKind::IBCC ? Partition::singletons(labels.n_users())
                                          : Partition::single_cluster(labels.n_users());
  const double alpha = config.initial_alpha.value_or(h.a_alpha / h.b_alpha);
  GibbsState state(labels, std::move(z), std::move(pi), alpha);
  if (model == ModelKind::HCBCC) {
    for (ClusterId id : state.partition().clusters()) {
      state.set_params(id, draw_cluster_params(h, rng));
    }
    fill_aux_pool(state, h, config.h_aux_clusters, rng);
    state.resize_aux_variables();
  }
  return state;
}

inline SweepOptions sweep_options(const ChainConfig& config) {
  return SweepOptions{config.alpha_subiterations, config.h_aux_clusters, config.refresh_interval,
                      true};
}

template <class URBG>
void gibbs_sweep(ModelKind model, GibbsState& state, const LabelMatrix& labels,
                 const Hyperparameters& h, URBG& rng, const SweepOptions& opts,
                 std::size_t sweep_index) {
  switch (model) {
    case ModelKind::IBCC: gibbs_sweep_ibcc(state, labels, h, rng); return;
    case ModelKind::CBCC: gibbs_sweep_cbcc(state, labels, h, rng, opts); return;
    case ModelKind::HCBCC: gibbs_sweep_hcbcc(state, labels, h, rng, opts, sweep_index); return;
    case ModelKind::MajorityVote: break;
  }
  throw UnsupportedModelError("majority voting is not an MCMC model");
}

inline SampleRecord snapshot(ModelKind model, const GibbsState& state, const Hyperparameters& h,
                             std::size_t iteration) {
  SampleRecord r{iteration, state.z(), state.partition(), state.alpha(),
                 log_joint(model, state, h), {}};
  if (model == ModelKind::HCBCC) {
    for (ClusterId id : state.partition().clusters()) {
      r.cluster_params.emplace_back(id, state.params(id));
    }
  }
  return r;
}

inline void check_chain_inputs(ModelKind model, const LabelMatrix& labels,
                               const Hyperparameters& h, const ChainConfig& config) {
  if (model == ModelKind::MajorityVote) {
    throw UnsupportedModelError("run_chain: majority voting has no chain");
  }
  config.validate(model);
  h.validate();
  if (h.n_categories() != labels.n_categories()) {
    throw DimensionError("hyperparameters are dimensioned for " +
                         std::to_string(h.n_categories()) + " categories, labels have " +
                         std::to_string(labels.n_categories()));
  }
}

/// Runs one chain; `visit(state, iteration)` is called after every sweep.
template <class Visitor>
void run_chain_visit(ModelKind model, const LabelMatrix& labels, const Hyperparameters& h,
                     const ChainConfig& config, Visitor&& visit) {
  check_chain_inputs(model, labels, h, config);
  Rng rng = make_rng(config.seed, 0);
  GibbsState state = initialize_state(model, labels, h, config, rng);
  const SweepOptions opts = sweep_options(config);
  for (std::size_t it = 0; it < config.n_iterations; ++it) {
    gibbs_sweep(model, state, labels, h, rng, opts, it);
    visit(static_cast<const GibbsState&>(state), it);
  }
}

/// Runs one chain and records every sweep from burn_in on. Deterministic
/// given the inputs and config.seed.
inline std::vector<SampleRecord> run_chain(ModelKind model, const LabelMatrix& labels,
                                           const Hyperparameters& h, const ChainConfig& config) {
  std::vector<SampleRecord> out;
  out.reserve(config.n_iterations > config.burn_in ? config.n_iterations - config.burn_in : 0);
  run_chain_visit(model, labels, h, config, [&](const GibbsState& state, std::size_t it) {
    if (it >= config.burn_in) out.push_back(snapshot(model, state, h, it));
  });
  return out;
}

}  // namespace bncrowd
