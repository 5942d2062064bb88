// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "bncrowd/core.hpp"
#include "bncrowd/gibbs_state.hpp"
#include "bncrowd/special.hpp"

namespace bncrowd {

enum class ModelKind { MajorityVote, IBCC, CBCC, HCBCC };

inline std::string_view to_string(ModelKind m) {
  switch (m) {
    case ModelKind::MajorityVote: return "mv";
    case ModelKind::IBCC: return "ibcc";
    case ModelKind::CBCC: return "cbcc";
    case ModelKind::HCBCC: return "hcbcc";
  }
  return "?";
}

inline ModelKind parse_model_kind(std::string_view name) {
  if (name == "mv") return ModelKind::MajorityVote;
  if (name == "ibcc") return ModelKind::IBCC;
  if (name == "cbcc") return ModelKind::CBCC;
  if (name == "hcbcc") return ModelKind::HCBCC;
  throw UsageError("unknown model '" + std::string(name) + "' (expected mv, ibcc, cbcc or hcbcc)");
}

namespace detail {

// log Gamma(n + x) - log Gamma(x); exact zero for n == 0.
inline double log_rising(double x, int n) {
  return n == 0 ? 0.0 : log_gamma(x + n) - log_gamma(x);
}

// Dirichlet-multinomial evidence of one count row under Dir(precision * mean).
template <class CountAt>
double log_dm_row(double precision, const Eigen::Ref<const Eigen::RowVectorXd>& mean, int total,
                  CountAt&& count_at) {
  if (total == 0) return 0.0;
  double v = -log_rising(precision, total);
  for (Eigen::Index c = 0; c < mean.size(); ++c) {
    v += log_rising(precision * mean[c], count_at(static_cast<Category>(c)));
  }
  return v;
}

}  // namespace detail

/// log p(Y | partition, z, eta, beta) with the cluster confusion matrices
/// integrated out. With every user in a singleton cluster this is the iBCC
/// likelihood.
inline double log_collapsed_likelihood_cbcc(const CountTensor& counts, const Hyperparameters& h) {
  const int C = counts.n_categories();
  double total = 0.0;
  for (ClusterId m = 0; m < counts.n_cluster_slots(); ++m) {
    for (Category t = 0; t < C; ++t) {
      total += detail::log_dm_row(h.beta[t], h.eta.row(t), counts.cluster_total(m, t),
                                  [&](Category c) { return counts.cluster(m, t, c); });
    }
  }
  return total;
}

/// Same quantity computed from per-user counts, i.e. the iBCC likelihood.
inline double log_collapsed_likelihood_ibcc(const CountTensor& counts, const Hyperparameters& h) {
  const int C = counts.n_categories();
  double total = 0.0;
  for (std::size_t l = 0; l < counts.n_users(); ++l) {
    for (Category t = 0; t < C; ++t) {
      total += detail::log_dm_row(h.beta[t], h.eta.row(t), counts.user_total(l, t),
                                  [&](Category c) { return counts.user(l, t, c); });
    }
  }
  return total;
}

/// log p(z | epsilon, mu) with the category proportions integrated out.
inline double log_collapsed_z_prior(const CountTensor& counts, const Hyperparameters& h) {
  const int C = counts.n_categories();
  double v = -detail::log_rising(h.epsilon, counts.n_instances());
  for (Category t = 0; t < C; ++t) v += detail::log_rising(h.epsilon * h.mu[t], counts.truth(t));
  return v;
}

/// Per-user collapsed evidence of user l's counts under cluster parameters p.
inline double log_user_evidence(const CountTensor& counts, std::size_t l, const ClusterParams& p) {
  const int C = counts.n_categories();
  double v = 0.0;
  for (Category t = 0; t < C; ++t) {
    v += detail::log_dm_row(p.beta[t], p.eta.row(t), counts.user_total(l, t),
                            [&](Category c) { return counts.user(l, t, c); });
  }
  return v;
}

/// log p(Y | z, partition, eta^m, beta^m) of the hierarchical model, with the
/// per-user confusion matrices integrated out.
template <class ParamsLookup>
double log_collapsed_likelihood_hcbcc(const CountTensor& counts, const Partition& partition,
                                      ParamsLookup&& params_of) {
  double v = 0.0;
  for (std::size_t l = 0; l < partition.n_users(); ++l) {
    v += log_user_evidence(counts, l, params_of(partition.cluster_of(l)));
  }
  return v;
}

inline double log_collapsed_likelihood_hcbcc(const GibbsState& state) {
  return log_collapsed_likelihood_hcbcc(state.counts(), state.partition(),
                                        [&](ClusterId id) -> const ClusterParams& {
                                          return state.params(id);
                                        });
}

/// CRP probability of a partition with the given cluster sizes.
inline double log_crp_prior(const std::vector<std::size_t>& sizes, double alpha) {
  std::size_t n = 0;
  double v = 0.0;
  for (std::size_t s : sizes) {
    n += s;
    v += std::log(alpha) + log_gamma(static_cast<double>(s));
  }
  return v + log_gamma(alpha) - log_gamma(alpha + static_cast<double>(n));
}

inline double log_crp_prior(const Partition& partition, double alpha) {
  std::vector<std::size_t> sizes;
  sizes.reserve(partition.n_clusters());
  for (ClusterId id : partition.clusters()) sizes.push_back(partition.cluster_size(id));
  return log_crp_prior(sizes, alpha);
}

inline double log_gamma_density(double x, double shape, double rate) {
  return shape * std::log(rate) - log_gamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

inline double log_dirichlet_density(const Eigen::Ref<const Eigen::RowVectorXd>& x,
                                    const Eigen::Ref<const Eigen::RowVectorXd>& conc) {
  double v = log_gamma(conc.sum());
  for (Eigen::Index c = 0; c < x.size(); ++c) {
    v += (conc[c] - 1.0) * std::log(x[c]) - log_gamma(conc[c]);
  }
  return v;
}

/// Prior density of one cluster's (beta^m, eta^m).
inline double log_cluster_params_prior(const ClusterParams& p, const Hyperparameters& h) {
  double v = 0.0;
  for (Eigen::Index t = 0; t < p.beta.size(); ++t) {
    v += log_gamma_density(p.beta[t], h.a[t], h.b[t]);
    v += log_dirichlet_density(p.eta.row(t), h.phi[t] * h.gamma.row(t));
  }
  return v;
}

/// Prior correlation between I(y_il = a) and I(y_il' = b) for two users
/// given z_i = t under the clustered model. alpha may be +inf.
inline double prior_correlation_cbcc(double alpha, double beta_t,
                                     const Eigen::Ref<const Eigen::VectorXd>& eta_t, Category a,
                                     Category b) {
  if (!(alpha > 0.0) || !(beta_t > 0.0)) {
    throw DomainError("prior_correlation_cbcc: alpha and beta must be positive");
  }
  if (a < 0 || b < 0 || a >= eta_t.size() || b >= eta_t.size()) {
    throw DomainError("prior_correlation_cbcc: category out of range");
  }
  const double scale = (1.0 / (1.0 + alpha)) * (1.0 / (1.0 + beta_t));
  if (a == b) return scale;
  const double ea = eta_t[a];
  const double eb = eta_t[b];
  if (ea >= 1.0 || eb >= 1.0) {
    throw DegenerateDistributionError(
        "prior_correlation_cbcc: indicator has zero variance (eta component equals 1)");
  }
  return -scale * std::sqrt(ea * eb / ((1.0 - ea) * (1.0 - eb)));
}

/// Joint log score used for trace output and reference-sample selection:
/// CRP prior + collapsed z prior + collapsed likelihood, plus the cluster
/// parameter prior for the hierarchical model.
inline double log_joint(ModelKind model, const GibbsState& state, const Hyperparameters& h) {
  switch (model) {
    case ModelKind::IBCC:
      return log_collapsed_likelihood_ibcc(state.counts(), h) +
             log_collapsed_z_prior(state.counts(), h);
    case ModelKind::CBCC:
      return log_crp_prior(state.partition(), state.alpha()) +
             log_collapsed_likelihood_cbcc(state.counts(), h) +
             log_collapsed_z_prior(state.counts(), h);
    case ModelKind::HCBCC: {
      double v = log_crp_prior(state.partition(), state.alpha()) +
                 log_collapsed_likelihood_hcbcc(state) + log_collapsed_z_prior(state.counts(), h);
      for (ClusterId id : state.partition().clusters()) {
        v += log_cluster_params_prior(state.params(id), h);
      }
      return v;
    }
    case ModelKind::MajorityVote:
      break;
  }
  throw UnsupportedModelError("majority voting has no likelihood");
}

}  // namespace bncrowd
