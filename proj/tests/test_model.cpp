// Apache License, Version 2.0, refer to LICENSE.txt

#include <cmath>
#include <limits>
#include <random>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/gamma.hpp>
#include <gtest/gtest.h>

#include "bncrowd/model.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace bncrowd;

namespace {

double dm_row(double beta, const Eigen::RowVectorXd& eta, const std::vector<int>& n) {
  int total = 0;
  for (int v : n) total += v;
  return detail::log_dm_row(beta, eta, total, [&](Category c) { return n[c]; });
}

Partition random_partition(std::size_t L, std::mt19937_64& rng) {
  std::vector<ClusterId> a(L);
  for (auto& v : a) v = static_cast<ClusterId>(rng() % 3) * 4 + 1;
  return Partition(a);
}

}  // namespace

TEST(Evidence, DirichletMultinomialMatchesQuadrature) {
  // Two categories with exponents below one as well as above.
  for (auto [beta, e0, n0, n1] : std::vector<std::tuple<double, double, int, int>>{
           {3.0, 0.7, 4, 1}, {0.4, 0.3, 0, 2}, {10.0, 0.5, 7, 7}, {1.0, 0.9, 0, 0}}) {
    Eigen::RowVectorXd eta(2);
    eta << e0, 1.0 - e0;
    const double want = oracle::dm_evidence_quadrature({n0, n1}, {beta * e0, beta * (1 - e0)});
    EXPECT_NEAR(dm_row(beta, eta, {n0, n1}), std::log(want), 1e-9) << beta << " " << n0;
  }
  Eigen::RowVectorXd eta3(3);
  eta3 << 0.5, 0.3, 0.2;
  const double beta = 6.0;
  const double want = oracle::dm_evidence_quadrature({2, 1, 3}, {3.0, 1.8, 1.2});
  EXPECT_NEAR(dm_row(beta, eta3, {2, 1, 3}), std::log(want), 1e-8);
}

TEST(Likelihood, SingletonClustersEqualIndependentModel) {
  const auto y = fixture::random_labels(9, 5, 3, 0.6, 21);
  const auto z = fixture::random_truth(9, 3, 22);
  const auto h = fixture::skewed_hypers(3);
  const auto n = build_counts(y, z, Partition::singletons(5));
  EXPECT_NEAR(log_collapsed_likelihood_cbcc(n, h), log_collapsed_likelihood_ibcc(n, h), 1e-10);
}

TEST(Likelihood, JointMatchesDirectFormula) {
  std::mt19937_64 rng(31);
  const auto h = fixture::skewed_hypers(3);
  for (int rep = 0; rep < 10; ++rep) {
    const auto y = fixture::random_labels(6, 5, 3, 0.7, 100 + rep);
    const auto z = fixture::random_truth(6, 3, 200 + rep);
    const Partition p = random_partition(5, rng);
    const double alpha = 0.3 + rep;
    GibbsState s(y, z, p, alpha);
    const double want = oracle::log_joint_cbcc(y, z, p.canonical_labels(), h, alpha);
    EXPECT_NEAR(log_joint(ModelKind::CBCC, s, h), want, 1e-9);
  }
}

TEST(CrpPrior, NormalisesOverAllPartitions) {
  for (double alpha : {0.2, 1.0, 7.5}) {
    double total = 0.0;
    for (const auto& rgs : oracle::set_partitions(5)) {
      total += std::exp(log_crp_prior(Partition(std::vector<ClusterId>(rgs.begin(), rgs.end())),
                                      alpha));
    }
    EXPECT_NEAR(total, 1.0, 1e-12) << alpha;
  }
  // Two users share a cluster with probability 1 / (1 + alpha).
  EXPECT_NEAR(std::exp(log_crp_prior(std::vector<std::size_t>{2}, 3.0)), 0.25, 1e-14);
}

TEST(Densities, MatchReferenceDistributions) {
  const boost::math::gamma_distribution<double> g(20.0, 0.5);
  EXPECT_NEAR(log_gamma_density(9.3, 20.0, 2.0), std::log(boost::math::pdf(g, 9.3)), 1e-10);
  Eigen::RowVectorXd x(2), conc(2);
  x << 0.3, 0.7;
  conc << 2.1, 0.9;
  const boost::math::beta_distribution<double> b(2.1, 0.9);
  EXPECT_NEAR(log_dirichlet_density(x, conc), std::log(boost::math::pdf(b, 0.3)), 1e-10);
}

TEST(PriorCorrelation, ClosedFormCases) {
  Eigen::VectorXd eta(3);
  eta << 0.7, 0.2, 0.1;
  EXPECT_NEAR(prior_correlation_cbcc(1.0, 3.0, eta, 0, 0), 0.125, 1e-15);
  const double expected = -0.125 * std::sqrt(0.7 * 0.2 / (0.3 * 0.8));
  EXPECT_NEAR(prior_correlation_cbcc(1.0, 3.0, eta, 0, 1), expected, 1e-15);
  EXPECT_EQ(prior_correlation_cbcc(std::numeric_limits<double>::infinity(), 3.0, eta, 0, 1), 0.0);
  EXPECT_LT(std::abs(prior_correlation_cbcc(1e4, 3.0, eta, 1, 1)), 1e-3);
  Eigen::VectorXd point(2);
  point << 1.0, 1e-300;
  EXPECT_THROW(prior_correlation_cbcc(1.0, 3.0, point, 0, 1), DegenerateDistributionError);
  EXPECT_THROW(prior_correlation_cbcc(0.0, 3.0, eta, 0, 1), DomainError);
  EXPECT_THROW(prior_correlation_cbcc(1.0, 3.0, eta, 0, 3), DomainError);
}

TEST(PriorCorrelation, AgreesWithForwardSimulation) {
  const std::vector<double> eta{0.7, 0.2, 0.1};
  Eigen::Map<const Eigen::VectorXd> e(eta.data(), 3);
  for (auto [a, b] : std::vector<std::pair<int, int>>{{0, 0}, {0, 2}}) {
    const auto mc = oracle::mc_prior_correlation(0.5, 2.0, eta, a, b, 200000, 17 + a + b);
    EXPECT_NEAR(mc.corr, prior_correlation_cbcc(0.5, 2.0, e, a, b), 4 * mc.se) << a << b;
  }
}

TEST(Likelihood, HierarchicalTendsToClusterConfusionAtHugePrecision) {
  std::mt19937_64 rng(41);
  for (int rep = 0; rep < 5; ++rep) {
    const auto y = fixture::random_labels(8, 6, 3, 0.6, 300 + rep);
    const auto z = fixture::random_truth(8, 3, 400 + rep);
    const Partition p = random_partition(6, rng);
    const auto n = build_counts(y, z, p);
    std::map<ClusterId, ClusterParams> params;
    for (ClusterId id : p.clusters()) {
      Eigen::MatrixXd eta(3, 3);
      for (int t = 0; t < 3; ++t) {
        Eigen::Vector3d r = Eigen::Vector3d::Random().cwiseAbs().array() + 0.1;
        eta.row(t) = (r / r.sum()).transpose();
      }
      params[id] = ClusterParams{Eigen::VectorXd::Constant(3, 1e9), eta};
    }
    double direct = 0.0;  // sum over clusters of n_mtc log eta^m_tc
    for (ClusterId id : p.clusters()) {
      for (int t = 0; t < 3; ++t) {
        for (int c = 0; c < 3; ++c) direct += n.cluster(id, t, c) * std::log(params[id].eta(t, c));
      }
    }
    const double hier = log_collapsed_likelihood_hcbcc(
        n, p, [&](ClusterId id) -> const ClusterParams& { return params.at(id); });
    EXPECT_NEAR(hier, direct, 1e-4);
  }
}

TEST(ModelKind, ParseAndPrint) {
  for (auto m : {ModelKind::MajorityVote, ModelKind::IBCC, ModelKind::CBCC, ModelKind::HCBCC}) {
    EXPECT_EQ(parse_model_kind(to_string(m)), m);
  }
  EXPECT_THROW(parse_model_kind("dawid-skene"), UsageError);
  const auto y = fixture::dense_labels(2, 2, 2, 1);
  GibbsState s(y, {0, 0}, Partition::singletons(2), 1.0);
  EXPECT_THROW(log_joint(ModelKind::MajorityVote, s, Hyperparameters::defaults(2)),
               UnsupportedModelError);
}
