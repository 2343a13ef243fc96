#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "strucgp/errors.hpp"
#include "strucgp/gaussian_ops.hpp"
#include "test_support.hpp"

using namespace strucgp;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

const FactorizationPolicy kExact{false};

double log_2pi() { return std::log(2.0 * std::numbers::pi); }

JointGaussianBlocks split(const VectorXd& mean, const MatrixXd& cov, Index n1) {
  const Index n2 = mean.size() - n1;
  return {mean.head(n1), mean.tail(n2), cov.topLeftCorner(n1, n1), cov.topRightCorner(n1, n2),
          cov.bottomRightCorner(n2, n2)};
}

// Draws from N(mean, cov) through an independent Cholesky factor.
MatrixXd draws(const VectorXd& mean, const MatrixXd& cov, Index count, std::mt19937_64& rng) {
  const MatrixXd l = cov.llt().matrixL();
  MatrixXd z = testing::random_matrix(mean.size(), count, rng);
  return (l * z).colwise() + mean;
}

}  // namespace

TEST_CASE("degenerate prior leaves the likelihood unchanged") {
  std::mt19937_64 rng(1);
  const MatrixXd a = testing::random_matrix(3, 2, rng);
  const MatrixXd sigma = testing::random_spd(3, rng);
  const VectorXd mu0 = testing::random_vector(2, rng);
  const GaussianDist d = marginalize_linear(a, sigma, mu0, MatrixXd::Zero(2, 2));
  CHECK(d.mean().isApprox(a * mu0));
  CHECK(d.cov().isApprox(sigma));
}

TEST_CASE("scalar marginal adds variances") {
  const GaussianDist d = marginalize_linear(MatrixXd::Ones(1, 1), MatrixXd::Ones(1, 1), VectorXd::Zero(1),
                                            MatrixXd::Ones(1, 1));
  CHECK(d.mean()(0) == 0.0);
  CHECK(d.cov()(0, 0) == 2.0);
}

TEST_CASE("marginal density matches Monte Carlo integration over the prior") {
  std::mt19937_64 rng(2);
  const Index draws_per_point = 200000;
  for (int instance = 0; instance < 2; ++instance) {
    const MatrixXd a = testing::random_matrix(3, 2, rng);
    const MatrixXd sigma = testing::random_spd(3, rng);
    const VectorXd mu0 = testing::random_vector(2, rng);
    const MatrixXd sigma0 = testing::random_spd(2, rng, 0.2);
    const GaussianDist marginal = marginalize_linear(a, sigma, mu0, sigma0);
    const MatrixXd thetas = draws(mu0, sigma0, draws_per_point, rng);
    const MatrixXd means = a * thetas;
    for (int point = 0; point < 5; ++point) {
      const VectorXd y = marginal.mean() + testing::random_vector(3, rng);
      double sum = 0.0, sum_sq = 0.0;
      for (Index s = 0; s < draws_per_point; ++s) {
        const double p = std::exp(testing::dense_log_density(y, means.col(s), sigma));
        sum += p;
        sum_sq += p * p;
      }
      const double mc = sum / draws_per_point;
      const double se = std::sqrt((sum_sq / draws_per_point - mc * mc) / draws_per_point);
      CHECK(std::abs(std::exp(log_density(y, marginal)) - mc) <= 3.0 * se);
    }
  }
}

TEST_CASE("marginalization rejects non-conformable inputs") {
  CHECK_THROWS_AS((void)marginalize_linear(MatrixXd::Ones(3, 2), MatrixXd::Identity(3, 3), VectorXd::Zero(3),
                                           MatrixXd::Identity(3, 3)),
                  ValidationError);
}

TEST_CASE("marginal covariance is symmetric positive semi-definite") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const MatrixXd a = testing::random_matrix(6, 3, rng);
    const GaussianDist d = marginalize_linear(a, testing::random_spd(6, rng), testing::random_vector(3, rng),
                                              testing::random_spd(3, rng));
    CHECK(d.cov() == d.cov().transpose());
    CHECK(Eigen::SelfAdjointEigenSolver<MatrixXd>(d.cov()).eigenvalues().minCoeff() >= 0.0);
  }
}

TEST_CASE("conditioning on an independent block changes nothing") {
  std::mt19937_64 rng(4);
  JointGaussianBlocks j{testing::random_vector(2, rng), testing::random_vector(3, rng), testing::random_spd(2, rng),
                        MatrixXd::Zero(2, 3), testing::random_spd(3, rng)};
  const GaussianDist c = condition(j, testing::random_vector(2, rng));
  CHECK(c.mean() == j.mu2);
  CHECK(c.cov().isApprox(j.s22));
}

TEST_CASE("perfect correlation pins the conditional") {
  const JointGaussianBlocks j{VectorXd::Zero(1), VectorXd::Zero(1), MatrixXd::Ones(1, 1), MatrixXd::Ones(1, 1),
                              MatrixXd::Ones(1, 1)};
  const GaussianDist c = condition(j, VectorXd::Constant(1, 2.0), kExact);
  CHECK(c.mean()(0) == doctest::Approx(2.0));
  CHECK(c.cov()(0, 0) == doctest::Approx(0.0));
}

TEST_CASE("joint density factorizes into conditional times marginal") {
  std::mt19937_64 rng(5);
  for (int instance = 0; instance < 10; ++instance) {
    const MatrixXd cov = testing::random_spd(6, rng);
    const VectorXd mean = testing::random_vector(6, rng);
    const JointGaussianBlocks j = split(mean, cov, 3);
    for (int point = 0; point < 20; ++point) {
      const VectorXd x = mean + testing::random_vector(6, rng);
      const double joint = testing::dense_log_density(x, mean, cov);
      const double marginal = log_density(x.head(3), GaussianDist(j.mu1, j.s11, kExact));
      const double conditional = log_density(x.tail(3), condition(j, x.head(3), kExact));
      CHECK(std::abs(marginal + conditional - joint) <= 1e-10 * std::max(1.0, std::abs(joint)));
    }
  }
}

TEST_CASE("conditioning never increases marginal variance") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const JointGaussianBlocks j = split(testing::random_vector(7, rng), testing::random_spd(7, rng), 4);
    const GaussianDist c = condition(j, testing::random_vector(4, rng));
    CHECK(c.cov().trace() <= j.s22.trace() * (1.0 + 1e-12));
    CHECK(Eigen::SelfAdjointEigenSolver<MatrixXd>(c.cov()).eigenvalues().minCoeff() >= -1e-12);
  }
}

TEST_CASE("singular conditioning block needs truncation") {
  MatrixXd s11 = MatrixXd::Ones(2, 2);
  const JointGaussianBlocks j{VectorXd::Zero(2), VectorXd::Zero(1), s11, MatrixXd::Ones(2, 1), MatrixXd::Ones(1, 1)};
  CHECK_THROWS_AS((void)condition(j, VectorXd::Zero(2), kExact), FactorizationError);
  CHECK_NOTHROW((void)condition(j, VectorXd::Zero(2), FactorizationPolicy{}));
}

TEST_CASE("log-density reference values") {
  const GaussianDist standard(VectorXd::Zero(1), MatrixXd::Ones(1, 1));
  CHECK(log_density(VectorXd::Zero(1), standard) == doctest::Approx(-0.5 * log_2pi()).epsilon(1e-15));

  std::mt19937_64 rng(7);
  const MatrixXd cov = testing::random_spd(4, rng);
  const VectorXd mean = testing::random_vector(4, rng);
  CHECK(log_density(mean, GaussianDist(mean, cov)) ==
        doctest::Approx(-0.5 * std::log(cov.determinant()) - 2.0 * log_2pi()).epsilon(1e-12));
}

TEST_CASE("log-density agrees with a dense-inverse evaluation") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const MatrixXd cov = testing::random_spd(5, rng);
    const VectorXd mean = testing::random_vector(5, rng);
    const VectorXd y = testing::random_vector(5, rng);
    const double dense = testing::dense_log_density(y, mean, cov);
    CHECK(std::abs(log_density(y, GaussianDist(mean, cov)) - dense) <= 1e-10 * std::abs(dense));
    CHECK(std::abs(log_density(y, mean, cov, FactorizationPolicy{}) - dense) <= 1e-10 * std::abs(dense));
    CHECK(std::abs(log_density(y, mean, cov, kExact) - dense) <= 1e-10 * std::abs(dense));
  }
}

TEST_CASE("log-density is invariant under orthogonal changes of coordinates") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const Index n = 8;
    const MatrixXd cov = testing::random_spd(n, rng);
    const VectorXd mean = testing::random_vector(n, rng);
    const VectorXd y = testing::random_vector(n, rng);
    const MatrixXd q = Eigen::HouseholderQR<MatrixXd>(testing::random_matrix(n, n, rng)).householderQ();
    const double before = log_density(y, GaussianDist(mean, cov));
    const double after = log_density(q * y, GaussianDist(q * mean, q * cov * q.transpose()));
    CHECK(std::abs(before - after) <= 1e-9 * std::max(1.0, std::abs(before)));

    Eigen::PermutationMatrix<Eigen::Dynamic> p(n);
    p.setIdentity();
    std::shuffle(p.indices().data(), p.indices().data() + n, rng);
    const double permuted = log_density(p * y, GaussianDist(p * mean, p * cov * p.transpose()));
    CHECK(std::abs(before - permuted) <= 1e-9 * std::max(1.0, std::abs(before)));
  }
}

TEST_CASE("dimension mismatches are rejected") {
  const GaussianDist d(VectorXd::Zero(2), MatrixXd::Identity(2, 2));
  CHECK_THROWS_AS((void)log_density(VectorXd::Zero(3), d), ValidationError);
  CHECK_THROWS_AS(GaussianDist(VectorXd::Zero(2), MatrixXd::Identity(3, 3)), ValidationError);
}

TEST_CASE("mixture moments of trivial mixtures") {
  std::mt19937_64 rng(10);
  const Moments one{testing::random_vector(3, rng), testing::random_spd(3, rng)};
  const Moments m = mixture_moments(std::vector<Moments>{one});
  CHECK(m.mean == one.mean);
  CHECK(m.cov.isApprox(one.cov));

  const Moments pair = mixture_moments(std::vector<Moments>{{VectorXd::Constant(1, 1.0), MatrixXd::Zero(1, 1)},
                                                            {VectorXd::Constant(1, -1.0), MatrixXd::Zero(1, 1)}});
  CHECK(pair.mean(0) == 0.0);
  CHECK(pair.cov(0, 0) == doctest::Approx(1.0));

  CHECK_THROWS_AS((void)mixture_moments(std::vector<Moments>{}), ValidationError);
}

TEST_CASE("mixture moments agree with sampled mixture draws") {
  std::mt19937_64 rng(11);
  const int components = 500;
  std::vector<Moments> parts;
  for (int c = 0; c < components; ++c) {
    parts.push_back({2.0 * testing::random_vector(2, rng), testing::random_spd(2, rng, 0.1)});
  }
  const Moments m = mixture_moments(parts);

  const Index count = 400000;
  std::uniform_int_distribution<int> pick(0, components - 1);
  MatrixXd samples(2, count);
  std::vector<Eigen::MatrixXd> factors;
  for (const auto& p : parts) factors.push_back(p.cov.llt().matrixL());
  for (Index s = 0; s < count; ++s) {
    const int c = pick(rng);
    samples.col(s) = parts[static_cast<std::size_t>(c)].mean + factors[static_cast<std::size_t>(c)] *
                                                                    testing::random_vector(2, rng);
  }
  const VectorXd mean = samples.rowwise().mean();
  const MatrixXd centred = samples.colwise() - mean;
  const MatrixXd cov = centred * centred.transpose() / static_cast<double>(count - 1);
  for (Index i = 0; i < 2; ++i) {
    CHECK(std::abs(mean(i) - m.mean(i)) <= 3.0 * std::sqrt(m.cov(i, i) / count));
    // Standard error of a sample variance under near-Gaussian tails.
    CHECK(std::abs(cov(i, i) - m.cov(i, i)) <= 3.0 * m.cov(i, i) * std::sqrt(3.0 / count));
  }
}

TEST_CASE("mixture spread adds a positive semi-definite term") {
  std::mt19937_64 rng(12);
  std::vector<GaussianDist> parts;
  MatrixXd average = MatrixXd::Zero(4, 4);
  for (int c = 0; c < 30; ++c) {
    parts.emplace_back(testing::random_vector(4, rng), testing::random_spd(4, rng));
    average += parts.back().cov() / 30.0;
  }
  const Moments m = mixture_moments(parts);
  CHECK(Eigen::SelfAdjointEigenSolver<MatrixXd>(m.cov - average).eigenvalues().minCoeff() >= -1e-12);
}
