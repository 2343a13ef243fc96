#pragma once

#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "strucgp/truncated_factorization.hpp"

namespace strucgp {

/// How covariances are factorized for densities, solves and conditioning.
struct FactorizationPolicy {
  bool truncate = true;  ///< false: plain Cholesky, singular matrices raise FactorizationError
  double tol = TruncatedFactorization::default_tolerance;
  DensityConvention convention = DensityConvention::pseudo_inverse;
};

/// Immutable multivariate normal with a lazily computed, shared factorization.
class GaussianDist {
 public:
  GaussianDist(Eigen::VectorXd mean, Eigen::MatrixXd cov, FactorizationPolicy policy = {});

  [[nodiscard]] const Eigen::VectorXd& mean() const noexcept;
  [[nodiscard]] const Eigen::MatrixXd& cov() const noexcept;
  [[nodiscard]] Index dimension() const noexcept;
  [[nodiscard]] const FactorizationPolicy& policy() const noexcept;
  [[nodiscard]] const TruncatedFactorization& factorization() const;

 private:
  struct State;
  std::shared_ptr<State> state_;
};

/// Partitioned joint normal of [x₁; x₂].
struct JointGaussianBlocks {
  Eigen::VectorXd mu1, mu2;
  Eigen::MatrixXd s11, s12, s22;

  [[nodiscard]] Eigen::VectorXd mean() const;
  [[nodiscard]] Eigen::MatrixXd cov() const;
};

/// y | θ ~ N(Aθ, Σ), θ ~ N(μ₀, Σ₀)  ⟹  y ~ N(Aμ₀, Σ + AΣ₀Aᵀ).
[[nodiscard]] GaussianDist marginalize_linear(const Eigen::MatrixXd& a, const Eigen::MatrixXd& sigma,
                                              const Eigen::VectorXd& mu0, const Eigen::MatrixXd& sigma0,
                                              FactorizationPolicy policy = {});

/// Distribution of x₂ given x₁.
[[nodiscard]] GaussianDist condition(const JointGaussianBlocks& joint, const Eigen::VectorXd& x1,
                                     FactorizationPolicy policy = {});

/// log N(y | μ, Σ) including the 2π constant.
[[nodiscard]] double log_density(const Eigen::VectorXd& y, const GaussianDist& dist);

/// Same value as log_density(y, GaussianDist(mean, cov, policy)) without keeping a factorization.
[[nodiscard]] double log_density(const Eigen::VectorXd& y, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                                 const FactorizationPolicy& policy);

struct Moments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Mean and covariance of an equally weighted Gaussian mixture.
[[nodiscard]] Moments mixture_moments(const std::vector<GaussianDist>& components);
[[nodiscard]] Moments mixture_moments(const std::vector<Moments>& components);

}  // namespace strucgp
