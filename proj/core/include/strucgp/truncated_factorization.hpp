#pragma once

#include <memory>

#include <Eigen/Dense>

namespace strucgp {

using Eigen::Index;

/**
 * @brief How a rank-deficient covariance defines a density.
 *
 * pseudo_inverse: log-determinant over retained eigenvalues, pseudo-inverse quadratic form and
 * d_retained in the normalizing constant.
 * eigenvalue_floor: discarded eigenvalues are replaced by tol·λ_max, which keeps a full-dimensional
 * density whose value does not depend on the units of the data.
 */
enum class DensityConvention { pseudo_inverse, eigenvalue_floor };

/**
 * @brief Symmetric eigen-factorization keeping eigenvalues ≥ tol·λ_max.
 *
 * Well-conditioned inputs (estimated condition number below 1/tol) are factorized by Cholesky,
 * in which case nothing is truncated and the eigenpairs are only computed when asked for.
 * Copies share the factorization.
 */
class TruncatedFactorization {
 public:
  static constexpr double default_tolerance = 0.005;

  /// Truncated factorization of a symmetric PSD matrix; tol ∈ (0, 1).
  [[nodiscard]] static TruncatedFactorization compute(const Eigen::MatrixXd& cov, double tol = default_tolerance);

  /// Untruncated factorization; throws FactorizationError if cov is not numerically positive definite.
  [[nodiscard]] static TruncatedFactorization cholesky(const Eigen::MatrixXd& cov);

  [[nodiscard]] Index dimension() const noexcept;
  [[nodiscard]] Index rank() const noexcept;
  [[nodiscard]] bool truncated() const noexcept { return rank() < dimension(); }
  [[nodiscard]] double tolerance() const noexcept;

  /// Retained eigenvalues in descending order.
  [[nodiscard]] const Eigen::VectorXd& values() const;
  /// Retained eigenvectors, columns matching values().
  [[nodiscard]] const Eigen::MatrixXd& vectors() const;
  [[nodiscard]] double largest() const;

  /// Dimension entering the normalizing constant of a density.
  [[nodiscard]] Index density_dimension(DensityConvention convention) const noexcept;
  [[nodiscard]] double log_det(DensityConvention convention = DensityConvention::pseudo_inverse) const;
  [[nodiscard]] double quad_form(const Eigen::VectorXd& r,
                                 DensityConvention convention = DensityConvention::pseudo_inverse) const;
  [[nodiscard]] Eigen::MatrixXd solve(const Eigen::MatrixXd& b,
                                      DensityConvention convention = DensityConvention::pseudo_inverse) const;

  /// Truncated operator U diag(λ) Uᵀ.
  [[nodiscard]] Eigen::MatrixXd reconstruct() const;

 private:
  struct Impl;
  explicit TruncatedFactorization(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<const Impl> impl_;
};

/// Ingredients of a Gaussian log-density under truncation, without storing eigenvectors.
struct DensityTerms {
  double log_det = 0.0;
  double quad_form = 0.0;
  Index dimension = 0;  ///< dimension entering the normalizing constant
  Index rank = 0;
};

/**
 * @brief log-determinant and quadratic form rᵀΣ⁺r of the truncated operator in one pass.
 *
 * Agrees with TruncatedFactorization::compute(cov, tol) followed by log_det and quad_form, but only
 * projects r onto the eigenbasis instead of forming it, which is several times cheaper.
 */
[[nodiscard]] DensityTerms truncated_density_terms(const Eigen::MatrixXd& cov, const Eigen::VectorXd& r, double tol,
                                                   DensityConvention convention);

/// Eigenvalues of a symmetric matrix in ascending order and the coordinates Vᵀr of r in its eigenbasis.
struct SpectralProjection {
  Eigen::VectorXd values;
  Eigen::VectorXd coordinates;
};

[[nodiscard]] SpectralProjection spectral_projection(const Eigen::MatrixXd& a, const Eigen::VectorXd& r);

/// Same as TruncatedFactorization::compute.
[[nodiscard]] TruncatedFactorization svd_truncate(const Eigen::MatrixXd& cov,
                                                  double tol = TruncatedFactorization::default_tolerance);

}  // namespace strucgp
