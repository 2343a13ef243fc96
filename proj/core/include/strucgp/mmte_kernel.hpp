#pragma once

#include <Eigen/Dense>

namespace strucgp {

using Eigen::Index;

/**
 * @brief Parameters of the multi-modal trigonometric exponential kernel.
 *
 * k(τ) = Σ_k σ_k² exp(−τ²/ℓ_k²) cos(ω_k τ) + σ_n² [τ = 0].
 */
struct MmteParams {
  Eigen::VectorXd variance;  ///< σ_k²
  Eigen::VectorXd len_sq;    ///< ℓ_k² (s²)
  Eigen::VectorXd omega;     ///< ω_k (rad/s)
  double noise = 0.0;        ///< σ_n²

  [[nodiscard]] Index modes() const noexcept { return variance.size(); }

  /// Throws ValidationError unless every entry is finite and strictly positive and m ≥ 1.
  void validate() const;

  /// Reorders modes by ascending frequency.
  void sort_by_frequency();
};

/**
 * @brief Slice of a uniform global sampling grid.
 *
 * Stamps are origin + (first + k)·dt. Lags between two slices are taken from integer index
 * differences, so shifting the origin leaves every assembled block bit-identical.
 */
struct TimeGrid {
  double origin = 0.0;
  double dt = 1.0;
  Index first = 0;
  Index count = 0;

  [[nodiscard]] double stamp(Index k) const noexcept { return origin + static_cast<double>(first + k) * dt; }
  [[nodiscard]] TimeGrid slice(Index offset, Index n) const;
  [[nodiscard]] bool same_as(const TimeGrid& other) const noexcept;
};

/// Kernel value at lag τ; the noise variance is added only when τ is exactly zero.
[[nodiscard]] double kernel_value(double tau, const MmteParams& phi);

/// Kernel value without the white-noise term.
[[nodiscard]] double kernel_value_smooth(double tau, const MmteParams& phi);

/// Closed-form power spectral density S(ω) = ∫ k(τ) e^{−iωτ} dτ, with σ_n² as the white-noise level.
[[nodiscard]] double kernel_psd(double omega, const MmteParams& phi);

/**
 * @brief Covariance block between two grid slices.
 *
 * The noise variance is placed on the diagonal only when include_noise is set and both slices
 * coincide. Same-grid blocks are exactly symmetric.
 */
[[nodiscard]] Eigen::MatrixXd assemble_block(const TimeGrid& rows, const TimeGrid& cols, const MmteParams& phi,
                                             bool include_noise);

/// Block for channels independent of each other and sharing φ: I_channels ⊗ assemble_block(...).
[[nodiscard]] Eigen::MatrixXd assemble_channels(const TimeGrid& rows, const TimeGrid& cols, const MmteParams& phi,
                                                Index channels, bool include_noise);

/// Σ_j σ_j² J[:,j] J[:,j]ᵀ.
[[nodiscard]] Eigen::MatrixXd tangent_covariance(const Eigen::MatrixXd& jacobian, const Eigen::VectorXd& sigma_sq);

}  // namespace strucgp
