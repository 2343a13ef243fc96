#pragma once

#include <vector>

#include <Eigen/Dense>

#include "strucgp/hyper_state.hpp"
#include "strucgp/linear_structure.hpp"
#include "strucgp/partition.hpp"
#include "strucgp/sequential_inference.hpp"

namespace strucgp {

/// One-sided averaged-periodogram estimate; integrates to the series variance over frequency (Hz).
struct SpectrumEstimate {
  Eigen::VectorXd frequency;  ///< Hz, ascending from 0
  Eigen::VectorXd power;      ///< per Hz
  Index segment_length = 0;
  Index segments = 0;

  [[nodiscard]] double resolution() const noexcept {
    return frequency.size() > 1 ? frequency(1) - frequency(0) : 0.0;
  }
};

/// Minimum series length accepted by residual_psd.
inline constexpr Index kMinPsdSamples = 256;

/**
 * @brief Welch estimate with a Hann taper, segments of 2^⌈log₂(n/8)⌉ samples and 50% overlap.
 *
 * Multi-channel input is averaged over channels. The series mean is removed first.
 */
[[nodiscard]] SpectrumEstimate residual_psd(const Eigen::MatrixXd& residuals, double dt);

/// Peak frequencies (rad/s) in descending prominence: local maxima above 3× the median power,
/// at least two bins apart, at most m_max of them.
[[nodiscard]] std::vector<double> suggest_modes(const SpectrumEstimate& spectrum, Index m_max);

/// Half-power width of the peak nearest omega (rad/s), in bins; at least 1.
[[nodiscard]] double peak_width_bins(const SpectrumEstimate& spectrum, double omega);

/**
 * @brief Starting hyper-state from the residual of the nominal model.
 *
 * μ_θ = nominal, σ_θ = 10% of |nominal|, ω_k at the residual spectrum peaks, σ_k² = ⅓ of the residual
 * variance, ℓ_k matched to the peak's half-power bandwidth and σ_n² = 1% of the residual variance.
 * Missing peaks are filled with the strongest remaining bins.
 */
[[nodiscard]] HyperState initial_delta(const Eigen::MatrixXd& residuals, double dt, const Eigen::VectorXd& theta_nominal,
                                       Index modes);

/// Residual of the nominal model over contiguous partitions, rows concatenated.
[[nodiscard]] Eigen::MatrixXd nominal_residuals(const std::vector<Partition>& dataset, const StructuralSystem& system,
                                                const Eigen::VectorXd& theta_nominal,
                                                const Eigen::VectorXd& initial_state = {});

struct BicOptions {
  InferenceOptions inference;
  Index max_partitions = 3;  ///< only the first partitions enter the screening fit
};

struct BicResult {
  Index modes = 0;
  double score = 0.0;           ///< log L̂ − ½ N_δ log(n N_o N_D), larger is better
  double log_likelihood = 0.0;
  Index parameters = 0;
  Index samples = 0;
  HyperState delta;             ///< estimate on the last screened partition
  bool converged = false;
};

/// BIC of order m from a reduced sequential fit started at initial_delta.
[[nodiscard]] BicResult bic_score(const std::vector<Partition>& dataset, const StructuralSystem& system,
                                  const Eigen::VectorXd& theta_nominal, Index modes, const BicOptions& options = {});

/// The penalty term ½ N_δ log(samples).
[[nodiscard]] double bic_penalty(Index parameters, Index samples);

}  // namespace strucgp
