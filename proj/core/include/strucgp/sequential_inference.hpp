#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "strucgp/gaussian_ops.hpp"
#include "strucgp/hyper_state.hpp"
#include "strucgp/linear_structure.hpp"
#include "strucgp/nelder_mead.hpp"
#include "strucgp/partition.hpp"

namespace strucgp {

/**
 * @brief Relative eigenvalue cut used by the likelihood during inference.
 *
 * Only numerically null directions are discarded. A cut near the general-purpose 0.5% lifts the small
 * eigenvalues above the measurement-noise level, so the floor acts as extra noise and flattens the
 * likelihood in θ.
 */
inline constexpr double kInferenceTruncation = 1e-9;

struct InferenceOptions {
  FactorizationPolicy factorization{true, kInferenceTruncation, DensityConvention::eigenvalue_floor};
  NelderMeadOptions simplex{};
  int starts = 3;                 ///< simplex runs per partition, the first from the initial state
  double restart_scale = 0.1;     ///< restart perturbation std: log-scale coordinates, and relative for μ_θ
  double mean_step = 0.02;        ///< initial simplex step for μ_θ, relative to |μ_θ|
  double log_step = 0.25;         ///< initial simplex step for log-scale coordinates
  std::uint64_t seed = 1;
  SensitivityMethod sensitivity = SensitivityMethod::exact;  ///< falls back to differences if K(θ) is not affine
  Eigen::VectorXd initial_state;  ///< structural state at the first sample; zero when empty
  double collision_tolerance = 0.01;
};

/// Fitted partition together with the quantities its successor conditions on.
struct PartitionState {
  HyperState delta;
  Partition partition;
  Eigen::VectorXd initial_state;
  Eigen::VectorXd final_state;  ///< structural state at the first sample of the next partition
  Eigen::VectorXd model_mean;   ///< f(x_i, μ̂_θ) stacked by channel
  Eigen::MatrixXd jacobian;
  Eigen::VectorXd residual;     ///< y_i − f(x_i, μ̂_θ)
  std::shared_ptr<const TruncatedFactorization> block;  ///< K_i + J Σ_θ Jᵀ

  [[nodiscard]] Index index() const noexcept { return partition.index; }
};

/// Builds the cached state of a partition at hyper-parameters delta.
[[nodiscard]] PartitionState make_partition_state(const Partition& partition, const HyperState& delta,
                                                  const StructuralSystem& system,
                                                  const Eigen::VectorXd& initial_state,
                                                  const InferenceOptions& options = {});

/**
 * @brief Predictive distribution of a partition given the previous one.
 *
 * Precomputes everything that depends only on the previous partition, so repeated evaluation at
 * new hyper-parameters costs one simulation, one block assembly and one factorization.
 */
class ConditionalModel {
 public:
  ConditionalModel(const PartitionState* prev, const Partition& partition, const StructuralSystem& system,
                   const InferenceOptions& options);

  struct Moments {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
    Eigen::VectorXd final_state;
  };

  [[nodiscard]] Moments moments(const HyperState& delta) const;
  [[nodiscard]] GaussianDist distribution(const HyperState& delta) const;
  /// −log density of the partition's outputs. Throws on invalid parameters or factorization failure.
  [[nodiscard]] double negative_log_likelihood(const HyperState& delta) const;

  [[nodiscard]] const Eigen::VectorXd& observations() const noexcept { return y_; }
  [[nodiscard]] const Eigen::VectorXd& initial_state() const noexcept { return x0_; }

 private:
  const StructuralSystem* system_;
  Partition partition_;
  InferenceOptions options_;
  Eigen::VectorXd y_;
  Eigen::VectorXd x0_;
  Eigen::VectorXd mean_shift_;  // kᵀ Σ_{i−1}⁻¹ r_{i−1}
  Eigen::MatrixXd cov_shift_;   // kᵀ Σ_{i−1}⁻¹ k
};

[[nodiscard]] GaussianDist conditional_predictive(const PartitionState* prev, const HyperState& delta,
                                                  const Partition& partition, const StructuralSystem& system,
                                                  const InferenceOptions& options = {});

/// Value returned in place of a non-finite or failed objective evaluation.
inline constexpr double kPenalizedObjective = 1e100;

/// L(δ) = −log p(y_i | δ, prev); returns kPenalizedObjective and sets *penalized on failure.
[[nodiscard]] double negative_log_likelihood(const Eigen::VectorXd& delta_unconstrained, const Partition& partition,
                                             const PartitionState* prev, const StructuralSystem& system,
                                             const InferenceOptions& options = {}, bool* penalized = nullptr);

struct FitResult {
  HyperState delta;
  double objective = 0.0;
  bool converged = false;
  int evaluations = 0;
  int penalized_evaluations = 0;
  Index retained_rank = 0;
  Index dimension = 0;
  bool frequency_collision = false;
  double seconds = 0.0;
};

/// MAP estimate of one partition's hyper-parameters by restarted simplex search.
[[nodiscard]] FitResult fit_partition(const Partition& partition, const PartitionState* prev,
                                      const HyperState& delta_init, const StructuralSystem& system,
                                      const InferenceOptions& options = {});

/// Covariance of the random walk on unconstrained hyper-parameters, block-diagonal over
/// {θ means, θ variances, kernel parameters}.
struct RandomWalkCov {
  HyperLayout layout;
  Eigen::MatrixXd q;
};

[[nodiscard]] RandomWalkCov estimate_Q(const std::vector<Eigen::VectorXd>& deltas_unconstrained,
                                       const HyperLayout& layout);

/// Draws from N(δ̂, Q̂) in unconstrained coordinates, deterministic for a given seed.
[[nodiscard]] std::vector<HyperState> sample_next_delta(const HyperState& delta_last, const RandomWalkCov& q,
                                                        int count, std::uint64_t seed);

struct PredictiveResult {
  TimeGrid grid;
  Index channels = 0;
  Eigen::VectorXd mean;        ///< stacked by channel
  Eigen::VectorXd variance;    ///< diagonal of the mixture covariance
  Eigen::MatrixXd covariance;  ///< full mixture covariance, empty unless requested
  std::vector<HyperState> samples;
  int used = 0;
  int dropped = 0;
};

/// Mixture of the conditional predictives of the window following `last`, one per δ sample.
[[nodiscard]] PredictiveResult predict_response(const Excitation& x_new, const std::vector<HyperState>& samples,
                                                const PartitionState& last, const StructuralSystem& system,
                                                const InferenceOptions& options = {}, bool full_covariance = false);

struct ThetaSummary {
  Eigen::VectorXd mean;            ///< μ̂_θ of the last partition
  Eigen::VectorXd walk_std;        ///< sqrt of the θ-mean diagonal of Q̂
  Eigen::VectorXd hyper_std;       ///< sqrt of σ̂_θ² of the last partition
  Eigen::VectorXd predictive_std;  ///< std of θ_{N_D+1}: sqrt(Q̂_μ + σ̂_θ²), σ_θ² at its MPV
};

struct PipelineOptions {
  InferenceOptions inference;
  int prediction_samples = 200;
  std::uint64_t sample_seed = 7;
  bool full_covariance = false;
};

struct PipelineResult {
  std::vector<HyperState> deltas;  ///< δ̂₀ … δ̂_{N_D}
  std::vector<FitResult> fits;
  std::vector<PartitionState> states;
  RandomWalkCov q;
  ThetaSummary theta;
  std::optional<PredictiveResult> prediction;
  double seconds = 0.0;

  [[nodiscard]] bool all_converged() const noexcept;
  [[nodiscard]] bool frequency_collision() const noexcept;
};

/// Sequential estimation over all partitions, random-walk covariance, and optional prediction of x_new.
[[nodiscard]] PipelineResult run_pipeline(const std::vector<Partition>& dataset, const StructuralSystem& system,
                                          const HyperState& delta0, const PipelineOptions& options = {},
                                          const std::optional<Excitation>& x_new = std::nullopt);

[[nodiscard]] ThetaSummary summarize_theta(const HyperState& last, const RandomWalkCov& q);

/// Least-squares baseline: θ and a white-noise variance fitted jointly over all partitions.
struct ClassicalFit {
  Eigen::VectorXd theta;
  double noise = 0.0;
  bool converged = false;
};

[[nodiscard]] ClassicalFit fit_classical(const std::vector<Partition>& dataset, const StructuralSystem& system,
                                         const Eigen::VectorXd& theta0, const InferenceOptions& options = {});

}  // namespace strucgp
