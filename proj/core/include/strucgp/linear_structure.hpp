#pragma once

#include <functional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace strucgp {

using Eigen::Index;

/// Uniformly sampled multi-channel series. Rows are samples, columns are channels.
struct TimeSeries {
  double t0 = 0.0;
  double dt = 0.0;
  Eigen::MatrixXd values;
  std::vector<std::string> labels;

  [[nodiscard]] Index samples() const noexcept { return values.rows(); }
  [[nodiscard]] Index channels() const noexcept { return values.cols(); }
  [[nodiscard]] double time(Index k) const noexcept { return t0 + static_cast<double>(k) * dt; }
};

/// Force (or ground acceleration) input, one column per input channel.
using Excitation = TimeSeries;

/// Stacks an (n x channels) block channel by channel into one vector of length n*channels.
[[nodiscard]] Eigen::VectorXd stack_channels(const Eigen::MatrixXd& values);

/// Inverse of stack_channels.
[[nodiscard]] Eigen::MatrixXd unstack_channels(const Eigen::VectorXd& stacked, Index channels);

/**
 * @brief Stiffness matrix as a function of the physical parameters θ.
 *
 * The affine form K(θ) = K₀ + Σ θ_j K_j admits exact response sensitivities. A general callable is
 * also accepted, in which case sensitivities are taken by central differences.
 */
class StiffnessModel {
 public:
  using Builder = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

  StiffnessModel() = default;
  StiffnessModel(Eigen::MatrixXd base, std::vector<Eigen::MatrixXd> terms);
  StiffnessModel(Builder builder, Index parameters, Index dofs);

  [[nodiscard]] Eigen::MatrixXd operator()(const Eigen::VectorXd& theta) const;
  [[nodiscard]] bool is_affine() const noexcept { return !builder_; }
  [[nodiscard]] const Eigen::MatrixXd& term(Index j) const;
  [[nodiscard]] Index parameters() const noexcept { return parameters_; }
  [[nodiscard]] Index dofs() const noexcept { return dofs_; }

 private:
  Eigen::MatrixXd base_;
  std::vector<Eigen::MatrixXd> terms_;
  Builder builder_;
  Index parameters_ = 0;
  Index dofs_ = 0;
};

/// C = αK + βM, evaluated once at the nominal θ.
struct RayleighDamping {
  double alpha = 0.0;
  double beta = 0.0;
};

/**
 * C = Σ 2 ω̂_i ζ̂_i M φ̂_i φ̂_iᵀ M / (φ̂_iᵀ M φ̂_i).
 * Leave frequencies and shapes empty to take them from the undamped model at the nominal θ.
 */
struct ModalDamping {
  Eigen::VectorXd ratios;
  Eigen::VectorXd frequencies;
  Eigen::MatrixXd shapes;
};

using DampingSpec = std::variant<RayleighDamping, ModalDamping>;

/// Linear lumped-parameter structure M ü + C u̇ + K(θ) u = L x(t) observed through accelerations.
struct StructuralSystem {
  Eigen::MatrixXd mass;
  Eigen::MatrixXd damping;
  StiffnessModel stiffness;
  Eigen::MatrixXd input_map;
  std::vector<Index> observed_dofs;
  double dt = 0.0;

  [[nodiscard]] Index dofs() const noexcept { return mass.rows(); }
  [[nodiscard]] Index inputs() const noexcept { return input_map.cols(); }
  [[nodiscard]] Index outputs() const noexcept { return static_cast<Index>(observed_dofs.size()); }
  [[nodiscard]] Index parameters() const noexcept { return stiffness.parameters(); }

  /// Throws ValidationError or FactorizationError when the model is inconsistent.
  void validate() const;
};

struct ModalProperties {
  Eigen::VectorXd frequencies;     ///< rad/s, ascending
  Eigen::VectorXd damping_ratios;  ///< φᵀCφ / (2ω) per mode
  Eigen::MatrixXd shapes;          ///< columns normalized to φᵀMφ = 1
};

/// Tridiagonal chain stiffness for story stiffnesses k: K[i][i] = k_i + k_{i+1}, K[i][i+1] = −k_{i+1}.
[[nodiscard]] Eigen::MatrixXd shear_stiffness(const Eigen::VectorXd& story_stiffness);

/**
 * @brief Shear frame whose parameters are the absolute story stiffnesses.
 *
 * Defaults: ground-acceleration input (input_map = −M·1), every floor observed.
 */
[[nodiscard]] StructuralSystem build_shear_frame(const Eigen::VectorXd& masses, const Eigen::VectorXd& theta,
                                                 const DampingSpec& damping, double dt);

/**
 * @brief Shear frame with nominal story stiffnesses where θ_j scales story scaled_stories[j].
 *
 * Damping is assembled at θ = theta_nominal and held fixed afterwards.
 */
[[nodiscard]] StructuralSystem build_scaled_shear_frame(const Eigen::VectorXd& masses,
                                                        const Eigen::VectorXd& story_stiffness,
                                                        const std::vector<Index>& scaled_stories,
                                                        const Eigen::VectorXd& theta_nominal,
                                                        const DampingSpec& damping, double dt);

/// Damping matrix for the given specification on (M, K).
[[nodiscard]] Eigen::MatrixXd assemble_damping(const Eigen::MatrixXd& mass, const Eigen::MatrixXd& stiffness,
                                               const DampingSpec& damping);

/// Simulated accelerations (samples × observed DOFs) by exact zero-order-hold discretization.
[[nodiscard]] TimeSeries simulate_response(const StructuralSystem& system, const Excitation& excitation,
                                           const Eigen::VectorXd& theta,
                                           const Eigen::VectorXd& initial_state = Eigen::VectorXd());

enum class SensitivityMethod { central_difference, exact };

struct SensitivityOptions {
  SensitivityMethod method = SensitivityMethod::central_difference;
  double relative_step = 1e-6;
  double absolute_step = 1e-8;
};

/// J = ∂f/∂θ with rows stacked channel by channel (n·N_o × N_θ).
[[nodiscard]] Eigen::MatrixXd response_sensitivities(const StructuralSystem& system, const Excitation& excitation,
                                                     const Eigen::VectorXd& theta,
                                                     const Eigen::VectorXd& initial_state = Eigen::VectorXd(),
                                                     const SensitivityOptions& options = {});

struct SimulationResult {
  Eigen::MatrixXd response;       ///< samples × observed DOFs
  Eigen::VectorXd final_state;    ///< [u; u̇] one step after the last sample
  Eigen::MatrixXd sensitivities;  ///< n·N_o × N_θ, empty unless requested
};

/**
 * @brief Response, terminal state and (optionally) sensitivities in one pass.
 *
 * With the exact method the sensitivity equations are discretized together with the state, so J is
 * the exact derivative of the discrete response map. Requires an affine stiffness model.
 */
[[nodiscard]] SimulationResult simulate(const StructuralSystem& system, const Excitation& excitation,
                                        const Eigen::VectorXd& theta, const Eigen::VectorXd& initial_state,
                                        bool with_sensitivities,
                                        SensitivityMethod method = SensitivityMethod::exact);

[[nodiscard]] ModalProperties modal_properties(const StructuralSystem& system, const Eigen::VectorXd& theta);

[[nodiscard]] ModalProperties modal_properties(const Eigen::MatrixXd& mass, const Eigen::MatrixXd& stiffness,
                                               const Eigen::MatrixXd& damping);

}  // namespace strucgp
