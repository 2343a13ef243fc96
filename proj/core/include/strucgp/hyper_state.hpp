#pragma once

#include <Eigen/Dense>

#include "strucgp/mmte_kernel.hpp"

namespace strucgp {

/**
 * @brief Hyper-parameters of one partition: θ mean, diagonal θ variances and kernel parameters.
 *
 * The unconstrained coordinates are
 * [μ_θ, log σ_θ², (log σ_k², log ℓ_k², log ω_k) for each mode, log σ_n²], of length 2N_θ + 3m + 1.
 */
struct HyperState {
  Eigen::VectorXd mu_theta;
  Eigen::VectorXd sigma_theta_sq;
  MmteParams phi;

  [[nodiscard]] Index n_theta() const noexcept { return mu_theta.size(); }
  [[nodiscard]] Index modes() const noexcept { return phi.modes(); }
  [[nodiscard]] Index size() const noexcept { return unconstrained_size(n_theta(), modes()); }

  [[nodiscard]] static constexpr Index unconstrained_size(Index n_theta, Index modes) noexcept {
    return 2 * n_theta + 3 * modes + 1;
  }

  [[nodiscard]] Eigen::VectorXd to_unconstrained() const;
  [[nodiscard]] static HyperState from_unconstrained(const Eigen::VectorXd& u, Index n_theta, Index modes);

  /// Throws ValidationError unless all variances and kernel parameters are positive and finite.
  void validate() const;
};

/// Index ranges of the three random-walk blocks in unconstrained coordinates.
struct HyperLayout {
  Index n_theta = 0;
  Index modes = 0;

  [[nodiscard]] Index size() const noexcept { return HyperState::unconstrained_size(n_theta, modes); }
  [[nodiscard]] Index mean_begin() const noexcept { return 0; }
  [[nodiscard]] Index variance_begin() const noexcept { return n_theta; }
  [[nodiscard]] Index kernel_begin() const noexcept { return 2 * n_theta; }
  /// 0 for the θ-mean block, 1 for the θ-variance block, 2 for the kernel block.
  [[nodiscard]] int block_of(Index i) const noexcept { return i < n_theta ? 0 : (i < 2 * n_theta ? 1 : 2); }
};

}  // namespace strucgp
