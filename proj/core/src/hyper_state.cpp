#include "strucgp/hyper_state.hpp"

#include <cmath>
#include <string>

#include "strucgp/errors.hpp"

namespace strucgp {

Eigen::VectorXd HyperState::to_unconstrained() const {
  const Index nt = n_theta();
  const Index m = modes();
  if (sigma_theta_sq.size() != nt) throw ValidationError("sigma_theta_sq must match mu_theta in length");
  if (phi.len_sq.size() != m || phi.omega.size() != m) throw ValidationError("kernel parameter vectors differ in length");
  Eigen::VectorXd u(size());
  u.head(nt) = mu_theta;
  u.segment(nt, nt) = sigma_theta_sq.array().log();
  for (Index k = 0; k < m; ++k) {
    u(2 * nt + 3 * k) = std::log(phi.variance(k));
    u(2 * nt + 3 * k + 1) = std::log(phi.len_sq(k));
    u(2 * nt + 3 * k + 2) = std::log(phi.omega(k));
  }
  u(2 * nt + 3 * m) = std::log(phi.noise);
  return u;
}

HyperState HyperState::from_unconstrained(const Eigen::VectorXd& u, Index n_theta, Index modes) {
  if (n_theta < 0 || modes < 0 || u.size() != unconstrained_size(n_theta, modes)) {
    throw ValidationError("unconstrained vector has length " + std::to_string(u.size()) + ", expected " +
                          std::to_string(unconstrained_size(n_theta, modes)));
  }
  HyperState h;
  h.mu_theta = u.head(n_theta);
  h.sigma_theta_sq = u.segment(n_theta, n_theta).array().exp();
  h.phi.variance.resize(modes);
  h.phi.len_sq.resize(modes);
  h.phi.omega.resize(modes);
  for (Index k = 0; k < modes; ++k) {
    h.phi.variance(k) = std::exp(u(2 * n_theta + 3 * k));
    h.phi.len_sq(k) = std::exp(u(2 * n_theta + 3 * k + 1));
    h.phi.omega(k) = std::exp(u(2 * n_theta + 3 * k + 2));
  }
  h.phi.noise = std::exp(u(2 * n_theta + 3 * modes));
  return h;
}

void HyperState::validate() const {
  if (sigma_theta_sq.size() != n_theta()) throw ValidationError("sigma_theta_sq must match mu_theta in length");
  if (!mu_theta.allFinite()) throw ValidationError("mu_theta must be finite");
  if (!sigma_theta_sq.allFinite() || (sigma_theta_sq.array() <= 0.0).any()) {
    throw ValidationError("sigma_theta_sq must be finite and strictly positive");
  }
  phi.validate();
}

}  // namespace strucgp
