#include "strucgp/gaussian_ops.hpp"

#include <cmath>
#include <mutex>
#include <numbers>
#include <optional>

#include "strucgp/errors.hpp"

namespace strucgp {

namespace {

TruncatedFactorization factorize(const Eigen::MatrixXd& cov, const FactorizationPolicy& policy) {
  return policy.truncate ? TruncatedFactorization::compute(cov, policy.tol) : TruncatedFactorization::cholesky(cov);
}

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& a) { return 0.5 * (a + a.transpose()); }

}  // namespace

struct GaussianDist::State {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  FactorizationPolicy policy;
  std::once_flag once;
  std::optional<TruncatedFactorization> factorization;
};

GaussianDist::GaussianDist(Eigen::VectorXd mean, Eigen::MatrixXd cov, FactorizationPolicy policy)
    : state_(std::make_shared<State>()) {
  if (cov.rows() != mean.size() || cov.cols() != mean.size()) {
    throw ValidationError("covariance dimensions do not match the mean");
  }
  state_->mean = std::move(mean);
  state_->cov = std::move(cov);
  state_->policy = policy;
}

const Eigen::VectorXd& GaussianDist::mean() const noexcept { return state_->mean; }
const Eigen::MatrixXd& GaussianDist::cov() const noexcept { return state_->cov; }
Index GaussianDist::dimension() const noexcept { return state_->mean.size(); }
const FactorizationPolicy& GaussianDist::policy() const noexcept { return state_->policy; }

const TruncatedFactorization& GaussianDist::factorization() const {
  std::call_once(state_->once, [this] { state_->factorization.emplace(factorize(state_->cov, state_->policy)); });
  return *state_->factorization;
}

Eigen::VectorXd JointGaussianBlocks::mean() const {
  Eigen::VectorXd m(mu1.size() + mu2.size());
  m << mu1, mu2;
  return m;
}

Eigen::MatrixXd JointGaussianBlocks::cov() const {
  const Index n1 = mu1.size();
  const Index n2 = mu2.size();
  Eigen::MatrixXd c(n1 + n2, n1 + n2);
  c.topLeftCorner(n1, n1) = s11;
  c.topRightCorner(n1, n2) = s12;
  c.bottomLeftCorner(n2, n1) = s12.transpose();
  c.bottomRightCorner(n2, n2) = s22;
  return c;
}

GaussianDist marginalize_linear(const Eigen::MatrixXd& a, const Eigen::MatrixXd& sigma, const Eigen::VectorXd& mu0,
                                const Eigen::MatrixXd& sigma0, FactorizationPolicy policy) {
  if (a.cols() != mu0.size() || sigma0.rows() != mu0.size() || sigma0.cols() != mu0.size() ||
      sigma.rows() != a.rows() || sigma.cols() != a.rows()) {
    throw ValidationError("marginalize_linear: dimensions are not conformable");
  }
  return GaussianDist(a * mu0, symmetrized(sigma + a * sigma0 * a.transpose()), policy);
}

GaussianDist condition(const JointGaussianBlocks& joint, const Eigen::VectorXd& x1, FactorizationPolicy policy) {
  const Index n1 = joint.mu1.size();
  const Index n2 = joint.mu2.size();
  if (joint.s11.rows() != n1 || joint.s11.cols() != n1 || joint.s12.rows() != n1 || joint.s12.cols() != n2 ||
      joint.s22.rows() != n2 || joint.s22.cols() != n2 || x1.size() != n1) {
    throw ValidationError("condition: block dimensions are inconsistent");
  }
  const TruncatedFactorization f11 = factorize(joint.s11, policy);
  const Eigen::MatrixXd gain = f11.solve(joint.s12, policy.convention);  // Σ₁₁⁻¹ Σ₁₂
  Eigen::VectorXd mean = joint.mu2 + gain.transpose() * (x1 - joint.mu1);
  Eigen::MatrixXd cov = symmetrized(joint.s22 - joint.s12.transpose() * gain);
  return GaussianDist(std::move(mean), std::move(cov), policy);
}

double log_density(const Eigen::VectorXd& y, const GaussianDist& dist) {
  if (y.size() != dist.dimension()) throw ValidationError("log_density: dimension mismatch");
  const TruncatedFactorization& f = dist.factorization();
  const DensityConvention c = dist.policy().convention;
  const double d = static_cast<double>(f.density_dimension(c));
  return -0.5 * f.log_det(c) - 0.5 * f.quad_form(y - dist.mean(), c) - 0.5 * d * std::log(2.0 * std::numbers::pi);
}

double log_density(const Eigen::VectorXd& y, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                   const FactorizationPolicy& policy) {
  if (y.size() != mean.size() || cov.rows() != mean.size() || cov.cols() != mean.size()) {
    throw ValidationError("log_density: dimension mismatch");
  }
  if (!policy.truncate) return log_density(y, GaussianDist(mean, cov, policy));
  const DensityTerms t = truncated_density_terms(cov, y - mean, policy.tol, policy.convention);
  return -0.5 * t.log_det - 0.5 * t.quad_form - 0.5 * static_cast<double>(t.dimension) * std::log(2.0 * std::numbers::pi);
}

Moments mixture_moments(const std::vector<Moments>& components) {
  if (components.empty()) throw ValidationError("mixture_moments needs at least one component");
  const Index d = components.front().mean.size();
  const double inv = 1.0 / static_cast<double>(components.size());
  Moments out{Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Zero(d, d)};
  for (const auto& c : components) {
    if (c.mean.size() != d || c.cov.rows() != d || c.cov.cols() != d) {
      throw ValidationError("mixture components have inconsistent dimensions");
    }
    out.mean += c.mean;
  }
  out.mean *= inv;
  // Average of (μμᵀ + Σ) minus m̄m̄ᵀ, accumulated about m̄ to avoid cancellation.
  for (const auto& c : components) {
    const Eigen::VectorXd centred = c.mean - out.mean;
    out.cov += c.cov + centred * centred.transpose();
  }
  out.cov = symmetrized(out.cov * inv);
  return out;
}

Moments mixture_moments(const std::vector<GaussianDist>& components) {
  std::vector<Moments> moments;
  moments.reserve(components.size());
  for (const auto& c : components) moments.push_back({c.mean(), c.cov()});
  return mixture_moments(moments);
}

}  // namespace strucgp
