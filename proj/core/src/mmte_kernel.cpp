#include "strucgp/mmte_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "strucgp/errors.hpp"

namespace strucgp {

namespace {

// Lighter check used by the evaluation routines: zero amplitudes are allowed there.
void check_evaluable(const MmteParams& phi) {
  const Index m = phi.modes();
  if (phi.len_sq.size() != m || phi.omega.size() != m) throw ValidationError("kernel parameter vectors differ in length");
  if (!phi.variance.allFinite() || !phi.len_sq.allFinite() || !phi.omega.allFinite() || !std::isfinite(phi.noise)) {
    throw ValidationError("kernel parameters must be finite");
  }
  if ((phi.len_sq.array() <= 0.0).any()) throw ValidationError("kernel length scales must be positive");
  if ((phi.variance.array() < 0.0).any() || phi.noise < 0.0) {
    throw ValidationError("kernel variances must be non-negative");
  }
}

void check_compatible(const TimeGrid& a, const TimeGrid& b) {
  if (a.dt != b.dt || a.origin != b.origin) throw ValidationError("time grids do not share one global sampling grid");
  if (!(a.dt > 0.0)) throw ValidationError("time grid spacing must be positive");
}

double smooth_sum(double tau, const MmteParams& phi) {
  double sum = 0.0;
  for (Index k = 0; k < phi.modes(); ++k) {
    sum += phi.variance(k) * std::exp(-tau * tau / phi.len_sq(k)) * std::cos(phi.omega(k) * tau);
  }
  return sum;
}

}  // namespace

void MmteParams::validate() const {
  check_evaluable(*this);
  if (modes() < 1) throw ValidationError("the kernel needs at least one mode");
  if ((variance.array() <= 0.0).any() || (omega.array() <= 0.0).any() || !(noise > 0.0)) {
    throw ValidationError("kernel parameters must be strictly positive");
  }
}

void MmteParams::sort_by_frequency() {
  std::vector<Index> order(static_cast<std::size_t>(modes()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [this](Index a, Index b) { return omega(a) < omega(b); });
  const MmteParams copy = *this;
  for (Index k = 0; k < modes(); ++k) {
    const Index src = order[static_cast<std::size_t>(k)];
    variance(k) = copy.variance(src);
    len_sq(k) = copy.len_sq(src);
    omega(k) = copy.omega(src);
  }
}

TimeGrid TimeGrid::slice(Index offset, Index n) const {
  if (offset < 0 || n < 0 || offset + n > count) throw ValidationError("time grid slice out of range");
  return TimeGrid{origin, dt, first + offset, n};
}

bool TimeGrid::same_as(const TimeGrid& other) const noexcept {
  return origin == other.origin && dt == other.dt && first == other.first && count == other.count;
}

double kernel_value(double tau, const MmteParams& phi) {
  check_evaluable(phi);
  return smooth_sum(tau, phi) + (tau == 0.0 ? phi.noise : 0.0);
}

double kernel_value_smooth(double tau, const MmteParams& phi) {
  check_evaluable(phi);
  return smooth_sum(tau, phi);
}

double kernel_psd(double omega, const MmteParams& phi) {
  check_evaluable(phi);
  const double sqrt_pi = std::sqrt(std::numbers::pi);
  double s = 0.0;
  for (Index k = 0; k < phi.modes(); ++k) {
    const double l2 = phi.len_sq(k);
    const double plus = omega + phi.omega(k);
    const double minus = omega - phi.omega(k);
    s += 0.5 * sqrt_pi * phi.variance(k) * std::sqrt(l2) *
         (std::exp(-l2 * plus * plus / 4.0) + std::exp(-l2 * minus * minus / 4.0));
  }
  return s + phi.noise;
}

Eigen::MatrixXd assemble_block(const TimeGrid& rows, const TimeGrid& cols, const MmteParams& phi,
                               bool include_noise) {
  check_evaluable(phi);
  check_compatible(rows, cols);
  Eigen::MatrixXd block(rows.count, cols.count);
  if (rows.count == 0 || cols.count == 0) return block;

  // Toeplitz structure: one kernel evaluation per distinct index lag.
  const Index lag_min = cols.first - (rows.first + rows.count - 1);
  const Index lag_max = cols.first + cols.count - 1 - rows.first;
  std::vector<double> table(static_cast<std::size_t>(lag_max - lag_min + 1));
  for (Index lag = lag_min; lag <= lag_max; ++lag) {
    const double tau = static_cast<double>(lag < 0 ? -lag : lag) * rows.dt;
    table[static_cast<std::size_t>(lag - lag_min)] = smooth_sum(tau, phi);
  }
  for (Index q = 0; q < cols.count; ++q) {
    const Index base = cols.first + q - rows.first - lag_min;
    for (Index p = 0; p < rows.count; ++p) block(p, q) = table[static_cast<std::size_t>(base - p)];
  }
  if (include_noise && rows.same_as(cols)) block.diagonal().array() += phi.noise;
  return block;
}

Eigen::MatrixXd assemble_channels(const TimeGrid& rows, const TimeGrid& cols, const MmteParams& phi, Index channels,
                                  bool include_noise) {
  if (channels < 1) throw ValidationError("at least one channel is required");
  const Eigen::MatrixXd block = assemble_block(rows, cols, phi, include_noise);
  if (channels == 1) return block;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(channels * rows.count, channels * cols.count);
  for (Index c = 0; c < channels; ++c) out.block(c * rows.count, c * cols.count, rows.count, cols.count) = block;
  return out;
}

Eigen::MatrixXd tangent_covariance(const Eigen::MatrixXd& jacobian, const Eigen::VectorXd& sigma_sq) {
  if (sigma_sq.size() != jacobian.cols()) {
    throw ValidationError("tangent covariance needs one variance per Jacobian column");
  }
  if (!sigma_sq.allFinite() || (sigma_sq.array() < 0.0).any()) {
    throw ValidationError("tangent variances must be finite and non-negative");
  }
  const Eigen::MatrixXd scaled = jacobian * sigma_sq.cwiseSqrt().asDiagonal();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(jacobian.rows(), jacobian.rows());
  out.selfadjointView<Eigen::Lower>().rankUpdate(scaled);
  out.triangularView<Eigen::StrictlyUpper>() = out.transpose();
  return out;
}

}  // namespace strucgp
