#include "strucgp/order_selection.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include <unsupported/Eigen/FFT>

#include "strucgp/errors.hpp"

namespace strucgp {

namespace {

Index welch_segment_length(Index n) {
  Index len = 1;
  while (len * 8 < n) len *= 2;
  return len;
}

double median(std::vector<double> v) {
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

// Height above the higher of the two lowest points separating the peak from taller ones.
double prominence(const Eigen::VectorXd& p, Index k) {
  const Index n = p.size();
  double left_min = p(k);
  for (Index j = k - 1; j >= 0 && p(j) <= p(k); --j) left_min = std::min(left_min, p(j));
  double right_min = p(k);
  for (Index j = k + 1; j < n && p(j) <= p(k); ++j) right_min = std::min(right_min, p(j));
  return p(k) - std::max(left_min, right_min);
}

double total_variance(const Eigen::MatrixXd& r) {
  double sum = 0.0;
  for (Index c = 0; c < r.cols(); ++c) {
    const Eigen::VectorXd centred = r.col(c).array() - r.col(c).mean();
    sum += centred.squaredNorm() / static_cast<double>(r.rows());
  }
  return sum / static_cast<double>(r.cols());
}

}  // namespace

SpectrumEstimate residual_psd(const Eigen::MatrixXd& residuals, double dt) {
  const Index n = residuals.rows();
  if (n < kMinPsdSamples) {
    throw ValidationError("residual_psd needs at least " + std::to_string(kMinPsdSamples) + " samples, got " +
                          std::to_string(n));
  }
  if (residuals.cols() < 1) throw ValidationError("residual_psd needs at least one channel");
  if (!(dt > 0.0)) throw ValidationError("sampling interval must be positive");
  if (!residuals.allFinite()) throw ValidationError("residual series contains non-finite values");

  const Index len = welch_segment_length(n);
  const Index hop = len / 2;
  const Index segments = (n - len) / hop + 1;
  const Index bins = len / 2 + 1;

  std::vector<double> window(static_cast<std::size_t>(len));
  double window_power = 0.0;
  for (Index j = 0; j < len; ++j) {
    const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(len));
    window[static_cast<std::size_t>(j)] = w;
    window_power += w * w;
  }

  SpectrumEstimate out;
  out.segment_length = len;
  out.segments = segments;
  out.frequency = Eigen::VectorXd::LinSpaced(bins, 0.0, static_cast<double>(bins - 1)) /
                  (static_cast<double>(len) * dt);
  out.power = Eigen::VectorXd::Zero(bins);

  Eigen::FFT<double> fft;
  std::vector<double> segment(static_cast<std::size_t>(len));
  std::vector<std::complex<double>> spectrum;
  for (Index c = 0; c < residuals.cols(); ++c) {
    const double mean = residuals.col(c).mean();
    for (Index s = 0; s < segments; ++s) {
      for (Index j = 0; j < len; ++j) {
        segment[static_cast<std::size_t>(j)] =
            window[static_cast<std::size_t>(j)] * (residuals(s * hop + j, c) - mean);
      }
      fft.fwd(spectrum, segment);
      for (Index k = 0; k < bins; ++k) {
        const double side = (k == 0 || 2 * k == len) ? 1.0 : 2.0;
        out.power(k) += side * std::norm(spectrum[static_cast<std::size_t>(k)]);
      }
    }
  }
  out.power *= dt / (window_power * static_cast<double>(segments * residuals.cols()));
  return out;
}

std::vector<double> suggest_modes(const SpectrumEstimate& spectrum, Index m_max) {
  if (m_max < 1) throw ValidationError("m_max must be at least 1");
  const Eigen::VectorXd& p = spectrum.power;
  const Index n = p.size();
  if (n < 3) return {};
  const double threshold = 3.0 * median(std::vector<double>(p.data(), p.data() + n));

  struct Candidate {
    Index bin;
    double prominence;
  };
  std::vector<Candidate> candidates;
  for (Index k = 1; k + 1 < n; ++k) {
    if (p(k) > p(k - 1) && p(k) >= p(k + 1) && p(k) > threshold) candidates.push_back({k, prominence(p, k)});
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) { return a.prominence > b.prominence; });

  std::vector<Index> picked;
  for (const auto& c : candidates) {
    if (static_cast<Index>(picked.size()) == m_max) break;
    const bool clear = std::all_of(picked.begin(), picked.end(), [&](Index b) { return std::abs(b - c.bin) >= 2; });
    if (clear) picked.push_back(c.bin);
  }

  std::vector<double> omegas;
  omegas.reserve(picked.size());
  const double df = spectrum.resolution();
  for (Index k : picked) {
    // Parabolic refinement of the peak location on the three surrounding bins.
    const double a = p(k - 1), b = p(k), c = p(k + 1);
    const double denom = a - 2.0 * b + c;
    const double shift = denom < 0.0 ? std::clamp(0.5 * (a - c) / denom, -0.5, 0.5) : 0.0;
    omegas.push_back(2.0 * std::numbers::pi * (spectrum.frequency(k) + shift * df));
  }
  return omegas;
}

double peak_width_bins(const SpectrumEstimate& spectrum, double omega) {
  const Eigen::VectorXd& p = spectrum.power;
  const double df = spectrum.resolution();
  if (p.size() < 2 || !(df > 0.0)) return 1.0;
  const auto k = std::clamp<Index>(static_cast<Index>(std::lround(omega / (2.0 * std::numbers::pi * df))), 0,
                                   p.size() - 1);
  const double half = 0.5 * p(k);
  Index lo = k, hi = k;
  while (lo > 0 && p(lo - 1) >= half) --lo;
  while (hi + 1 < p.size() && p(hi + 1) >= half) ++hi;
  return std::max(1.0, static_cast<double>(hi - lo + 1));
}

HyperState initial_delta(const Eigen::MatrixXd& residuals, double dt, const Eigen::VectorXd& theta_nominal,
                         Index modes) {
  if (modes < 1) throw ValidationError("the kernel needs at least one mode");
  if (theta_nominal.size() < 1) throw ValidationError("nominal θ is empty");
  const double variance = total_variance(residuals);
  if (!(variance > 0.0) || !std::isfinite(variance)) throw ValidationError("nominal residual has no variance");

  const SpectrumEstimate spectrum = residual_psd(residuals, dt);
  std::vector<double> omegas = suggest_modes(spectrum, modes);
  const double df = spectrum.resolution();
  if (static_cast<Index>(omegas.size()) < modes) {
    std::vector<Index> order(static_cast<std::size_t>(spectrum.power.size() - 1));
    for (std::size_t j = 0; j < order.size(); ++j) order[j] = static_cast<Index>(j) + 1;
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return spectrum.power(a) > spectrum.power(b); });
    for (Index bin : order) {
      if (static_cast<Index>(omegas.size()) == modes) break;
      const double w = 2.0 * std::numbers::pi * spectrum.frequency(bin);
      const bool clear = std::all_of(omegas.begin(), omegas.end(),
                                     [&](double o) { return std::abs(o - w) >= 2.0 * 2.0 * std::numbers::pi * df; });
      if (clear) omegas.push_back(w);
    }
  }

  HyperState delta;
  delta.mu_theta = theta_nominal;
  delta.sigma_theta_sq = (0.1 * theta_nominal.cwiseAbs()).cwiseAbs2();
  delta.phi.variance = Eigen::VectorXd::Constant(modes, variance / 3.0);
  delta.phi.len_sq.resize(modes);
  delta.phi.omega.resize(modes);
  delta.phi.noise = 0.01 * variance;
  // A Gaussian peak exp(−ℓ²(ω−ω_k)²/4) has a half-power width of 4√(ln 2)/ℓ.
  const double gaussian_width = 4.0 * std::sqrt(std::numbers::ln2);
  for (Index k = 0; k < modes; ++k) {
    const double omega = omegas[static_cast<std::size_t>(k)];
    const double width = peak_width_bins(spectrum, omega) * 2.0 * std::numbers::pi * df;
    const double ell = gaussian_width / width;
    delta.phi.omega(k) = omega;
    delta.phi.len_sq(k) = ell * ell;
  }
  delta.phi.sort_by_frequency();
  return delta;
}

Eigen::MatrixXd nominal_residuals(const std::vector<Partition>& dataset, const StructuralSystem& system,
                                  const Eigen::VectorXd& theta_nominal, const Eigen::VectorXd& initial_state) {
  if (dataset.empty()) throw ValidationError("dataset is empty");
  Index rows = 0;
  for (const auto& p : dataset) rows += p.samples();
  Eigen::MatrixXd out(rows, system.outputs());
  Eigen::VectorXd state =
      initial_state.size() == 0 ? Eigen::VectorXd::Zero(2 * system.dofs()) : Eigen::VectorXd(initial_state);
  Index row = 0;
  for (const auto& p : dataset) {
    const SimulationResult sim = simulate(system, p.excitation(), theta_nominal, state, false);
    out.middleRows(row, p.samples()) = p.outputs - sim.response;
    row += p.samples();
    state = sim.final_state;
  }
  return out;
}

double bic_penalty(Index parameters, Index samples) {
  if (parameters < 0 || samples < 1) throw ValidationError("BIC penalty needs positive sample count");
  return 0.5 * static_cast<double>(parameters) * std::log(static_cast<double>(samples));
}

BicResult bic_score(const std::vector<Partition>& dataset, const StructuralSystem& system,
                    const Eigen::VectorXd& theta_nominal, Index modes, const BicOptions& options) {
  if (modes < 1) throw ValidationError("the kernel needs at least one mode");
  if (dataset.empty()) throw ValidationError("dataset is empty");
  if (options.max_partitions < 1) throw ValidationError("at least one partition must be screened");
  const auto used = static_cast<std::size_t>(std::min<Index>(options.max_partitions, static_cast<Index>(dataset.size())));
  const std::vector<Partition> subset(dataset.begin(), dataset.begin() + static_cast<std::ptrdiff_t>(used));

  const Eigen::MatrixXd residual = nominal_residuals(subset, system, theta_nominal, options.inference.initial_state);
  const HyperState delta0 = initial_delta(residual, system.dt, theta_nominal, modes);

  PipelineOptions pipeline;
  pipeline.inference = options.inference;
  const PipelineResult run = run_pipeline(subset, system, delta0, pipeline);

  BicResult out;
  out.modes = modes;
  out.parameters = HyperState::unconstrained_size(theta_nominal.size(), modes);
  for (const auto& p : subset) out.samples += p.samples() * p.channels();
  for (const auto& f : run.fits) out.log_likelihood -= f.objective;
  out.score = out.log_likelihood - bic_penalty(out.parameters, out.samples);
  out.delta = run.deltas.back();
  out.converged = run.all_converged();
  return out;
}

}  // namespace strucgp
