#include "strucgp/sequential_inference.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "strucgp/errors.hpp"

namespace strucgp {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

SensitivityMethod effective_method(const StructuralSystem& system, const InferenceOptions& options) {
  if (options.sensitivity == SensitivityMethod::exact && system.stiffness.is_affine()) return SensitivityMethod::exact;
  return SensitivityMethod::central_difference;
}

TruncatedFactorization factorize(const Eigen::MatrixXd& cov, const FactorizationPolicy& policy) {
  return policy.truncate ? TruncatedFactorization::compute(cov, policy.tol) : TruncatedFactorization::cholesky(cov);
}

void check_partition(const Partition& partition, const StructuralSystem& system) {
  if (partition.grid.count < 1) throw ValidationError("partition is empty");
  if (partition.outputs.rows() != partition.grid.count || partition.inputs.rows() != partition.grid.count) {
    throw ValidationError("partition series lengths differ from its time grid");
  }
  if (partition.outputs.cols() != system.outputs()) {
    throw ValidationError("partition has " + std::to_string(partition.outputs.cols()) + " output channels, model observes " +
                          std::to_string(system.outputs()));
  }
  if (std::abs(partition.grid.dt - system.dt) > 1e-12 * system.dt) {
    throw ValidationError("partition sampling interval differs from the model");
  }
}

Eigen::VectorXd resolve_state(const StructuralSystem& system, const Eigen::VectorXd& state) {
  if (state.size() == 0) return Eigen::VectorXd::Zero(2 * system.dofs());
  if (state.size() != 2 * system.dofs()) throw ValidationError("initial state must have 2*n_dof entries");
  return state;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  // splitmix64 finalizer over the combined words
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (a + 1) + 0xBF58476D1CE4E5B9ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

bool lexicographically_less(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

bool has_collision(const MmteParams& phi, double tolerance) {
  for (Index k = 0; k + 1 < phi.modes(); ++k) {
    if (std::abs(phi.omega(k + 1) - phi.omega(k)) <= tolerance * std::abs(phi.omega(k + 1))) return true;
  }
  return false;
}

}  // namespace

PartitionState make_partition_state(const Partition& partition, const HyperState& delta,
                                    const StructuralSystem& system, const Eigen::VectorXd& initial_state,
                                    const InferenceOptions& options) {
  check_partition(partition, system);
  delta.validate();
  if (delta.n_theta() != system.parameters()) throw ValidationError("hyper-state θ size differs from the model");

  PartitionState state;
  state.delta = delta;
  state.partition = partition;
  state.initial_state = resolve_state(system, initial_state);
  const SimulationResult sim = simulate(system, partition.excitation(), delta.mu_theta, state.initial_state, true,
                                        effective_method(system, options));
  state.final_state = sim.final_state;
  state.model_mean = stack_channels(sim.response);
  state.jacobian = sim.sensitivities;
  state.residual = stack_channels(partition.outputs) - state.model_mean;
  const Eigen::MatrixXd block =
      assemble_channels(partition.grid, partition.grid, delta.phi, system.outputs(), true) +
      tangent_covariance(state.jacobian, delta.sigma_theta_sq);
  state.block = std::make_shared<const TruncatedFactorization>(factorize(block, options.factorization));
  return state;
}

ConditionalModel::ConditionalModel(const PartitionState* prev, const Partition& partition,
                                   const StructuralSystem& system, const InferenceOptions& options)
    : system_(&system), partition_(partition), options_(options) {
  system.validate();
  check_partition(partition, system);
  y_ = stack_channels(partition.outputs);
  if (prev == nullptr) {
    x0_ = resolve_state(system, options.initial_state);
    return;
  }
  const TimeGrid& before = prev->partition.grid;
  if (before.origin != partition.grid.origin || before.dt != partition.grid.dt ||
      before.first + before.count != partition.grid.first) {
    throw ValidationError("partition is not contiguous with the previous one");
  }
  x0_ = prev->final_state;
  // The cross block uses the earlier partition's kernel parameters and carries no tangent term.
  const Eigen::MatrixXd cross = assemble_channels(before, partition.grid, prev->delta.phi, system.outputs(), false);
  const Eigen::MatrixXd gain = prev->block->solve(cross, options.factorization.convention);
  mean_shift_ = gain.transpose() * prev->residual;
  cov_shift_ = cross.transpose() * gain;
  cov_shift_ = 0.5 * (cov_shift_ + cov_shift_.transpose()).eval();
}

ConditionalModel::Moments ConditionalModel::moments(const HyperState& delta) const {
  delta.validate();
  if (delta.n_theta() != system_->parameters()) throw ValidationError("hyper-state θ size differs from the model");
  const SimulationResult sim = simulate(*system_, partition_.excitation(), delta.mu_theta, x0_, true,
                                        effective_method(*system_, options_));
  Moments m;
  m.final_state = sim.final_state;
  m.mean = stack_channels(sim.response);
  m.cov = assemble_channels(partition_.grid, partition_.grid, delta.phi, system_->outputs(), true);
  m.cov += tangent_covariance(sim.sensitivities, delta.sigma_theta_sq);
  if (mean_shift_.size() != 0) {
    m.mean += mean_shift_;
    m.cov -= cov_shift_;
  }
  return m;
}

GaussianDist ConditionalModel::distribution(const HyperState& delta) const {
  Moments m = moments(delta);
  return GaussianDist(std::move(m.mean), std::move(m.cov), options_.factorization);
}

double ConditionalModel::negative_log_likelihood(const HyperState& delta) const {
  const Moments m = moments(delta);
  return -log_density(y_, m.mean, m.cov, options_.factorization);
}

GaussianDist conditional_predictive(const PartitionState* prev, const HyperState& delta, const Partition& partition,
                                    const StructuralSystem& system, const InferenceOptions& options) {
  return ConditionalModel(prev, partition, system, options).distribution(delta);
}

double negative_log_likelihood(const Eigen::VectorXd& delta_unconstrained, const Partition& partition,
                               const PartitionState* prev, const StructuralSystem& system,
                               const InferenceOptions& options, bool* penalized) {
  const ConditionalModel model(prev, partition, system, options);
  const Index n_theta = system.parameters();
  const Index rest = delta_unconstrained.size() - 2 * n_theta - 1;
  if (rest < 3 || rest % 3 != 0) throw ValidationError("unconstrained vector length does not fit the model");
  if (penalized != nullptr) *penalized = false;
  try {
    const double value =
        model.negative_log_likelihood(HyperState::from_unconstrained(delta_unconstrained, n_theta, rest / 3));
    if (std::isfinite(value)) return value;
  } catch (const ValidationError&) {
  } catch (const FactorizationError&) {
  }
  if (penalized != nullptr) *penalized = true;
  return kPenalizedObjective;
}

FitResult fit_partition(const Partition& partition, const PartitionState* prev, const HyperState& delta_init,
                        const StructuralSystem& system, const InferenceOptions& options) {
  const auto start = Clock::now();
  delta_init.validate();
  if (options.starts < 1) throw ValidationError("at least one simplex start is required");
  const ConditionalModel model(prev, partition, system, options);
  const Index n_theta = delta_init.n_theta();
  const Index modes = delta_init.modes();

  FitResult fit;
  auto objective = [&](const Eigen::VectorXd& u) {
    try {
      const double value = model.negative_log_likelihood(HyperState::from_unconstrained(u, n_theta, modes));
      if (std::isfinite(value)) return value;
    } catch (const ValidationError&) {
    } catch (const FactorizationError&) {
    }
    ++fit.penalized_evaluations;
    return kPenalizedObjective;
  };

  const Eigen::VectorXd u0 = delta_init.to_unconstrained();
  Eigen::VectorXd steps = Eigen::VectorXd::Constant(u0.size(), options.log_step);
  for (Index j = 0; j < n_theta; ++j) {
    steps(j) = u0(j) != 0.0 ? options.mean_step * std::abs(u0(j)) : options.mean_step;
  }

  std::mt19937_64 rng(mix_seed(options.seed, static_cast<std::uint64_t>(partition.index)));
  std::normal_distribution<double> normal(0.0, 1.0);
  NelderMeadResult best;
  bool have_best = false;
  for (int s = 0; s < options.starts; ++s) {
    Eigen::VectorXd x = u0;
    if (s > 0) {
      for (Index k = 0; k < x.size(); ++k) {
        // Relative perturbation for θ means, matching the log-scale coordinates.
        const double scale = k < n_theta ? options.restart_scale * steps(k) / options.mean_step : options.restart_scale;
        x(k) += scale * normal(rng);
      }
    }
    NelderMeadResult run = nelder_mead(objective, x, steps, options.simplex);
    fit.evaluations += run.evaluations;
    const bool better = !have_best || run.value < best.value ||
                        (run.value == best.value && lexicographically_less(run.x, best.x));
    if (better) {
      best = std::move(run);
      have_best = true;
    }
  }

  fit.delta = HyperState::from_unconstrained(best.x, n_theta, modes);
  fit.delta.phi.sort_by_frequency();
  fit.objective = best.value;
  fit.converged = best.converged && best.value < kPenalizedObjective;
  fit.frequency_collision = has_collision(fit.delta.phi, options.collision_tolerance);
  try {
    const GaussianDist dist = model.distribution(fit.delta);
    fit.retained_rank = dist.factorization().rank();
    fit.dimension = dist.dimension();
  } catch (const std::exception&) {
    fit.converged = false;
  }
  fit.seconds = seconds_since(start);
  return fit;
}

RandomWalkCov estimate_Q(const std::vector<Eigen::VectorXd>& deltas, const HyperLayout& layout) {
  if (deltas.size() < 2) throw ValidationError("estimate_Q needs at least two states");
  const Index d = layout.size();
  RandomWalkCov out{layout, Eigen::MatrixXd::Zero(d, d)};
  for (std::size_t i = 1; i < deltas.size(); ++i) {
    if (deltas[i].size() != d || deltas[i - 1].size() != d) throw ValidationError("state length differs from layout");
    const Eigen::VectorXd step = deltas[i] - deltas[i - 1];
    out.q.noalias() += step * step.transpose();
  }
  out.q /= static_cast<double>(deltas.size() - 1);
  for (Index i = 0; i < d; ++i) {
    for (Index j = 0; j < d; ++j) {
      if (layout.block_of(i) != layout.block_of(j)) out.q(i, j) = 0.0;
    }
  }
  return out;
}

std::vector<HyperState> sample_next_delta(const HyperState& delta_last, const RandomWalkCov& q, int count,
                                          std::uint64_t seed) {
  if (count < 1) throw ValidationError("at least one sample is required");
  const Eigen::VectorXd center = delta_last.to_unconstrained();
  if (q.q.rows() != center.size() || q.q.cols() != center.size()) {
    throw ValidationError("random-walk covariance does not match the hyper-state");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(q.q);
  const Eigen::MatrixXd root = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<HyperState> samples;
  samples.reserve(static_cast<std::size_t>(count));
  Eigen::VectorXd z(center.size());
  for (int s = 0; s < count; ++s) {
    for (Index k = 0; k < z.size(); ++k) z(k) = normal(rng);
    samples.push_back(HyperState::from_unconstrained(center + root * z, delta_last.n_theta(), delta_last.modes()));
  }
  return samples;
}

PredictiveResult predict_response(const Excitation& x_new, const std::vector<HyperState>& samples,
                                  const PartitionState& last, const StructuralSystem& system,
                                  const InferenceOptions& options, bool full_covariance) {
  if (samples.empty()) throw ValidationError("predict_response needs at least one sample");
  const Index channels = system.outputs();
  const TimeGrid& before = last.partition.grid;

  PredictiveResult out;
  out.grid = TimeGrid{before.origin, before.dt, before.first + before.count, x_new.samples()};
  out.channels = channels;
  out.samples = samples;
  const Index dim = x_new.samples() * channels;
  out.mean = Eigen::VectorXd::Zero(dim);
  out.variance = Eigen::VectorXd::Zero(dim);
  if (dim == 0) {
    out.used = static_cast<int>(samples.size());
    return out;
  }

  // Conditioning terms depend only on the last fitted partition.
  const Eigen::MatrixXd cross = assemble_channels(before, out.grid, last.delta.phi, channels, false);
  const Eigen::MatrixXd gain = last.block->solve(cross, options.factorization.convention);
  const Eigen::VectorXd mean_shift = gain.transpose() * last.residual;
  const Eigen::VectorXd var_shift = cross.cwiseProduct(gain).colwise().sum().transpose();
  Eigen::MatrixXd cov_shift;
  if (full_covariance) cov_shift = 0.5 * (cross.transpose() * gain + gain.transpose() * cross);

  const SensitivityMethod method = effective_method(system, options);
  std::vector<Eigen::VectorXd> means;
  Eigen::MatrixXd cov_sum;
  if (full_covariance) cov_sum = Eigen::MatrixXd::Zero(dim, dim);
  for (const HyperState& h : samples) {
    try {
      h.validate();
      const SimulationResult sim = simulate(system, x_new, h.mu_theta, last.final_state, true, method);
      Eigen::VectorXd mean = stack_channels(sim.response) + mean_shift;
      const double lag0 = kernel_value(0.0, h.phi);
      Eigen::VectorXd var = Eigen::VectorXd::Constant(dim, lag0) - var_shift;
      var += sim.sensitivities.array().square().matrix() * h.sigma_theta_sq;
      const double floor = -1e-10 * lag0;
      if (!mean.allFinite() || !var.allFinite() || (var.array() < floor).any()) {
        ++out.dropped;
        continue;
      }
      var = var.cwiseMax(0.0);
      if (full_covariance) {
        cov_sum += assemble_channels(out.grid, out.grid, h.phi, channels, true) +
                   tangent_covariance(sim.sensitivities, h.sigma_theta_sq) - cov_shift;
      }
      out.variance += var;
      means.push_back(std::move(mean));
    } catch (const ValidationError&) {
      ++out.dropped;
    } catch (const FactorizationError&) {
      ++out.dropped;
    }
  }
  if (10 * out.dropped > static_cast<int>(samples.size())) {
    throw FactorizationError("more than 10% of predictive samples were invalid (" + std::to_string(out.dropped) + " of " +
                             std::to_string(samples.size()) + ")");
  }
  out.used = static_cast<int>(means.size());
  const double inv = 1.0 / static_cast<double>(out.used);
  for (const auto& m : means) out.mean += m;
  out.mean *= inv;
  out.variance *= inv;
  if (full_covariance) out.covariance = cov_sum * inv;
  for (const auto& m : means) {
    const Eigen::VectorXd centred = m - out.mean;
    out.variance += inv * centred.cwiseAbs2();
    if (full_covariance) out.covariance.noalias() += inv * centred * centred.transpose();
  }
  return out;
}

ThetaSummary summarize_theta(const HyperState& last, const RandomWalkCov& q) {
  const Index n = last.n_theta();
  ThetaSummary s;
  s.mean = last.mu_theta;
  s.hyper_std = last.sigma_theta_sq.cwiseSqrt();
  s.walk_std.resize(n);
  s.predictive_std.resize(n);
  // σ_θ² enters at its most probable value. Its lognormal mean exp(u + Q/2) is dominated by the first
  // step away from the heuristic start whenever σ_θ² is weakly identified within a partition.
  for (Index j = 0; j < n; ++j) {
    const double q_mean = q.q(j, j);
    s.walk_std(j) = std::sqrt(q_mean);
    s.predictive_std(j) = std::sqrt(q_mean + last.sigma_theta_sq(j));
  }
  return s;
}

bool PipelineResult::all_converged() const noexcept {
  return std::all_of(fits.begin(), fits.end(), [](const FitResult& f) { return f.converged; });
}

bool PipelineResult::frequency_collision() const noexcept {
  return std::any_of(fits.begin(), fits.end(), [](const FitResult& f) { return f.frequency_collision; });
}

PipelineResult run_pipeline(const std::vector<Partition>& dataset, const StructuralSystem& system,
                            const HyperState& delta0, const PipelineOptions& options,
                            const std::optional<Excitation>& x_new) {
  const auto start = Clock::now();
  if (dataset.empty()) throw ValidationError("run_pipeline needs at least one partition");
  delta0.validate();

  PipelineResult result;
  result.deltas.push_back(delta0);
  result.states.reserve(dataset.size());
  const PartitionState* prev = nullptr;
  for (const Partition& partition : dataset) {
    FitResult fit = fit_partition(partition, prev, result.deltas.back(), system, options.inference);
    const Eigen::VectorXd x0 = prev != nullptr ? prev->final_state : options.inference.initial_state;
    result.states.push_back(make_partition_state(partition, fit.delta, system, x0, options.inference));
    result.deltas.push_back(fit.delta);
    result.fits.push_back(std::move(fit));
    prev = &result.states.back();
  }

  std::vector<Eigen::VectorXd> unconstrained;
  unconstrained.reserve(result.deltas.size());
  for (const auto& d : result.deltas) unconstrained.push_back(d.to_unconstrained());
  result.q = estimate_Q(unconstrained, HyperLayout{delta0.n_theta(), delta0.modes()});
  result.theta = summarize_theta(result.deltas.back(), result.q);

  if (x_new.has_value()) {
    const auto samples =
        sample_next_delta(result.deltas.back(), result.q, options.prediction_samples, options.sample_seed);
    result.prediction =
        predict_response(*x_new, samples, result.states.back(), system, options.inference, options.full_covariance);
  }
  result.seconds = seconds_since(start);
  return result;
}

ClassicalFit fit_classical(const std::vector<Partition>& dataset, const StructuralSystem& system,
                           const Eigen::VectorXd& theta0, const InferenceOptions& options) {
  if (dataset.empty()) throw ValidationError("fit_classical needs at least one partition");
  Index total = 0;
  for (const auto& p : dataset) total += p.samples() * p.channels();

  auto rss = [&](const Eigen::VectorXd& theta) {
    try {
      Eigen::VectorXd state = resolve_state(system, options.initial_state);
      double sum = 0.0;
      for (const auto& p : dataset) {
        const SimulationResult sim = simulate(system, p.excitation(), theta, state, false);
        sum += (p.outputs - sim.response).squaredNorm();
        state = sim.final_state;
      }
      return sum;
    } catch (const std::exception&) {
      return kPenalizedObjective;
    }
  };
  Eigen::VectorXd steps(theta0.size());
  for (Index j = 0; j < theta0.size(); ++j) {
    steps(j) = theta0(j) != 0.0 ? options.mean_step * std::abs(theta0(j)) : options.mean_step;
  }
  const NelderMeadResult r = nelder_mead(rss, theta0, steps, options.simplex);
  return ClassicalFit{r.x, r.value / static_cast<double>(total), r.converged};
}

}  // namespace strucgp
