#include "strucgp/datasets.hpp"

#include <cmath>
#include <random>

#include "strucgp/errors.hpp"

namespace strucgp {

namespace {

void check_uniform(const TimeSeries& s, const char* what) {
  if (!(s.dt > 0.0) || !std::isfinite(s.dt)) throw ValidationError(std::string(what) + " sampling interval must be positive");
  if (!std::isfinite(s.t0)) throw ValidationError(std::string(what) + " start time must be finite");
}

}  // namespace

Excitation generate_gwn_excitation(Index n, double dt, double std_dev, std::uint64_t seed, Index channels, double t0) {
  if (n < 0) throw ValidationError("sample count must be non-negative");
  if (channels < 1) throw ValidationError("at least one channel is required");
  if (!(std_dev > 0.0) || !std::isfinite(std_dev)) throw ValidationError("excitation std must be positive");
  if (!(dt > 0.0)) throw ValidationError("sampling interval must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, std_dev);
  Excitation x;
  x.t0 = t0;
  x.dt = dt;
  x.values.resize(n, channels);
  for (Index k = 0; k < n; ++k) {
    for (Index c = 0; c < channels; ++c) x.values(k, c) = normal(rng);
  }
  for (Index c = 0; c < channels; ++c) x.labels.push_back("x" + std::to_string(c + 1));
  return x;
}

TimeSeries add_measurement_noise(const TimeSeries& signal, double rms_fraction, std::uint64_t seed) {
  if (!(rms_fraction >= 0.0) || !std::isfinite(rms_fraction)) throw ValidationError("noise fraction must be non-negative");
  TimeSeries out = signal;
  if (rms_fraction == 0.0 || signal.samples() == 0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index c = 0; c < signal.channels(); ++c) {
    const double rms = std::sqrt(signal.values.col(c).squaredNorm() / static_cast<double>(signal.samples()));
    const double scale = rms_fraction * rms;
    for (Index k = 0; k < signal.samples(); ++k) out.values(k, c) += scale * normal(rng);
  }
  return out;
}

PartitionedData partition_dataset(const Excitation& x, const TimeSeries& y, Index n) {
  check_uniform(x, "input");
  check_uniform(y, "output");
  if (x.samples() != y.samples()) throw ValidationError("input and output series differ in length");
  if (x.t0 != y.t0 || x.dt != y.dt) throw ValidationError("input and output series use different time grids");
  if (n < 1) throw ValidationError("partition size must be positive");
  const Index total = x.samples();
  if (n > total) {
    throw ValidationError("partition size " + std::to_string(n) + " exceeds the series length " + std::to_string(total));
  }
  PartitionedData out;
  const Index count = total / n;
  out.dropped = total - count * n;
  if (out.dropped > 0) {
    out.warning = "dropping " + std::to_string(out.dropped) + " trailing samples that do not fill a partition of " +
                  std::to_string(n);
  }
  out.partitions.reserve(static_cast<std::size_t>(count));
  for (Index i = 0; i < count; ++i) {
    Partition p;
    p.index = i + 1;
    p.grid = TimeGrid{x.t0, x.dt, i * n, n};
    p.inputs = x.values.middleRows(i * n, n);
    p.outputs = y.values.middleRows(i * n, n);
    out.partitions.push_back(std::move(p));
  }
  return out;
}

std::pair<Excitation, TimeSeries> concatenate(const std::vector<Partition>& partitions) {
  if (partitions.empty()) throw ValidationError("no partitions to concatenate");
  Index rows = 0;
  for (std::size_t i = 0; i < partitions.size(); ++i) {
    if (i > 0) {
      const TimeGrid& a = partitions[i - 1].grid;
      const TimeGrid& b = partitions[i].grid;
      if (a.origin != b.origin || a.dt != b.dt || a.first + a.count != b.first) {
        throw ValidationError("partitions are not contiguous");
      }
    }
    rows += partitions[i].samples();
  }
  Excitation x;
  TimeSeries y;
  x.t0 = y.t0 = partitions.front().grid.stamp(0);
  x.dt = y.dt = partitions.front().grid.dt;
  x.values.resize(rows, partitions.front().inputs.cols());
  y.values.resize(rows, partitions.front().outputs.cols());
  Index row = 0;
  for (const auto& p : partitions) {
    x.values.middleRows(row, p.samples()) = p.inputs;
    y.values.middleRows(row, p.samples()) = p.outputs;
    row += p.samples();
  }
  return {std::move(x), std::move(y)};
}

std::vector<Eigen::VectorXd> draw_partition_thetas(const Eigen::VectorXd& nominal, double std_dev, Index count,
                                                   std::uint64_t seed) {
  if (count < 0) throw ValidationError("partition count must be non-negative");
  if (!(std_dev >= 0.0)) throw ValidationError("θ std must be non-negative");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Eigen::VectorXd> out;
  out.reserve(static_cast<std::size_t>(count));
  for (Index i = 0; i < count; ++i) {
    Eigen::VectorXd theta = nominal;
    for (Index j = 0; j < theta.size(); ++j) theta(j) += std_dev * normal(rng);
    out.push_back(std::move(theta));
  }
  return out;
}

TimeSeries simulate_piecewise(const StructuralSystem& system, const Excitation& x, Index n,
                              const std::vector<Eigen::VectorXd>& thetas, const Eigen::VectorXd& initial_state) {
  if (n < 1) throw ValidationError("block size must be positive");
  if (thetas.empty()) throw ValidationError("at least one θ is required");
  TimeSeries y;
  y.t0 = x.t0;
  y.dt = x.dt;
  y.values.resize(x.samples(), system.outputs());
  for (Index c = 0; c < system.outputs(); ++c) y.labels.push_back("y" + std::to_string(c + 1));
  Eigen::VectorXd state =
      initial_state.size() == 0 ? Eigen::VectorXd::Zero(2 * system.dofs()) : Eigen::VectorXd(initial_state);
  Index row = 0;
  for (std::size_t i = 0; row < x.samples(); ++i) {
    const bool last = i + 1 >= thetas.size();
    const Index len = last ? x.samples() - row : std::min(n, x.samples() - row);
    Excitation block;
    block.t0 = x.time(row);
    block.dt = x.dt;
    block.values = x.values.middleRows(row, len);
    const SimulationResult sim = simulate(system, block, thetas[std::min(i, thetas.size() - 1)], state, false);
    y.values.middleRows(row, len) = sim.response;
    state = sim.final_state;
    row += len;
  }
  return y;
}

}  // namespace strucgp
