#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "strucgp/linear_structure.hpp"
#include "strucgp/partition.hpp"

namespace strucgp {

/// Zero-mean i.i.d. Gaussian input of n samples, deterministic for a given seed.
[[nodiscard]] Excitation generate_gwn_excitation(Index n, double dt, double std_dev, std::uint64_t seed,
                                                 Index channels = 1, double t0 = 0.0);

/// Adds i.i.d. Gaussian noise with per-channel std = rms_fraction × RMS(channel).
[[nodiscard]] TimeSeries add_measurement_noise(const TimeSeries& signal, double rms_fraction, std::uint64_t seed);

struct PartitionedData {
  std::vector<Partition> partitions;
  Index dropped = 0;    ///< trailing samples that did not fill a partition
  std::string warning;  ///< non-empty when samples were dropped
};

/// Splits aligned input/output series into ⌊total/n⌋ contiguous partitions on one global grid.
[[nodiscard]] PartitionedData partition_dataset(const Excitation& x, const TimeSeries& y, Index n);

/// Concatenates partitions back into input and output series.
[[nodiscard]] std::pair<Excitation, TimeSeries> concatenate(const std::vector<Partition>& partitions);

/// Per-partition true θ drawn i.i.d. from N(nominal, std_dev²).
[[nodiscard]] std::vector<Eigen::VectorXd> draw_partition_thetas(const Eigen::VectorXd& nominal, double std_dev,
                                                                 Index count, std::uint64_t seed);

/**
 * @brief Response to x where θ switches to thetas[i] at the start of the i-th block of n samples.
 *
 * The structural state carries over between blocks. Samples past the last full block use the last θ.
 */
[[nodiscard]] TimeSeries simulate_piecewise(const StructuralSystem& system, const Excitation& x, Index n,
                                            const std::vector<Eigen::VectorXd>& thetas,
                                            const Eigen::VectorXd& initial_state = {});

}  // namespace strucgp
