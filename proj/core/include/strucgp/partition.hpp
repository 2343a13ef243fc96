#pragma once

#include <Eigen/Dense>

#include "strucgp/linear_structure.hpp"
#include "strucgp/mmte_kernel.hpp"

namespace strucgp {

/// One contiguous data segment: inputs and measured outputs on a slice of the global grid.
struct Partition {
  Index index = 0;
  TimeGrid grid;
  Eigen::MatrixXd inputs;   ///< n × N_x
  Eigen::MatrixXd outputs;  ///< n × N_o

  [[nodiscard]] Index samples() const noexcept { return grid.count; }
  [[nodiscard]] Index channels() const noexcept { return outputs.cols(); }

  [[nodiscard]] Excitation excitation() const {
    Excitation x;
    x.t0 = grid.stamp(0);
    x.dt = grid.dt;
    x.values = inputs;
    return x;
  }
};

}  // namespace strucgp
