#pragma once

#include <functional>

#include <Eigen/Dense>

namespace strucgp {

struct NelderMeadOptions {
  int max_evaluations = 4000;
  double f_tolerance = 1e-8;  ///< relative spread of simplex values
  double x_tolerance = 1e-6;  ///< largest vertex distance from the best vertex (max-norm)
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int evaluations = 0;
  int iterations = 0;
  bool converged = false;
};

/**
 * @brief Derivative-free simplex minimization with dimension-adaptive coefficients.
 *
 * The initial simplex is x0 plus steps(i)·e_i for each coordinate. Non-finite objective values
 * are treated as +∞.
 */
[[nodiscard]] NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& objective,
                                           const Eigen::VectorXd& x0, const Eigen::VectorXd& steps,
                                           const NelderMeadOptions& options = {});

}  // namespace strucgp
