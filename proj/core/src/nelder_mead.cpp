#include "strucgp/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "strucgp/errors.hpp"

namespace strucgp {

NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& objective,
                             const Eigen::VectorXd& x0, const Eigen::VectorXd& steps,
                             const NelderMeadOptions& options) {
  const Eigen::Index n = x0.size();
  if (n == 0) throw ValidationError("nelder_mead needs at least one variable");
  if (steps.size() != n) throw ValidationError("nelder_mead: one initial step per variable is required");

  // Coefficients of Gao & Han, which keep the method effective in higher dimensions.
  const double dn = static_cast<double>(n);
  const double reflect = 1.0;
  const double expand = 1.0 + 2.0 / dn;
  const double contract = 0.75 - 1.0 / (2.0 * dn);
  const double shrink = 1.0 - 1.0 / dn;

  NelderMeadResult result;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++result.evaluations;
    const double f = objective(x);
    return std::isfinite(f) ? f : std::numeric_limits<double>::infinity();
  };

  std::vector<Eigen::VectorXd> vertex(static_cast<std::size_t>(n + 1), x0);
  std::vector<double> value(static_cast<std::size_t>(n + 1));
  value[0] = eval(x0);
  for (Eigen::Index i = 0; i < n; ++i) {
    vertex[static_cast<std::size_t>(i + 1)](i) += steps(i);
    value[static_cast<std::size_t>(i + 1)] = eval(vertex[static_cast<std::size_t>(i + 1)]);
  }

  std::vector<std::size_t> order(static_cast<std::size_t>(n + 1));
  auto sort_simplex = [&] {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return value[a] < value[b]; });
  };

  while (true) {
    sort_simplex();
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second = order[order.size() - 2];

    double spread = 0.0;
    for (const auto& v : vertex) spread = std::max(spread, (v - vertex[best]).cwiseAbs().maxCoeff());
    const double f_spread = value[worst] - value[best];
    if (std::isfinite(f_spread) &&
        f_spread <= options.f_tolerance * (std::abs(value[best]) + options.f_tolerance) &&
        spread <= options.x_tolerance) {
      result.converged = true;
      break;
    }
    if (result.evaluations >= options.max_evaluations) break;
    ++result.iterations;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (std::size_t k = 0; k + 1 < order.size(); ++k) centroid += vertex[order[k]];
    centroid /= dn;

    const Eigen::VectorXd xr = centroid + reflect * (centroid - vertex[worst]);
    const double fr = eval(xr);
    if (fr < value[best]) {
      const Eigen::VectorXd xe = centroid + expand * (xr - centroid);
      const double fe = eval(xe);
      if (fe < fr) {
        vertex[worst] = xe;
        value[worst] = fe;
      } else {
        vertex[worst] = xr;
        value[worst] = fr;
      }
      continue;
    }
    if (fr < value[second]) {
      vertex[worst] = xr;
      value[worst] = fr;
      continue;
    }
    const bool outside = fr < value[worst];
    const Eigen::VectorXd xc =
        outside ? Eigen::VectorXd(centroid + contract * (xr - centroid))
                : Eigen::VectorXd(centroid - contract * (centroid - vertex[worst]));
    const double fc = eval(xc);
    if (fc < (outside ? fr : value[worst])) {
      vertex[worst] = xc;
      value[worst] = fc;
      continue;
    }
    for (std::size_t k = 1; k < order.size(); ++k) {
      const std::size_t idx = order[k];
      vertex[idx] = vertex[best] + shrink * (vertex[idx] - vertex[best]);
      value[idx] = eval(vertex[idx]);
    }
  }

  sort_simplex();
  result.x = vertex[order.front()];
  result.value = value[order.front()];
  return result;
}

}  // namespace strucgp
