#include "strucgp/truncated_factorization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <optional>

#include <Eigen/Eigenvalues>

#include "strucgp/errors.hpp"

namespace strucgp {

namespace {

// Below this size the eigen path is cheap enough to always take.
constexpr Index kCholeskyMinDimension = 48;
constexpr int kMaxQlIterations = 60;
// The true 1-norm rcond is at most λ_min/λ_max; the estimate can exceed it, hence the margin.
constexpr double kCholeskyMargin = 10.0;

void check_symmetric(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) throw ValidationError("covariance must be square");
  if (a.size() == 0) throw ValidationError("covariance must be non-empty");
  if (!a.allFinite()) throw ValidationError("covariance contains non-finite entries");
  const double scale = a.cwiseAbs().maxCoeff();
  if (scale == 0.0) throw ValidationError("cannot factorize an all-zero matrix");
  for (Index j = 0; j < a.cols(); ++j) {
    for (Index i = j + 1; i < a.rows(); ++i) {
      if (std::abs(a(i, j) - a(j, i)) > 1e-10 * scale) throw ValidationError("covariance is not symmetric");
    }
  }
}

// Cholesky factorization with its reciprocal 1-norm condition estimate; nullopt unless positive definite.
std::optional<Eigen::LLT<Eigen::MatrixXd>> try_cholesky(const Eigen::MatrixXd& a, double& rcond) {
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) return std::nullopt;
  rcond = llt.rcond();
  if (!(rcond > 0.0)) return std::nullopt;
  return llt;
}

// Largest eigenvalue and the retention threshold; throws for indefinite or non-positive spectra.
double retention_floor(const Eigen::VectorXd& ascending, double tol) {
  const double lmax = ascending(ascending.size() - 1);
  if (!(lmax > 0.0)) throw FactorizationError("covariance has no positive eigenvalue");
  if (ascending(0) < -tol * lmax) throw FactorizationError("covariance is indefinite beyond the truncation tolerance");
  return tol * lmax;
}

}  // namespace

struct TruncatedFactorization::Impl {
  Index dim = 0;
  Index rank = 0;
  double tol = 0.0;
  bool cholesky_mode = false;
  Eigen::MatrixXd lower;     // Cholesky factor, cholesky mode only
  Eigen::MatrixXd original;  // kept for lazily computed eigenpairs, cholesky mode only
  double floor_value = 0.0;

  mutable std::once_flag eigen_once;
  mutable Eigen::VectorXd values;
  mutable Eigen::MatrixXd vectors;

  void decompose(const Eigen::MatrixXd& a, bool keep_all) const {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
    if (eig.info() != Eigen::Success) throw FactorizationError("symmetric eigendecomposition did not converge");
    const Eigen::VectorXd& w = eig.eigenvalues();
    const Index n = w.size();
    const double floor = keep_all ? -std::numeric_limits<double>::infinity() : retention_floor(w, tol);
    Index kept = 0;
    while (kept < n && w(n - 1 - kept) >= floor) ++kept;
    values.resize(kept);
    vectors.resize(n, kept);
    for (Index k = 0; k < kept; ++k) {
      values(k) = w(n - 1 - k);
      vectors.col(k) = eig.eigenvectors().col(n - 1 - k);
    }
  }

  void ensure_eigen() const {
    if (!cholesky_mode) return;
    std::call_once(eigen_once, [this] { decompose(original, true); });
  }
};

TruncatedFactorization TruncatedFactorization::compute(const Eigen::MatrixXd& cov, double tol) {
  if (!(tol > 0.0 && tol < 1.0)) throw ValidationError("truncation tolerance must lie in (0, 1)");
  check_symmetric(cov);
  auto impl = std::make_shared<Impl>();
  impl->dim = cov.rows();
  impl->tol = tol;

  if (cov.rows() >= kCholeskyMinDimension) {
    double rcond = 0.0;
    if (auto llt = try_cholesky(cov, rcond); llt && rcond >= kCholeskyMargin * tol) {
      impl->cholesky_mode = true;
      impl->rank = impl->dim;
      impl->lower = llt->matrixL();
      impl->original = cov;
      return TruncatedFactorization(std::move(impl));
    }
  }
  impl->decompose(cov, false);
  impl->rank = impl->values.size();
  impl->floor_value = tol * impl->values(0);
  return TruncatedFactorization(std::move(impl));
}

TruncatedFactorization TruncatedFactorization::cholesky(const Eigen::MatrixXd& cov) {
  check_symmetric(cov);
  double rcond = 0.0;
  auto llt = try_cholesky(cov, rcond);
  if (!llt) throw FactorizationError("covariance is not positive definite");
  if (rcond < static_cast<double>(cov.rows()) * std::numeric_limits<double>::epsilon()) {
    throw FactorizationError("covariance is numerically singular");
  }
  auto impl = std::make_shared<Impl>();
  impl->dim = cov.rows();
  impl->rank = impl->dim;
  impl->tol = std::numeric_limits<double>::epsilon();
  impl->cholesky_mode = true;
  impl->lower = llt->matrixL();
  impl->original = cov;
  return TruncatedFactorization(std::move(impl));
}

Index TruncatedFactorization::dimension() const noexcept { return impl_->dim; }
Index TruncatedFactorization::rank() const noexcept { return impl_->rank; }
double TruncatedFactorization::tolerance() const noexcept { return impl_->tol; }

const Eigen::VectorXd& TruncatedFactorization::values() const {
  impl_->ensure_eigen();
  return impl_->values;
}

const Eigen::MatrixXd& TruncatedFactorization::vectors() const {
  impl_->ensure_eigen();
  return impl_->vectors;
}

double TruncatedFactorization::largest() const { return values()(0); }

Index TruncatedFactorization::density_dimension(DensityConvention convention) const noexcept {
  return convention == DensityConvention::pseudo_inverse ? impl_->rank : impl_->dim;
}

double TruncatedFactorization::log_det(DensityConvention convention) const {
  if (impl_->cholesky_mode) return 2.0 * impl_->lower.diagonal().array().log().sum();
  double sum = impl_->values.array().log().sum();
  if (convention == DensityConvention::eigenvalue_floor) {
    sum += static_cast<double>(impl_->dim - impl_->rank) * std::log(impl_->floor_value);
  }
  return sum;
}

double TruncatedFactorization::quad_form(const Eigen::VectorXd& r, DensityConvention convention) const {
  if (r.size() != impl_->dim) throw ValidationError("vector length does not match the factorized matrix");
  if (impl_->cholesky_mode) return impl_->lower.triangularView<Eigen::Lower>().solve(r).squaredNorm();
  const Eigen::VectorXd z = impl_->vectors.transpose() * r;
  double q = (z.array().square() / impl_->values.array()).sum();
  if (convention == DensityConvention::eigenvalue_floor && impl_->rank < impl_->dim) {
    q += (r - impl_->vectors * z).squaredNorm() / impl_->floor_value;
  }
  return q;
}

Eigen::MatrixXd TruncatedFactorization::solve(const Eigen::MatrixXd& b, DensityConvention convention) const {
  if (b.rows() != impl_->dim) throw ValidationError("right-hand side does not match the factorized matrix");
  if (impl_->cholesky_mode) {
    const auto lower = impl_->lower.triangularView<Eigen::Lower>();
    return lower.transpose().solve(lower.solve(b));
  }
  const Eigen::MatrixXd z = impl_->vectors.transpose() * b;
  Eigen::MatrixXd x = impl_->vectors * (impl_->values.cwiseInverse().asDiagonal() * z);
  if (convention == DensityConvention::eigenvalue_floor && impl_->rank < impl_->dim) {
    x += (b - impl_->vectors * z) / impl_->floor_value;
  }
  return x;
}

Eigen::MatrixXd TruncatedFactorization::reconstruct() const {
  if (impl_->cholesky_mode) return impl_->original;
  return impl_->vectors * impl_->values.asDiagonal() * impl_->vectors.transpose();
}

SpectralProjection spectral_projection(const Eigen::MatrixXd& a, const Eigen::VectorXd& r) {
  if (a.rows() != a.cols() || r.size() != a.rows()) throw ValidationError("spectral projection size mismatch");
  const Index n = a.rows();
  SpectralProjection out;
  if (n == 0) return out;
  const Eigen::Tridiagonalization<Eigen::MatrixXd> tri(a);
  Eigen::VectorXd d = tri.diagonal();
  Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
  e.head(n - 1) = tri.subDiagonal();
  Eigen::VectorXd v = tri.matrixQ().adjoint() * r;

  // Implicit QL with Wilkinson-type shifts on the tridiagonal matrix. The Givens rotations that
  // would accumulate the eigenvector matrix are applied to v instead, which yields Vᵀr directly.
  const double eps = std::numeric_limits<double>::epsilon();
  for (Index l = 0; l < n; ++l) {
    int iter = 0;
    Index m = l;
    do {
      for (m = l; m < n - 1; ++m) {
        const double dd = std::abs(d(m)) + std::abs(d(m + 1));
        if (std::abs(e(m)) <= eps * dd) break;
      }
      if (m == l) break;
      if (++iter > kMaxQlIterations) throw FactorizationError("tridiagonal QL iteration did not converge");
      double g = (d(l + 1) - d(l)) / (2.0 * e(l));
      double r_ = std::hypot(g, 1.0);
      g = d(m) - d(l) + e(l) / (g + std::copysign(r_, g));
      double s = 1.0, c = 1.0, p = 0.0;
      Index i = m - 1;
      bool deflated = false;
      for (; i >= l; --i) {
        const double f = s * e(i);
        const double b = c * e(i);
        r_ = std::hypot(f, g);
        e(i + 1) = r_;
        if (r_ == 0.0) {
          d(i + 1) -= p;
          e(m) = 0.0;
          deflated = true;
          break;
        }
        s = f / r_;
        c = g / r_;
        g = d(i + 1) - p;
        r_ = (d(i) - g) * s + 2.0 * c * b;
        p = s * r_;
        d(i + 1) = g + p;
        g = c * r_ - b;
        const double vf = v(i + 1);
        v(i + 1) = s * v(i) + c * vf;
        v(i) = c * v(i) - s * vf;
      }
      if (deflated) continue;
      d(l) -= p;
      e(l) = g;
      e(m) = 0.0;
    } while (true);
  }

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index x, Index y) { return d(x) < d(y); });
  out.values.resize(n);
  out.coordinates.resize(n);
  for (Index k = 0; k < n; ++k) {
    out.values(k) = d(order[static_cast<std::size_t>(k)]);
    out.coordinates(k) = v(order[static_cast<std::size_t>(k)]);
  }
  return out;
}

DensityTerms truncated_density_terms(const Eigen::MatrixXd& cov, const Eigen::VectorXd& r, double tol,
                                     DensityConvention convention) {
  if (!(tol > 0.0 && tol < 1.0)) throw ValidationError("truncation tolerance must lie in (0, 1)");
  check_symmetric(cov);
  if (r.size() != cov.rows()) throw ValidationError("vector length does not match the covariance");
  const Index n = cov.rows();
  DensityTerms out;

  if (n >= kCholeskyMinDimension) {
    double rcond = 0.0;
    if (auto llt = try_cholesky(cov, rcond); llt && rcond >= kCholeskyMargin * tol) {
      const auto lower = llt->matrixL();
      out.log_det = 2.0 * llt->matrixLLT().diagonal().array().log().sum();
      out.quad_form = lower.solve(r).squaredNorm();
      out.dimension = out.rank = n;
      return out;
    }
  }

  const SpectralProjection sp = spectral_projection(cov, r);
  const double floor = retention_floor(sp.values, tol);
  double discarded = 0.0;
  for (Index k = 0; k < n; ++k) {
    const double z2 = sp.coordinates(k) * sp.coordinates(k);
    if (sp.values(k) >= floor) {
      out.log_det += std::log(sp.values(k));
      out.quad_form += z2 / sp.values(k);
      ++out.rank;
    } else {
      discarded += z2;
    }
  }
  out.dimension = out.rank;
  if (convention == DensityConvention::eigenvalue_floor && out.rank < n) {
    out.log_det += static_cast<double>(n - out.rank) * std::log(floor);
    out.quad_form += discarded / floor;
    out.dimension = n;
  }
  return out;
}

TruncatedFactorization svd_truncate(const Eigen::MatrixXd& cov, double tol) {
  return TruncatedFactorization::compute(cov, tol);
}

}  // namespace strucgp
