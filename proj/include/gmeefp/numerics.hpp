#ifndef GMEEFP_NUMERICS_HPP
#define GMEEFP_NUMERICS_HPP

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

namespace gmeefp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NotPositiveDefinite : Error {
  using Error::Error;
};

struct DomainError : Error {
  using Error::Error;
};

struct SingularNormalMatrix : Error {
  using Error::Error;
};

/// Lower Cholesky factor L of a symmetric positive definite matrix (A = L Lᵀ).
class LowerTriangular {
 public:
  LowerTriangular() = default;
  explicit LowerTriangular(Matrix l) : l_(std::move(l)) {}

  const Matrix& matrix() const { return l_; }
  Eigen::Index dim() const { return l_.rows(); }

  /// Solves L x = b.
  Matrix solve_lower(const Matrix& b) const {
    return l_.triangularView<Eigen::Lower>().solve(b);
  }

  /// Solves (L Lᵀ) x = b.
  Matrix solve(const Matrix& b) const {
    Matrix y = solve_lower(b);
    return l_.transpose().triangularView<Eigen::Upper>().solve(y);
  }

  Matrix inverse() const {
    return solve_lower(Matrix::Identity(dim(), dim()));
  }

  Matrix reconstruct() const { return l_ * l_.transpose(); }

 private:
  Matrix l_;
};

inline Matrix symmetrize(const Matrix& a) {
  return 0.5 * (a + a.transpose());
}

namespace detail {

inline bool try_llt(const Matrix& a, Matrix& out) {
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) return false;
  Matrix l = llt.matrixL();
  for (Eigen::Index i = 0; i < l.rows(); ++i) {
    if (!(l(i, i) > 0.0) || !std::isfinite(l(i, i))) return false;
  }
  out = std::move(l);
  return true;
}

}  // namespace detail

/// Cholesky factor of the symmetrized input. A single retry with
/// 1e-9 * trace/dim added to the diagonal is attempted before giving up.
inline LowerTriangular cholesky(const Matrix& a) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    throw DomainError("cholesky: matrix must be square and non-empty");
  }
  if (!a.allFinite()) {
    throw NotPositiveDefinite("cholesky: non-finite entries");
  }
  Matrix s = symmetrize(a);
  Matrix l;
  if (detail::try_llt(s, l)) return LowerTriangular(std::move(l));

  const double jitter = 1e-9 * s.trace() / static_cast<double>(s.rows());
  if (jitter > 0.0) {
    s.diagonal().array() += jitter;
    if (detail::try_llt(s, l)) return LowerTriangular(std::move(l));
  }
  throw NotPositiveDefinite("cholesky: matrix is not positive definite");
}

inline double gamma_fn(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw DomainError("gamma_fn: argument must be positive and finite");
  }
  return std::tgamma(x);
}

inline Matrix solve_spd(const Matrix& a, const Matrix& b) {
  if (b.rows() != a.rows()) {
    throw DomainError("solve_spd: row mismatch");
  }
  return cholesky(a).solve(b);
}

/// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::remainder(a, two_pi);
  if (r <= -std::numbers::pi) r += two_pi;
  return r;
}

}  // namespace gmeefp

#endif  // GMEEFP_NUMERICS_HPP
