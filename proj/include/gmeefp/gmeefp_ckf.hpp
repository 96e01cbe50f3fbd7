#ifndef GMEEFP_GMEEFP_CKF_HPP
#define GMEEFP_GMEEFP_CKF_HPP

#include <algorithm>
#include <cassert>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "gmeefp/ckf.hpp"
#include "gmeefp/criterion.hpp"
#include "gmeefp/numerics.hpp"
#include "gmeefp/state_space.hpp"

namespace gmeefp {

struct UnknownPreset : Error {
  using Error::Error;
};

/// Whitened augmented regression d = W x + e built from the predicted belief
/// and the measurement:
///   [x_pred; nu + H x_pred] = [I; H] x + mu,   E[mu muᵀ] = Θ Θᵀ,
///   d = Θ⁻¹ [x_pred; nu + H x_pred],  W = Θ⁻¹ [I; H].
struct RegressionSystem {
  Vector d;
  Matrix W;
  LowerTriangular theta;
  LowerTriangular theta_p;
  LowerTriangular theta_r;
  Matrix H;
  Vector x_pred;
  Vector y_pred;
  Vector nu;  // wrapped innovation y − y_pred

  Eigen::Index n() const { return x_pred.size(); }
  Eigen::Index m() const { return y_pred.size(); }
  /// Covariance of the linearized measurement residual r + v.
  Matrix residual_cov() const { return theta_r.reconstruct(); }
};

struct FpiResult {
  Vector mean;
  Matrix gain;
  int iterations = 0;
  bool converged = false;
  std::vector<double> cost_trace;
  // (WᵀΩW)⁻¹ WᵀΩ d at the final weights, for cross-checking the gain form.
  Vector direct_mean;
};

/// Ω partitioned as [[Ωx, Ωyx], [Ωxy, Ωy]] and the whitened blocks
///   P̄x = Θp⁻ᵀ Ωx Θp⁻¹,  P̄xy = Θr⁻ᵀ Ωxy Θp⁻¹,
///   P̄yx = Θp⁻ᵀ Ωyx Θr⁻¹, P̄y = Θr⁻ᵀ Ωy Θr⁻¹.
struct BlockWeights {
  Matrix omega_x, omega_xy, omega_yx, omega_y;
  Matrix pbar_x, pbar_xy, pbar_yx, pbar_y;
};

struct BlockGain {
  Matrix gain;    // n×m
  Matrix normal;  // WᵀΩW
  BlockWeights blocks;
  bool used_lemma = true;
};

/// H = Pxyᵀ Pxx⁻¹
inline Matrix statistical_linearization(const Matrix& pxx, const Matrix& pxy) {
  return solve_spd(pxx, pxy).transpose();
}

inline RegressionSystem build_regression(const GaussianBelief& b_pred,
                                         const MeasurementMoments& mm, const Vector& y,
                                         const GmeefpParams& p,
                                         const std::vector<int>& angles = {}) {
  const auto n = b_pred.mean.size();
  const auto m = mm.y_pred.size();

  RegressionSystem reg;
  reg.x_pred = b_pred.mean;
  reg.y_pred = mm.y_pred;
  reg.nu = innovation(y, mm.y_pred, angles);
  reg.H = statistical_linearization(b_pred.cov, mm.pxy);
  reg.theta_p = cholesky(b_pred.cov);

  // Pxyᵀ Pxx⁻¹ Pxy = H Pxy
  const Matrix lin = reg.H * mm.pxy;
  const Matrix rr = p.residual_cov_sign == ResidualCovSign::schur_minus ? Matrix(mm.pyy - lin)
                                                                          : Matrix(mm.pyy + lin);
  reg.theta_r = cholesky(rr);

  Matrix theta = Matrix::Zero(n + m, n + m);
  theta.topLeftCorner(n, n) = reg.theta_p.matrix();
  theta.bottomRightCorner(m, m) = reg.theta_r.matrix();
  reg.theta = LowerTriangular(std::move(theta));

  Vector z(n + m);
  z.head(n) = reg.x_pred;
  z.tail(m) = reg.nu + reg.H * reg.x_pred;
  Matrix design(n + m, n);
  design.topRows(n) = Matrix::Identity(n, n);
  design.bottomRows(m) = reg.H;

  reg.d = reg.theta.solve_lower(z);
  reg.W = reg.theta.solve_lower(design);
  return reg;
}

namespace detail {

inline bool well_conditioned(const Eigen::PartialPivLU<Matrix>& lu) {
  const double rc = lu.rcond();
  return std::isfinite(rc) && rc > 1e-14;
}

}  // namespace detail

/// Gain K = (WᵀΩW)⁻¹ (P̄yx + Hᵀ P̄y), with the inverse expanded by the matrix
/// inversion lemma around A = P̄x + Hᵀ P̄xy:
///   (A + U H)⁻¹ = A⁻¹ − A⁻¹ U (I + H A⁻¹ U)⁻¹ H A⁻¹,  U = P̄yx + Hᵀ P̄y.
/// Falls back to a direct inverse of WᵀΩW when A or the inner matrix is
/// singular.
inline BlockGain block_gain(const RegressionSystem& reg, const Matrix& omega) {
  const auto n = reg.n();
  const auto m = reg.m();
  if (omega.rows() != n + m || omega.cols() != n + m) {
    throw DomainError("block_gain: weighting matrix has the wrong shape");
  }
  const Matrix ap = reg.theta_p.inverse();
  const Matrix ar = reg.theta_r.inverse();

  BlockGain out;
  BlockWeights& b = out.blocks;
  b.omega_x = omega.topLeftCorner(n, n);
  b.omega_yx = omega.topRightCorner(n, m);
  b.omega_xy = omega.bottomLeftCorner(m, n);
  b.omega_y = omega.bottomRightCorner(m, m);
  b.pbar_x = ap.transpose() * b.omega_x * ap;
  b.pbar_xy = ar.transpose() * b.omega_xy * ap;
  b.pbar_yx = ap.transpose() * b.omega_yx * ar;
  b.pbar_y = ar.transpose() * b.omega_y * ar;

  const Matrix& h = reg.H;
  const Matrix a = b.pbar_x + h.transpose() * b.pbar_xy;
  const Matrix u = b.pbar_yx + h.transpose() * b.pbar_y;
  out.normal = a + u * h;
  if (!out.normal.allFinite()) throw SingularNormalMatrix("block_gain: non-finite weights");

  Eigen::PartialPivLU<Matrix> lu_a(a);
  if (detail::well_conditioned(lu_a)) {
    const Matrix a_inv = lu_a.inverse();
    const Matrix inner = Matrix::Identity(m, m) + h * a_inv * u;
    Eigen::PartialPivLU<Matrix> lu_inner(inner);
    if (detail::well_conditioned(lu_inner)) {
      const Matrix normal_inv = a_inv - a_inv * u * lu_inner.solve(h * a_inv);
      out.gain = normal_inv * u;
      out.used_lemma = true;
      return out;
    }
  }

  out.used_lemma = false;
  Eigen::PartialPivLU<Matrix> lu_n(out.normal);
  if (!detail::well_conditioned(lu_n)) {
    Matrix jittered = out.normal;
    jittered.diagonal().array() += 1e-9 * std::abs(out.normal.trace()) / static_cast<double>(n);
    lu_n.compute(jittered);
    if (!detail::well_conditioned(lu_n)) {
      throw SingularNormalMatrix("block_gain: WᵀΩW is singular");
    }
  }
  out.gain = lu_n.solve(u);
  return out;
}

/// Fixed-point iteration x_{t+1} = (WᵀΩ_t W)⁻¹ WᵀΩ_t d, Ω_t evaluated at
/// e_t = d − W x_t, started from the predicted mean. Each iterate is formed
/// in gain form x_pred + K_t nu. Stops when ‖x_{t+1} − x_t‖ / ‖x_t‖ ≤ tau.
inline FpiResult fpi_update(const RegressionSystem& reg, const GmeefpParams& p) {
  FpiResult res;
  Vector x = reg.x_pred;
  for (int t = 0; t < p.max_iter; ++t) {
    const Vector e = reg.d - reg.W * x;
    const Matrix omega = weighting_matrix(weight_matrices(e, p), p.weighting_form);
    BlockGain bg = block_gain(reg, omega);
    Vector next = reg.x_pred + bg.gain * reg.nu;
    if (!next.allFinite()) throw SingularNormalMatrix("fpi_update: non-finite iterate");

    const Eigen::PartialPivLU<Matrix> lu(bg.normal);
    res.direct_mean = lu.solve(reg.W.transpose() * (omega * reg.d));
    assert(!bg.used_lemma || lu.rcond() < 1e-6 ||
           (res.direct_mean - next).norm() <= 1e-8 * std::max(1.0, next.norm()));

    res.gain = std::move(bg.gain);
    res.iterations = t + 1;
    res.cost_trace.push_back(gmeefp_cost(reg.d - reg.W * next, p));
    const double step = (next - x).norm() / std::max(x.norm(), 1e-12);
    x = std::move(next);
    if (step <= p.tau) {
      res.converged = true;
      break;
    }
  }
  res.mean = std::move(x);
  return res;
}

/// Joseph form (I − K H) P (I − K H)ᵀ + K R Kᵀ.
inline Matrix posterior_covariance(const Matrix& p_pred, const Matrix& gain, const Matrix& h,
                                   const Matrix& r) {
  const auto n = p_pred.rows();
  const Matrix a = Matrix::Identity(n, n) - gain * h;
  return symmetrize(a * p_pred * a.transpose() + gain * r * gain.transpose());
}

struct StepResult {
  GaussianBelief belief;
  FpiResult fpi;
  bool fallback = false;
};

/// Predict, then the robust update. On a factorization failure or a
/// singular normal matrix the plain CKF update is used for this step and
/// `fallback` is set.
inline StepResult gmeefp_step(const GaussianBelief& b, const StateSpaceModel& model,
                              const Vector& y, const GmeefpParams& p) {
  const GaussianBelief pred = predict(b, model);
  const MeasurementMoments mm = measurement_moments(pred, model);
  StepResult out;
  try {
    const RegressionSystem reg = build_regression(pred, mm, y, p, model.angle_components);
    out.fpi = fpi_update(reg, p);
    out.belief.mean = out.fpi.mean;
    // The residual covariance of the linearized measurement stands in for R;
    // for a linear h it equals R.
    out.belief.cov = posterior_covariance(pred.cov, out.fpi.gain, reg.H, reg.residual_cov());
    if (!out.belief.cov.allFinite()) throw SingularNormalMatrix("gmeefp_step: non-finite covariance");
    return out;
  } catch (const NotPositiveDefinite&) {
  } catch (const SingularNormalMatrix&) {
  }
  out.fallback = true;
  out.fpi = FpiResult{};
  out.belief = ckf_update(pred, mm, y, model.angle_components);
  return out;
}

/// Parameter presets. `ckf` makes the fiducial kernel so wide that Ω is a
/// scaled identity; `mcc` keeps only the fiducial term; `meef` uses Gaussian
/// kernels throughout; `gmee` keeps only the pairwise entropy term.
inline GmeefpParams preset(std::string_view name) {
  GmeefpParams p;
  if (name == "ckf") {
    p.lambda = 1.0;
    p.alpha1 = 2.0;
    p.beta1 = 1e6;
  } else if (name == "mcc") {
    p.lambda = 1.0;
    p.alpha1 = 2.0;
    p.beta1 = 2.0;
  } else if (name == "meef") {
    p.alpha1 = 2.0;
    p.alpha2 = 2.0;
  } else if (name == "gmee") {
    p.lambda = 0.0;
  } else if (name == "gmeefp") {
    // defaults
  } else {
    throw UnknownPreset("unknown preset: " + std::string(name));
  }
  return p;
}

}  // namespace gmeefp

#endif  // GMEEFP_GMEEFP_CKF_HPP
