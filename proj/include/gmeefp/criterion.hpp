#ifndef GMEEFP_CRITERION_HPP
#define GMEEFP_CRITERION_HPP

#include <cmath>
#include <string>

#include "gmeefp/numerics.hpp"

namespace gmeefp {

enum class WeightingForm {
  omega_paper,        // Ω = λ1 Π + λ2 (ΨᵀΨ + ΦᵀΦ)
  lambda_derivative,  // Λ = λ1 Π + λ2 (Ψ − Φ), the exact stationarity weights
};

enum class ResidualCovSign {
  schur_minus,  // Pyy − Pxyᵀ Pxx⁻¹ Pxy
  paper_plus,   // Pyy + Pxyᵀ Pxx⁻¹ Pxy
};

/// Parameters of the generalized error-entropy-with-fiducial-point criterion.
/// (alpha1, beta1) shape the fiducial (correntropy) kernel, (alpha2, beta2) the
/// pairwise entropy kernel; lambda blends the two terms.
struct GmeefpParams {
  double alpha1 = 2.0;
  double beta1 = 2.0;
  double alpha2 = 2.2;
  double beta2 = 6.0;
  double lambda = 0.5;
  double tau = 1e-6;
  int max_iter = 20;
  WeightingForm weighting_form = WeightingForm::omega_paper;
  ResidualCovSign residual_cov_sign = ResidualCovSign::schur_minus;

  void validate() const {
    if (!(alpha1 > 0.0) || !(beta1 > 0.0) || !(alpha2 > 0.0) || !(beta2 > 0.0)) {
      throw DomainError("GmeefpParams: kernel shapes and scales must be positive");
    }
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
      throw DomainError("GmeefpParams: lambda must lie in [0, 1]");
    }
    if (!(tau > 0.0)) throw DomainError("GmeefpParams: tau must be positive");
    if (max_iter < 1) throw DomainError("GmeefpParams: max_iter must be >= 1");
  }
};

/// Generalized Gaussian density with a cached normalizer.
class GgdKernel {
 public:
  GgdKernel(double alpha, double beta) : alpha_(alpha), beta_(beta) {
    if (!(alpha > 0.0) || !(beta > 0.0)) {
      throw DomainError("ggd_kernel: alpha and beta must be positive");
    }
    coeff_ = alpha / (2.0 * beta * gamma_fn(1.0 / alpha));
  }

  double operator()(double e) const {
    return coeff_ * std::exp(-std::pow(std::abs(e) / beta_, alpha_));
  }

  double alpha() const { return alpha_; }
  double beta() const { return beta_; }

 private:
  double alpha_;
  double beta_;
  double coeff_ = 0.0;
};

/// G_{α,β}(e) = α / (2βΓ(1/α)) · exp(−|e|^α / β^α)
inline double ggd_kernel(double e, double alpha, double beta) {
  return GgdKernel(alpha, beta)(e);
}

/// |e|^p for the weight matrices. 0^0 is taken as 1; negative exponents are
/// evaluated with |e| floored at 1e-12.
inline double abs_pow(double e, double p) {
  if (p == 0.0) return 1.0;
  const double a = std::abs(e);
  if (p > 0.0) return std::pow(a, p);
  constexpr double eps = 1e-12;
  return std::exp(p * std::log(std::max(a, eps)));
}

/// J = λ Σ G1(e_i) + (1−λ) Σ_i Σ_j G2(e_i − e_j). The fiducial error e0 = 0
/// enters through the first sum; the constant G(0) and 1/(N+1)² are dropped.
inline double gmeefp_cost(const Vector& e, const GmeefpParams& p) {
  const GgdKernel g1(p.alpha1, p.beta1);
  const GgdKernel g2(p.alpha2, p.beta2);
  const auto n = e.size();
  double fid = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) fid += g1(e(i));
  double ent = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) ent += g2(e(i) - e(j));
  }
  return p.lambda * fid + (1.0 - p.lambda) * ent;
}

struct WeightMatrices {
  Vector pi;    // diagonal of Π
  Vector psi;   // diagonal of Ψ
  Matrix phi;   // Φ
  double lambda1 = 0.0;
  double lambda2 = 0.0;

  Matrix pi_matrix() const { return pi.asDiagonal(); }
  Matrix psi_matrix() const { return psi.asDiagonal(); }
};

inline WeightMatrices weight_matrices(const Vector& e, const GmeefpParams& p) {
  const GgdKernel g1(p.alpha1, p.beta1);
  const GgdKernel g2(p.alpha2, p.beta2);
  const auto n = e.size();

  WeightMatrices w;
  w.pi.resize(n);
  w.psi = Vector::Zero(n);
  w.phi.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    w.pi(i) = g1(e(i)) * abs_pow(e(i), p.alpha1 - 2.0);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double diff = e(j) - e(i);
      w.phi(i, j) = g2(diff) * abs_pow(diff, p.alpha2 - 2.0);
    }
  }
  // G and |·| are even, so Ψ_ii is the i-th row sum of Φ.
  w.psi = w.phi.rowwise().sum();

  // d/de G(e) = −(α/β^α) G(e) |e|^{α−2} e; summing the pairwise term over
  // ordered pairs doubles it. These match finite differences of the cost.
  w.lambda1 = p.lambda * p.alpha1 / std::pow(p.beta1, p.alpha1);
  w.lambda2 = (1.0 - p.lambda) * 2.0 * p.alpha2 / std::pow(p.beta2, p.alpha2);
  return w;
}

/// Λ = λ1 Π + λ2 (Ψ − Φ)
inline Matrix lambda_matrix(const WeightMatrices& w) {
  Matrix lam = -w.lambda2 * w.phi;
  lam.diagonal() += w.lambda1 * w.pi + w.lambda2 * w.psi;
  return symmetrize(lam);
}

/// Ω = λ1 Π + λ2 (ΨᵀΨ + ΦᵀΦ)
inline Matrix omega_matrix(const WeightMatrices& w) {
  Matrix om = w.lambda2 * (w.phi.transpose() * w.phi);
  om.diagonal() += w.lambda1 * w.pi + w.lambda2 * w.psi.cwiseAbs2();
  return symmetrize(om);
}

inline Matrix weighting_matrix(const WeightMatrices& w, WeightingForm form) {
  return form == WeightingForm::omega_paper ? omega_matrix(w) : lambda_matrix(w);
}

/// ∂J/∂x for e = d − W x:  Wᵀ Λ d − Wᵀ Λ W x.
inline Vector cost_gradient(const Vector& d, const Matrix& W, const Vector& x,
                            const GmeefpParams& p) {
  const Vector e = d - W * x;
  const Matrix lam = lambda_matrix(weight_matrices(e, p));
  return W.transpose() * (lam * e);
}

}  // namespace gmeefp

#endif  // GMEEFP_CRITERION_HPP
