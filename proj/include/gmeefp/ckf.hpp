#ifndef GMEEFP_CKF_HPP
#define GMEEFP_CKF_HPP

#include <cmath>
#include <vector>

#include "gmeefp/numerics.hpp"
#include "gmeefp/state_space.hpp"

namespace gmeefp {

struct GaussianBelief {
  Vector mean;
  Matrix cov;
};

/// Third-degree spherical-radial rule: 2n points, weight 1/(2n) each.
struct CubatureSet {
  std::vector<Vector> points;

  double weight() const { return 1.0 / static_cast<double>(points.size()); }
};

struct MeasurementMoments {
  Vector y_pred;
  Matrix pyy;
  Matrix pxy;
};

inline void wrap_components(Vector& v, const std::vector<int>& angles) {
  for (int i : angles) v(i) = wrap_angle(v(i));
}

/// Innovation y - y_pred with angle coordinates wrapped to (-pi, pi].
inline Vector innovation(const Vector& y, const Vector& y_pred,
                         const std::vector<int>& angles) {
  Vector nu = y - y_pred;
  wrap_components(nu, angles);
  return nu;
}

// xi_i = S phi_i + mean, phi_i = +-sqrt(n) e_i with e_i in index order.
inline CubatureSet cubature_points(const GaussianBelief& b) {
  const auto n = b.mean.size();
  const Matrix s = cholesky(b.cov).matrix();
  const double scale = std::sqrt(static_cast<double>(n));
  CubatureSet set;
  set.points.reserve(2 * n);
  for (Eigen::Index i = 0; i < n; ++i) set.points.push_back(b.mean + scale * s.col(i));
  for (Eigen::Index i = 0; i < n; ++i) set.points.push_back(b.mean - scale * s.col(i));
  return set;
}

inline GaussianBelief predict(const GaussianBelief& b, const StateSpaceModel& model) {
  const CubatureSet set = cubature_points(b);
  const double w = set.weight();
  std::vector<Vector> prop;
  prop.reserve(set.points.size());
  for (const auto& xi : set.points) prop.push_back(model.f(xi));

  Vector mean = Vector::Zero(model.n);
  for (const auto& x : prop) mean += w * x;
  Matrix cov = model.Q;
  for (const auto& x : prop) {
    const Vector dx = x - mean;
    cov += w * dx * dx.transpose();
  }
  return {std::move(mean), symmetrize(cov)};
}

inline MeasurementMoments measurement_moments(const GaussianBelief& b_pred,
                                              const StateSpaceModel& model) {
  const CubatureSet set = cubature_points(b_pred);
  const double w = set.weight();
  std::vector<Vector> gam;
  gam.reserve(set.points.size());
  for (const auto& xi : set.points) gam.push_back(model.h(xi));

  MeasurementMoments mm;
  mm.y_pred = Vector::Zero(model.m);
  for (const auto& g : gam) mm.y_pred += w * g;
  mm.pyy = model.R;
  mm.pxy = Matrix::Zero(model.n, model.m);
  for (std::size_t i = 0; i < gam.size(); ++i) {
    const Vector dy = gam[i] - mm.y_pred;
    const Vector dx = set.points[i] - b_pred.mean;
    mm.pyy += w * dy * dy.transpose();
    mm.pxy += w * dx * dy.transpose();
  }
  mm.pyy = symmetrize(mm.pyy);
  return mm;
}

/// Classical update with K = Pxy Pyy^-1.
inline GaussianBelief ckf_update(const GaussianBelief& b_pred, const MeasurementMoments& mm,
                                 const Vector& y, const std::vector<int>& angles = {}) {
  const LowerTriangular l = cholesky(mm.pyy);
  // K = Pxy Pyy^-1  <=>  Kᵀ = Pyy^-1 Pxyᵀ
  const Matrix gain = l.solve(mm.pxy.transpose()).transpose();
  const Vector nu = innovation(y, mm.y_pred, angles);
  GaussianBelief post;
  post.mean = b_pred.mean + gain * nu;
  post.cov = symmetrize(b_pred.cov - gain * mm.pyy * gain.transpose());
  return post;
}

/// One predict/update cycle of the plain filter.
inline GaussianBelief ckf_step(const GaussianBelief& b, const StateSpaceModel& model,
                               const Vector& y) {
  const GaussianBelief pred = predict(b, model);
  const MeasurementMoments mm = measurement_moments(pred, model);
  return ckf_update(pred, mm, y, model.angle_components);
}

}  // namespace gmeefp

#endif  // GMEEFP_CKF_HPP
