#ifndef GOCC_GAUSSIAN_HPP
#define GOCC_GAUSSIAN_HPP

#include <cmath>
#include <stdexcept>

#include "gocc/grid.hpp"

namespace gocc {

// Scales are floored here at construction and after every refinement step,
// which keeps the covariance factorization invertible without any dense
// inverse or conditioning check.
constexpr double kMinScale = 1e-4;

/// One semantic Gaussian. Conventions:
///  - rotation is a unit quaternion stored (w, x, y, z); constructors accept
///    any nonzero quaternion and normalize,
///  - scale is the per-axis standard deviation in meters, floored at
///    kMinScale,
///  - opacity lives in [0, 1],
///  - logits are unnormalized per-class scores; nothing here applies a
///    softmax, downstream losses do.
struct SemanticGaussian {
  Vec3 mean = Vec3::Zero();
  Vec4 rotation = Vec4(1, 0, 0, 0);
  Vec3 scale = Vec3::Ones();
  double opacity = 1.0;
  VecX logits;
};

inline std::size_t property_count(const SemanticGaussian& g) {
  return 11 + static_cast<std::size_t>(g.logits.size());
}

/// Unit rotation matrix from a (w, x, y, z) quaternion. The input is
/// normalized internally; a (near-)zero quaternion is rejected.
inline Mat3 quat_to_rot(const Vec4& q) {
  const double n = q.norm();
  if (!(n > 1e-9) || !std::isfinite(n))
    throw std::invalid_argument("quat_to_rot: quaternion norm is (near) zero");
  const double w = q[0] / n, x = q[1] / n, y = q[2] / n, z = q[3] / n;
  Mat3 r;
  r(0, 0) = 1 - 2 * (y * y + z * z);
  r(0, 1) = 2 * (x * y - w * z);
  r(0, 2) = 2 * (x * z + w * y);
  r(1, 0) = 2 * (x * y + w * z);
  r(1, 1) = 1 - 2 * (x * x + z * z);
  r(1, 2) = 2 * (y * z - w * x);
  r(2, 0) = 2 * (x * z - w * y);
  r(2, 1) = 2 * (y * z + w * x);
  r(2, 2) = 1 - 2 * (x * x + y * y);
  return r;
}

/// Anisotropic covariance R * diag(s)^2 * R^T.
inline Mat3 covariance(const Vec4& rotation, const Vec3& scale) {
  Mat3 r = quat_to_rot(rotation);
  Mat3 m = r * scale.asDiagonal();
  return m * m.transpose();
}

/// Validating factory: rejects non-finite fields and out-of-range opacity,
/// floors the scale, normalizes the quaternion.
inline SemanticGaussian make_gaussian(const Vec3& mean, const Vec4& rotation,
                                      const Vec3& scale, double opacity,
                                      const VecX& logits) {
  if (!mean.allFinite() || !rotation.allFinite() || !scale.allFinite() ||
      !std::isfinite(opacity) || !logits.allFinite())
    throw std::invalid_argument("make_gaussian: non-finite field");
  if (opacity < 0.0 || opacity > 1.0)
    throw std::invalid_argument("make_gaussian: opacity outside [0, 1]");
  if ((scale.array() < 0.0).any())
    throw std::invalid_argument("make_gaussian: negative scale");
  const double n = rotation.norm();
  if (!(n > 1e-9))
    throw std::invalid_argument("make_gaussian: quaternion norm is (near) zero");

  SemanticGaussian g;
  g.mean = mean;
  g.rotation = rotation / n;
  g.scale = scale.cwiseMax(kMinScale);
  g.opacity = opacity;
  g.logits = logits;
  return g;
}

// Squared Mahalanobis exponent through the factored covariance: rotate the
// offset into the Gaussian frame and divide by the per-axis variances. No
// general matrix inverse is ever formed.
inline double mahalanobis_sq(const Mat3& rot, const Vec3& scale, const Vec3& offset) {
  Vec3 local = rot.transpose() * offset;
  double acc = 0.0;
  for (int a = 0; a < 3; ++a) {
    double t = local[a] / scale[a];
    acc += t * t;
  }
  return acc;
}

/// Per-class contribution of Gaussian g at point x:
/// opacity * exp(-mahalanobis^2 / 2) * logits.
inline VecX gaussian_eval(const SemanticGaussian& g, const Vec3& x) {
  Mat3 rot = quat_to_rot(g.rotation);
  double w = g.opacity * std::exp(-0.5 * mahalanobis_sq(rot, g.scale, x - g.mean));
  return w * g.logits;
}

}  // namespace gocc

#endif
