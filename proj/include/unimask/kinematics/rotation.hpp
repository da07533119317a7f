#pragma once

#include <Eigen/Core>
#include <array>
#include <span>
#include <string_view>

namespace unimask::kin {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Unit quaternion (w, x, y, z). Hamilton convention, active rotations.
struct Quaternion {
  double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

  static Quaternion identity() { return {}; }
  static Quaternion from_axis_angle(const Vec3& axis, double angle);

  double dot(const Quaternion& o) const { return w * o.w + x * o.x + y * o.y + z * o.z; }
  double norm() const;
  Quaternion normalized() const;
  Quaternion conjugate() const { return {w, -x, -y, -z}; }
  Quaternion operator-() const { return {-w, -x, -y, -z}; }
  Quaternion operator*(const Quaternion& o) const;
  Vec3 rotate(const Vec3& v) const;
  Mat3 to_matrix() const;
};

// q or -q, whichever lies in the hemisphere of `reference` (dot >= 0).
Quaternion align_hemisphere(const Quaternion& q, const Quaternion& reference);

// Geodesic angle between the rotations, in [0, pi].
double rotation_angle_between(const Quaternion& a, const Quaternion& b);

// Throws ContractError when R is not a proper rotation to 1e-6.
Quaternion matrix_to_quaternion(const Mat3& r);
inline Mat3 quaternion_to_matrix(const Quaternion& q) { return q.to_matrix(); }

// Constant angular velocity from q0 (t = 0) to the hemisphere-aligned q1
// (t = 1). Normalized lerp below an angle of 1e-6 rad.
Quaternion slerp(const Quaternion& q0, const Quaternion& q1, double t);

// Ortho-6D layout: first column of R followed by its second column.
using Rot6d = std::array<double, 6>;

// Gram-Schmidt of the two columns plus their cross product. Throws
// DegeneracyError for a zero first column or parallel columns.
Mat3 rot6d_to_matrix(std::span<const double, 6> r);
Rot6d matrix_to_rot6d(const Mat3& r);

// Composes elementary rotations in the listed order, e.g. "ZYX" gives
// Rz(a0) * Ry(a1) * Rx(a2). Angles in degrees (BVH convention).
Quaternion euler_to_quaternion(std::string_view axes, std::span<const double> degrees);

}  // namespace unimask::kin
