#include "unimask/kinematics/rotation.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "unimask/error.hpp"

namespace unimask::kin {

Quaternion Quaternion::from_axis_angle(const Vec3& axis, double angle) {
  const Vec3 a = axis.normalized();
  const double s = std::sin(0.5 * angle);
  return {std::cos(0.5 * angle), a.x() * s, a.y() * s, a.z() * s};
}

double Quaternion::norm() const { return std::sqrt(dot(*this)); }

Quaternion Quaternion::normalized() const {
  const double n = norm();
  return {w / n, x / n, y / n, z / n};
}

Quaternion Quaternion::operator*(const Quaternion& o) const {
  return {w * o.w - x * o.x - y * o.y - z * o.z,
          w * o.x + x * o.w + y * o.z - z * o.y,
          w * o.y - x * o.z + y * o.w + z * o.x,
          w * o.z + x * o.y - y * o.x + z * o.w};
}

Vec3 Quaternion::rotate(const Vec3& v) const { return to_matrix() * v; }

Mat3 Quaternion::to_matrix() const {
  Mat3 r;
  const double xx = x * x, yy = y * y, zz = z * z;
  const double xy = x * y, xz = x * z, yz = y * z;
  const double wx = w * x, wy = w * y, wz = w * z;
  r << 1 - 2 * (yy + zz), 2 * (xy - wz), 2 * (xz + wy),
       2 * (xy + wz), 1 - 2 * (xx + zz), 2 * (yz - wx),
       2 * (xz - wy), 2 * (yz + wx), 1 - 2 * (xx + yy);
  return r;
}

Quaternion align_hemisphere(const Quaternion& q, const Quaternion& reference) {
  return q.dot(reference) < 0.0 ? -q : q;
}

double rotation_angle_between(const Quaternion& a, const Quaternion& b) {
  const double d = std::min(1.0, std::fabs(a.dot(b)));
  return 2.0 * std::acos(d);
}

Quaternion matrix_to_quaternion(const Mat3& r) {
  const double ortho = (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (ortho > 1e-6 || std::fabs(r.determinant() - 1.0) > 1e-6) {
    throw ContractError("matrix_to_quaternion: input is not a rotation (error " +
                        std::to_string(ortho) + ")");
  }
  // Shepperd: branch on the largest of w, x, y, z.
  Quaternion q;
  const double tr = r.trace();
  if (tr > r(0, 0) && tr > r(1, 1) && tr > r(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + tr);
    q = {0.25 * s, (r(2, 1) - r(1, 2)) / s, (r(0, 2) - r(2, 0)) / s,
         (r(1, 0) - r(0, 1)) / s};
  } else if (r(0, 0) > r(1, 1) && r(0, 0) > r(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + r(0, 0) - r(1, 1) - r(2, 2));
    q = {(r(2, 1) - r(1, 2)) / s, 0.25 * s, (r(0, 1) + r(1, 0)) / s,
         (r(0, 2) + r(2, 0)) / s};
  } else if (r(1, 1) > r(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + r(1, 1) - r(0, 0) - r(2, 2));
    q = {(r(0, 2) - r(2, 0)) / s, (r(0, 1) + r(1, 0)) / s, 0.25 * s,
         (r(1, 2) + r(2, 1)) / s};
  } else {
    const double s = 2.0 * std::sqrt(1.0 + r(2, 2) - r(0, 0) - r(1, 1));
    q = {(r(1, 0) - r(0, 1)) / s, (r(0, 2) + r(2, 0)) / s,
         (r(1, 2) + r(2, 1)) / s, 0.25 * s};
  }
  q = q.normalized();
  return q.w < 0.0 ? -q : q;
}

Quaternion slerp(const Quaternion& q0, const Quaternion& q1_in, double t) {
  const Quaternion q1 = align_hemisphere(q1_in, q0);
  const double d = std::clamp(q0.dot(q1), -1.0, 1.0);
  const double theta = std::acos(d);
  if (theta < 1e-6) {
    const Quaternion l{q0.w + t * (q1.w - q0.w), q0.x + t * (q1.x - q0.x),
                       q0.y + t * (q1.y - q0.y), q0.z + t * (q1.z - q0.z)};
    return l.normalized();
  }
  if (t == 0.0) return q0;
  if (t == 1.0) return q1;
  const double s = std::sin(theta);
  const double a = std::sin((1.0 - t) * theta) / s;
  const double b = std::sin(t * theta) / s;
  return Quaternion{a * q0.w + b * q1.w, a * q0.x + b * q1.x,
                    a * q0.y + b * q1.y, a * q0.z + b * q1.z}
      .normalized();
}

Mat3 rot6d_to_matrix(std::span<const double, 6> r) {
  const Vec3 a1(r[0], r[1], r[2]);
  const Vec3 a2(r[3], r[4], r[5]);
  const double n1 = a1.norm();
  if (!(n1 > 1e-12)) throw DegeneracyError("ortho-6D first column has zero norm");
  const Vec3 b1 = a1 / n1;
  const Vec3 u = a2 - b1.dot(a2) * b1;
  const double n2 = u.norm();
  if (!(n2 > 1e-12 * std::max(1.0, a2.norm()))) {
    throw DegeneracyError("ortho-6D columns are parallel or zero");
  }
  const Vec3 b2 = u / n2;
  Mat3 m;
  m.col(0) = b1;
  m.col(1) = b2;
  m.col(2) = b1.cross(b2);
  return m;
}

Rot6d matrix_to_rot6d(const Mat3& r) {
  return {r(0, 0), r(1, 0), r(2, 0), r(0, 1), r(1, 1), r(2, 1)};
}

Quaternion euler_to_quaternion(std::string_view axes, std::span<const double> degrees) {
  if (axes.size() != degrees.size()) {
    throw ContractError("euler_to_quaternion: axis/angle count mismatch");
  }
  Quaternion q;
  for (std::size_t i = 0; i < axes.size(); ++i) {
    Vec3 axis = Vec3::Zero();
    switch (axes[i]) {
      case 'X': axis.x() = 1.0; break;
      case 'Y': axis.y() = 1.0; break;
      case 'Z': axis.z() = 1.0; break;
      default:
        throw ContractError(std::string("unknown rotation axis '") + axes[i] + "'");
    }
    q = q * Quaternion::from_axis_angle(axis, degrees[i] * std::numbers::pi / 180.0);
  }
  return q.normalized();
}

}  // namespace unimask::kin
