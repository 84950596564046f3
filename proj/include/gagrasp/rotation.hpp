#pragma once

#include <array>

namespace gagrasp {

using Mat3 = std::array<std::array<double, 3>, 3>;
using Vec3 = std::array<double, 3>;

inline Vec3 mat_apply(const Mat3& R, const Vec3& v) {
  return {R[0][0] * v[0] + R[0][1] * v[1] + R[0][2] * v[2],
          R[1][0] * v[0] + R[1][1] * v[1] + R[1][2] * v[2],
          R[2][0] * v[0] + R[2][1] * v[1] + R[2][2] * v[2]};
}

Mat3 mat_mul(const Mat3& a, const Mat3& b);
Mat3 mat_transpose(const Mat3& a);
Mat3 mat_identity();
Vec3 cross(const Vec3& a, const Vec3& b);
double dot(const Vec3& a, const Vec3& b);
double norm(const Vec3& a);

// Continuous 6D rotation representation: two 3-vectors (the raw first two
// columns), decoded by Gram-Schmidt into a proper rotation.
// Throws on degenerate input, naming the failing column.
Mat3 rot6d_decode(const std::array<double, 6>& r);
std::array<double, 6> rot6d_encode(const Mat3& R);

Mat3 axis_angle_to_matrix(const Vec3& axis, double angle);

// Unit quaternion (w, x, y, z) for R; used to build rotors.
std::array<double, 4> matrix_to_quat(const Mat3& R);
Mat3 quat_to_matrix(const std::array<double, 4>& q);

}  // namespace gagrasp
