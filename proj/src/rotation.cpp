#include "gagrasp/rotation.hpp"

#include <cmath>
#include <stdexcept>

namespace gagrasp {

Mat3 mat_mul(const Mat3& a, const Mat3& b) {
  Mat3 r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) r[i][j] += a[i][k] * b[k][j];
  return r;
}

Mat3 mat_transpose(const Mat3& a) {
  Mat3 r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r[i][j] = a[j][i];
  return r;
}

Mat3 mat_identity() {
  Mat3 r{};
  r[0][0] = r[1][1] = r[2][2] = 1.0;
  return r;
}

Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2],
          a[0] * b[1] - a[1] * b[0]};
}

double dot(const Vec3& a, const Vec3& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

Mat3 rot6d_decode(const std::array<double, 6>& r) {
  Vec3 a1 = {r[0], r[1], r[2]};
  Vec3 a2 = {r[3], r[4], r[5]};
  double n1 = norm(a1);
  if (n1 <= 1e-9)
    throw std::invalid_argument("rot6d_decode: first column is degenerate (norm <= 1e-9)");
  Vec3 b1 = {a1[0] / n1, a1[1] / n1, a1[2] / n1};
  double proj = dot(b1, a2);
  Vec3 u2 = {a2[0] - proj * b1[0], a2[1] - proj * b1[1], a2[2] - proj * b1[2]};
  double n2 = norm(u2);
  if (n2 <= 1e-9)
    throw std::invalid_argument(
        "rot6d_decode: second column is degenerate (Gram-Schmidt residual <= 1e-9)");
  Vec3 b2 = {u2[0] / n2, u2[1] / n2, u2[2] / n2};
  Vec3 b3 = cross(b1, b2);
  Mat3 R{};
  for (int i = 0; i < 3; ++i) {
    R[i][0] = b1[i];
    R[i][1] = b2[i];
    R[i][2] = b3[i];
  }
  return R;
}

std::array<double, 6> rot6d_encode(const Mat3& R) {
  return {R[0][0], R[1][0], R[2][0], R[0][1], R[1][1], R[2][1]};
}

Mat3 axis_angle_to_matrix(const Vec3& axis, double angle) {
  double n = norm(axis);
  if (n == 0.0) return mat_identity();
  Vec3 u = {axis[0] / n, axis[1] / n, axis[2] / n};
  double c = std::cos(angle), s = std::sin(angle), t = 1.0 - c;
  Mat3 R;
  R[0] = {c + u[0] * u[0] * t, u[0] * u[1] * t - u[2] * s, u[0] * u[2] * t + u[1] * s};
  R[1] = {u[1] * u[0] * t + u[2] * s, c + u[1] * u[1] * t, u[1] * u[2] * t - u[0] * s};
  R[2] = {u[2] * u[0] * t - u[1] * s, u[2] * u[1] * t + u[0] * s, c + u[2] * u[2] * t};
  return R;
}

std::array<double, 4> matrix_to_quat(const Mat3& R) {
  double trace = R[0][0] + R[1][1] + R[2][2];
  double w, x, y, z;
  if (trace > 0.0) {
    double s = std::sqrt(trace + 1.0) * 2.0;
    w = 0.25 * s;
    x = (R[2][1] - R[1][2]) / s;
    y = (R[0][2] - R[2][0]) / s;
    z = (R[1][0] - R[0][1]) / s;
  } else if (R[0][0] > R[1][1] && R[0][0] > R[2][2]) {
    double s = std::sqrt(1.0 + R[0][0] - R[1][1] - R[2][2]) * 2.0;
    w = (R[2][1] - R[1][2]) / s;
    x = 0.25 * s;
    y = (R[0][1] + R[1][0]) / s;
    z = (R[0][2] + R[2][0]) / s;
  } else if (R[1][1] > R[2][2]) {
    double s = std::sqrt(1.0 + R[1][1] - R[0][0] - R[2][2]) * 2.0;
    w = (R[0][2] - R[2][0]) / s;
    x = (R[0][1] + R[1][0]) / s;
    y = 0.25 * s;
    z = (R[1][2] + R[2][1]) / s;
  } else {
    double s = std::sqrt(1.0 + R[2][2] - R[0][0] - R[1][1]) * 2.0;
    w = (R[1][0] - R[0][1]) / s;
    x = (R[0][2] + R[2][0]) / s;
    y = (R[1][2] + R[2][1]) / s;
    z = 0.25 * s;
  }
  double n = std::sqrt(w * w + x * x + y * y + z * z);
  return {w / n, x / n, y / n, z / n};
}

Mat3 quat_to_matrix(const std::array<double, 4>& q) {
  double w = q[0], x = q[1], y = q[2], z = q[3];
  Mat3 R;
  R[0] = {1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)};
  R[1] = {2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)};
  R[2] = {2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)};
  return R;
}

}  // namespace gagrasp
