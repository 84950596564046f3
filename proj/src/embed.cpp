#include "gagrasp/embed.hpp"

#include <cmath>
#include <stdexcept>

namespace gagrasp {

namespace {
constexpr double kSx = kDirSign[0], kSy = kDirSign[1], kSz = kDirSign[2];
}

Multivector embed_point(const Vec3& p) {
  Multivector m;
  m[kE123] = 1.0;
  m[kE023] = kSx * p[0];
  m[kE013] = kSy * p[1];
  m[kE012] = kSz * p[2];
  return m;
}

Multivector embed_direction(const Vec3& d) {
  Multivector m;
  m[kE023] = kSx * d[0];
  m[kE013] = kSy * d[1];
  m[kE012] = kSz * d[2];
  return m;
}

Multivector embed_plane(const Vec3& n, double delta) {
  Multivector m;
  m[kE1] = n[0];
  m[kE2] = n[1];
  m[kE3] = n[2];
  m[kE0] = delta;
  return m;
}

Vec3 extract_point(const Multivector& m) {
  double w = m[kE123];
  if (std::abs(w) <= 1e-12)
    throw std::invalid_argument("extract_point: ideal point (zero e123 coefficient)");
  return {kSx * m[kE023] / w, kSy * m[kE013] / w, kSz * m[kE012] / w};
}

Vec3 extract_direction(const Multivector& m) {
  return {kSx * m[kE023], kSy * m[kE013], kSz * m[kE012]};
}

Versor motor_from_matrix(const Mat3& R, const Vec3& p) {
  return Versor::translator(p) * Versor::rotor_from_matrix(R);
}

Versor motor_from_pose(const std::array<double, 6>& r6d, const Vec3& p) {
  return motor_from_matrix(rot6d_decode(r6d), p);
}

}  // namespace gagrasp
