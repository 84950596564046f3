#include "gagrasp/versor.hpp"

#include <cmath>
#include <stdexcept>

namespace gagrasp {

namespace {

// Rotor for unit quaternion (w,x,y,z): w + sx*x*e23 + sy*y*e13 + sz*z*e12.
// Signs fixed so the sandwich action matches the rotation matrix under the
// point embedding in embed.cpp.
constexpr double kQx = -1.0, kQy = 1.0, kQz = -1.0;

Multivector grade_involution(const Multivector& x) {
  Multivector r;
  for (int i = 0; i < 16; ++i) {
    int g = kBladeGrade[static_cast<size_t>(i)];
    r[i] = (g & 1) ? -x[i] : x[i];
  }
  return r;
}

}  // namespace

Versor::Versor(const Multivector& mv, bool odd, bool) : mv_(mv), odd_(odd) {}

Versor::Versor(const Multivector& mv) : mv_(mv) {
  double even_mass = 0.0, odd_mass = 0.0;
  for (int i = 0; i < 16; ++i) {
    double a = std::abs(mv[i]);
    if (kBladeGrade[static_cast<size_t>(i)] & 1)
      odd_mass += a;
    else
      even_mass += a;
  }
  if (even_mass > 1e-12 && odd_mass > 1e-12)
    throw std::invalid_argument("Versor: element mixes even and odd grades");
  odd_ = odd_mass > even_mass;
  double n = inner_invariant(mv, mv);
  if (std::abs(n - 1.0) > 1e-9)
    throw std::invalid_argument("Versor: not unit under the invariant inner product");
}

Versor Versor::identity() { return Versor(Multivector::scalar(1.0), false, true); }

Versor Versor::rotor(const Vec3& axis, double angle) {
  double n = norm(axis);
  if (n == 0.0) return identity();
  double h = angle * 0.5;
  double w = std::cos(h), s = std::sin(h) / n;
  Multivector m;
  m[kS] = w;
  m[kE23] = kQx * s * axis[0];
  m[kE13] = kQy * s * axis[1];
  m[kE12] = kQz * s * axis[2];
  return Versor(m, false, true);
}

Versor Versor::rotor_from_matrix(const Mat3& R) {
  auto q = matrix_to_quat(R);
  Multivector m;
  m[kS] = q[0];
  m[kE23] = kQx * q[1];
  m[kE13] = kQy * q[2];
  m[kE12] = kQz * q[3];
  return Versor(m, false, true);
}

Versor Versor::translator(const Vec3& t) {
  Multivector m;
  m[kS] = 1.0;
  m[kE01] = -0.5 * t[0];
  m[kE02] = -0.5 * t[1];
  m[kE03] = -0.5 * t[2];
  return Versor(m, false, true);
}

Versor Versor::reflection(const Vec3& n, double delta) {
  double nn = norm(n);
  if (nn == 0.0) throw std::invalid_argument("reflection: zero normal");
  Multivector m;
  m[kE1] = n[0] / nn;
  m[kE2] = n[1] / nn;
  m[kE3] = n[2] / nn;
  m[kE0] = delta / nn;
  return Versor(m, true, true);
}

Versor Versor::operator*(const Versor& o) const {
  return Versor(geometric_product(mv_, o.mv_), odd_ != o.odd_, true);
}

Versor Versor::inverse() const { return Versor(reverse(mv_), odd_, true); }

Multivector Versor::operator()(const Multivector& x) const {
  const Multivector& xin = odd_ ? grade_involution(x) : x;
  return geometric_product(geometric_product(mv_, xin), reverse(mv_));
}

Multivector sandwich(const Versor& u, const Multivector& x) { return u(x); }

}  // namespace gagrasp
