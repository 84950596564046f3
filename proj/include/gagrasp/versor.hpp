#pragma once

#include "gagrasp/multivector.hpp"
#include "gagrasp/rotation.hpp"

namespace gagrasp {

// Blade indices in the fixed coefficient order.
enum BladeIndex : int {
  kS = 0,
  kE0 = 1, kE1 = 2, kE2 = 3, kE3 = 4,
  kE01 = 5, kE02 = 6, kE03 = 7, kE12 = 8, kE13 = 9, kE23 = 10,
  kE012 = 11, kE013 = 12, kE023 = 13, kE123 = 14,
  kE0123 = 15,
};

// Unit even- or odd-grade element acting by the sandwich product.
class Versor {
 public:
  // Throws if mv mixes even and odd grades or is not unit under the
  // invariant inner product (within 1e-9).
  explicit Versor(const Multivector& mv);

  static Versor identity();
  static Versor rotor(const Vec3& axis, double angle);
  static Versor rotor_from_matrix(const Mat3& R);
  static Versor translator(const Vec3& t);
  // Reflection in the plane n.x + delta = 0 (n unit).
  static Versor reflection(const Vec3& n, double delta);

  const Multivector& mv() const { return mv_; }
  bool odd() const { return odd_; }

  Versor operator*(const Versor& o) const;
  Versor inverse() const;

  // u[x] = u x u^-1, with the grade involution applied to x for odd u so
  // that geometric embeddings keep their grade.
  Multivector operator()(const Multivector& x) const;

 private:
  Versor(const Multivector& mv, bool odd, bool checked);
  Multivector mv_;
  bool odd_ = false;
};

Multivector sandwich(const Versor& u, const Multivector& x);

}  // namespace gagrasp
