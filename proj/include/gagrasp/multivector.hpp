#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace gagrasp {

// Element of the projective geometric algebra G(3,0,1).
// Coefficients are stored in the fixed blade order
//   [1; e0,e1,e2,e3; e01,e02,e03,e12,e13,e23; e012,e013,e023,e123; e0123]
// which every operation and every serialization path assumes.
struct Multivector {
  std::array<double, 16> c{};

  Multivector() = default;
  explicit Multivector(const std::array<double, 16>& coeffs) : c(coeffs) {}

  static Multivector scalar(double s) {
    Multivector m;
    m.c[0] = s;
    return m;
  }
  static Multivector blade(int index, double coeff = 1.0) {
    Multivector m;
    m.c.at(static_cast<size_t>(index)) = coeff;
    return m;
  }

  double& operator[](int i) { return c[static_cast<size_t>(i)]; }
  double operator[](int i) const { return c[static_cast<size_t>(i)]; }

  Multivector operator+(const Multivector& o) const;
  Multivector operator-(const Multivector& o) const;
  Multivector operator*(double s) const;
  Multivector operator*(const Multivector& o) const;  // geometric product
  Multivector operator-() const { return *this * -1.0; }

  bool finite() const;
  std::string str() const;  // debug rendering "a·1 + b·e01 + ..."; not a stable surface
};

// Blade metadata in the fixed order above.
// kBladeMask[i]: bitmask with bit j set iff e_j appears in blade i (bit 0 = e0).
// kBladeGrade[i]: number of basis vectors in blade i.
extern const std::array<uint8_t, 16> kBladeMask;
extern const std::array<uint8_t, 16> kBladeGrade;
extern const std::array<const char*, 16> kBladeName;

// Index of the blade whose mask is m, inverse of kBladeMask.
int blade_index_from_mask(uint8_t mask);

// Product of two basis blades: returns the target blade index and writes the
// sign (+1/-1) to *sign; returns -1 when the product vanishes (shared e0).
int basis_product(int a, int b, int* sign);

Multivector geometric_product(const Multivector& a, const Multivector& b);
Multivector grade_project(const Multivector& x, int k);
Multivector reverse(const Multivector& x);
Multivector wedge(const Multivector& a, const Multivector& b);

// Right complement, normalized so e_I ^ dual(e_I) = +e0123 for every basis
// blade. The degenerate metric rules out a metric dual.
Multivector dual(const Multivector& x);
Multivector join(const Multivector& a, const Multivector& b);

// Dot product over the 8 blade components that do not contain e0.
double inner_invariant(const Multivector& a, const Multivector& b);

// Indices of the 8 non-e0 blades (scalar, e1..e3, e12, e13, e23, e123).
extern const std::array<int, 8> kNonE0Blades;

}  // namespace gagrasp
