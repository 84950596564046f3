#include "gagrasp/multivector.hpp"

#include <bit>
#include <cmath>
#include <sstream>

namespace gagrasp {

const std::array<uint8_t, 16> kBladeMask = {
    0b0000,                                           // 1
    0b0001, 0b0010, 0b0100, 0b1000,                   // e0 e1 e2 e3
    0b0011, 0b0101, 0b1001, 0b0110, 0b1010, 0b1100,   // e01 e02 e03 e12 e13 e23
    0b0111, 0b1011, 0b1101, 0b1110,                   // e012 e013 e023 e123
    0b1111};                                          // e0123

const std::array<uint8_t, 16> kBladeGrade = {0, 1, 1, 1, 1, 2, 2, 2,
                                             2, 2, 2, 3, 3, 3, 3, 4};

const std::array<const char*, 16> kBladeName = {
    "1",    "e0",   "e1",   "e2",   "e3",   "e01",  "e02",  "e03",
    "e12",  "e13",  "e23",  "e012", "e013", "e023", "e123", "e0123"};

const std::array<int, 8> kNonE0Blades = {0, 2, 3, 4, 8, 9, 10, 14};

namespace {

std::array<int, 16> make_mask_to_index() {
  std::array<int, 16> out{};
  for (int i = 0; i < 16; ++i) out[kBladeMask[static_cast<size_t>(i)]] = i;
  return out;
}
const std::array<int, 16> kMaskToIndex = make_mask_to_index();

// Sign from reordering the concatenation of two blades into canonical
// ascending order: (-1)^(number of transpositions).
int reorder_sign(uint8_t a, uint8_t b) {
  int swaps = 0;
  unsigned x = a >> 1;
  while (x != 0) {
    swaps += std::popcount(x & b);
    x >>= 1;
  }
  return (swaps & 1) ? -1 : 1;
}

struct ProductTables {
  // For blade pair (a,b): sign 0 means the product vanishes.
  std::array<std::array<int8_t, 16>, 16> sign{};
  std::array<std::array<int8_t, 16>, 16> target{};
};

ProductTables make_tables() {
  ProductTables t;
  for (int a = 0; a < 16; ++a) {
    for (int b = 0; b < 16; ++b) {
      uint8_t ma = kBladeMask[static_cast<size_t>(a)];
      uint8_t mb = kBladeMask[static_cast<size_t>(b)];
      if (ma & mb & 1u) {  // shared e0, e0^2 = 0
        t.sign[a][b] = 0;
        t.target[a][b] = 0;
        continue;
      }
      t.sign[a][b] = static_cast<int8_t>(reorder_sign(ma, mb));
      t.target[a][b] = static_cast<int8_t>(kMaskToIndex[ma ^ mb]);
    }
  }
  return t;
}
const ProductTables kProd = make_tables();

}  // namespace

int blade_index_from_mask(uint8_t mask) { return kMaskToIndex[mask]; }

int basis_product(int a, int b, int* sign) {
  int s = kProd.sign[a][b];
  if (s == 0) {
    *sign = 0;
    return -1;
  }
  *sign = s;
  return kProd.target[a][b];
}

Multivector Multivector::operator+(const Multivector& o) const {
  Multivector r;
  for (int i = 0; i < 16; ++i) r.c[i] = c[i] + o.c[i];
  return r;
}
Multivector Multivector::operator-(const Multivector& o) const {
  Multivector r;
  for (int i = 0; i < 16; ++i) r.c[i] = c[i] - o.c[i];
  return r;
}
Multivector Multivector::operator*(double s) const {
  Multivector r;
  for (int i = 0; i < 16; ++i) r.c[i] = c[i] * s;
  return r;
}
Multivector Multivector::operator*(const Multivector& o) const {
  return geometric_product(*this, o);
}

bool Multivector::finite() const {
  for (double v : c)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string Multivector::str() const {
  std::ostringstream os;
  bool first = true;
  for (int i = 0; i < 16; ++i) {
    if (c[i] == 0.0) continue;
    if (!first) os << " + ";
    os << c[i] << "*" << kBladeName[static_cast<size_t>(i)];
    first = false;
  }
  if (first) os << "0";
  return os.str();
}

Multivector geometric_product(const Multivector& a, const Multivector& b) {
  Multivector r;
  for (int i = 0; i < 16; ++i) {
    double ai = a.c[i];
    if (ai == 0.0) continue;
    for (int j = 0; j < 16; ++j) {
      int s = kProd.sign[i][j];
      if (s == 0) continue;
      r.c[kProd.target[i][j]] += s * ai * b.c[j];
    }
  }
  return r;
}

Multivector grade_project(const Multivector& x, int k) {
  if (k < 0 || k > 4) throw std::invalid_argument("grade_project: grade must be in 0..4");
  Multivector r;
  for (int i = 0; i < 16; ++i)
    if (kBladeGrade[static_cast<size_t>(i)] == k) r.c[i] = x.c[i];
  return r;
}

Multivector reverse(const Multivector& x) {
  Multivector r;
  for (int i = 0; i < 16; ++i) {
    int g = kBladeGrade[static_cast<size_t>(i)];
    double s = (g == 2 || g == 3) ? -1.0 : 1.0;
    r.c[i] = s * x.c[i];
  }
  return r;
}

Multivector wedge(const Multivector& a, const Multivector& b) {
  Multivector r;
  for (int i = 0; i < 16; ++i) {
    double ai = a.c[i];
    if (ai == 0.0) continue;
    uint8_t ma = kBladeMask[static_cast<size_t>(i)];
    for (int j = 0; j < 16; ++j) {
      uint8_t mb = kBladeMask[static_cast<size_t>(j)];
      if (ma & mb) continue;  // only grade-raising terms survive
      r.c[kMaskToIndex[ma ^ mb]] += reorder_sign(ma, mb) * ai * b.c[j];
    }
  }
  return r;
}

Multivector dual(const Multivector& x) {
  Multivector r;
  for (int i = 0; i < 16; ++i) {
    uint8_t m = kBladeMask[static_cast<size_t>(i)];
    uint8_t comp = static_cast<uint8_t>(~m & 0b1111);
    r.c[kMaskToIndex[comp]] = reorder_sign(m, comp) * x.c[i];
  }
  return r;
}

Multivector join(const Multivector& a, const Multivector& b) {
  return dual(wedge(dual(a), dual(b)));
}

double inner_invariant(const Multivector& a, const Multivector& b) {
  double s = 0.0;
  for (int i : kNonE0Blades) s += a.c[i] * b.c[i];
  return s;
}

}  // namespace gagrasp
