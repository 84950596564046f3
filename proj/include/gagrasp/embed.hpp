#pragma once

#include "gagrasp/multivector.hpp"
#include "gagrasp/rotation.hpp"
#include "gagrasp/versor.hpp"

namespace gagrasp {

// Coordinate signs and blades of the point/direction trivector embedding:
// coordinate i sits on blade kDirBlade[i] with sign kDirSign[i].
inline constexpr int kDirBlade[3] = {kE023, kE013, kE012};
inline constexpr double kDirSign[3] = {-1.0, 1.0, -1.0};

// Point (x,y,z): trivector with unit homogeneous e123 coefficient.
Multivector embed_point(const Vec3& p);
// Direction: ideal trivector (zero e123 coefficient).
Multivector embed_direction(const Vec3& d);
// Plane n.x + delta = 0 as a vector.
Multivector embed_plane(const Vec3& n, double delta);

// Inverse embeddings. extract_point throws on an ideal point
// (|e123 coefficient| <= 1e-12).
Vec3 extract_point(const Multivector& m);
Vec3 extract_direction(const Multivector& m);

// Motor acting as x -> R x + p, with R decoded from the 6D representation.
Versor motor_from_pose(const std::array<double, 6>& r6d, const Vec3& p);
Versor motor_from_matrix(const Mat3& R, const Vec3& p);

}  // namespace gagrasp
