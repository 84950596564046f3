#pragma once

#include <string>
#include <vector>

#include "gagrasp/rotation.hpp"

namespace gagrasp {

// Grasp tuple: 6D rotation, base translation (m), joint angles (rad).
struct Grasp {
  std::array<double, 6> r{1, 0, 0, 0, 1, 0};
  Vec3 p{0, 0, 0};
  std::vector<double> q;

  std::vector<double> flat() const;                 // [r, p, q], 9+k
  static Grasp from_flat(const std::vector<double>& v, int joint_dim);
};

struct Sphere {
  Vec3 center;
  double radius;
};

struct JointSpec {
  Vec3 axis;       // unit, in parent frame
  Vec3 origin;     // offset from parent frame (m)
  double q_low, q_up;
};

struct FingerSpec {
  std::vector<JointSpec> joints;
  // link_spheres[j]: spheres of the link distal to joint j, in that link's frame
  std::vector<std::vector<Sphere>> link_spheres;
};

struct HandSpec {
  std::vector<Sphere> palm_spheres;  // in the base (palm-center) frame
  std::vector<FingerSpec> fingers;

  int joint_count() const;
  int sphere_count() const;
  std::vector<double> joint_lower() const;
  std::vector<double> joint_upper() const;
};

// Deterministic planar-palm toy hand: fingers evenly spaced on a 4 cm palm,
// 2 cm phalanges, 6 mm sphere radii, joint limits [0, pi/2].
// Throws for k_fingers < 2 or joints_per_finger < 1.
HandSpec toy_hand(int k_fingers, int joints_per_finger);

// World-frame collision spheres for the hand posed by g.
// Throws if g.q length does not match the spec.
std::vector<Sphere> forward_kinematics(const HandSpec& spec, const Grasp& g);

std::string hand_spec_to_text(const HandSpec& spec);
HandSpec hand_spec_from_text(const std::string& text);

}  // namespace gagrasp
