#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "gagrasp/hand.hpp"
#include "gagrasp/rotation.hpp"

using namespace gagrasp;

TEST_CASE("toy hand structure and limits") {
  HandSpec h = toy_hand(2, 2);
  CHECK(h.fingers.size() == 2);
  CHECK(h.joint_count() == 4);
  for (double lo : h.joint_lower()) CHECK(lo == 0.0);
  for (double hi : h.joint_upper()) CHECK(hi == doctest::Approx(M_PI / 2).epsilon(1e-14));
  CHECK(h.sphere_count() > 0);
  CHECK_THROWS(toy_hand(1, 2));
  CHECK_THROWS(toy_hand(2, 0));
}

TEST_CASE("forward kinematics at zero pose matches the rest shape") {
  HandSpec h = toy_hand(3, 2);
  Grasp g;
  g.q.assign(static_cast<size_t>(h.joint_count()), 0.0);
  std::vector<Sphere> world = forward_kinematics(h, g);
  CHECK(world.size() == static_cast<size_t>(h.sphere_count()));
  // palm spheres pass through unchanged at the identity pose
  for (size_t i = 0; i < h.palm_spheres.size(); ++i) {
    for (int k = 0; k < 3; ++k)
      CHECK(world[i].center[k] == doctest::Approx(h.palm_spheres[i].center[k]).epsilon(1e-14));
    CHECK(world[i].radius == h.palm_spheres[i].radius);
  }
}

TEST_CASE("forward kinematics covaries with rigid base transforms") {
  std::mt19937_64 rng(61);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud(0.0, M_PI / 2);
  HandSpec h = toy_hand(2, 2);
  for (int trial = 0; trial < 20; ++trial) {
    Grasp g;
    g.q = {ud(rng), ud(rng), ud(rng), ud(rng)};
    std::vector<Sphere> base = forward_kinematics(h, g);

    Vec3 axis{nd(rng), nd(rng), nd(rng)};
    double n = norm(axis);
    axis = {axis[0] / n, axis[1] / n, axis[2] / n};
    Mat3 R = axis_angle_to_matrix(axis, nd(rng));
    Vec3 t{0.2 * nd(rng), 0.2 * nd(rng), 0.2 * nd(rng)};

    Grasp gt = g;
    gt.r = rot6d_encode(R);
    gt.p = t;
    std::vector<Sphere> moved = forward_kinematics(h, gt);
    REQUIRE(moved.size() == base.size());
    for (size_t i = 0; i < base.size(); ++i) {
      Vec3 want = mat_apply(R, base[i].center);
      for (int k = 0; k < 3; ++k) want[k] += t[k];
      for (int k = 0; k < 3; ++k) CHECK(std::abs(moved[i].center[k] - want[k]) < 1e-9);
      CHECK(moved[i].radius == base[i].radius);
    }
  }
}

TEST_CASE("single-joint finger tip follows plain circular kinematics") {
  // one joint per finger: the distal link rotates rigidly about the joint
  // axis, so a sphere at distance L from the joint origin traces a circle
  HandSpec h = toy_hand(2, 1);
  Grasp g0, g1;
  g0.q = {0.0, 0.0};
  g1.q = {0.7, 0.0};
  std::vector<Sphere> a = forward_kinematics(h, g0);
  std::vector<Sphere> b = forward_kinematics(h, g1);
  const JointSpec& j = h.fingers[0].joints[0];
  size_t tip = h.palm_spheres.size() + h.fingers[0].link_spheres[0].size() - 1;
  Vec3 r0{a[tip].center[0] - j.origin[0], a[tip].center[1] - j.origin[1],
          a[tip].center[2] - j.origin[2]};
  Vec3 r1{b[tip].center[0] - j.origin[0], b[tip].center[1] - j.origin[1],
          b[tip].center[2] - j.origin[2]};
  Vec3 want = mat_apply(axis_angle_to_matrix(j.axis, 0.7), r0);
  for (int k = 0; k < 3; ++k) CHECK(std::abs(r1[k] - want[k]) < 1e-12);
}

TEST_CASE("forward kinematics rejects a joint-count mismatch") {
  HandSpec h = toy_hand(2, 2);
  Grasp g;
  g.q = {0.0, 0.0};
  CHECK_THROWS(forward_kinematics(h, g));
}

TEST_CASE("hand spec text round trip") {
  HandSpec h = toy_hand(3, 2);
  HandSpec back = hand_spec_from_text(hand_spec_to_text(h));
  REQUIRE(back.fingers.size() == h.fingers.size());
  REQUIRE(back.palm_spheres.size() == h.palm_spheres.size());
  for (size_t i = 0; i < h.palm_spheres.size(); ++i) {
    for (int k = 0; k < 3; ++k)
      CHECK(back.palm_spheres[i].center[k] == h.palm_spheres[i].center[k]);
    CHECK(back.palm_spheres[i].radius == h.palm_spheres[i].radius);
  }
  for (size_t f = 0; f < h.fingers.size(); ++f) {
    REQUIRE(back.fingers[f].joints.size() == h.fingers[f].joints.size());
    for (size_t j = 0; j < h.fingers[f].joints.size(); ++j) {
      const JointSpec& x = h.fingers[f].joints[j];
      const JointSpec& y = back.fingers[f].joints[j];
      for (int k = 0; k < 3; ++k) {
        CHECK(y.axis[k] == x.axis[k]);
        CHECK(y.origin[k] == x.origin[k]);
      }
      CHECK(y.q_low == x.q_low);
      CHECK(y.q_up == x.q_up);
    }
  }
}

TEST_CASE("grasp flattening round trip") {
  Grasp g;
  g.r = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  g.p = {-1, 2, -3};
  g.q = {0.5, 0.6, 0.7, 0.8};
  std::vector<double> flat = g.flat();
  REQUIRE(flat.size() == 13);
  Grasp back = Grasp::from_flat(flat, 4);
  CHECK(back.r == g.r);
  CHECK(back.p == g.p);
  CHECK(back.q == g.q);
  CHECK_THROWS(Grasp::from_flat(flat, 5));
}
