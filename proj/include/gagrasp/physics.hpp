#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "gagrasp/hand.hpp"

namespace gagrasp {

// Rigid object (point-mass cloud) against a static set of hand spheres,
// with spring-damper contact and a Coulomb-style tangential cap.
struct SimScene {
  std::vector<Vec3> obj_points;  // body frame, about the initial pose
  double mass = 0.1;             // kg
  Mat3 R0 = mat_identity();
  Vec3 p0{0, 0, 0};
  std::vector<Sphere> hand_spheres;
  double k_n = 1000.0;  // N/m
  double c_n = 10.0;    // N s/m
  double c_t = 5.0;     // N s/m
  double mu = 1.0;      // tangential cap: |F_t| <= mu |F_n|
  double dt = 0.01;     // s
  int T_sim = 60;
  bool gravity = false;
};

struct RolloutResult {
  Vec3 v_end{0, 0, 0};
  Vec3 w_end{0, 0, 0};
  Vec3 p_end{0, 0, 0};
  double max_displacement = 0.0;
  std::vector<std::array<double, 7>> trace;  // optional (t, p, v) rows
};

// Semi-implicit Euler rollout; accel is a constant external acceleration
// (m/s^2) applied throughout. Throws on detected energy blow-up.
RolloutResult rollout(const SimScene& scene, const Vec3& v0,
                      const Vec3& w0 = {0, 0, 0}, const Vec3& accel = {0, 0, 0},
                      bool keep_trace = false);

// Mean of final squared velocity norms over the velocity set.
double stability_loss(const SimScene& scene, const std::vector<Vec3>& v0_set);

// Default velocity set {+-x, +-y, +-z} * 0.1 m/s.
std::vector<Vec3> default_velocity_set(double speed = 0.1);

double range_loss(const std::vector<double>& q, const std::vector<double>& q_low,
                  const std::vector<double>& q_up);
double limit_loss(const std::vector<double>& q, const std::vector<double>& q_low,
                  const std::vector<double>& q_up);

// Scene-independent context for the physics loss.
struct PhysContext {
  HandSpec hand;
  std::vector<Vec3> obj_points;
  double mass = 0.1;
  double k_n = 1000.0, c_n = 10.0, c_t = 5.0, mu = 1.0;
  double dt = 0.01;
  int T_sim = 60;
  double alpha1 = 0.01, alpha2 = 10.0;
  double v0_speed = 0.1;
  double fd_step = 1e-4;
};

struct PhysLossResult {
  double total = 0.0;
  double stability = 0.0, range = 0.0, limit = 0.0;
  std::vector<double> grad;  // d total / d [r, p, q]
};

// L_phys = L_stability + alpha1 L_range + alpha2 L_limit, with analytic
// gradients for the joint-limit terms and central finite differences
// (over all 9+k grasp coordinates) for the stability term.
PhysLossResult phys_loss(const Grasp& g, const PhysContext& ctx, bool with_grad = true);
double phys_loss_value(const Grasp& g, const PhysContext& ctx);

struct SuccessReport {
  bool pass = false;
  std::array<double, 6> displacement{};  // per direction, meters
};

// Six rollouts with a constant 0.5 m/s^2 acceleration along +-x, +-y, +-z
// for 60 steps; pass iff max displacement < 2 cm in each.
SuccessReport success_eval(const Grasp& g, const std::vector<Vec3>& obj_points,
                           const HandSpec& hand, const PhysContext& ctx);

// Mean over joints of the population standard deviation across the set.
// Throws on fewer than two grasps.
double diversity_score(const std::vector<Grasp>& grasps);

}  // namespace gagrasp
